use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layer::{LayerDescriptor, LayerKind};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: &[&str] = &["mobilenet_v1", "mobilenet_v2", "resnet50", "toy(N)"];

const MOBILENET_V1: &str = include_str!("../../data/topologies/mobilenet_v1.json");
const MOBILENET_V2: &str = include_str!("../../data/topologies/mobilenet_v2.json");
const RESNET50: &str = include_str!("../../data/topologies/resnet50.json");

const TOY_MAX_LAYERS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub name: String,
    pub layers: Vec<LayerDescriptor>,
    /// Optional per-layer weight tensor files (`QTNS`), parallel to `layers`.
    pub weight_refs: Vec<Option<PathBuf>>,
}

impl NetworkModel {
    pub fn new(name: impl Into<String>, layers: Vec<LayerDescriptor>) -> Result<Self> {
        let weight_refs = vec![None; layers.len()];
        let model = NetworkModel { name: name.into(), layers, weight_refs };
        model.validate()?;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Total parameter count including per-channel affine parameters.
    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|l| l.n_params + l.affine_params).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight_refs.len() != self.layers.len() {
            return Err(Error::InvalidModel("weight reference count differs from layer count".into()));
        }
        let mut seen_fc = false;
        for (pos, layer) in self.layers.iter().enumerate() {
            if layer.index != pos {
                return Err(Error::InvalidLayer {
                    index: pos,
                    reason: format!("index {} is not consecutive", layer.index),
                });
            }
            layer.validate()?;
            match layer.kind {
                LayerKind::Fc => seen_fc = true,
                LayerKind::Conv if seen_fc => {
                    return Err(Error::InvalidLayer {
                        index: pos,
                        reason: "conv layer follows a fully-connected layer".into(),
                    })
                }
                LayerKind::Conv if pos > 0 => {
                    // The input must come from an earlier feature map, possibly
                    // after an integer pooling stage.
                    let fed = self.layers[..pos].iter().any(|prev| prev.out_feat() % layer.feat == 0);
                    if !fed {
                        return Err(Error::InvalidLayer {
                            index: pos,
                            reason: format!("feature size {} is not produced by any earlier layer", layer.feat),
                        });
                    }
                }
                LayerKind::Conv => {}
            }
        }
        Ok(())
    }

    /// Serializes to the topology JSON schema.
    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            name: self.name.clone(),
            layers: self
                .layers
                .iter()
                .zip(&self.weight_refs)
                .map(|(l, w)| LayerEntry {
                    kind: l.kind,
                    c_in: l.c_in,
                    c_out: l.c_out,
                    kernel: l.kernel,
                    stride: l.stride,
                    feat: l.feat,
                    depthwise: l.is_depthwise,
                    affine: l.affine_params > 0,
                    weights: w.as_ref().map(|p| p.display().to_string()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    name: String,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    kind: LayerKind,
    c_in: u64,
    c_out: u64,
    kernel: u64,
    stride: u64,
    feat: u64,
    #[serde(default)]
    depthwise: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    affine: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<String>,
}

/// Parses and validates a topology JSON document.
pub fn parse_topology(json: &str) -> Result<NetworkModel> {
    let file: TopologyFile =
        serde_json::from_str(json).map_err(|e| Error::InvalidModel(format!("topology JSON: {e}")))?;
    if file.layers.is_empty() {
        return Err(Error::InvalidModel("topology has no layers".into()));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    let mut refs = Vec::with_capacity(file.layers.len());
    for (index, e) in file.layers.into_iter().enumerate() {
        let layer = match e.kind {
            LayerKind::Conv => LayerDescriptor::conv(index, e.c_in, e.c_out, e.kernel, e.stride, e.feat, e.depthwise)?,
            LayerKind::Fc => {
                let l = LayerDescriptor {
                    index,
                    kind: LayerKind::Fc,
                    c_in: e.c_in,
                    c_out: e.c_out,
                    kernel: e.kernel,
                    stride: e.stride,
                    feat: e.feat,
                    n_params: e.c_in.saturating_mul(e.c_out),
                    is_depthwise: e.depthwise,
                    affine_params: 0,
                };
                l.validate()?;
                l
            }
        };
        layers.push(if e.affine { layer.with_affine() } else { layer });
        refs.push(e.weights.map(PathBuf::from));
    }
    let model = NetworkModel { name: file.name, layers, weight_refs: refs };
    model.validate()?;
    Ok(model)
}

/// Loads a topology JSON file; relative weight paths resolve against the file's directory.
pub fn load_topology(path: &Path) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut model = parse_topology(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for r in model.weight_refs.iter_mut().flatten() {
        if r.is_relative() {
            *r = base.join(&*r);
        }
    }
    Ok(model)
}

pub fn builtin_topology(name: &str) -> Result<NetworkModel> {
    match name {
        "mobilenet_v1" => parse_topology(MOBILENET_V1),
        "mobilenet_v2" => parse_topology(MOBILENET_V2),
        "resnet50" => parse_topology(RESNET50),
        _ => match parse_toy(name) {
            Some(n) if (1..=TOY_MAX_LAYERS).contains(&n) => toy(n),
            _ => Err(Error::UnknownTopology { name: name.into() }),
        },
    }
}

fn parse_toy(name: &str) -> Option<usize> {
    name.strip_prefix("toy(")?.strip_suffix(')')?.trim().parse().ok()
}

/// Alternating depthwise / pointwise layers. The first depthwise layer
/// downsamples 64 -> 16 with stride 4, so its traffic is dominated by the
/// input activations; later layers work on 16x16 maps with 16 channels.
fn toy(n: usize) -> Result<NetworkModel> {
    let mut layers = Vec::with_capacity(n);
    let mut channels = 8;
    let mut feat = 64;
    for index in 0..n {
        let layer = if index % 2 == 0 {
            let stride = if index == 0 { 4 } else { 1 };
            let l = LayerDescriptor::conv(index, channels, channels, 3, stride, feat, true)?;
            feat = l.out_feat();
            l
        } else {
            let l = LayerDescriptor::conv(index, channels, 16, 1, 1, feat, false)?;
            channels = 16;
            l
        };
        layers.push(layer);
    }
    NetworkModel::new(format!("toy({n})"), layers)
}
