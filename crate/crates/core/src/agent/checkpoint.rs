use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ddpg::{AgentConfig, DdpgAgent};
use super::nn::{Adam, MlpNet};
use crate::error::{Error, Result};
use crate::quant::{read_tensor, write_tensor, TensorF32};

pub const CHECKPOINT_FORMAT: &str = "qhaq-ddpg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

const GROUPS: [&str; 8] = [
    "actor",
    "critic",
    "actor_target",
    "critic_target",
    "actor_adam_m",
    "actor_adam_v",
    "critic_adam_m",
    "critic_adam_v",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub file: String,
    pub dims: Vec<usize>,
}

/// JSON side of a checkpoint directory. Every tensor lives next to it as a
/// QTNS file. Parameters are stored at f32 precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub config: AgentConfig,
    pub episode: u64,
    pub sigma: f64,
    /// Decimal `u128` position of the agent's random stream.
    pub rng_word_pos: String,
    pub actor_adam_t: u64,
    pub critic_adam_t: u64,
    pub tensors: Vec<TensorEntry>,
}

fn safe_file_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

fn expected_entries(config: &AgentConfig) -> Vec<TensorEntry> {
    let shape = MlpNet::new(
        crate::model::OBS_DIM,
        config.hidden1,
        config.hidden2,
        false,
        &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
    );
    let dims = shape.param_dims();
    let mut out = Vec::with_capacity(GROUPS.len() * dims.len());
    for group in GROUPS {
        for (param, d) in MlpNet::PARAM_NAMES.iter().zip(dims.iter()) {
            let name = format!("{group}.{param}");
            out.push(TensorEntry { file: format!("{name}.qtns"), name, dims: d.clone() });
        }
    }
    out
}

impl CheckpointManifest {
    pub fn parse(json: &str) -> Result<Self> {
        let m: CheckpointManifest =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("checkpoint manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("checkpoint manifest: {msg}")));
        if self.format != CHECKPOINT_FORMAT {
            return bad(format!("unknown format `{}`", self.format));
        }
        if self.version != CHECKPOINT_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        self.config.validate()?;
        if self.rng_word_pos.parse::<u128>().is_err() {
            return bad("rng_word_pos is not an unsigned integer".into());
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return bad(format!("sigma {} must be positive", self.sigma));
        }
        let mut files = HashSet::new();
        for t in &self.tensors {
            if !safe_file_name(&t.file) {
                return bad(format!("tensor file name `{}` is not a plain file name", t.file));
            }
            if !files.insert(t.file.as_str()) {
                return bad(format!("tensor file `{}` listed twice", t.file));
            }
        }
        let expected = expected_entries(&self.config);
        if self.tensors.len() != expected.len() {
            return bad(format!("expected {} tensors, found {}", expected.len(), self.tensors.len()));
        }
        for want in &expected {
            match self.tensors.iter().find(|t| t.name == want.name) {
                None => return bad(format!("missing tensor `{}`", want.name)),
                Some(t) if t.dims != want.dims => {
                    return bad(format!("tensor `{}` has dims {:?}, expected {:?}", t.name, t.dims, want.dims))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

fn nets_of(agent: &DdpgAgent) -> [&MlpNet; 8] {
    let (actor_t, critic_t) = agent.targets();
    let (actor_opt, critic_opt) = agent.optimizers();
    [agent.actor(), agent.critic(), actor_t, critic_t, &actor_opt.m, &actor_opt.v, &critic_opt.m, &critic_opt.v]
}

impl DdpgAgent {
    /// Writes the manifest and one QTNS file per tensor into `dir`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<CheckpointManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let entries = expected_entries(self.config());
        let mut flat: Vec<&[f64]> = Vec::with_capacity(entries.len());
        for net in nets_of(self) {
            flat.extend(net.params());
        }
        for (entry, values) in entries.iter().zip(flat) {
            let data = values.iter().map(|&v| v as f32).collect();
            let tensor = TensorF32::new(entry.dims.clone(), data)?;
            write_tensor(&dir.join(&entry.file), &tensor)?;
        }
        let (actor_opt, critic_opt) = self.optimizers();
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config().clone(),
            episode: self.episode(),
            sigma: self.sigma(),
            rng_word_pos: self.rng_word_pos().to_string(),
            actor_adam_t: actor_opt.t,
            critic_adam_t: critic_opt.t,
            tensors: entries,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn load_checkpoint(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = CheckpointManifest::parse(&text)?;
        let cfg = &manifest.config;
        let template = |squash| {
            MlpNet::new(
                crate::model::OBS_DIM,
                cfg.hidden1,
                cfg.hidden2,
                squash,
                &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
            )
        };
        let squash = [true, false, true, false, true, true, false, false];
        let mut nets: Vec<MlpNet> = squash.iter().map(|&s| template(s)).collect();
        for (g, group) in GROUPS.iter().enumerate() {
            for (p, param) in MlpNet::PARAM_NAMES.iter().enumerate() {
                let name = format!("{group}.{param}");
                let entry = manifest.tensors.iter().find(|t| t.name == name).expect("validated manifest");
                let file = dir.join(&entry.file);
                let tensor = read_tensor(&file)?;
                if tensor.dims() != entry.dims.as_slice() {
                    return Err(Error::TensorFormat(format!(
                        "{}: dims {:?} disagree with manifest {:?}",
                        file.display(),
                        tensor.dims(),
                        entry.dims
                    )));
                }
                if let Some(i) = tensor.first_non_finite() {
                    return Err(Error::NonFinite { index: i });
                }
                let dst = &mut nets[g].params_mut()[p];
                for (d, &s) in dst.iter_mut().zip(tensor.data()) {
                    *d = f64::from(s);
                }
            }
        }
        let mut it = nets.into_iter();
        let mut next = || it.next().expect("eight nets");
        let (actor, critic, actor_t, critic_t) = (next(), next(), next(), next());
        let (am, av, cm, cv) = (next(), next(), next(), next());
        let mut actor_opt = Adam::new(&actor, cfg.lr_actor, cfg.beta1, cfg.beta2);
        actor_opt.t = manifest.actor_adam_t;
        actor_opt.m = am;
        actor_opt.v = av;
        let mut critic_opt = Adam::new(&critic, cfg.lr_critic, cfg.beta1, cfg.beta2);
        critic_opt.t = manifest.critic_adam_t;
        critic_opt.m = cm;
        critic_opt.v = cv;
        let pos = manifest.rng_word_pos.parse::<u128>().expect("validated manifest");
        DdpgAgent::restore(
            manifest.config.clone(),
            [actor, critic, actor_t, critic_t],
            [actor_opt, critic_opt],
            manifest.episode,
            pos,
        )
    }
}
