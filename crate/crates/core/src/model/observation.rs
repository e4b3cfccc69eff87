use super::layer::LayerKind;
use super::topology::NetworkModel;
use crate::error::{Error, Result};

pub const OBS_DIM: usize = 10;

/// Slot holding the previous step's action. It is written by the search
/// loop at run time and never normalized.
pub const PREV_ACTION_SLOT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepTarget {
    Weight,
    Activation,
}

/// One agent step: `(k, c_in, c_out, kernel, stride, feat, n_params, i_dw, i_w/a, a_{k-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub layer: usize,
    pub target: StepTarget,
    pub values: [f64; OBS_DIM],
    /// Unnormalized features, kept for audit output.
    pub raw: [f64; OBS_DIM],
}

impl Observation {
    pub fn prev_action(&self) -> f64 {
        self.values[PREV_ACTION_SLOT]
    }

    pub fn with_prev_action(mut self, action: f64) -> Self {
        self.values[PREV_ACTION_SLOT] = action;
        self.raw[PREV_ACTION_SLOT] = action;
        self
    }
}

/// Min-max normalizes every feature column except the previous-action slot.
/// Columns with zero range map to 0.
pub fn normalize_features(rows: &[[f64; OBS_DIM]]) -> Vec<[f64; OBS_DIM]> {
    let mut out = rows.to_vec();
    for dim in 0..PREV_ACTION_SLOT {
        let (lo, hi) =
            rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[dim]), hi.max(r[dim])));
        let range = hi - lo;
        for row in out.iter_mut() {
            row[dim] = if range > 0.0 { (row[dim] - lo) / range } else { 0.0 };
        }
    }
    out
}

/// Builds the `2N` observation templates: a weight step then an activation
/// step for every layer, with the previous-action slot left at 0.
pub fn build_observations(model: &NetworkModel) -> Result<Vec<Observation>> {
    if model.is_empty() {
        return Err(Error::InvalidModel("cannot build observations for an empty model".into()));
    }
    let mut raw = Vec::with_capacity(2 * model.len());
    let mut keys = Vec::with_capacity(2 * model.len());
    for layer in &model.layers {
        for target in [StepTarget::Weight, StepTarget::Activation] {
            let i_wa = match target {
                StepTarget::Weight => 0.0,
                StepTarget::Activation => 1.0,
            };
            let row = match layer.kind {
                LayerKind::Conv => [
                    layer.index as f64,
                    layer.c_in as f64,
                    layer.c_out as f64,
                    layer.kernel as f64,
                    layer.stride as f64,
                    layer.feat as f64,
                    layer.n_params as f64,
                    if layer.is_depthwise { 1.0 } else { 0.0 },
                    i_wa,
                    0.0,
                ],
                LayerKind::Fc => [
                    layer.index as f64,
                    layer.c_in as f64,
                    layer.c_out as f64,
                    1.0,
                    0.0,
                    layer.feat as f64,
                    layer.n_params as f64,
                    0.0,
                    i_wa,
                    0.0,
                ],
            };
            raw.push(row);
            keys.push((layer.index, target));
        }
    }
    let normalized = normalize_features(&raw);
    Ok(keys
        .into_iter()
        .zip(raw.into_iter().zip(normalized))
        .map(|((layer, target), (raw, values))| Observation { layer, target, values, raw })
        .collect())
}
