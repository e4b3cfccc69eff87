//! Quantization policies, action mapping and budget enforcement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hw::{estimate_cost, model_size, HardwareSpec};
use crate::model::{NetworkModel, StepTarget};

pub const DEFAULT_MIN_BITS: u8 = 2;
pub const DEFAULT_MAX_BITS: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerBits {
    pub w_bits: u8,
    pub a_bits: u8,
}

/// Per-layer `(w_bits, a_bits)` assignment.
///
/// Steps are numbered the way the agent visits them: step `2k` is layer
/// `k`'s weights, step `2k + 1` its activations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantPolicy {
    pub layers: Vec<LayerBits>,
}

impl QuantPolicy {
    pub fn uniform(n_layers: usize, w_bits: u8, a_bits: u8) -> Self {
        QuantPolicy { layers: vec![LayerBits { w_bits, a_bits }; n_layers] }
    }

    /// Builds a policy from `2N` step bitwidths in visiting order.
    pub fn from_steps(steps: &[u8]) -> Result<Self> {
        if !steps.len().is_multiple_of(2) {
            return Err(Error::InvalidPolicy(format!("odd step count {}", steps.len())));
        }
        Ok(QuantPolicy { layers: steps.chunks_exact(2).map(|p| LayerBits { w_bits: p[0], a_bits: p[1] }).collect() })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn num_steps(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn step(&self, step: usize) -> u8 {
        let b = &self.layers[step / 2];
        if step.is_multiple_of(2) {
            b.w_bits
        } else {
            b.a_bits
        }
    }

    pub fn set_step(&mut self, step: usize, bits: u8) {
        let b = &mut self.layers[step / 2];
        if step.is_multiple_of(2) {
            b.w_bits = bits;
        } else {
            b.a_bits = bits;
        }
    }

    pub fn steps(&self) -> Vec<u8> {
        (0..self.num_steps()).map(|s| self.step(s)).collect()
    }

    /// Checks the layer count and that every unpinned entry lies in `[min, max]`.
    pub fn validate(&self, model: &NetworkModel, range: BitRange, pinned: &[bool]) -> Result<()> {
        if self.len() != model.len() {
            return Err(Error::InvalidPolicy(format!("policy has {} layers, model has {}", self.len(), model.len())));
        }
        for (i, b) in self.layers.iter().enumerate() {
            if pinned.get(i).copied().unwrap_or(false) {
                continue;
            }
            for bits in [b.w_bits, b.a_bits] {
                if !range.contains(bits) {
                    return Err(Error::InvalidPolicy(format!(
                        "layer {i}: {bits} bits outside [{}, {}]",
                        range.min, range.max
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::InvalidPolicy(e.to_string()))
    }
}

pub fn step_target(step: usize) -> StepTarget {
    if step.is_multiple_of(2) {
        StepTarget::Weight
    } else {
        StepTarget::Activation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitRange {
    pub min: u8,
    pub max: u8,
}

impl Default for BitRange {
    fn default() -> Self {
        BitRange { min: DEFAULT_MIN_BITS, max: DEFAULT_MAX_BITS }
    }
}

impl BitRange {
    pub fn new(min: u8, max: u8) -> Result<Self> {
        if min == 0 || min > max || max > 32 {
            return Err(Error::Config(format!("invalid bit range [{min}, {max}]")));
        }
        Ok(BitRange { min, max })
    }

    pub fn contains(&self, bits: u8) -> bool {
        (self.min..=self.max).contains(&bits)
    }
}

/// Maps a continuous action to a bitwidth:
/// `round(b_min - 0.5 + a * (b_max - b_min + 1))`, half away from zero,
/// clamped to `[b_min, b_max]`.
pub fn action_to_bits(a: f64, range: BitRange) -> Result<u8> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::ActionOutOfRange(a));
    }
    let (lo, hi) = (range.min as f64, range.max as f64);
    let raw = (lo - 0.5 + a * (hi - lo + 1.0)).round();
    Ok(raw.clamp(lo, hi) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    LatencyMs,
    EnergyMj,
    SizeBytes,
}

impl BudgetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BudgetKind::LatencyMs => "latency_ms",
            BudgetKind::EnergyMj => "energy_mj",
            BudgetKind::SizeBytes => "size_bytes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub kind: BudgetKind,
    pub limit: f64,
}

impl Budget {
    pub fn new(kind: BudgetKind, limit: f64) -> Result<Self> {
        let b = Budget { kind, limit };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.limit.is_finite() && self.limit > 0.0) {
            return Err(Error::Config(format!("budget limit must be positive, got {}", self.limit)));
        }
        Ok(())
    }

    /// The resource this budget constrains, evaluated with the cost model.
    pub fn cost(&self, model: &NetworkModel, policy: &QuantPolicy, hw: &HardwareSpec) -> Result<f64> {
        Ok(match self.kind {
            BudgetKind::LatencyMs => estimate_cost(model, policy, hw)?.latency_ms,
            BudgetKind::EnergyMj => estimate_cost(model, policy, hw)?.energy_mj,
            BudgetKind::SizeBytes => model_size(model, policy, false)? as f64,
        })
    }

    pub fn satisfied_by(&self, cost: f64) -> bool {
        cost <= self.limit
    }
}

/// First and last layer pinned.
pub fn default_pins(n_layers: usize) -> Vec<bool> {
    let mut pins = vec![false; n_layers];
    if let Some(first) = pins.first_mut() {
        *first = true;
    }
    if let Some(last) = pins.last_mut() {
        *last = true;
    }
    pins
}

/// Every unpinned entry set to `min_bits`, pinned entries untouched.
pub fn clamped_minimum(policy: &QuantPolicy, pinned: &[bool], min_bits: u8) -> QuantPolicy {
    let mut out = policy.clone();
    for (i, b) in out.layers.iter_mut().enumerate() {
        if !pinned.get(i).copied().unwrap_or(false) {
            b.w_bits = b.w_bits.min(min_bits);
            b.a_bits = b.a_bits.min(min_bits);
        }
    }
    out
}

/// Lowers bitwidths until the budget holds.
///
/// Sweeps run from the last unpinned step to the first, taking one bit off
/// each entry still above `min_bits` and re-checking the budget after every
/// decrement. The first policy that fits is returned.
pub fn enforce_budget(
    model: &NetworkModel,
    policy: &QuantPolicy,
    hw: &HardwareSpec,
    budget: &Budget,
    pinned: &[bool],
    min_bits: u8,
) -> Result<QuantPolicy> {
    budget.validate()?;
    if pinned.len() != policy.len() {
        return Err(Error::InvalidPolicy(format!(
            "pin mask has {} entries, policy has {} layers",
            pinned.len(),
            policy.len()
        )));
    }
    let mut current = policy.clone();
    let mut cost = budget.cost(model, &current, hw)?;
    if budget.satisfied_by(cost) {
        return Ok(current);
    }
    loop {
        let mut lowered = false;
        for step in (0..current.num_steps()).rev() {
            if pinned[step / 2] {
                continue;
            }
            let bits = current.step(step);
            if bits <= min_bits {
                continue;
            }
            current.set_step(step, bits - 1);
            lowered = true;
            cost = budget.cost(model, &current, hw)?;
            if budget.satisfied_by(cost) {
                return Ok(current);
            }
        }
        if !lowered {
            return Err(Error::Infeasible { kind: budget.kind.as_str(), best: cost, limit: budget.limit });
        }
    }
}
