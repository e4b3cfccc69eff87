use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::spec::{Arch, HardwareSpec};
use crate::error::{Error, Result};
use crate::model::{LayerDescriptor, LayerKind, NetworkModel};
use crate::policy::QuantPolicy;

/// Bitwidth used when writing a layer's outputs back (pre-requantization).
const OUTPUT_BITS: u64 = 8;
const MAX_COST_BITS: u8 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Compute,
    Memory,
}

impl Bound {
    pub fn as_str(self) -> &'static str {
        match self {
            Bound::Compute => "compute",
            Bound::Memory => "memory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer: usize,
    pub w_bits: u8,
    pub a_bits: u8,
    pub compute_cycles: u64,
    pub memory_cycles: f64,
    pub bound: Bound,
    pub dram_bytes: u64,
    pub latency_ms: f64,
    pub energy_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub latency_ms: f64,
    pub energy_mj: f64,
    pub model_size_bytes: u64,
    pub layers: Vec<LayerCost>,
}

impl CostReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cost report serializes")
    }

    /// One row per layer: `layer,w_bits,a_bits,compute_cycles,memory_cycles,bound,bytes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,w_bits,a_bits,compute_cycles,memory_cycles,bound,bytes\n");
        for l in &self.layers {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                l.layer,
                l.w_bits,
                l.a_bits,
                l.compute_cycles,
                l.memory_cycles,
                l.bound.as_str(),
                l.dram_bytes
            )
            .unwrap();
        }
        out
    }
}

fn check_bits(w_bits: u8, a_bits: u8) -> Result<()> {
    for b in [w_bits, a_bits] {
        if !(1..=MAX_COST_BITS).contains(&b) {
            return Err(Error::InvalidPolicy(format!("bitwidth {b} outside [1, {MAX_COST_BITS}]")));
        }
    }
    Ok(())
}

fn check_policy(model: &NetworkModel, policy: &QuantPolicy) -> Result<()> {
    if policy.len() != model.len() {
        return Err(Error::InvalidPolicy(format!("policy has {} layers, model has {}", policy.len(), model.len())));
    }
    policy.layers.iter().try_for_each(|b| check_bits(b.w_bits, b.a_bits))
}

/// DRAM traffic of one layer: weights at `w_bits`, inputs at `a_bits`,
/// outputs at 8 bits, each rounded up to whole bytes per row. Weights are
/// fetched once per batch.
pub fn dram_bytes(layer: &LayerDescriptor, w_bits: u8, a_bits: u8, batch: u64) -> u64 {
    let row_bytes = |elems: u64, bits: u64| (elems * bits).div_ceil(8);
    let (w_bits, a_bits) = (w_bits as u64, a_bits as u64);
    let weights = layer.c_out * row_bytes(layer.weight_row_len(), w_bits);
    let (in_rows, out_rows) = match layer.kind {
        LayerKind::Conv => (layer.feat * layer.feat, layer.out_feat() * layer.out_feat()),
        LayerKind::Fc => (1, 1),
    };
    let inputs = batch * in_rows * row_bytes(layer.c_in, a_bits);
    let outputs = batch * out_rows * row_bytes(layer.c_out, OUTPUT_BITS);
    weights + inputs + outputs
}

fn compute_cycles(layer: &LayerDescriptor, w_bits: u8, a_bits: u8, hw: &HardwareSpec) -> u64 {
    let out_pixels = match layer.kind {
        LayerKind::Conv => layer.out_feat() * layer.out_feat(),
        LayerKind::Fc => 1,
    };
    let tiles = layer.c_out.div_ceil(hw.pe_rows)
        * (out_pixels * hw.batch).div_ceil(hw.pe_cols)
        * layer.weight_row_len().div_ceil(hw.lanes_per_pe);
    let (w, a) = (w_bits as u64, a_bits as u64);
    let passes = match hw.arch {
        Arch::TemporalBitserial => w * a,
        Arch::SpatialFused => w.div_ceil(2) * a.div_ceil(2),
    };
    tiles * passes
}

fn layer_cost(layer: &LayerDescriptor, w_bits: u8, a_bits: u8, hw: &HardwareSpec) -> LayerCost {
    let compute = compute_cycles(layer, w_bits, a_bits, hw);
    let bytes = dram_bytes(layer, w_bits, a_bits, hw.batch);
    let memory = bytes as f64 / hw.bytes_per_cycle();
    let bound = if memory > compute as f64 { Bound::Memory } else { Bound::Compute };
    let cycles = memory.max(compute as f64);
    let macs = layer.stats(hw.batch).macs as f64;
    let mac_pj = macs * hw.e_mac_pj * (w_bits as f64 * a_bits as f64) / 64.0;
    let dram_pj = bytes as f64 * hw.e_dram_pj_per_byte;
    LayerCost {
        layer: layer.index,
        w_bits,
        a_bits,
        compute_cycles: compute,
        memory_cycles: memory,
        bound,
        dram_bytes: bytes,
        latency_ms: cycles / (hw.clock_mhz * 1e3),
        energy_mj: (mac_pj + dram_pj) * 1e-9,
    }
}

/// Latency, energy and size of `model` under `policy` on `hw`.
pub fn estimate_cost(model: &NetworkModel, policy: &QuantPolicy, hw: &HardwareSpec) -> Result<CostReport> {
    check_policy(model, policy)?;
    hw.validate()?;
    let layers: Vec<LayerCost> =
        model.layers.iter().zip(&policy.layers).map(|(l, b)| layer_cost(l, b.w_bits, b.a_bits, hw)).collect();
    Ok(CostReport {
        latency_ms: layers.iter().map(|l| l.latency_ms).sum(),
        energy_mj: layers.iter().map(|l| l.energy_mj).sum(),
        model_size_bytes: model_size(model, policy, false)?,
        layers,
    })
}

/// Storage of the quantized weights (and affine parameters) in bytes.
/// With `codebook` set, every layer also stores a `2^w_bits`-entry fp32 codebook.
pub fn model_size(model: &NetworkModel, policy: &QuantPolicy, codebook: bool) -> Result<u64> {
    check_policy(model, policy)?;
    Ok(model
        .layers
        .iter()
        .zip(&policy.layers)
        .map(|(l, b)| {
            let weights = ((l.n_params + l.affine_params) * b.w_bits as u64).div_ceil(8);
            let table = if codebook { 4u64 << b.w_bits } else { 0 };
            weights + table
        })
        .sum())
}

/// MACs per DRAM byte at the given bitwidths.
pub fn op_intensity(layer: &LayerDescriptor, w_bits: u8, a_bits: u8, batch: u64) -> f64 {
    layer.stats(batch).macs as f64 / dram_bytes(layer, w_bits, a_bits, batch) as f64
}
