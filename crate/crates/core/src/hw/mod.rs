//! Accelerator cost models.

mod cost;
mod spec;

pub use cost::{dram_bytes, estimate_cost, model_size, op_intensity, Bound, CostReport, LayerCost};
pub use spec::{builtin_hardware, load_hardware, parse_hardware, Arch, HardwareSpec, BUILTIN_HARDWARE};
