use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BUILTIN_HARDWARE: &[&str] = &["edge", "cloud", "bitfusion"];

const EDGE: &str = include_str!("../../data/hardware/edge.json");
const CLOUD: &str = include_str!("../../data/hardware/cloud.json");
const BITFUSION: &str = include_str!("../../data/hardware/bitfusion.json");

const MAX_BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Bit-serial multipliers: one bit pair per cycle.
    TemporalBitserial,
    /// 2-bit fusion units composed spatially.
    SpatialFused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSpec {
    pub name: String,
    pub arch: Arch,
    pub batch: u64,
    pub pe_rows: u64,
    pub pe_cols: u64,
    pub lanes_per_pe: u64,
    pub axi_ports: u64,
    pub axi_bits: u64,
    pub clock_mhz: f64,
    pub dram_bw_gbps: f64,
    /// Energy of one 8b x 8b MAC in picojoules.
    pub e_mac_pj: f64,
    pub e_dram_pj_per_byte: f64,
}

impl HardwareSpec {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("batch", self.batch),
            ("pe_rows", self.pe_rows),
            ("pe_cols", self.pe_cols),
            ("lanes_per_pe", self.lanes_per_pe),
            ("axi_ports", self.axi_ports),
            ("axi_bits", self.axi_bits),
        ];
        for (field, v) in ints {
            if v == 0 {
                return Err(Error::InvalidHardware(format!("{field} must be positive")));
            }
            if v > 1 << 20 {
                return Err(Error::InvalidHardware(format!("{field} = {v} is out of range")));
            }
        }
        if self.batch > MAX_BATCH {
            return Err(Error::InvalidHardware(format!("batch must be at most {MAX_BATCH}")));
        }
        for (field, v) in [("clock_mhz", self.clock_mhz), ("dram_bw_gbps", self.dram_bw_gbps)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidHardware(format!("{field} must be positive, got {v}")));
            }
        }
        for (field, v) in [("e_mac_pj", self.e_mac_pj), ("e_dram_pj_per_byte", self.e_dram_pj_per_byte)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidHardware(format!("{field} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// DRAM bytes per clock: the narrower of the AXI ports and the DRAM bandwidth.
    pub fn bytes_per_cycle(&self) -> f64 {
        let axi = (self.axi_ports * self.axi_bits) as f64 / 8.0;
        let dram = self.dram_bw_gbps * 1e9 / (self.clock_mhz * 1e6);
        axi.min(dram)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hardware spec serializes")
    }
}

pub fn parse_hardware(json: &str) -> Result<HardwareSpec> {
    let spec: HardwareSpec = serde_json::from_str(json).map_err(|e| Error::InvalidHardware(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_hardware(path: &Path) -> Result<HardwareSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hardware(&text).map_err(|e| match e {
        Error::InvalidHardware(msg) => Error::InvalidHardware(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn builtin_hardware(name: &str) -> Option<HardwareSpec> {
    let json = match name {
        "edge" => EDGE,
        "cloud" => CLOUD,
        "bitfusion" => BITFUSION,
        _ => return None,
    };
    Some(parse_hardware(json).expect("bundled hardware spec is valid"))
}
