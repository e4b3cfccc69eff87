use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::AgentConfig;
use crate::error::{Error, Result};
use crate::evaluator::OracleConfig;
use crate::hw::{builtin_hardware, load_hardware, HardwareSpec, BUILTIN_HARDWARE};
use crate::model::{builtin_topology, load_topology, NetworkModel};
use crate::policy::{BitRange, Budget};

pub const DEFAULT_LAMBDA: f64 = 0.1;
const MAX_EPISODES: u64 = 1_000_000;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_true() -> bool {
    true
}

fn default_pinned_bits() -> u8 {
    8
}

/// Run configuration. `model` and `hardware` accept a built-in name or a
/// path to a JSON file; relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub model: String,
    pub hardware: String,
    pub budget: Budget,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub episodes: u64,
    #[serde(default)]
    pub bits: BitRange,
    #[serde(default = "default_true")]
    pub pin_first_last: bool,
    #[serde(default = "default_pinned_bits")]
    pub pinned_bits: u8,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn keys_of<T: Serialize>(v: &T) -> BTreeSet<String> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

fn unknown_keys(value: &Value) -> Vec<String> {
    let Value::Object(top) = value else { return Vec::new() };
    let top_known: BTreeSet<String> = [
        "model",
        "hardware",
        "budget",
        "lambda",
        "episodes",
        "bits",
        "pin_first_last",
        "pinned_bits",
        "agent",
        "oracle",
        "output_dir",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let nested: [(&str, BTreeSet<String>); 4] = [
        ("budget", ["kind", "limit"].iter().map(|s| s.to_string()).collect()),
        ("bits", ["min", "max"].iter().map(|s| s.to_string()).collect()),
        ("agent", keys_of(&AgentConfig::default())),
        ("oracle", keys_of(&OracleConfig::default())),
    ];
    let mut bad = Vec::new();
    for (k, v) in top {
        if !top_known.contains(k) {
            bad.push(k.clone());
            continue;
        }
        if let (Some((_, known)), Value::Object(inner)) = (nested.iter().find(|(n, _)| n == k), v) {
            bad.extend(inner.keys().filter(|ik| !known.contains(*ik)).map(|ik| format!("{k}.{ik}")));
        }
    }
    bad
}

impl SearchConfig {
    pub fn parse(json: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(json).map_err(|e| Error::Config(format!("run config: {e}")))?;
        if !value.is_object() {
            return Err(Error::Config("run config must be a JSON object".into()));
        }
        let bad = unknown_keys(&value);
        if !bad.is_empty() {
            return Err(Error::Config(format!("run config has unknown keys: {}", bad.join(", "))));
        }
        let cfg: SearchConfig = serde_json::from_value(value).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.episodes == 0 || self.episodes > MAX_EPISODES {
            return Err(Error::Config(format!("episodes must be in 1..={MAX_EPISODES}, got {}", self.episodes)));
        }
        BitRange::new(self.bits.min, self.bits.max)?;
        if self.pinned_bits == 0 || self.pinned_bits > 32 {
            return Err(Error::Config(format!("pinned_bits must be in 1..=32, got {}", self.pinned_bits)));
        }
        self.budget.validate()?;
        self.agent.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_model(&self) -> Result<NetworkModel> {
        resolve_model(&self.model, self.base_dir.as_deref())
    }

    pub fn resolve_hardware(&self) -> Result<HardwareSpec> {
        resolve_hardware(&self.hardware, self.base_dir.as_deref())
    }

    /// Pin mask for an `n`-layer model.
    pub fn pins(&self, n_layers: usize) -> Vec<bool> {
        if self.pin_first_last {
            crate::policy::default_pins(n_layers)
        } else {
            vec![false; n_layers]
        }
    }

    /// Copy with file references made absolute, suitable for a run snapshot.
    pub fn resolved_snapshot(&self) -> SearchConfig {
        let mut out = self.clone();
        for field in [&mut out.model, &mut out.hardware] {
            let p = self.base_dir.as_deref().map_or_else(|| PathBuf::from(&*field), |b| b.join(&*field));
            if p.is_file() {
                *field = fs::canonicalize(&p).unwrap_or(p).display().to_string();
            }
        }
        out.base_dir = None;
        out
    }
}

fn as_path(name: &str, base: Option<&Path>) -> PathBuf {
    base.map_or_else(|| PathBuf::from(name), |b| b.join(name))
}

/// A built-in topology name, or a topology JSON path.
pub fn resolve_model(name: &str, base: Option<&Path>) -> Result<NetworkModel> {
    let path = as_path(name, base);
    if path.is_file() {
        return load_topology(&path);
    }
    match builtin_topology(name) {
        Err(Error::UnknownTopology { .. }) if name.ends_with(".json") || name.contains('/') => {
            Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
        }
        other => other,
    }
}

/// A built-in hardware name, or a hardware spec JSON path.
pub fn resolve_hardware(name: &str, base: Option<&Path>) -> Result<HardwareSpec> {
    let path = as_path(name, base);
    if path.is_file() {
        return load_hardware(&path);
    }
    if let Some(hw) = builtin_hardware(name) {
        return Ok(hw);
    }
    if name.ends_with(".json") || name.contains('/') {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    Err(Error::InvalidHardware(format!("unknown hardware `{name}` (built-in: {})", BUILTIN_HARDWARE.join(", "))))
}
