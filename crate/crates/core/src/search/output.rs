use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::OracleConfig;
use crate::hw::{estimate_cost, model_size, op_intensity};
use crate::model::LayerKind;
use crate::policy::QuantPolicy;

use super::config::SearchConfig;
use super::run::{search_loop_with, SearchOutcome, EPISODE_CSV_HEADER};

/// Files a finished run directory contains, manifest last.
pub const RUN_FILES: [&str; 5] = ["policy.json", "episodes.csv", "summary.json", "config.json", "manifest.json"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: SearchConfig,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn for_config(config: &SearchConfig) -> Self {
        let mut seeds = BTreeMap::new();
        seeds.insert("agent".to_string(), config.agent.seed);
        match config.oracle {
            OracleConfig::Synthetic { seed } => seeds.insert("oracle".to_string(), seed),
        };
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
        RunManifest {
            config: config.clone(),
            seeds,
            versions,
            outputs: RUN_FILES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs a search and writes its outputs into `dir`. The episode log is
/// streamed, so a failed run leaves the episodes finished so far on disk.
pub fn write_run(config: &SearchConfig, dir: &Path) -> Result<SearchOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snapshot = config.resolved_snapshot();
    let csv_path = dir.join("episodes.csv");
    let mut csv = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    writeln!(csv, "{EPISODE_CSV_HEADER}").map_err(|e| Error::io(&csv_path, e))?;
    let outcome =
        search_loop_with(config, |rec| writeln!(csv, "{}", rec.csv_row()).map_err(|e| Error::io(&csv_path, e)));
    csv.flush().map_err(|e| Error::io(&csv_path, e))?;
    let outcome = outcome?;
    write_atomic(&dir.join("policy.json"), outcome.best_policy.to_json().as_bytes())?;
    write_atomic(&dir.join("summary.json"), outcome.summary_json().as_bytes())?;
    write_atomic(&dir.join("config.json"), snapshot.to_json().as_bytes())?;
    let manifest = RunManifest::for_config(&snapshot);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReportRow {
    pub index: usize,
    pub kind: &'static str,
    pub w_bits: u8,
    pub a_bits: u8,
    pub op_intensity: f64,
    pub latency_ms: f64,
    pub bound: &'static str,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Per-layer rows for the best policy of a finished run.
pub fn build_report(run_dir: &Path) -> Result<(SearchConfig, QuantPolicy, Vec<LayerReportRow>)> {
    let config_path = run_dir.join("config.json");
    let config = SearchConfig::parse(&read(&config_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
    let policy_path = run_dir.join("policy.json");
    let policy = QuantPolicy::parse(&read(&policy_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", policy_path.display())))?;
    let model = config.resolve_model()?;
    let hw = config.resolve_hardware()?;
    let cost = estimate_cost(&model, &policy, &hw)?;
    let rows = model
        .layers
        .iter()
        .zip(&policy.layers)
        .zip(&cost.layers)
        .map(|((layer, bits), lc)| LayerReportRow {
            index: layer.index,
            kind: match (layer.kind, layer.is_depthwise) {
                (LayerKind::Fc, _) => "fc",
                (LayerKind::Conv, true) => "depthwise",
                (LayerKind::Conv, false) => "conv",
            },
            w_bits: bits.w_bits,
            a_bits: bits.a_bits,
            op_intensity: op_intensity(layer, bits.w_bits, bits.a_bits, hw.batch),
            latency_ms: lc.latency_ms,
            bound: lc.bound.as_str(),
        })
        .collect();
    Ok((config, policy, rows))
}

/// Writes `layers.csv` (one row per layer) and `summary.csv` into `out_dir`.
pub fn write_report(run_dir: &Path, out_dir: &Path) -> Result<Vec<LayerReportRow>> {
    let (config, policy, rows) = build_report(run_dir)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut layers = String::from("index,type,w_bits,a_bits,op_intensity,latency_ms,bound\n");
    for r in &rows {
        layers.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index, r.kind, r.w_bits, r.a_bits, r.op_intensity, r.latency_ms, r.bound
        ));
    }
    write_atomic(&out_dir.join("layers.csv"), layers.as_bytes())?;

    let model = config.resolve_model()?;
    let hw = config.resolve_hardware()?;
    let cost = estimate_cost(&model, &policy, &hw)?;
    let size = model_size(&model, &policy, false)?;
    let episodes = read(&run_dir.join("episodes.csv"))?;
    let n_episodes = episodes.lines().count().saturating_sub(1);
    let best_reward = episodes
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.parse::<f64>().ok())
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = format!(
        "model,hardware,budget_kind,budget_limit,episodes,best_reward,latency_ms,energy_mj,size_bytes\n{},{},{},{},{},{},{},{},{}\n",
        model.name,
        config.hardware,
        config.budget.kind.as_str(),
        config.budget.limit,
        n_episodes,
        best_reward,
        cost.latency_ms,
        cost.energy_mj,
        size
    );
    write_atomic(&out_dir.join("summary.csv"), summary.as_bytes())?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_then_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SearchConfig::parse(
            r#"{"model": "toy(3)", "hardware": "cloud", "budget": {"kind": "latency_ms", "limit": 1.0},
                "episodes": 4, "agent": {"hidden1": 8, "hidden2": 4, "batch_size": 4, "warmup": 4}}"#,
        )
        .unwrap();
        write_run(&cfg, dir.path()).unwrap();
        for f in RUN_FILES {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let manifest: RunManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.seeds["oracle"], 42);
        let rows = write_report(dir.path(), &dir.path().join("report")).unwrap();
        assert_eq!(rows.len(), 3);
        let csv = fs::read_to_string(dir.path().join("report/layers.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"{}");
        assert!(!dir.path().join("x.json.tmp").exists());
    }
}
