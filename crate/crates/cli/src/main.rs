//! `qhaq`: cost estimation, calibration, policy search and reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qhaq_core::hw::{estimate_cost, model_size};
use qhaq_core::policy::QuantPolicy;
use qhaq_core::quant::{kl_calibrate, read_tensor, QuantSpec};
use qhaq_core::search::{resolve_hardware, resolve_model, write_atomic, write_report, write_run, SearchConfig};

#[derive(Parser)]
#[command(name = "qhaq", version, about = "Hardware-aware mixed-precision quantization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Latency, energy and size of a policy on a hardware spec.
    Cost(CostArgs),
    /// KL-calibrated clipping threshold for a QTNS tensor.
    Calibrate(CalibrateArgs),
    /// Run a policy search from a run config.
    Search(SearchArgs),
    /// Per-layer plot data for a finished run.
    Report(ReportArgs),
}

#[derive(Args)]
struct CostArgs {
    /// Built-in topology name or topology JSON path.
    #[arg(long)]
    model: String,
    /// Built-in hardware name or hardware JSON path.
    #[arg(long)]
    hw: String,
    /// Policy JSON file.
    #[arg(long, conflicts_with = "uniform_bits", required_unless_present = "uniform_bits")]
    policy: Option<PathBuf>,
    /// Use this bitwidth for every weight and activation.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=32))]
    uniform_bits: Option<u8>,
    /// Count a k-means codebook per layer in the size.
    #[arg(long)]
    codebook: bool,
    /// Directory for cost.json and cost.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=8))]
    bits: u8,
    /// Symmetric range (weights). Without it the range is [0, c].
    #[arg(long)]
    signed: bool,
    /// Also write the result to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the agent seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// Defaults to `<run-dir>/report`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Raised when a search finishes but no episode met the budget.
#[derive(Debug)]
struct InfeasibleRun;

impl std::fmt::Display for InfeasibleRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("budget infeasible even at the minimum bitwidth; wrote the clamped-minimum policy")
    }
}

impl std::error::Error for InfeasibleRun {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InfeasibleRun>().is_some() {
        return EXIT_INFEASIBLE;
    }
    match err.downcast_ref::<qhaq_core::Error>() {
        Some(qhaq_core::Error::Infeasible { .. }) => EXIT_INFEASIBLE,
        Some(e) if e.is_validation() => EXIT_VALIDATION,
        _ => EXIT_INTERNAL,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| qhaq_core::Error::Io { path: dir.to_path_buf(), source: e }.into())
}

fn cost(args: CostArgs) -> Result<()> {
    let model = resolve_model(&args.model, None)?;
    let hw = resolve_hardware(&args.hw, None)?;
    let policy = match (&args.policy, args.uniform_bits) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| qhaq_core::Error::Io { path: path.clone(), source: e })?;
            QuantPolicy::parse(&text)
                .map_err(|e| qhaq_core::Error::InvalidPolicy(format!("{}: {e}", path.display())))?
        }
        (None, Some(b)) => QuantPolicy::uniform(model.len(), b, b),
        (None, None) => unreachable!("clap requires one of --policy, --uniform-bits"),
    };
    let mut report = estimate_cost(&model, &policy, &hw)?;
    if args.codebook {
        report.model_size_bytes = model_size(&model, &policy, true)?;
    }
    create_dir(&args.out_dir)?;
    write_atomic(&args.out_dir.join("cost.json"), report.to_json().as_bytes())?;
    write_atomic(&args.out_dir.join("cost.csv"), report.to_csv().as_bytes())?;
    println!(
        "{}",
        serde_json::json!({
            "model": model.name,
            "hardware": hw.name,
            "latency_ms": report.latency_ms,
            "energy_mj": report.energy_mj,
            "model_size_bytes": report.model_size_bytes,
            "model_size_mib": report.model_size_bytes as f64 / (1024.0 * 1024.0),
        })
    );
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let tensor = read_tensor(&args.tensor)?;
    let c = kl_calibrate(&tensor, args.bits, args.signed)?;
    let spec = QuantSpec::new(args.bits, c, args.signed)?;
    let out = serde_json::json!({ "c": c, "s": spec.step(), "bits": args.bits });
    let text = serde_json::to_string_pretty(&out)?;
    if let Some(path) = &args.out {
        write_atomic(path, text.as_bytes())?;
    }
    println!("{text}");
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let mut config = SearchConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.agent.seed = seed;
    }
    let out_dir = match (args.out_dir, &config.output_dir) {
        (Some(d), _) => d,
        (None, Some(d)) => config.base_dir.as_deref().map_or_else(|| d.clone(), |b| b.join(d)),
        (None, None) => {
            return Err(qhaq_core::Error::Config("no output directory: pass --out-dir or set output_dir".into()).into())
        }
    };
    let outcome = write_run(&config, &out_dir)?;
    println!("{}", outcome.summary_json());
    if outcome.infeasible {
        return Err(InfeasibleRun.into());
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let out_dir = args.out_dir.unwrap_or_else(|| args.run_dir.join("report"));
    let rows = write_report(&args.run_dir, &out_dir)?;
    if rows.is_empty() {
        bail!("run has no layers");
    }
    println!("wrote {} layer rows to {}", rows.len(), out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QHAQ_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cost(a) => cost(a).context("cost"),
        Command::Calibrate(a) => calibrate(a).context("calibrate"),
        Command::Search(a) => search(a).context("search"),
        Command::Report(a) => report(a).context("report"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
