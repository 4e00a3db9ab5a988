//! Command-line front end: experiment dispatch with flat configs, CLI
//! overrides, CSV output and a JSON sidecar.
//!
//! Exit codes: 0 success, 2 when a pass/fail experiment assertion failed,
//! 1 on any error (including invalid configuration).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fslab::experiment::{run_experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(
    name = "fslab",
    version,
    about = "Exact dyadic-grid experiments: sumsets, projections, content, branching",
    after_help = "Config precedence: --set/named flags override --config file values.\n\
                  The environment variable FSLAB_MAX_LEVEL overrides the maximum grid level."
)]
struct Cli {
    /// Experiment to run
    #[arg(value_parser = ["gen", "ap-check", "scan", "content", "branching", "inverse", "prop3", "dim"])]
    command: String,

    /// Flat key=value config file
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output base path; writes <out>.csv and <out>.json
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for randomized generators
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: available cores)
    #[arg(long)]
    jobs: Option<usize>,

    /// Grid level of randomized generators
    #[arg(long)]
    level: Option<u32>,

    /// Direction grid level (2^q directions)
    #[arg(long)]
    theta_level: Option<u32>,

    #[arg(long)]
    sigma: Option<f64>,

    #[arg(long)]
    eta: Option<f64>,

    /// Content exponent, e.g. "1/2" (exact) or "0.41"
    #[arg(long)]
    tau: Option<String>,

    #[arg(long)]
    epsilon: Option<f64>,

    #[arg(long)]
    rho: Option<f64>,

    /// Additional overrides as key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn subcommand_kind(cmd: &str) -> &'static str {
    match cmd {
        "gen" => "gen",
        "ap-check" => "ap-counterexample",
        "scan" => "direction-scan",
        "content" => "content-duality",
        "branching" => "branching-audit",
        "inverse" => "inverse-probe",
        "prop3" => "prop3-probe",
        "dim" => "dim",
        _ => unreachable!("validated by clap"),
    }
}

fn build_params(cli: &Cli) -> Result<BTreeMap<String, String>, String> {
    let mut params = BTreeMap::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        params = ExperimentConfig::parse_file_params(&text).map_err(|e| e.to_string())?;
    }
    let mut put = |k: &str, v: String| {
        params.insert(k.to_string(), v);
    };
    if let Some(v) = cli.seed {
        put("seed", v.to_string());
    }
    if let Some(v) = cli.level {
        put("level", v.to_string());
    }
    if let Some(v) = cli.theta_level {
        put("theta_level", v.to_string());
    }
    if let Some(v) = cli.sigma {
        put("sigma", v.to_string());
    }
    if let Some(v) = cli.eta {
        put("eta", v.to_string());
    }
    if let Some(v) = &cli.tau {
        put("tau", v.clone());
    }
    if let Some(v) = cli.epsilon {
        put("epsilon", v.to_string());
    }
    if let Some(v) = cli.rho {
        put("rho", v.to_string());
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set {kv:?}: expected KEY=VALUE"))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(params)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        // a failure here means a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let params = match build_params(&cli) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("fslab: {msg}");
            return ExitCode::from(1);
        }
    };
    let config = match ExperimentConfig::new(subcommand_kind(&cli.command), params) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("fslab: {e}");
            return ExitCode::from(1);
        }
    };
    match run_experiment(&config, cli.out.as_deref()) {
        Ok(outcome) => {
            if cli.out.is_none() {
                match outcome.table.to_csv_bytes() {
                    Ok(bytes) => {
                        use std::io::Write;
                        let _ = std::io::stdout().write_all(&bytes);
                    }
                    Err(e) => {
                        eprintln!("fslab: {e}");
                        return ExitCode::from(1);
                    }
                }
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("fslab: experiment assertion failed (see pass column)");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("fslab: {e}");
            ExitCode::from(1)
        }
    }
}
