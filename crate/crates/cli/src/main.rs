use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixrate::report::{parse_config, run, run_resolved, RunError};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mixrate", version, about = "Rates for empirical processes of dependent data")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form rate exponents, application exponents and bound curves.
    Rates(Common),
    /// Phase diagram of regimes over (beta, alpha).
    Phase(Common),
    /// Monte Carlo suprema and slope fits.
    Simulate(Common),
    /// Binned mixing-coefficient estimates against the reference profile.
    MixingEst(Common),
    /// Exact versus entropic optimal transport timings.
    OtBench(Common),
    /// Invariant bank with pass/fail counts.
    Verify(Common),
}

fn load(name: &str, common: &Common) -> Result<mixrate::report::ExperimentConfig, RunError> {
    let mut v: Value = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| RunError::Schema(format!("{}: {}", p.display(), e)))?;
            serde_json::from_str(&text).map_err(|e| RunError::Schema(format!("{}: {}", p.display(), e)))?
        }
        None => json!({}),
    };
    let obj = v.as_object_mut().ok_or_else(|| RunError::Schema("config must be a JSON object".into()))?;
    match obj.get("command").and_then(Value::as_str) {
        Some(c) if c != name => {
            return Err(RunError::Schema(format!("config is for '{}', not '{}'", c, name)));
        }
        _ => {
            obj.insert("command".into(), json!(name));
        }
    }
    if let Some(seed) = common.seed {
        obj.insert("base_seed".into(), json!(seed));
    }
    parse_config(&v.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Cmd::Rates(c) => ("rates", c),
        Cmd::Phase(c) => ("phase", c),
        Cmd::Simulate(c) => ("simulate", c),
        Cmd::MixingEst(c) => ("mixing-est", c),
        Cmd::OtBench(c) => ("ot-bench", c),
        Cmd::Verify(c) => ("verify", c),
    };
    let result = load(name, common).and_then(|mut cfg| match &common.output_dir {
        Some(dir) => {
            cfg.output_dir = dir.clone();
            run_resolved(cfg)
        }
        None => run(&cfg),
    });
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!("wrote {} files to {}", outcome.files.len(), outcome.output_dir.display());
            if outcome.failures > 0 {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
