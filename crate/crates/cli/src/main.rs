//! `fermiflow`: reproducible experiments on Slater states and their point
//! processes. Exit codes: 0 success, 1 property violation, 2 resource or
//! configuration error.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdError, Report};
use config::{ConfigError, Format, RunConfig};

#[derive(Parser)]
#[command(name = "fermiflow", version, about = "Slater determinants, determinantal point processes and their distances")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides `seed`)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set verify.n=3`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Brute-force measurement law against kernel minors, and a sampler test
    VerifyLemma {
        /// Compare against 0.9 K instead of K (negative control, must fail)
        #[arg(long)]
        corrupt: bool,
    },
    /// The Walsh counterexample on the 4-cell grid
    Walsh,
    /// Measured TV and W# distances against their determinantal bounds
    Bounds {
        /// exact or empirical (overrides `bounds.mode`)
        #[arg(long)]
        mode: Option<String>,
    },
    /// (1/k) W1 of reduced states for k = 1..n
    RdmMonotonicity {
        /// Compare every state with itself
        #[arg(long)]
        identical: bool,
    },
    /// Trace distance against the W1 upper bound on the perturbed-basis example
    ExampleGap {
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Run the acceptance criteria
    Selftest {
        /// Comma-separated criterion numbers (overrides `selftest.criteria`)
        #[arg(long)]
        criteria: Option<String>,
    },
}

fn load(common: &Common) -> Result<RunConfig, ConfigError> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let mut overrides = std::collections::BTreeMap::new();
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set {kv:?}: expected KEY=VALUE")))?;
        overrides.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(s) = common.seed {
        overrides.insert("seed".into(), s.to_string());
    }
    if let Some(f) = common.format {
        overrides.insert("format".into(), if f == Format::Json { "json" } else { "csv" }.into());
    }
    if let Some(p) = &common.out {
        overrides.insert("out".into(), p.display().to_string());
    }
    cfg.with_overrides(overrides)
}

fn emit(cfg: &RunConfig, report: &Report) -> std::io::Result<()> {
    let body = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&report.json).expect("json values serialize") + "\n",
        Format::Csv => report.csv.clone(),
    };
    match &cfg.out {
        Some(p) => std::fs::write(p, body),
        None => std::io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn run(cli: Cli, common: Common) -> Result<Report, CmdError> {
    let cfg = load(&common)?;
    let res = match &cli.command {
        Command::VerifyLemma { corrupt } => commands::verify_lemma(&cfg, *corrupt),
        Command::Walsh => commands::walsh(&cfg),
        Command::Bounds { mode } => commands::bounds(&cfg, mode.as_deref()),
        Command::RdmMonotonicity { identical } => commands::rdm_monotonicity(&cfg, *identical),
        Command::ExampleGap { n_max } => commands::example_gap(&cfg, *n_max),
        Command::Selftest { criteria } => commands::selftest(&cfg, criteria.as_deref()),
    };
    match res {
        Ok(r) => {
            if let Err(e) = emit(&cfg, &r) {
                eprintln!("error: writing output: {e}");
                return Ok(Report {
                    verdict: commands::Verdict::Resource,
                    ..r
                });
            }
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.common.clone();
    match run(cli, common) {
        Ok(report) => {
            for line in &report.notes {
                eprintln!("{line}");
            }
            ExitCode::from(report.verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
