//! Command-line entry point wrapping the experiment runners.
//!
//! Exit codes are stable so scripts can tell failure classes apart:
//! `0` success, `1` runtime failure, `2` usage error (unknown flag or
//! subcommand), `3` malformed configuration, `4` missing checkpoint.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ConfigFile};
use crate::experiments::{
    run_constant_price, run_evaluate, run_path_comparison, run_pin_risk, run_policy_surface,
    run_train, ExperimentError,
};
use crate::trainer::TrainError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MISSING_CHECKPOINT: i32 = 4;

/// Environment variable naming the output root used when `--out` is
/// absent; outputs land in `<root>/<subcommand>`.
pub const OUT_ROOT_ENV: &str = "IMPACT_HEDGER_OUT";

#[derive(Parser)]
#[command(
    name = "impact-hedger",
    about = "Deep hedging under market impact: training, evaluation and seeded experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a hedging policy and write checkpoints plus a training log
    Train(RunArgs),
    /// Risk report for a trained policy against both delta-hedge baselines
    Evaluate(RunArgs),
    /// Hedging position surface over price and portfolio value at mid-horizon
    PolicySurface(RunArgs),
    /// Position sequences along one simulated path across liquidity levels
    PathComparison(RunArgs),
    /// Drift sensitivity on the constant-at-strike price sequence
    ConstantPrice(RunArgs),
    /// Impact persistence near expiry with hourly rebalancing
    PinRisk(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (flat `section.key = value` text)
    #[arg(long)]
    config: PathBuf,
    /// Override the seed named in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $IMPACT_HEDGER_OUT/<subcommand>
    /// or runs/<subcommand>
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::PolicySurface(_) => "policy-surface",
            Command::PathComparison(_) => "path-comparison",
            Command::ConstantPrice(_) => "constant-price",
            Command::PinRisk(_) => "pin-risk",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Train(a)
            | Command::Evaluate(a)
            | Command::PolicySurface(a)
            | Command::PathComparison(a)
            | Command::ConstantPrice(a)
            | Command::PinRisk(a) => a,
        }
    }
}

fn resolve_out_dir(args: &RunArgs, command: &str) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    let root = std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(command)
}

fn exit_code_for(err: &ExperimentError) -> i32 {
    match err {
        ExperimentError::Config(_) => EXIT_CONFIG,
        ExperimentError::MissingCheckpoint { .. } => EXIT_MISSING_CHECKPOINT,
        ExperimentError::Train(TrainError::Config(_)) => EXIT_CONFIG,
        ExperimentError::Train(TrainError::Market(_)) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Runs one CLI invocation; `argv` includes the program name.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let args = cli.command.args();
    let name = cli.command.name();
    let out = resolve_out_dir(args, name);

    let cfg = match ConfigFile::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e @ (ConfigError::Io { .. } | ConfigError::Parse { .. })) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let result = match &cli.command {
        Command::Train(_) => run_train(&cfg, args.seed, &out),
        Command::Evaluate(_) => run_evaluate(&cfg, args.seed, &out),
        Command::PolicySurface(_) => run_policy_surface(&cfg, args.seed, &out),
        Command::PathComparison(_) => run_path_comparison(&cfg, args.seed, &out),
        Command::ConstantPrice(_) => run_constant_price(&cfg, args.seed, &out),
        Command::PinRisk(_) => run_pin_risk(&cfg, args.seed, &out),
    };

    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", out.join("manifest.conf").display());
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
