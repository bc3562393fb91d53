//! Batch CLI over the experiment layer. Exit codes: 0 ok, 1 config error,
//! 2 runtime error, 3 self-test failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nnlab::experiment::{
    self, cmd_crf, cmd_run, cmd_selftest, cmd_smv, cmd_trace, parse_learner, ExperimentConfig,
    ExperimentError, PRESET_NAMES,
};
use nnlab::partitions::PartitionSpec;
use nnlab::Dyadic;

#[derive(Parser)]
#[command(
    name = "nnlab",
    version,
    about = "Online nearest-neighbor learning laboratory on exact dyadic rationals",
    after_help = "Presets: thm4-1nn-fails, thm4-2c1nn-succeeds, thm3-knn-fails, crf-check, smv-grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run learner-vs-process trials; writes report.csv, report.json, plot.svg
    Run(CommonOpts),
    /// Count visited partition cells along a trajectory; writes smv.csv/.json
    Smv(SmvOpts),
    /// Relative frequency of an interval set over trials; writes crf.csv/.json
    Crf(CrfOpts),
    /// Dump one trajectory; writes trace.csv and trace.bin
    Trace(CommonOpts),
    /// Run the built-in invariant suites
    Selftest,
}

#[derive(Args)]
struct CommonOpts {
    /// Start from a named preset
    #[arg(long)]
    preset: Option<String>,
    /// Read a key-value config file (flags still override)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Decimal or 0x-prefixed hex
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Learner list, comma separated: memo, 1nn, <k>c1nn, knn:floor_log2, ...
    #[arg(long)]
    learner: Option<String>,
    /// Shorthand for a single capped rule with this cap
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Trial fan-out bound (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SmvOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Partition kind: grid, centered, distinct
    #[arg(long)]
    partition: Option<String>,
    /// Grid cell width, as m/2^e
    #[arg(long)]
    eta: Option<String>,
    /// Center for the centered partition, as m/2^e
    #[arg(long)]
    center: Option<String>,
}

#[derive(Args)]
struct CrfOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Interval union, comma separated, e.g. "[0/2^0;1/2^1)"
    #[arg(long)]
    set: Option<String>,
}

fn resolve_config(opts: &CommonOpts) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match (&opts.preset, &opts.config) {
        (_, Some(path)) => {
            let mut text = String::new();
            if let Some(name) = &opts.preset {
                text.push_str(&format!("preset = {name}\n"));
            }
            text.push_str(&std::fs::read_to_string(path)?);
            ExperimentConfig::from_kv(&text)?
        }
        (Some(name), None) => experiment::preset_config(name).ok_or_else(|| {
            ExperimentError::Config(format!(
                "unknown preset {name:?}; known: {}",
                PRESET_NAMES.join(", ")
            ))
        })?,
        (None, None) => {
            return Err(ExperimentError::Config(
                "either --preset or --config is required".to_string(),
            ))
        }
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(horizon) = opts.horizon {
        cfg.horizon = horizon;
        // An explicit grid from a preset may now exceed the horizon; the
        // log-spaced default tracks the override instead.
        if let Some(cp) = &cfg.checkpoints {
            if cp.last().is_some_and(|&t| t > horizon) {
                cfg.checkpoints = None;
            }
        }
    }
    if let Some(trials) = opts.trials {
        cfg.trials = trials;
    }
    if let Some(spec) = &opts.learner {
        cfg.learners = spec
            .split(',')
            .map(parse_learner)
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(k) = opts.k {
        cfg.learners = vec![nnlab::LearnerRule::kc1nn(k)];
    }
    if let Some(dir) = &opts.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(workers) = opts.workers {
        cfg.workers = workers.max(1);
    }
    Ok(cfg)
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).map_err(|e| e.to_string())
    } else {
        s.parse()
            .map_err(|e: std::num::ParseIntError| e.to_string())
    }
}

fn parse_dyadic_flag(name: &str, value: &str) -> Result<Dyadic, ExperimentError> {
    value
        .parse()
        .map_err(|e| ExperimentError::Config(format!("--{name}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are ordinary exits; anything else is a usage
            // problem (exit 1).
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let Some(command) = cli.command else {
        let _ = <Cli as clap::CommandFactory>::command().print_help();
        return ExitCode::from(1);
    };
    match dispatch(command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("nnlab: {e}");
            match e {
                ExperimentError::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, ExperimentError> {
    match command {
        Command::Run(opts) => {
            let cfg = resolve_config(&opts)?;
            let out = cmd_run(&cfg)?;
            println!(
                "nnlab {} run config={} -> {}, {}, {}",
                experiment::VERSION,
                out.config_hash,
                out.csv.display(),
                out.json.display(),
                out.svg.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Smv(opts) => {
            let mut cfg = resolve_config(&opts.common)?;
            if let Some(kind) = &opts.partition {
                cfg.partition = match kind.as_str() {
                    "grid" => PartitionSpec::Grid {
                        eta: Dyadic::pow2_neg(10),
                    },
                    "centered" => PartitionSpec::Centered {
                        s: Dyadic::one_half(),
                    },
                    "distinct" => PartitionSpec::DistinctPoints,
                    other => {
                        return Err(ExperimentError::Config(format!(
                            "unknown partition {other:?}"
                        )))
                    }
                };
            }
            if let Some(eta) = &opts.eta {
                cfg.partition = PartitionSpec::Grid {
                    eta: parse_dyadic_flag("eta", eta)?,
                };
            }
            if let Some(center) = &opts.center {
                cfg.partition = PartitionSpec::Centered {
                    s: parse_dyadic_flag("center", center)?,
                };
            }
            let (report, csv) = cmd_smv(&cfg)?;
            let last = report.points.last().expect("non-empty");
            println!(
                "smv verdict: {} (ratio {} at T={}) -> {}",
                report.verdict.as_str(),
                last.2,
                last.0,
                csv.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Crf(opts) => {
            let mut cfg = resolve_config(&opts.common)?;
            if let Some(set) = &opts.set {
                cfg.crf_set = set
                    .split(',')
                    .map(experiment::parse_interval_str)
                    .collect::<Result<Vec<_>, _>>()?;
            }
            let (mean, csv) = cmd_crf(&cfg)?;
            println!(
                "crf mean frequency at horizon: {} -> {}",
                mean.last().expect("non-empty"),
                csv.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace(opts) => {
            let cfg = resolve_config(&opts)?;
            let (csv, bin) = cmd_trace(&cfg)?;
            println!("trace -> {}, {}", csv.display(), bin.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let lines = cmd_selftest();
            let mut failed = false;
            for line in &lines {
                let status = if line.passed { "ok" } else { "FAILED" };
                println!("selftest {}: {} ({})", line.name, status, line.detail);
                failed |= !line.passed;
            }
            if failed {
                Ok(ExitCode::from(3))
            } else {
                println!("selftest: all {} suites passed", lines.len());
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}
