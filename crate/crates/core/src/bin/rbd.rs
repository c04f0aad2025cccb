//! Experiment runner.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 data error,
//! 4 numeric failure during training, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use random_bases::config::{self, Entry, ExperimentConfig};
use random_bases::{experiment, Error};

#[derive(Parser)]
#[command(name = "rbd", version, about = "Random-subspace training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sets every seed.* key to this value.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides train.epochs.
    #[arg(long)]
    epochs: Option<u64>,
    /// Extra key=value assignments, applied last.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration.
    Train(Common),
    /// Run an experiment family.
    Suite {
        /// table1, table2, hybrid, compartments, distributed, ortho, landscape or dimscan
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Learning-rate sweep over powers of two.
    Sweep(Common),
    /// Check a config file and print it with all defaults resolved.
    Validate {
        path: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn overrides(common: &Common) -> Result<Vec<Entry>, Error> {
    let mut out = Vec::new();
    if let Some(s) = common.seed {
        for key in ["seed.data", "seed.init", "seed.basis", "seed.shuffle", "seed.split"] {
            out.push(config::parse_override(&format!("{key}={s}"))?);
        }
    }
    if let Some(e) = common.epochs {
        out.push(config::parse_override(&format!("train.epochs={e}"))?);
    }
    for o in &common.overrides {
        out.push(config::parse_override(o)?);
    }
    Ok(out)
}

fn load(common: &Common, require_lr: bool) -> Result<(ExperimentConfig, PathBuf), Error> {
    let extra = overrides(common)?;
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p, &extra, require_lr)?,
        None => ExperimentConfig::parse("", &extra, require_lr)?,
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(common) => {
            let (cfg, out) = load(&common, true)?;
            let s = experiment::run_train(&cfg, &out)?;
            println!(
                "{} D={} d={} reduction={:.1} final_val_acc={:.4} best_val_acc={:.4} -> {}",
                s.rule,
                s.num_params,
                s.d_total,
                s.reduction_factor,
                s.final_val_acc,
                s.best_val_acc,
                out.display()
            );
        }
        Command::Suite { name, common } => {
            let (cfg, out) = load(&common, false)?;
            let m = experiment::run_suite(&name, &cfg, &out)?;
            println!("{}: {} runs -> {}", m.suite, m.runs, out.display());
            for (k, v) in &m.checks {
                println!("  {k}: {v}");
            }
        }
        Command::Sweep(common) => {
            let (cfg, out) = load(&common, false)?;
            let r = experiment::run_sweep(&cfg, &out)?;
            println!("{} best exponent {} -> {}", cfg.optimizer.rule, r.best_exponent, out.display());
        }
        Command::Validate { path, overrides } => {
            let extra = overrides
                .iter()
                .map(|o| config::parse_override(o))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = ExperimentConfig::load(&path, &extra, true)?;
            cfg.check_files()?;
            print!("{}", cfg.to_text());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        4
    } else if e.is_data() {
        3
    } else if matches!(
        e,
        Error::InvalidConfig(_) | Error::Scheme(_) | Error::InvalidNetwork(_)
    ) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
