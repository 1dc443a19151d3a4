use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backhaul_core::agent::checkpoint::{hash_hex, Checkpoint};
use backhaul_core::harness::eval::{run_eval, train_scheme, Policy};
use backhaul_core::harness::metrics::{sort_rows, write_csv};
use backhaul_core::harness::sweep::{sweep, SweepParam};
use backhaul_core::harness::{ScenarioConfig, Scheme};
use backhaul_core::{verify, Error, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "backhaul", version, about = "Backhaul resource-block allocation in a blockage-prone mmWave cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the Q-network of the configured learned scheme and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate a checkpoint and the baselines on the same channel trajectory.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Evaluation seed; defaults to the training seed stored in the checkpoint.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and evaluate every scheme over a range of user counts or blockage coefficients.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values; fractions such as 1/30 are accepted.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the numerical oracle suites.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Users,
    Aout,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Sizing { .. } => 3,
        Error::Numerical(_) => 4,
        _ => 1,
    }
}

fn parse_value(v: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse sweep value `{v}`"));
    let x = match v.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?,
        None => v.trim().parse().map_err(|_| bad())?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn train(config: &Path, seed: u64, checkpoint: &Path) -> Result<()> {
    let cfg = ScenarioConfig::load(config)?;
    if !cfg.scheme.is_learned() {
        return Err(Error::Config(format!(
            "scenario.scheme is {}; training needs DRL1 or DRL2",
            cfg.scheme
        )));
    }
    let (network, log) = train_scheme(&cfg, cfg.scheme, seed)?;
    let ck = Checkpoint {
        seed,
        config_hash: cfg.hash(),
        network,
    };
    ck.save(checkpoint)?;
    eprintln!(
        "trained {} seed {seed}: {} steps, {} target syncs, mean reward over the last 1000 steps {:.4}",
        cfg.scheme,
        log.steps.len(),
        log.syncs,
        log.tail_mean_reward(1_000)
    );
    eprintln!("config {}", hash_hex(&ck.config_hash));
    Ok(())
}

fn eval(config: &Path, checkpoint: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = ScenarioConfig::load(config)?;
    let ck = Checkpoint::load(checkpoint)?;
    if ck.config_hash != cfg.hash() {
        return Err(Error::Config(format!(
            "checkpoint was trained on config {}, but {} hashes to {}",
            hash_hex(&ck.config_hash),
            config.display(),
            hash_hex(&cfg.hash())
        )));
    }
    if !cfg.scheme.is_learned() {
        return Err(Error::Config(format!("scenario.scheme is {}, not a learned scheme", cfg.scheme)));
    }
    let seed = seed.unwrap_or(ck.seed);
    let mut rows = vec![run_eval(&Policy::Dqn(ck.network), cfg.scheme, &cfg, seed)?];
    for (policy, scheme) in [(Policy::Myopic, Scheme::Myopic), (Policy::Equal, Scheme::Equal)] {
        rows.push(run_eval(&policy, scheme, &cfg, seed)?);
    }
    sort_rows(&mut rows);
    write_csv(&rows, create(out)?)
}

fn run_sweep(config: &Path, param: Param, values: &str, out: &Path) -> Result<()> {
    let cfg = ScenarioConfig::load(config)?;
    let values = values.split(',').map(parse_value).collect::<Result<Vec<_>>>()?;
    let param = match param {
        Param::Users => SweepParam::Users,
        Param::Aout => SweepParam::AOut,
    };
    let report = sweep(&cfg, param, &values, &Scheme::ALL, true);
    write_csv(&report.rows, create(out)?)?;
    match report.errors.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

fn selftest() -> Result<bool> {
    let reports = verify::run_all()?;
    for r in &reports {
        println!("{r}");
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train {
            config,
            seed,
            checkpoint,
        } => train(config, *seed, checkpoint),
        Command::Eval {
            config,
            checkpoint,
            out,
            seed,
        } => eval(config, checkpoint, out, *seed),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => run_sweep(config, *param, values, out),
        Command::Selftest => match selftest() {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
