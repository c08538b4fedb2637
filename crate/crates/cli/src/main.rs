use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedud::experiment::{cmd_eval, cmd_gen_data, cmd_sweep, cmd_train, ExperimentConfig, SweepAxis};
use fedud::Error;

/// Two-party vertical federated CTR training: data generation, training,
/// evaluation and sweeps.
#[derive(Parser, Debug)]
#[command(name = "fedud", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every training seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic host/guest CSV files and a manifest.
    GenData(Common),
    /// Train the configured method; writes checkpoints, train.log and transcript.txt.
    Train(Common),
    /// Score a checkpoint on the test split; writes metrics.json and predictions.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate every method over an axis of values and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// guest_slots, unaligned_samples, alpha or beta.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values, e.g. `0,25%,50%,100%`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenData(common) => {
            let (cfg, out) = load(&common)?;
            let m = cmd_gen_data(&cfg, &out)?;
            println!("wrote {} host rows, {} aligned keys to {}", m.n_host_rows, m.n_aligned, out.display());
        }
        Command::Train(common) => {
            let (cfg, out) = load(&common)?;
            let a = cmd_train(&cfg, &out)?;
            for c in &a.checkpoints {
                println!("checkpoint {}", c.display());
            }
            println!("log {}", a.log.display());
        }
        Command::Eval { common, checkpoint } => {
            let (cfg, out) = load(&common)?;
            let r = cmd_eval(&cfg, &checkpoint, &out)?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            println!(
                "{}: auc overall {} aligned {} unaligned {}",
                r.method,
                fmt(r.slices.overall.auc),
                fmt(r.slices.aligned.auc),
                fmt(r.slices.unaligned.auc)
            );
        }
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
        } => {
            let (cfg, out) = load(&common)?;
            let axis = axis.as_deref().map(SweepAxis::parse).transpose()?;
            let rows = cmd_sweep(&cfg, axis, values, seeds, &out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows written to {} ({failed} failed cells)", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
