use std::fs::File;
use std::io;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dicekit::envs::EnvName;
use dicekit::harness::{
    ground_truth, run_experiment, sweep, verify, write_run_outputs, write_sweep_outputs, ExperimentConfig, Status,
    SweepConfig,
};

#[derive(Parser)]
#[command(name = "dicekit", version, about = "Density-ratio learners and exact oracles on finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config and write per-run CSVs.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Use this many seeds instead of the config's list.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Grid-search learning rate, ridge and discount; write summary tables.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Run the analytic oracle chain on an environment.
    Verify {
        env: EnvName,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Print d_μ, d_γ and τ* for every state-action pair as CSV.
    GroundTruth {
        env: EnvName,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(file).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, seeds } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(n) = seeds {
                cfg = cfg.with_seed_count(n);
            }
            let records = run_experiment(&cfg)?;
            for rec in &records {
                let status = if rec.diverged { "diverged".to_string() } else { format!("{:.6e}", rec.final_mse()) };
                println!("seed {:>4}  final MSE(tau) {status}  ({:.2}s)", rec.seed, rec.wall_clock_secs);
            }
            let files = write_run_outputs(&out, &cfg, &records)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Sweep { config, out, seeds } => {
            let mut sc: SweepConfig = read_json(&config)?;
            if let Some(n) = seeds {
                sc.base = sc.base.with_seed_count(n);
            }
            let result = sweep(&sc)?;
            println!("{:<22} {:>5} {:>12} {:>7} {:>14} {:>10}", "algo", "gamma", "alpha", "xi", "final MSE", "diverged");
            for cell in result.best_cells() {
                let s = &cell.summary;
                println!(
                    "{:<22} {:>5} {:>12.6} {:>7} {:>14.6e} {:>10}",
                    s.algo.to_string(),
                    s.gamma,
                    s.alpha,
                    s.xi,
                    s.mean_final_mse,
                    s.n_diverged
                );
            }
            for path in write_sweep_outputs(&out, &result)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Verify { env, gamma } => {
            let checks = verify(env, gamma)?;
            for c in &checks {
                println!("{:<4}  {:<42} {}", c.status.to_string(), c.name, c.detail);
            }
            if checks.iter().any(|c| c.status == Status::Fail) {
                bail!("oracle chain failed on {env}");
            }
        }
        Command::GroundTruth { env, gamma } => {
            let (rows, value) = ground_truth(env, gamma)?;
            let mut w = csv::Writer::from_writer(io::stdout());
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
            eprintln!("policy value {value}");
        }
    }
    Ok(())
}
