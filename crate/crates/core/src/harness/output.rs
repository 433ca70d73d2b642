use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::run::RunRecord;
use super::sweep::SweepResult;
use crate::error::Result;

/// step,mse_tau[,mse_rho] for one run.
pub fn write_run_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let with_rho = record.evals.iter().any(|e| e.mse_rho.is_some());
    let mut w = csv::Writer::from_writer(out);
    if with_rho {
        w.write_record(["step", "mse_tau", "mse_rho"])?;
    } else {
        w.write_record(["step", "mse_tau"])?;
    }
    for e in &record.evals {
        let mut row = vec![e.step.to_string(), e.mse_tau.to_string()];
        if with_rho {
            row.push(e.mse_rho.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_csv_name(record: &RunRecord) -> String {
    format!("run_{}_seed{}.csv", &record.config_hash[..12], record.seed)
}

/// Writes one CSV per run plus `records.json` and `config.json` into `dir`.
pub fn write_run_outputs(dir: &Path, config: &ExperimentConfig, records: &[RunRecord]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for rec in records {
        let path = dir.join(run_csv_name(rec));
        write_run_csv(rec, File::create(&path)?)?;
        written.push(path);
    }
    let path = dir.join("records.json");
    serde_json::to_writer_pretty(File::create(&path)?, records)?;
    written.push(path);
    let path = dir.join("config.json");
    serde_json::to_writer_pretty(File::create(&path)?, config)?;
    written.push(path);
    Ok(written)
}

/// One row per sweep cell; `selected` marks the per-(algo, γ) winners.
pub fn write_sweep_summary<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "selected",
        "algo",
        "env",
        "gamma",
        "alpha",
        "xi",
        "config_hash",
        "mean_final_mse",
        "std_final_mse",
        "cv_final_mse",
        "last_quartile_var",
        "n_diverged",
    ])?;
    for (i, cell) in result.cells.iter().enumerate() {
        let s = &cell.summary;
        w.write_record([
            result.best.contains(&i).to_string(),
            s.algo.to_string(),
            s.env.to_string(),
            s.gamma.to_string(),
            s.alpha.to_string(),
            s.xi.to_string(),
            s.config_hash.clone(),
            s.mean_final_mse.to_string(),
            s.std_final_mse.to_string(),
            s.cv_final_mse.to_string(),
            s.last_quartile_var.to_string(),
            s.n_diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready long format: algo,gamma,alpha,xi,seed,step,mse_tau for every
/// evaluation of the selected cells.
pub fn write_long_format<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", "gamma", "alpha", "xi", "seed", "step", "mse_tau"])?;
    for cell in result.best_cells() {
        let s = &cell.summary;
        for rec in &cell.records {
            for e in &rec.evals {
                w.write_record([
                    s.algo.to_string(),
                    s.gamma.to_string(),
                    s.alpha.to_string(),
                    s.xi.to_string(),
                    rec.seed.to_string(),
                    e.step.to_string(),
                    e.mse_tau.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_outputs(dir: &Path, result: &SweepResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("sweep_summary.csv");
    write_sweep_summary(result, File::create(&summary)?)?;
    let long = dir.join("curves_long.csv");
    write_long_format(result, File::create(&long)?)?;
    Ok(vec![summary, long])
}
