use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{last_quartile_variance, variance};
use super::run::{run_seed, thread_pool, RunRecord};
use crate::envs::EnvName;
use crate::error::{DiceError, Result};
use crate::learners::{Algorithm, LrSchedule};

fn default_alphas() -> Vec<f64> {
    (1..=6).rev().map(|p| 4f64.powi(-p)).collect()
}

fn default_xis() -> Vec<f64> {
    vec![0.0, 1e-3, 1e-2, 1e-1]
}

fn default_gammas() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.0]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_xis")]
    pub xis: Vec<f64>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    /// Tune ξ only at γ = 1 and use ξ = 0 elsewhere.
    #[serde(default = "yes")]
    pub xi_only_at_gamma_one: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            xis: default_xis(),
            gammas: default_gammas(),
            xi_only_at_gamma_one: true,
        }
    }
}

impl SweepGrid {
    pub fn single(alpha: f64, xi: f64, gamma: f64) -> Self {
        Self { alphas: vec![alpha], xis: vec![xi], gammas: vec![gamma], xi_only_at_gamma_one: false }
    }

    fn xis_for(&self, gamma: f64) -> Vec<f64> {
        if self.xi_only_at_gamma_one && gamma < 1.0 {
            vec![0.0]
        } else {
            self.xis.clone()
        }
    }
}

/// A base experiment plus the grid and algorithms to sweep; the base's own
/// α, ξ, γ and algorithm are overridden per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: ExperimentConfig,
    #[serde(default)]
    pub grid: SweepGrid,
    #[serde(default)]
    pub algos: Option<Vec<Algorithm>>,
}

impl SweepConfig {
    pub fn algos(&self) -> Vec<Algorithm> {
        self.algos.clone().unwrap_or_else(|| vec![self.base.algo])
    }

    /// Cross product of algorithms × γ × α × ξ, in that nesting order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut cells = Vec::new();
        for algo in self.algos() {
            for &gamma in &self.grid.gammas {
                for &alpha in &self.grid.alphas {
                    for xi in self.grid.xis_for(gamma) {
                        let mut cfg = self.base.clone();
                        cfg.algo = algo;
                        cfg.gamma = gamma;
                        cfg.xi = xi;
                        cfg.lr = LrSchedule::Constant { alpha };
                        cfg.env = self.base.env.resolve(gamma);
                        cells.push(cfg);
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub algo: Algorithm,
    pub env: EnvName,
    pub gamma: f64,
    pub alpha: f64,
    pub xi: f64,
    pub config_hash: String,
    /// Mean over seeds, +∞ if any seed diverged.
    pub mean_final_mse: f64,
    pub std_final_mse: f64,
    /// Coefficient of variation of the final MSE across seeds.
    pub cv_final_mse: f64,
    /// Mean over seeds of the last-quartile variance of the MSE curve.
    pub last_quartile_var: f64,
    pub n_diverged: usize,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub config: ExperimentConfig,
    pub summary: CellSummary,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    /// Index into `cells` of the best cell for each (algorithm, γ).
    pub best: Vec<usize>,
}

impl SweepResult {
    pub fn best_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.best.iter().map(|&i| &self.cells[i])
    }

    pub fn best_for(&self, algo: Algorithm, gamma: f64) -> Option<&CellResult> {
        self.best_cells().find(|c| c.config.algo == algo && c.config.gamma == gamma)
    }
}

fn alpha_of(lr: &LrSchedule) -> f64 {
    match *lr {
        LrSchedule::Constant { alpha } => alpha,
        LrSchedule::RobbinsMonro { alpha0, .. } => alpha0,
    }
}

pub fn summarize(config: &ExperimentConfig, records: &[RunRecord]) -> CellSummary {
    let finals: Vec<f64> = records.iter().map(RunRecord::final_mse).collect();
    let n_diverged = records.iter().filter(|r| r.diverged).count();
    let n = finals.len().max(1) as f64;
    let (mean, std) = if n_diverged > 0 {
        (f64::INFINITY, f64::NAN)
    } else {
        (finals.iter().sum::<f64>() / n, variance(&finals).sqrt())
    };
    let last_quartile_var = if n_diverged > 0 {
        f64::INFINITY
    } else {
        records.iter().map(|r| last_quartile_variance(&r.mse_curve())).sum::<f64>() / n
    };
    CellSummary {
        algo: config.algo,
        env: config.env,
        gamma: config.gamma,
        alpha: alpha_of(&config.lr),
        xi: config.xi,
        config_hash: config.hash(),
        mean_final_mse: mean,
        std_final_mse: std,
        cv_final_mse: std / mean,
        last_quartile_var,
        n_diverged,
    }
}

/// Per (algorithm, γ), the cell with the smallest mean final MSE; the first
/// such cell in grid order wins ties.
pub fn select_best(cells: &[CellResult]) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let key = (cell.config.algo, cell.config.gamma);
        match best.iter_mut().find(|&&mut j| (cells[j].config.algo, cells[j].config.gamma) == key) {
            Some(j) => {
                if cell.summary.mean_final_mse < cells[*j].summary.mean_final_mse {
                    *j = i;
                }
            }
            None => best.push(i),
        }
    }
    best
}

/// Runs every (cell, seed) pair in parallel and merges the records in grid
/// order.
pub fn sweep(config: &SweepConfig) -> Result<SweepResult> {
    let cells = config.cells();
    if cells.is_empty() {
        return Err(DiceError::InvalidConfig("sweep grid is empty".into()));
    }
    for cell in &cells {
        cell.validate()?;
    }
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let pool = thread_pool()?;
    let mut outputs: Vec<RunRecord> =
        pool.install(|| jobs.par_iter().map(|&(i, seed)| run_seed(&cells[i], seed)).collect::<Result<_>>())?;

    let mut results = Vec::with_capacity(cells.len());
    for config in cells.into_iter().rev() {
        let records = outputs.split_off(outputs.len() - config.seeds.len());
        results.push(CellResult { summary: summarize(&config, &records), config, records });
    }
    results.reverse();
    let best = select_best(&results);
    Ok(SweepResult { cells: results, best })
}
