use nalgebra::DVector;

use crate::data::Dataset;
use crate::mdp::OccupancyModel;

/// (1/N_sa) Σ (τ(s,a) − τ\*(s,a))².
pub fn mse_tau(pred: &DVector<f64>, model: &OccupancyModel) -> f64 {
    let truth = model.tau_star();
    assert_eq!(pred.len(), truth.len(), "prediction has wrong length");
    (pred - truth).norm_squared() / truth.len() as f64
}

/// ρ̂ = (1/N) Σ τ(sᵢ, aᵢ) rᵢ over the dataset.
pub fn estimate_rho(pred_tau: &DVector<f64>, ds: &Dataset, n_actions: usize) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let total: f64 = ds.samples.iter().map(|s| pred_tau[s.pair(n_actions)] * s.r).sum();
    total / ds.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn quarter(len: usize) -> usize {
    len.div_ceil(4).max(1).min(len)
}

/// Variance of the first quarter of a curve.
pub fn first_quartile_variance(curve: &[f64]) -> f64 {
    variance(&curve[..quarter(curve.len())])
}

/// Variance of the last quarter of a curve.
pub fn last_quartile_variance(curve: &[f64]) -> f64 {
    variance(&curve[curve.len() - quarter(curve.len())..])
}
