use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::closed_form::{c_solve, closed_form};
use super::expected_update;
use crate::envs::FeatureMap;
use crate::error::{DiceError, Result};
use crate::mdp::OccupancyModel;

/// Relative eigenvalue cut for the rank of AᵀC⁻¹A.
pub const PATH_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct PathPoint {
    pub xi: f64,
    pub l1_direct: f64,
    pub l1_spectral: f64,
    pub l2_direct: f64,
    pub l2_spectral: f64,
    #[serde(skip)]
    pub w_inf: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct RegularizationPath {
    pub points: Vec<PathPoint>,
    /// Rank r of AᵀC⁻¹A.
    pub rank: usize,
    /// ‖u_{r+1:}‖ with u = QXᵀd_μ.
    pub null_mass: f64,
    /// Whether XC⁻¹Xᵀ is positive definite (only possible when K = N_sa).
    pub metric_positive_definite: bool,
}

/// L1 = d_μᵀXw − 1 and L2 = ‖DXw − P_πᵀDXw‖²_{XC⁻¹Xᵀ} along w∞,ξ, each
/// evaluated directly from w∞,ξ and through the spectrum of AᵀC⁻¹A.
pub fn regularization_path(
    model: &OccupancyModel,
    x: &FeatureMap,
    lambda: f64,
    xis: &[f64],
) -> Result<RegularizationPath> {
    if model.gamma() != 1.0 {
        return Err(DiceError::AssumptionViolated("regularization path requires gamma = 1".into()));
    }
    if let Some(xi) = xis.iter().find(|xi| !(**xi > 0.0)) {
        return Err(DiceError::InvalidConfig(format!("path needs xi > 0, got {xi}")));
    }
    let xm = x.matrix();
    let k = x.dim();
    let base = expected_update(model, x, lambda, 0.0)?;
    let normal = base.a.tr_mul(&c_solve(&base.c, &base.a)?);
    let normal = 0.5 * (&normal + normal.transpose());
    // AᵀC⁻¹A = QᵀΛQ with Q = Vᵀ
    let eig = SymmetricEigen::new(normal);
    let v = xm.tr_mul(model.d_mu());
    let u = eig.eigenvectors.tr_mul(&v);
    let top = eig.eigenvalues.amax();
    let positive: Vec<bool> = eig.eigenvalues.iter().map(|&e| e > PATH_RANK_TOL * top).collect();
    let rank = positive.iter().filter(|&&p| p).count();
    let null_mass = u
        .iter()
        .zip(&positive)
        .filter(|(_, &p)| !p)
        .map(|(ui, _)| ui * ui)
        .sum::<f64>()
        .sqrt();
    if !(null_mass > PATH_RANK_TOL * u.norm()) {
        return Err(DiceError::AssumptionViolated(
            "u has no mass outside the range of A^T C^-1 A".into(),
        ));
    }

    let n = model.n_pairs();
    let d = model.d_matrix();
    let metric_positive_definite = k == n;
    let mut points = Vec::with_capacity(xis.len());
    for &xi in xis {
        // Λξ entries 1/(ξ + λᵢ), with 1/ξ on the detected null space
        let lam_xi: Vec<f64> = eig
            .eigenvalues
            .iter()
            .zip(&positive)
            .map(|(&e, &p)| if p { 1.0 / (xi + e) } else { 1.0 / xi })
            .collect();
        let s: f64 = u.iter().zip(&lam_xi).map(|(ui, l)| ui * ui * l).sum();
        let s2: f64 = u.iter().zip(&lam_xi).map(|(ui, l)| ui * ui * l * l).sum();
        let beta = 1.0 + lambda * s;
        let l1_spectral = lambda * s / beta - 1.0;
        let l2_spectral = lambda * lambda * (s - xi * s2) / (beta * beta);

        let eu = expected_update(model, x, lambda, xi)?;
        let w_inf = closed_form(&eu, model, x)?.w_inf;
        let l1_direct = v.dot(&w_inf) - 1.0;
        let dxw = &d * (xm * &w_inf);
        let resid = &dxw - model.p_pi().tr_mul(&dxw);
        let xt_r = xm.tr_mul(&resid);
        let y = c_solve(&eu.c, &DMatrix::from_column_slice(k, 1, xt_r.as_slice()))?;
        let l2_direct = xt_r.dot(&y.column(0));

        points.push(PathPoint { xi, l1_direct, l1_spectral, l2_direct, l2_spectral, w_inf });
    }
    Ok(RegularizationPath { points, rank, null_mass, metric_positive_definite })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{boyan_chain, hard_mdp, BoyanVariant};

    #[test]
    fn hard_mdp_path_approaches_truth() {
        let model = hard_mdp().occupancy().unwrap();
        let path = regularization_path(&model, &FeatureMap::tabular(2), 1.0, &[1e-1, 1e-3, 1e-6]).unwrap();
        assert_eq!(path.rank, 1);
        let last = path.points.last().unwrap();
        assert!((&last.w_inf - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-5);
        for p in &path.points {
            assert!((p.l1_direct - p.l1_spectral).abs() < 1e-8);
            assert!((p.l2_direct - p.l2_spectral).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_discounted_models() {
        let model = boyan_chain(BoyanVariant::Episodic).occupancy().unwrap();
        let err = regularization_path(&model, &FeatureMap::tabular(26), 1.0, &[0.1]).unwrap_err();
        assert!(matches!(err, DiceError::AssumptionViolated(_)));
    }
}
