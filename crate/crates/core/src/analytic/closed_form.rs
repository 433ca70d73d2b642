use nalgebra::{DMatrix, DVector};

use super::expected::{is_singular, ExpectedUpdate};
use crate::envs::FeatureMap;
use crate::error::{DiceError, Result};
use crate::mdp::OccupancyModel;

/// Closed-form limits of GradientDICE under linear features.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    /// Ξ = (ξI + AᵀC⁻¹A)⁻¹
    pub xi_mat: DMatrix<f64>,
    /// z = ΞXᵀd_μ
    pub z: DVector<f64>,
    /// β = 1 + λd_μᵀXΞXᵀd_μ
    pub beta: f64,
    /// Block-inversion formula for lim w_t.
    pub w_inf: DVector<f64>,
    /// A\* = AᵀC⁻¹A + λXᵀd_μd_μᵀX + ξI
    pub a_star: DMatrix<f64>,
    /// b\* = (1−γ)AᵀC⁻¹Xᵀμ₀ + λXᵀd_μ
    pub b_star: DVector<f64>,
    /// A\*⁻¹b\*
    pub w_kkt: DVector<f64>,
    /// −G⁻¹g = [κ; w; η]
    pub saddle: DVector<f64>,
}

impl ClosedForm {
    pub fn saddle_w(&self) -> DVector<f64> {
        let k = self.w_inf.len();
        self.saddle.rows(k, k).into_owned()
    }

    pub fn saddle_kappa(&self) -> DVector<f64> {
        let k = self.w_inf.len();
        self.saddle.rows(0, k).into_owned()
    }

    pub fn saddle_eta(&self) -> f64 {
        self.saddle[self.saddle.len() - 1]
    }

    /// y\* = [κ\*; η\*].
    pub fn saddle_y(&self) -> DVector<f64> {
        let k = self.w_inf.len();
        DVector::from_fn(k + 1, |i, _| if i < k { self.saddle[i] } else { self.saddle_eta() })
    }
}

fn solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if is_singular(m) {
        return Err(DiceError::SingularSystem(what.into()));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| DiceError::SingularSystem(what.into()))
}

fn solve_vec(m: &DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let sol = solve(m, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), what)?;
    Ok(sol.column(0).into_owned())
}

/// C⁻¹ applied to `rhs` through a Cholesky factorization.
pub(crate) fn c_solve(c: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| DiceError::AssumptionViolated("C is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

pub fn closed_form(eu: &ExpectedUpdate, model: &OccupancyModel, x: &FeatureMap) -> Result<ClosedForm> {
    let (gamma, lambda, xi) = (eu.gamma, eu.lambda, eu.xi);
    let k = eu.dim();
    let xm = x.matrix();
    let v = xm.tr_mul(model.d_mu());
    let x_mu0 = xm.tr_mul(model.mu0());

    let cinv_a = c_solve(&eu.c, &eu.a)?;
    let normal = eu.a.tr_mul(&cinv_a);
    let m = &normal + xi * DMatrix::identity(k, k);
    let xi_mat = solve(&m, &DMatrix::identity(k, k), "xi I + A^T C^-1 A")?;

    // h = AᵀC⁻¹Xᵀμ₀
    let cinv_xmu0 = c_solve(&eu.c, &DMatrix::from_column_slice(k, 1, x_mu0.as_slice()))?;
    let h = eu.a.tr_mul(&cinv_xmu0).column(0).into_owned();

    let z = &xi_mat * &v;
    let beta = 1.0 + lambda * v.dot(&z);
    let w_inf = (1.0 - gamma) * (&xi_mat * &h) + (lambda / beta) * (1.0 - (1.0 - gamma) * z.dot(&h)) * &z;

    let a_star = &m + lambda * &v * v.transpose();
    let b_star = (1.0 - gamma) * &h + lambda * &v;
    let w_kkt = solve_vec(&a_star, &b_star, "A_star")?;

    let saddle = -solve_vec(&eu.g_mat, &eu.g_vec, "G")?;

    Ok(ClosedForm { xi_mat, z, beta, w_inf, a_star, b_star, w_kkt, saddle })
}
