use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, TransitionSample};
use crate::envs::{FeatureMap, RANK_TOL};
use crate::error::{DiceError, Result};
use crate::mdp::OccupancyModel;

/// Mean dynamics of GradientDICE, d ← d + α(Gd + g) with d = [κ; w; η].
#[derive(Debug, Clone)]
pub struct ExpectedUpdate {
    /// Xᵀ(I − γP_πᵀ)DX
    pub a: DMatrix<f64>,
    /// XᵀDX
    pub c: DMatrix<f64>,
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub xi: f64,
}

impl ExpectedUpdate {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Assembles G from its blocks `[−C, −A, 0; Aᵀ, −ξI, −λv; 0, λvᵀ, −λ]`, v = Xᵀd_μ.
fn assemble_g(a: &DMatrix<f64>, c: &DMatrix<f64>, v: &DVector<f64>, lambda: f64, xi: f64) -> DMatrix<f64> {
    let k = a.nrows();
    let mut g = DMatrix::zeros(2 * k + 1, 2 * k + 1);
    g.view_mut((0, 0), (k, k)).copy_from(&(-c));
    g.view_mut((0, k), (k, k)).copy_from(&(-a));
    g.view_mut((k, 0), (k, k)).copy_from(&a.transpose());
    g.view_mut((k, k), (k, k)).fill_diagonal(-xi);
    g.view_mut((k, 2 * k), (k, 1)).copy_from(&(-lambda * v));
    g.view_mut((2 * k, k), (1, k)).copy_from(&(lambda * v.transpose()));
    g[(2 * k, 2 * k)] = -lambda;
    g
}

pub fn expected_update(model: &OccupancyModel, x: &FeatureMap, lambda: f64, xi: f64) -> Result<ExpectedUpdate> {
    let xm = x.matrix();
    if xm.nrows() != model.n_pairs() {
        return Err(DiceError::InvalidConfig(format!(
            "feature map has {} rows, model has {} pairs",
            xm.nrows(),
            model.n_pairs()
        )));
    }
    let min_sv = xm.clone().singular_values().min();
    if !(min_sv > RANK_TOL) {
        return Err(DiceError::RankDeficientFeatures(min_sv));
    }
    let gamma = model.gamma();
    let n = model.n_pairs();
    let dx = DMatrix::from_fn(n, xm.ncols(), |i, j| model.d_mu()[i] * xm[(i, j)]);
    let c = xm.tr_mul(&dx);
    let a = xm.tr_mul(&(&dx - gamma * model.p_pi().tr_mul(&dx)));
    let v = xm.tr_mul(model.d_mu());
    let k = xm.ncols();
    let g_mat = assemble_g(&a, &c, &v, lambda, xi);
    let mut g_vec = DVector::zeros(2 * k + 1);
    g_vec.rows_mut(0, k).copy_from(&((1.0 - gamma) * xm.tr_mul(model.mu0())));
    g_vec[2 * k] = -lambda;
    Ok(ExpectedUpdate { a, c, g_mat, g_vec, gamma, lambda, xi })
}

/// Single-sample G_{t+1}, g_{t+1}.
pub fn sample_update(
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
    gamma: f64,
    lambda: f64,
    xi: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = x.dim();
    let x0 = DVector::from_column_slice(x.row(sample.init_pair(n_actions)));
    let xt = DVector::from_column_slice(x.row(sample.pair(n_actions)));
    let xn = DVector::from_column_slice(x.row(sample.next_pair(n_actions)));
    let td = &xt - gamma * &xn;

    let mut g = DMatrix::zeros(2 * k + 1, 2 * k + 1);
    g.view_mut((0, 0), (k, k)).copy_from(&(-&xt * xt.transpose()));
    g.view_mut((0, k), (k, k)).copy_from(&(-&td * xt.transpose()));
    g.view_mut((k, 0), (k, k)).copy_from(&(&xt * td.transpose()));
    g.view_mut((k, k), (k, k)).fill_diagonal(-xi);
    g.view_mut((k, 2 * k), (k, 1)).copy_from(&(-lambda * &xt));
    g.view_mut((2 * k, k), (1, k)).copy_from(&(lambda * xt.transpose()));
    g[(2 * k, 2 * k)] = -lambda;

    let mut gv = DVector::zeros(2 * k + 1);
    gv.rows_mut(0, k).copy_from(&((1.0 - gamma) * x0));
    gv[2 * k] = -lambda;
    (g, gv)
}

/// Dataset average of the per-sample G_{t+1}, g_{t+1}.
pub fn empirical_update(
    ds: &Dataset,
    x: &FeatureMap,
    n_actions: usize,
    gamma: f64,
    lambda: f64,
    xi: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let dim = 2 * x.dim() + 1;
    let mut g = DMatrix::zeros(dim, dim);
    let mut gv = DVector::zeros(dim);
    for s in &ds.samples {
        let (gs, gvs) = sample_update(s, x, n_actions, gamma, lambda, xi);
        g += gs;
        gv += gvs;
    }
    let n = ds.len() as f64;
    (g / n, gv / n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCertificate {
    pub max_real_part: f64,
    pub det_nonzero: bool,
}

impl EigenCertificate {
    pub fn certified(&self) -> bool {
        self.max_real_part < 0.0 && self.det_nonzero
    }
}

/// Relative singular-value cut used to call a matrix singular.
pub const SINGULAR_TOL: f64 = 1e-10;

pub(crate) fn is_singular(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().singular_values();
    let max = sv.max();
    !(max > 0.0) || sv.min() <= SINGULAR_TOL * max
}

/// Eigenvalues of G have strictly negative real parts and det(G) ≠ 0.
pub fn eigen_certificate(eu: &ExpectedUpdate) -> Result<EigenCertificate> {
    if eu.xi == 0.0 && is_singular(&eu.a) {
        return Err(DiceError::AssumptionViolated("xi = 0 and A is singular".into()));
    }
    let max_real_part = eu
        .g_mat
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EigenCertificate { max_real_part, det_nonzero: !is_singular(&eu.g_mat) })
}
