use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::expected_update;
use crate::envs::FeatureMap;
use crate::error::{DiceError, Result};
use crate::mdp::OccupancyModel;

/// Minimizer and value of ½xᵀHx + gᵀx over ‖x‖ ≤ radius, H symmetric PSD.
///
/// Interior solutions come from the (pseudo-)inverse; boundary solutions solve
/// the secular equation ‖(H + μI)⁻¹g‖ = radius for μ > 0 by bisection.
pub fn minimize_quadratic_on_ball(h: &DMatrix<f64>, g: &DVector<f64>, radius: f64) -> (DVector<f64>, f64) {
    let value = |x: &DVector<f64>| 0.5 * x.dot(&(h * x)) + g.dot(x);
    let eig = SymmetricEigen::new(0.5 * (h + h.transpose()));
    let vals = eig.eigenvalues.map(|e| e.max(0.0));
    let gt = eig.eigenvectors.tr_mul(g);
    let scale = vals.amax().max(1.0);
    let tiny = 1e-12 * scale;
    let gnorm = g.norm();
    if gnorm == 0.0 {
        let x = DVector::zeros(g.len());
        return (x, 0.0);
    }
    let from_spectrum = |coef: DVector<f64>| &eig.eigenvectors * coef;

    // interior candidate exists when g has no component on the null space of H
    let null_ok = gt
        .iter()
        .zip(vals.iter())
        .all(|(gi, &e)| e > tiny || gi.abs() <= 1e-14 * gnorm);
    if null_ok {
        let coef = DVector::from_fn(gt.len(), |i, _| if vals[i] > tiny { -gt[i] / vals[i] } else { 0.0 });
        if coef.norm() <= radius {
            let x = from_spectrum(coef);
            let v = value(&x);
            return (x, v);
        }
    }

    let norm_at = |mu: f64| {
        gt.iter()
            .zip(vals.iter())
            .map(|(gi, e)| (gi / (e + mu)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (mut lo, mut hi) = (0.0f64, gnorm / radius);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    let coef = DVector::from_fn(gt.len(), |i, _| -gt[i] / (vals[i] + mu));
    let x = from_spectrum(coef);
    let v = value(&x);
    (x, v)
}

/// The GradientDICE saddle function L(w, y) + (ξ/2)‖w‖² split into its
/// quadratic pieces in y (for fixed w) and in w (for fixed y).
struct SaddleQuadratics {
    c: DMatrix<f64>,
    a: DMatrix<f64>,
    x_mu0: DVector<f64>,
    v: DVector<f64>,
    gamma: f64,
    lambda: f64,
    xi: f64,
}

impl SaddleQuadratics {
    fn new(model: &OccupancyModel, x: &FeatureMap, lambda: f64, xi: f64) -> Result<Self> {
        let eu = expected_update(model, x, lambda, xi)?;
        Ok(Self {
            x_mu0: x.matrix().tr_mul(model.mu0()),
            v: x.matrix().tr_mul(model.d_mu()),
            c: eu.c,
            a: eu.a,
            gamma: model.gamma(),
            lambda,
            xi,
        })
    }

    /// max_{‖y'‖≤R} L(w, y').
    fn max_over_y(&self, w: &DVector<f64>, radius: f64) -> f64 {
        let k = w.len();
        let mut h = DMatrix::zeros(k + 1, k + 1);
        h.view_mut((0, 0), (k, k)).copy_from(&self.c);
        h[(k, k)] = self.lambda;
        let mut b = DVector::zeros(k + 1);
        b.rows_mut(0, k).copy_from(&((1.0 - self.gamma) * &self.x_mu0 - &self.a * w));
        b[k] = self.lambda * (self.v.dot(w) - 1.0);
        let (_, min) = minimize_quadratic_on_ball(&h, &(-b), radius);
        -min + 0.5 * self.xi * w.norm_squared()
    }

    /// min_{‖w'‖≤R} L(w', y).
    fn min_over_w(&self, y: &DVector<f64>, radius: f64) -> f64 {
        let k = y.len() - 1;
        let kappa = y.rows(0, k).into_owned();
        let eta = y[k];
        let h = self.xi * DMatrix::identity(k, k);
        let lin = -self.a.tr_mul(&kappa) + self.lambda * eta * &self.v;
        let constant = (1.0 - self.gamma) * self.x_mu0.dot(&kappa) - 0.5 * kappa.dot(&(&self.c * &kappa))
            - self.lambda * eta
            - 0.5 * self.lambda * eta * eta;
        let (_, min) = minimize_quadratic_on_ball(&h, &lin, radius);
        min + constant
    }
}

/// ε_opt(w, y) = max_{y'∈Y} L(w, y') − min_{w'∈W} L(w', y) over origin-centred
/// balls W, Y; y = [κ; η].
#[allow(clippy::too_many_arguments)]
pub fn epsilon_opt(
    model: &OccupancyModel,
    x: &FeatureMap,
    w: &DVector<f64>,
    y: &DVector<f64>,
    lambda: f64,
    xi: f64,
    w_radius: f64,
    y_radius: f64,
) -> Result<f64> {
    if !(w_radius > 0.0 && y_radius > 0.0) {
        return Err(DiceError::InvalidConfig("ball radii must be > 0".into()));
    }
    if w.len() != x.dim() || y.len() != x.dim() + 1 {
        return Err(DiceError::InvalidConfig("w must have K entries and y K + 1".into()));
    }
    let q = SaddleQuadratics::new(model, x, lambda, xi)?;
    Ok(q.max_over_y(w, y_radius) - q.min_over_w(y, w_radius))
}
