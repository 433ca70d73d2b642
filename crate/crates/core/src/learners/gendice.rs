use nalgebra::DVector;

use super::{dot, Direction, LearnerState};
use crate::data::TransitionSample;
use crate::envs::FeatureMap;
use crate::error::Result;

/// χ² conjugate φ\*(u) = u + u²/4.
pub fn chi2_conjugate(u: f64) -> f64 {
    u + 0.25 * u * u
}

pub fn chi2_conjugate_derivative(u: f64) -> f64 {
    1.0 + 0.5 * u
}

/// Per-sample GenDICE direction with τ = (xᵀθ)², f = xᵀκ and the χ² conjugate.
///
/// Ascent on κ and η, descent on θ (stored in `state.w`); the ridge ξ applies to θ.
pub fn gendice_direction(
    state: &LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Direction {
    let h = &state.hyper;
    let x0 = x.row(sample.init_pair(n_actions));
    let xt = x.row(sample.pair(n_actions));
    let xn = x.row(sample.next_pair(n_actions));

    let q = dot(xt, &state.w);
    let tau = q * q;
    let f = dot(xt, &state.kappa);
    let f_next = dot(xn, &state.kappa);

    let k = x.dim();
    let slope = chi2_conjugate_derivative(f);
    let kappa = DVector::from_fn(k, |i, _| {
        (1.0 - h.gamma) * x0[i] + h.gamma * tau * xn[i] - tau * slope * xt[i]
    });
    // ∂J/∂τ(s,a) per sample, chained through τ = q²
    let dj_dtau = h.gamma * f_next - chi2_conjugate(f) + h.lambda * state.eta;
    let w = DVector::from_fn(k, |i, _| -(2.0 * q * dj_dtau * xt[i] + h.xi * state.w[i]));
    Direction { w, kappa, eta: h.lambda * (tau - 1.0 - state.eta) }
}

pub fn gendice_step(
    state: &mut LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Result<()> {
    let dir = gendice_direction(state, sample, x, n_actions);
    state.apply(&dir)
}
