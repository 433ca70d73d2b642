use nalgebra::DVector;

use super::{dot, Direction, LearnerState};
use crate::data::TransitionSample;
use crate::envs::FeatureMap;
use crate::error::Result;

/// f\*(y) = |y|³/3, the conjugate of f(x) = (2/3)|x|^{3/2}.
pub fn dualdice_conjugate(y: f64) -> f64 {
    y.abs().powi(3) / 3.0
}

pub fn dualdice_conjugate_derivative(y: f64) -> f64 {
    y * y.abs()
}

/// Per-sample direction for
/// `min_ν max_ζ 𝔼_p[(ν(s,a) − γν(s',a'))ζ(s,a) − f*(ζ(s,a))] − (1−γ)𝔼_μ₀[ν]`
/// with ν = Xw and ζ = Xκ. η is unused.
pub fn dualdice_direction(
    state: &LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Direction {
    let h = &state.hyper;
    let x0 = x.row(sample.init_pair(n_actions));
    let xt = x.row(sample.pair(n_actions));
    let xn = x.row(sample.next_pair(n_actions));

    let nu = dot(xt, &state.w);
    let nu_next = dot(xn, &state.w);
    let zeta = dot(xt, &state.kappa);

    let k = x.dim();
    let residual = nu - h.gamma * nu_next - dualdice_conjugate_derivative(zeta);
    let kappa = DVector::from_fn(k, |i, _| residual * xt[i]);
    let w = DVector::from_fn(k, |i, _| {
        -(zeta * (xt[i] - h.gamma * xn[i]) - (1.0 - h.gamma) * x0[i] + h.xi * state.w[i])
    });
    Direction { w, kappa, eta: 0.0 }
}

pub fn dualdice_step(
    state: &mut LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Result<()> {
    let dir = dualdice_direction(state, sample, x, n_actions);
    state.apply(&dir)
}
