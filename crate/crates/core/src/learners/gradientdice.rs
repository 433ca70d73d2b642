use nalgebra::DVector;

use super::{dot, Direction, LearnerState};
use crate::data::TransitionSample;
use crate::envs::FeatureMap;
use crate::error::Result;

/// GradientDICE update direction for one sample.
///
/// With x₀, x, x' the features of the μ₀ draw, (s,a) and (s',a'):
///
/// ```text
/// δ  = (1−γ)x₀ + γ(xᵀw)x' − (xᵀw)x
/// dκ = δ − (xᵀκ)x
/// dη = λ(xᵀw − 1 − η)
/// dw = −(γ(x'ᵀκ)x − (xᵀκ)x + ληx + ξw)
/// ```
///
/// All right-hand sides read the pre-step parameters.
pub fn gradientdice_direction(
    state: &LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Direction {
    let h = &state.hyper;
    let x0 = x.row(sample.init_pair(n_actions));
    let xt = x.row(sample.pair(n_actions));
    let xn = x.row(sample.next_pair(n_actions));

    let xw = dot(xt, &state.w);
    let xk = dot(xt, &state.kappa);
    let xnk = dot(xn, &state.kappa);

    let k = x.dim();
    let kappa = DVector::from_fn(k, |i, _| {
        (1.0 - h.gamma) * x0[i] + h.gamma * xw * xn[i] - xw * xt[i] - xk * xt[i]
    });
    let w = DVector::from_fn(k, |i, _| {
        -((h.gamma * xnk - xk + h.lambda * state.eta) * xt[i] + h.xi * state.w[i])
    });
    Direction { w, kappa, eta: h.lambda * (xw - 1.0 - state.eta) }
}

pub fn gradientdice_step(
    state: &mut LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Result<()> {
    let dir = gradientdice_direction(state, sample, x, n_actions);
    state.apply(&dir)
}
