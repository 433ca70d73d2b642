//! Exact (full-expectation) objectives and their gradients.
//!
//! Expectations are written with the occupancy model's matrices:
//! 𝔼_{d_μ}[g] = d_μᵀg, 𝔼_{μ₀}[g] = μ₀ᵀg and
//! 𝔼_p[g(s,a) h(s',a')] = (d_μ∘g)ᵀ P_π h.

use nalgebra::DVector;

use crate::envs::FeatureMap;
use crate::learners::{
    chi2_conjugate, chi2_conjugate_derivative, dualdice_conjugate, dualdice_conjugate_derivative,
    Algorithm, Direction, LearnerState,
};
use crate::mdp::OccupancyModel;

/// ½‖𝒯τ − Dτ‖²_{D⁻¹} + (λ/2)(d_μᵀτ − 1)².
pub fn eval_l(model: &OccupancyModel, tau: &DVector<f64>, lambda: f64) -> f64 {
    let d = model.d_mu();
    let delta = model.apply_t(tau) - d.component_mul(tau);
    let residual: f64 = delta.iter().zip(d.iter()).map(|(r, p)| r * r / p).sum();
    let norm_gap = d.dot(tau) - 1.0;
    0.5 * residual + 0.5 * lambda * norm_gap * norm_gap
}

/// L(τ_w, η, f_κ) + (ξ/2)‖w‖² with τ_w = Xw and f_κ = Xκ.
pub fn eval_saddle_l(
    model: &OccupancyModel,
    x: &FeatureMap,
    w: &DVector<f64>,
    kappa: &DVector<f64>,
    eta: f64,
    lambda: f64,
    xi: f64,
) -> f64 {
    let gamma = model.gamma();
    let d = model.d_mu();
    let tau = x.matrix() * w;
    let f = x.matrix() * kappa;
    let d_tau = d.component_mul(&tau);
    (1.0 - gamma) * model.mu0().dot(&f) + gamma * d_tau.dot(&(model.p_pi() * &f))
        - d_tau.dot(&f)
        - 0.5 * d.dot(&f.component_mul(&f))
        + lambda * (eta * (d.dot(&tau) - 1.0) - 0.5 * eta * eta)
        + 0.5 * xi * w.norm_squared()
}

/// Gradient of [`eval_saddle_l`] as an update direction: ascent in (κ, η),
/// descent in w.
pub fn saddle_direction(
    model: &OccupancyModel,
    x: &FeatureMap,
    w: &DVector<f64>,
    kappa: &DVector<f64>,
    eta: f64,
    lambda: f64,
    xi: f64,
) -> Direction {
    let gamma = model.gamma();
    let d = model.d_mu();
    let xm = x.matrix();
    let tau = xm * w;
    let f = xm * kappa;
    let d_tau = d.component_mul(&tau);

    let grad_f = (1.0 - gamma) * model.mu0() + gamma * model.p_pi().tr_mul(&d_tau)
        - &d_tau
        - d.component_mul(&f);
    let grad_tau = gamma * d.component_mul(&(model.p_pi() * &f)) - d.component_mul(&f) + lambda * eta * d;
    Direction {
        w: -(xm.tr_mul(&grad_tau) + xi * w),
        kappa: xm.tr_mul(&grad_f),
        eta: lambda * (d.dot(&tau) - 1.0 - eta),
    }
}

/// GenDICE J(τ, f, η) with τ = (Xθ)², f = Xκ and the χ² conjugate.
pub fn eval_j(
    model: &OccupancyModel,
    x: &FeatureMap,
    theta: &DVector<f64>,
    kappa: &DVector<f64>,
    eta: f64,
    lambda: f64,
) -> f64 {
    let gamma = model.gamma();
    let d = model.d_mu();
    let tau = (x.matrix() * theta).map(|q| q * q);
    let f = x.matrix() * kappa;
    let d_tau = d.component_mul(&tau);
    (1.0 - gamma) * model.mu0().dot(&f) + gamma * d_tau.dot(&(model.p_pi() * &f))
        - d_tau.dot(&f.map(chi2_conjugate))
        + lambda * (eta * d.dot(&tau) - eta - 0.5 * eta * eta)
}

/// Gradient of J (plus the ridge (ξ/2)‖θ‖²) as an update direction.
pub fn gendice_direction_exact(
    model: &OccupancyModel,
    x: &FeatureMap,
    theta: &DVector<f64>,
    kappa: &DVector<f64>,
    eta: f64,
    lambda: f64,
    xi: f64,
) -> Direction {
    let gamma = model.gamma();
    let d = model.d_mu();
    let xm = x.matrix();
    let q = xm * theta;
    let tau = q.map(|v| v * v);
    let f = xm * kappa;
    let d_tau = d.component_mul(&tau);

    let grad_f = (1.0 - gamma) * model.mu0() + gamma * model.p_pi().tr_mul(&d_tau)
        - d_tau.component_mul(&f.map(chi2_conjugate_derivative));
    let grad_tau = gamma * d.component_mul(&(model.p_pi() * &f))
        - d.component_mul(&f.map(chi2_conjugate))
        + lambda * eta * d;
    let grad_q = 2.0 * q.component_mul(&grad_tau);
    Direction {
        w: -(xm.tr_mul(&grad_q) + xi * theta),
        kappa: xm.tr_mul(&grad_f),
        eta: lambda * (d.dot(&tau) - 1.0 - eta),
    }
}

/// DualDICE saddle objective with ν = Xw, ζ = Xκ, f\*(y) = |y|³/3, plus (ξ/2)‖w‖².
pub fn eval_dualdice(
    model: &OccupancyModel,
    x: &FeatureMap,
    w: &DVector<f64>,
    kappa: &DVector<f64>,
    xi: f64,
) -> f64 {
    let gamma = model.gamma();
    let d = model.d_mu();
    let nu = x.matrix() * w;
    let zeta = x.matrix() * kappa;
    let bellman = &nu - gamma * (model.p_pi() * &nu);
    d.dot(&(zeta.component_mul(&bellman) - zeta.map(dualdice_conjugate)))
        - (1.0 - gamma) * model.mu0().dot(&nu)
        + 0.5 * xi * w.norm_squared()
}

pub fn dualdice_direction_exact(
    model: &OccupancyModel,
    x: &FeatureMap,
    w: &DVector<f64>,
    kappa: &DVector<f64>,
    xi: f64,
) -> Direction {
    let gamma = model.gamma();
    let d = model.d_mu();
    let xm = x.matrix();
    let nu = xm * w;
    let zeta = xm * kappa;
    let bellman = &nu - gamma * (model.p_pi() * &nu);
    let grad_zeta = d.component_mul(&(bellman - zeta.map(dualdice_conjugate_derivative)));
    let d_zeta = d.component_mul(&zeta);
    let grad_nu = &d_zeta - gamma * model.p_pi().tr_mul(&d_zeta) - (1.0 - gamma) * model.mu0();
    Direction {
        w: -(xm.tr_mul(&grad_nu) + xi * w),
        kappa: xm.tr_mul(&grad_zeta),
        eta: 0.0,
    }
}

/// Full-expectation update direction of `algo` at `state`.
pub fn exact_direction(
    algo: Algorithm,
    state: &LearnerState,
    model: &OccupancyModel,
    x: &FeatureMap,
) -> Direction {
    let h = &state.hyper;
    match algo {
        Algorithm::GradientDice | Algorithm::ProjectedGradientDice => {
            saddle_direction(model, x, &state.w, &state.kappa, state.eta, h.lambda, h.xi)
        }
        Algorithm::GenDice => {
            gendice_direction_exact(model, x, &state.w, &state.kappa, state.eta, h.lambda, h.xi)
        }
        Algorithm::DualDice => dualdice_direction_exact(model, x, &state.w, &state.kappa, h.xi),
    }
}

/// Closed-form partials of J on the single-state, two-action example with
/// λ = 1, in the order (∂τ₁, ∂τ₂, ∂f₁, ∂f₂, ∂η), where τ(s₀,aᵢ) = τᵢ².
///
/// ∂f₂ uses τ₂² in its last term (the expansion of J makes the f₂ and f₁
/// partials mirror images).
pub fn hardexample_gradient(tau1: f64, tau2: f64, f1: f64, f2: f64, eta: f64) -> [f64; 5] {
    let (t1sq, t2sq) = (tau1 * tau1, tau2 * tau2);
    [
        0.5 * tau1 * f1 + 0.5 * tau1 * f2 - tau1 * (f1 + 0.25 * f1 * f1) + eta * tau1,
        0.5 * tau2 * f1 + 0.5 * tau2 * f2 - tau2 * (f2 + 0.25 * f2 * f2) + eta * tau2,
        0.25 * t1sq + 0.25 * t2sq - 0.5 * t1sq * (1.0 + 0.5 * f1),
        0.25 * t1sq + 0.25 * t2sq - 0.5 * t2sq * (1.0 + 0.5 * f2),
        0.5 * t1sq + 0.5 * t2sq - 1.0 - eta,
    ]
}
