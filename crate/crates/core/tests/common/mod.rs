//! Oracles shared by the integration tests. None of these call into the
//! library's analytic code; they work from the raw MDP tables.
#![allow(dead_code)]

use dicekit::envs::EnvInstance;
use dicekit::learners::{Direction, LearnerState};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// P_π assembled entry by entry from p(s'|s,a) and π(a'|s').
pub fn p_pi(env: &EnvInstance) -> DMatrix<f64> {
    let (ns, na) = (env.mdp.n_states(), env.mdp.n_actions());
    let n = ns * na;
    DMatrix::from_fn(n, n, |i, j| {
        let (s, a) = (i / na, i % na);
        let (s2, a2) = (j / na, j % na);
        env.mdp.next_state_probs(s, a)[s2] * env.policy.prob(s2, a2)
    })
}

pub fn mu0(env: &EnvInstance) -> DVector<f64> {
    let na = env.mdp.n_actions();
    DVector::from_fn(env.mdp.n_pairs(), |i, _| env.mdp.initial_dist()[i / na] * env.policy.prob(i / na, i % na))
}

/// d_γ by fixed-point iteration: v ← (1−γ)μ₀ + γP_πᵀv, or v ← P_πᵀv at γ = 1.
pub fn iterate_d_gamma(env: &EnvInstance, max_iters: usize) -> DVector<f64> {
    let p = p_pi(env);
    let m0 = mu0(env);
    let gamma = env.mdp.gamma();
    let n = m0.len();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..max_iters {
        let next = if gamma < 1.0 { (1.0 - gamma) * &m0 + gamma * p.tr_mul(&v) } else { p.tr_mul(&v) };
        let done = (&next - &v).amax() < 1e-16;
        v = next;
        if done {
            break;
        }
    }
    v
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

pub fn randomize_state(state: &mut LearnerState, rng: &mut ChaCha8Rng) {
    let k = state.w.len();
    state.w = random_vec(rng, k, 0.2, 1.5);
    state.kappa = random_vec(rng, k, -1.0, 1.0);
    state.eta = rng.random_range(-1.0..1.0);
}

/// [κ; w; η] of a direction.
pub fn flat(d: &Direction) -> DVector<f64> {
    d.stacked()
}

/// Least-squares slope of ln y against ln x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// 𝔼 of a per-sample direction, by enumerating every (initial pair, pair,
/// next pair) triple with weight μ₀ · d_μ · P_π.
pub fn enumerated_direction(
    algo: dicekit::learners::Algorithm,
    state: &LearnerState,
    env: &EnvInstance,
    x: &dicekit::envs::FeatureMap,
) -> DVector<f64> {
    let na = env.mdp.n_actions();
    let n = env.mdp.n_pairs();
    let m0 = mu0(env);
    let p = p_pi(env);
    let mut total = DVector::zeros(2 * x.dim() + 1);
    for i0 in (0..n).filter(|&i| m0[i] > 0.0) {
        for i in 0..n {
            for j in (0..n).filter(|&j| p[(i, j)] > 0.0) {
                let sample = dicekit::data::TransitionSample {
                    init_s: i0 / na,
                    init_a: i0 % na,
                    s: i / na,
                    a: i % na,
                    r: env.mdp.reward(i / na, i % na),
                    s_next: j / na,
                    a_next: j % na,
                };
                let dir = dicekit::learners::sample_direction(algo, state, &sample, x, na);
                total += m0[i0] * env.d_mu[i] * p[(i, j)] * dir.stacked();
            }
        }
    }
    total
}
