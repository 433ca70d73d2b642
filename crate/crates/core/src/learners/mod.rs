//! Primal-dual stochastic learners for the density ratio.
//!
//! Every learner keeps the same parameter layout: `w` is the primal vector
//! (τ weights for GradientDICE, θ for GenDICE, ν weights for DualDICE), `kappa`
//! the dual function weights and `eta` the normalization multiplier.
//! A [`Direction`] is the signed update: parameters move by `+α·direction`, so
//! the `w` component is already a negated gradient.

mod dualdice;
mod gendice;
mod gradientdice;
mod projected;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::TransitionSample;
use crate::envs::FeatureMap;
use crate::error::{DiceError, Result};

pub use dualdice::{dualdice_direction, dualdice_step, dualdice_conjugate, dualdice_conjugate_derivative};
pub use gendice::{chi2_conjugate, chi2_conjugate_derivative, gendice_direction, gendice_step};
pub use gradientdice::{gradientdice_direction, gradientdice_step};
pub use projected::{
    project_to_ball, projected_gradientdice_run, sample_blocks, ProjectedConfig, ProjectedOutput,
    SampleBlocks,
};

/// Any |parameter| above this counts as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GradientDICE")]
    GradientDice,
    #[serde(rename = "ProjectedGradientDICE")]
    ProjectedGradientDice,
    #[serde(rename = "GenDICE")]
    GenDice,
    #[serde(rename = "DualDICE")]
    DualDice,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::GradientDice,
        Algorithm::ProjectedGradientDice,
        Algorithm::GenDice,
        Algorithm::DualDice,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::GradientDice => "GradientDICE",
            Algorithm::ProjectedGradientDice => "ProjectedGradientDICE",
            Algorithm::GenDice => "GenDICE",
            Algorithm::DualDice => "DualDICE",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = DiceError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DiceError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Step-size sequence α_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant { alpha: f64 },
    /// α_t = alpha0 / (t + 1)^decay with decay in (0.5, 1].
    RobbinsMonro { alpha0: f64, decay: f64 },
}

impl LrSchedule {
    pub fn rate(&self, t: u64) -> f64 {
        match *self {
            LrSchedule::Constant { alpha } => alpha,
            LrSchedule::RobbinsMonro { alpha0, decay } => alpha0 / ((t + 1) as f64).powf(decay),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::Constant { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            LrSchedule::RobbinsMonro { alpha0, decay }
                if alpha0 > 0.0 && decay > 0.5 && decay <= 1.0 =>
            {
                Ok(())
            }
            other => Err(DiceError::InvalidConfig(format!("invalid learning rate {other:?}"))),
        }
    }
}

/// Problem and optimizer constants shared by all learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub gamma: f64,
    pub lambda: f64,
    pub xi: f64,
    pub lr: LrSchedule,
    /// Scales the step size of the dual (κ, η) updates.
    #[serde(default = "one")]
    pub dual_lr_mult: f64,
}

fn one() -> f64 {
    1.0
}

impl Hyper {
    pub fn new(gamma: f64, lambda: f64, xi: f64, lr: LrSchedule) -> Self {
        Self { gamma, lambda, xi, lr, dual_lr_mult: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(DiceError::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.lambda > 0.0) {
            return Err(DiceError::InvalidConfig("lambda must be > 0".into()));
        }
        if !(self.xi >= 0.0) {
            return Err(DiceError::InvalidConfig("xi must be >= 0".into()));
        }
        if !(self.dual_lr_mult > 0.0) {
            return Err(DiceError::InvalidConfig("dual_lr_mult must be > 0".into()));
        }
        self.lr.validate()
    }
}

/// Signed update direction for (w, κ, η).
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub w: DVector<f64>,
    pub kappa: DVector<f64>,
    pub eta: f64,
}

impl Direction {
    pub fn zeros(k: usize) -> Self {
        Self { w: DVector::zeros(k), kappa: DVector::zeros(k), eta: 0.0 }
    }

    /// Concatenation [κ; w; η], the ordering of the expected-update system.
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.kappa, &self.w, self.eta)
    }

    pub fn add_scaled(&mut self, other: &Direction, scale: f64) {
        self.w.axpy(scale, &other.w, 1.0);
        self.kappa.axpy(scale, &other.kappa, 1.0);
        self.eta += scale * other.eta;
    }
}

pub(crate) fn stack(kappa: &DVector<f64>, w: &DVector<f64>, eta: f64) -> DVector<f64> {
    let k = w.len();
    DVector::from_fn(2 * k + 1, |i, _| match i {
        i if i < k => kappa[i],
        i if i < 2 * k => w[i - k],
        _ => eta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub w: DVector<f64>,
    pub kappa: DVector<f64>,
    pub eta: f64,
    pub t: u64,
    pub hyper: Hyper,
}

impl LearnerState {
    pub fn zeros(k: usize, hyper: Hyper) -> Self {
        Self { w: DVector::zeros(k), kappa: DVector::zeros(k), eta: 0.0, t: 0, hyper }
    }

    /// d = [κ; w; η].
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.kappa, &self.w, self.eta)
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite()
            && self.w.iter().chain(self.kappa.iter()).all(|v| v.is_finite())
    }

    fn within_bound(&self) -> bool {
        self.eta.abs() <= DIVERGENCE_BOUND
            && self
                .w
                .iter()
                .chain(self.kappa.iter())
                .all(|v| v.abs() <= DIVERGENCE_BOUND)
    }

    /// Moves along `dir` with the current step size and advances the counter.
    pub fn apply(&mut self, dir: &Direction) -> Result<()> {
        let alpha = self.hyper.lr.rate(self.t);
        let dual = alpha * self.hyper.dual_lr_mult;
        self.w.axpy(alpha, &dir.w, 1.0);
        self.kappa.axpy(dual, &dir.kappa, 1.0);
        self.eta += dual * dir.eta;
        self.t += 1;
        if self.is_finite() && self.within_bound() {
            Ok(())
        } else {
            Err(DiceError::Diverged { step: self.t })
        }
    }

    /// One stochastic step of `algo` (the projected variant is run through
    /// [`projected_gradientdice_run`] instead).
    pub fn step(&mut self, algo: Algorithm, sample: &TransitionSample, x: &FeatureMap, n_actions: usize) -> Result<()> {
        let dir = sample_direction(algo, self, sample, x, n_actions);
        self.apply(&dir)
    }

    pub fn predict_tau(&self, x: &FeatureMap, algo: Algorithm) -> DVector<f64> {
        predict_tau(self, x, algo)
    }
}

/// Per-sample update direction of `algo` at `state`.
pub fn sample_direction(
    algo: Algorithm,
    state: &LearnerState,
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
) -> Direction {
    match algo {
        Algorithm::GradientDice | Algorithm::ProjectedGradientDice => {
            gradientdice_direction(state, sample, x, n_actions)
        }
        Algorithm::GenDice => gendice_direction(state, sample, x, n_actions),
        Algorithm::DualDice => dualdice_direction(state, sample, x, n_actions),
    }
}

/// τ predicted by `state`: Xw, (Xθ)² for GenDICE, or Xκ (the ζ function) for
/// DualDICE.
pub fn predict_tau(state: &LearnerState, x: &FeatureMap, algo: Algorithm) -> DVector<f64> {
    match algo {
        Algorithm::GradientDice | Algorithm::ProjectedGradientDice => x.matrix() * &state.w,
        Algorithm::GenDice => (x.matrix() * &state.w).map(|q| q * q),
        Algorithm::DualDice => x.matrix() * &state.kappa,
    }
}

pub(crate) fn dot(a: &[f64], b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
