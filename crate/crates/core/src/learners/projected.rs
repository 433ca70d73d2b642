use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{gradientdice_direction, Direction, Hyper, LearnerState, LrSchedule};
use crate::data::{Dataset, TransitionSample};
use crate::envs::FeatureMap;
use crate::error::{DiceError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub xi: f64,
    pub radius_w: f64,
    pub radius_y: f64,
    pub c: f64,
    /// Stand-in for the moment bound M\*; only the ratio c / m_star matters.
    #[serde(default = "default_m_star")]
    pub m_star: f64,
    pub n: usize,
}

fn default_m_star() -> f64 {
    1.0
}

impl ProjectedConfig {
    /// Constant step 2c / (M\* √n).
    pub fn step_size(&self) -> f64 {
        2.0 * self.c / (self.m_star * (self.n as f64).sqrt())
    }
}

/// Step-size weighted averages of the iterates; y = [κ; η].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedOutput {
    pub avg_w: DVector<f64>,
    pub avg_y: DVector<f64>,
    pub last_w: DVector<f64>,
    pub last_y: DVector<f64>,
}

/// Per-sample blocks G₁..G₅ of the projected iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlocks {
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub g3: DMatrix<f64>,
    pub g4: DMatrix<f64>,
    pub g5: DVector<f64>,
}

pub fn sample_blocks(
    sample: &TransitionSample,
    x: &FeatureMap,
    n_actions: usize,
    gamma: f64,
    lambda: f64,
    xi: f64,
) -> SampleBlocks {
    let k = x.dim();
    let x0 = DVector::from_column_slice(x.row(sample.init_pair(n_actions)));
    let xt = DVector::from_column_slice(x.row(sample.pair(n_actions)));
    let xn = DVector::from_column_slice(x.row(sample.next_pair(n_actions)));
    let td = &xt - gamma * &xn;

    let mut g1 = DMatrix::zeros(k + 1, k + 1);
    g1.view_mut((0, 0), (k, k)).copy_from(&(-&xt * xt.transpose()));
    g1[(k, k)] = -lambda;

    let mut g2 = DMatrix::zeros(k + 1, k);
    g2.view_mut((0, 0), (k, k)).copy_from(&(-&td * xt.transpose()));
    g2.row_mut(k).copy_from(&(lambda * xt.transpose()));

    let mut g3 = DMatrix::zeros(k, k + 1);
    g3.view_mut((0, 0), (k, k)).copy_from(&(&xt * td.transpose()));
    g3.column_mut(k).copy_from(&(-lambda * &xt));

    let mut g5 = DVector::zeros(k + 1);
    g5.rows_mut(0, k).copy_from(&((1.0 - gamma) * x0));
    g5[k] = -lambda;

    SampleBlocks { g1, g2, g3, g4: -xi * DMatrix::identity(k, k), g5 }
}

/// Euclidean projection onto the origin-centred ball of radius `radius`.
pub fn project_to_ball(v: &mut DVector<f64>, radius: f64) {
    let norm = v.norm();
    if norm > radius {
        *v *= radius / norm;
    }
}

/// Projected GradientDICE over the first `n` samples of `ds` (cycling if the
/// dataset is shorter), returning the averaged iterates.
pub fn projected_gradientdice_run(
    ds: &Dataset,
    x: &FeatureMap,
    n_actions: usize,
    config: &ProjectedConfig,
) -> Result<ProjectedOutput> {
    if !(config.radius_w > 0.0 && config.radius_y > 0.0) {
        return Err(DiceError::InvalidConfig("projection radii must be > 0".into()));
    }
    if config.n == 0 || ds.is_empty() {
        return Err(DiceError::InvalidConfig("need n >= 1 and a non-empty dataset".into()));
    }
    let alpha = config.step_size();
    let hyper = Hyper::new(config.gamma, config.lambda, config.xi, LrSchedule::Constant { alpha });
    hyper.validate()?;

    let k = x.dim();
    let mut state = LearnerState::zeros(k, hyper);
    let mut sum_w = DVector::zeros(k);
    let mut sum_y = DVector::zeros(k + 1);
    for t in 0..config.n {
        let sample = &ds.samples[t % ds.len()];
        let dir: Direction = gradientdice_direction(&state, sample, x, n_actions);
        state.apply(&dir)?;

        let mut y = stack_y(&state.kappa, state.eta);
        project_to_ball(&mut y, config.radius_y);
        project_to_ball(&mut state.w, config.radius_w);
        state.kappa.copy_from(&y.rows(0, k));
        state.eta = y[k];

        sum_w += &state.w;
        sum_y += &y;
    }
    // constant α: the α-weighted average is the plain mean of y_1..y_n
    let n = config.n as f64;
    Ok(ProjectedOutput {
        avg_w: sum_w / n,
        avg_y: sum_y / n,
        last_w: state.w.clone(),
        last_y: stack_y(&state.kappa, state.eta),
    })
}

fn stack_y(kappa: &DVector<f64>, eta: f64) -> DVector<f64> {
    let k = kappa.len();
    DVector::from_fn(k + 1, |i, _| if i < k { kappa[i] } else { eta })
}
