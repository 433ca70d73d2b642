use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, ExperimentConfig};
use super::metrics::{estimate_rho, mse_tau};
use crate::analytic::exact_direction;
use crate::data::{sample_dataset, Dataset, Sampler};
use crate::envs::{EnvInstance, FeatureMap};
use crate::error::{DiceError, Result};
use crate::learners::{
    predict_tau, projected_gradientdice_run, sample_direction, Algorithm, Direction, LearnerState,
    ProjectedConfig,
};
use crate::mdp::OccupancyModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub mse_tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 of the training transitions (empty for exact-gradient runs).
    pub dataset_hash: String,
    pub evals: Vec<EvalPoint>,
    pub final_w: Vec<f64>,
    pub final_kappa: Vec<f64>,
    pub final_eta: f64,
    pub diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<u64>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunRecord {
    /// Last recorded MSE(τ), or +∞ for a diverged run.
    pub fn final_mse(&self) -> f64 {
        if self.diverged {
            return f64::INFINITY;
        }
        self.evals.last().map_or(f64::INFINITY, |e| e.mse_tau)
    }

    pub fn mse_curve(&self) -> Vec<f64> {
        self.evals.iter().map(|e| e.mse_tau).collect()
    }
}

pub fn dataset_hash(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for s in &ds.samples {
        for v in [s.init_s, s.init_a, s.s, s.a, s.s_next, s.a_next] {
            h.update((v as u64).to_le_bytes());
        }
        h.update(s.r.to_le_bytes());
    }
    hex(&h.finalize())
}

/// Worker pool honouring `DICEKIT_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DICEKIT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| DiceError::InvalidConfig(format!("DICEKIT_THREADS={v} is not a count")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| DiceError::InvalidConfig(e.to_string()))
}

struct Problem {
    model: OccupancyModel,
    x: FeatureMap,
    n_actions: usize,
    true_rho: f64,
    reward: DVector<f64>,
    sampler: Sampler,
}

impl Problem {
    fn new(config: &ExperimentConfig) -> Result<(Self, EnvInstance)> {
        let env = config.environment()?;
        let model = env.occupancy()?;
        let x = config.features.build(&env)?;
        let true_rho = model.policy_value(&env.mdp);
        let sampler = Sampler::new(&model, &env.mdp, &env.policy, config.reward_noise_std)?;
        let reward = env.mdp.reward_vector();
        Ok((Self { n_actions: env.mdp.n_actions(), true_rho, reward, sampler, model, x }, env))
    }

    fn eval(&self, config: &ExperimentConfig, step: u64, tau: &DVector<f64>, ds: Option<&Dataset>) -> EvalPoint {
        let mse_rho = config.track_rho.then(|| {
            let est = match ds {
                Some(ds) => estimate_rho(tau, ds, self.n_actions),
                // no samples: take the expectation under d_μ
                None => self.model.d_mu().component_mul(tau).dot(&self.reward),
            };
            (est - self.true_rho).powi(2)
        });
        EvalPoint { step, mse_tau: mse_tau(tau, &self.model), mse_rho }
    }
}

fn initial_state(config: &ExperimentConfig, k: usize) -> Result<LearnerState> {
    let mut state = LearnerState::zeros(k, config.hyper());
    state.w.fill(config.init.w_fill);
    let fill = |v: &Option<Vec<f64>>, what: &str| -> Result<Option<DVector<f64>>> {
        match v {
            Some(v) if v.len() != k => {
                Err(DiceError::InvalidConfig(format!("init.{what} has {} entries, features have {k}", v.len())))
            }
            Some(v) => Ok(Some(DVector::from_column_slice(v))),
            None => Ok(None),
        }
    };
    if let Some(w) = fill(&config.init.w, "w")? {
        state.w = w;
    }
    if let Some(kappa) = fill(&config.init.kappa, "kappa")? {
        state.kappa = kappa;
    }
    state.eta = config.init.eta;
    Ok(state)
}

/// Trains one seed of `config` and records MSE(τ) at step 0 and every
/// `eval_every` steps.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let (problem, env) = Problem::new(config)?;
    let ds = if config.exact_gradient {
        None
    } else {
        Some(
            sample_dataset(&problem.model, &env.mdp, &env.policy, config.dataset_size, seed, config.reward_noise_std)?
                .with_source(env.name.to_string()),
        )
    };
    let mut record = RunRecord {
        config_hash: config.hash(),
        seed,
        dataset_hash: ds.as_ref().map(dataset_hash).unwrap_or_default(),
        evals: Vec::new(),
        final_w: Vec::new(),
        final_kappa: Vec::new(),
        final_eta: 0.0,
        diverged: false,
        diverged_at: None,
        wall_clock_secs: 0.0,
    };

    if config.algo == Algorithm::ProjectedGradientDice {
        run_projected(config, &problem, ds.as_ref().expect("sampled run"), &mut record)?;
    } else {
        run_sgd(config, &problem, ds.as_ref(), seed, &mut record)?;
    }
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

fn run_sgd(
    config: &ExperimentConfig,
    problem: &Problem,
    ds: Option<&Dataset>,
    seed: u64,
    record: &mut RunRecord,
) -> Result<()> {
    let x = &problem.x;
    let mut state = initial_state(config, x.dim())?;
    record.evals.push(problem.eval(config, 0, &predict_tau(&state, x, config.algo), ds));

    let mut stream = match ds {
        Some(ds) if !config.fresh_samples => Some(ds.minibatches(config.batch_size)?),
        _ => None,
    };
    let mut fresh_rng = ChaCha8Rng::seed_from_u64(seed);
    fresh_rng.set_stream(2);

    for t in 1..=config.steps {
        let dir = if config.exact_gradient {
            exact_direction(config.algo, &state, &problem.model, x)
        } else {
            let mut dir = Direction::zeros(x.dim());
            let scale = 1.0 / config.batch_size as f64;
            match stream.as_mut() {
                Some(stream) => {
                    let batch = stream.next().expect("stream is endless");
                    let scale = 1.0 / batch.len() as f64;
                    for sample in batch {
                        dir.add_scaled(&sample_direction(config.algo, &state, sample, x, problem.n_actions), scale);
                    }
                }
                None => {
                    for _ in 0..config.batch_size {
                        let sample = problem.sampler.sample(&mut fresh_rng);
                        dir.add_scaled(&sample_direction(config.algo, &state, &sample, x, problem.n_actions), scale);
                    }
                }
            }
            dir
        };
        match state.apply(&dir) {
            Ok(()) => {}
            Err(DiceError::Diverged { step }) => {
                record.diverged = true;
                record.diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
        if t % config.eval_every == 0 {
            record.evals.push(problem.eval(config, t, &predict_tau(&state, x, config.algo), ds));
        }
    }
    record.final_w = state.w.iter().copied().collect();
    record.final_kappa = state.kappa.iter().copied().collect();
    record.final_eta = state.eta;
    Ok(())
}

/// Each evaluation point n is its own projected run with horizon n (the step
/// size depends on n), reporting the averaged iterate.
fn run_projected(config: &ExperimentConfig, problem: &Problem, ds: &Dataset, record: &mut RunRecord) -> Result<()> {
    let x = &problem.x;
    let k = x.dim();
    let state = initial_state(config, k)?;
    record.evals.push(problem.eval(config, 0, &(x.matrix() * &state.w), Some(ds)));
    let p = config.projected;
    let mut last = None;
    for n in (config.eval_every..=config.steps).step_by(config.eval_every as usize) {
        let pc = ProjectedConfig {
            gamma: config.gamma,
            lambda: config.lambda,
            xi: config.xi,
            radius_w: p.radius_w,
            radius_y: p.radius_y,
            c: p.c,
            m_star: p.m_star,
            n: n as usize,
        };
        let out = projected_gradientdice_run(ds, x, problem.n_actions, &pc)?;
        record.evals.push(problem.eval(config, n, &(x.matrix() * &out.avg_w), Some(ds)));
        last = Some(out);
    }
    if let Some(out) = last {
        record.final_w = out.avg_w.iter().copied().collect();
        record.final_kappa = out.avg_y.rows(0, k).iter().copied().collect();
        record.final_eta = out.avg_y[k];
    }
    Ok(())
}

/// All seeds of `config`, in parallel, returned in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let pool = thread_pool()?;
    pool.install(|| config.seeds.par_iter().map(|&seed| run_seed(config, seed)).collect())
}
