use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{boyan_features, EnvInstance, EnvName, FeatureMap};
use crate::error::{DiceError, Result};
use crate::learners::{Algorithm, Hyper, LrSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Features {
    Tabular,
    /// Boyan's four state features, one independent weight block per action.
    BoyanLinear,
}

impl Features {
    pub fn build(&self, env: &EnvInstance) -> Result<FeatureMap> {
        let n = env.mdp.n_pairs();
        match self {
            Features::Tabular => Ok(FeatureMap::tabular(n)),
            Features::BoyanLinear => {
                let x = boyan_features(true);
                if x.n_pairs() != n {
                    return Err(DiceError::InvalidConfig(format!(
                        "BoyanLinear features need a Boyan chain, `{}` has {n} pairs",
                        env.name
                    )));
                }
                Ok(x)
            }
        }
    }
}

/// Reward table used for ρ estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardKind {
    /// Whatever the environment defines (zero on Boyan's chain).
    #[default]
    Env,
    /// r(s, a) = s.
    StateIndex,
}

/// Starting point of a run. A missing `w` is filled with `w_fill`, a missing
/// `kappa` with zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InitParams {
    #[serde(default)]
    pub w: Option<Vec<f64>>,
    /// With tabular features, 1 starts GradientDICE and GenDICE at τ ≡ 1;
    /// GenDICE cannot leave θ = 0.
    #[serde(default)]
    pub w_fill: f64,
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    #[serde(default)]
    pub eta: f64,
}

/// Ball radii and step constant of the projected variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedParams {
    pub radius_w: f64,
    pub radius_y: f64,
    pub c: f64,
    #[serde(default = "one")]
    pub m_star: f64,
}

impl Default for ProjectedParams {
    fn default() -> Self {
        Self { radius_w: 100.0, radius_y: 100.0, c: 1.0, m_star: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

fn default_seeds() -> Vec<u64> {
    (0..30).collect()
}

fn default_batch() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvName,
    pub algo: Algorithm,
    pub features: Features,
    pub gamma: f64,
    pub lambda: f64,
    pub xi: f64,
    pub lr: LrSchedule,
    pub steps: u64,
    pub eval_every: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub dataset_size: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "one")]
    pub dual_lr_mult: f64,
    #[serde(default)]
    pub reward_noise_std: f64,
    #[serde(default)]
    pub reward: RewardKind,
    /// Draw a new transition at every step instead of replaying the dataset.
    #[serde(default)]
    pub fresh_samples: bool,
    /// Follow the full-expectation update instead of sampled transitions.
    #[serde(default)]
    pub exact_gradient: bool,
    #[serde(default)]
    pub track_rho: bool,
    #[serde(default)]
    pub init: InitParams,
    #[serde(default)]
    pub projected: ProjectedParams,
}

impl ExperimentConfig {
    /// Tabular Boyan defaults: 3·10⁴ steps, evaluation every 300, λ = 1.
    pub fn boyan(algo: Algorithm, gamma: f64, alpha: f64, xi: f64) -> Self {
        Self {
            env: EnvName::Boyan,
            algo,
            features: Features::Tabular,
            gamma,
            lambda: 1.0,
            xi,
            lr: LrSchedule::Constant { alpha },
            steps: 30_000,
            eval_every: 300,
            seeds: default_seeds(),
            dataset_size: 30_000,
            batch_size: 1,
            dual_lr_mult: 1.0,
            reward_noise_std: 0.0,
            reward: RewardKind::Env,
            fresh_samples: false,
            exact_gradient: false,
            track_rho: false,
            init: InitParams::default(),
            projected: ProjectedParams::default(),
        }
    }

    pub fn hyper(&self) -> Hyper {
        Hyper { gamma: self.gamma, lambda: self.lambda, xi: self.xi, lr: self.lr, dual_lr_mult: self.dual_lr_mult }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 || self.steps < self.eval_every {
            return Err(DiceError::InvalidConfig("need steps >= eval_every >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(DiceError::InvalidConfig("seeds must be nonempty".into()));
        }
        if self.dataset_size == 0 || self.batch_size == 0 {
            return Err(DiceError::InvalidConfig("dataset_size and batch_size must be >= 1".into()));
        }
        if !(self.reward_noise_std >= 0.0) {
            return Err(DiceError::InvalidConfig("reward_noise_std must be >= 0".into()));
        }
        if self.exact_gradient && self.algo == Algorithm::ProjectedGradientDice {
            return Err(DiceError::InvalidConfig("the projected variant only runs on samples".into()));
        }
        self.hyper().validate()
    }

    /// Environment for this config's discount (Boyan switches variant at γ = 1).
    pub fn environment(&self) -> Result<EnvInstance> {
        let mut env = self.env.resolve(self.gamma).instantiate(Some(self.gamma))?;
        if self.reward == RewardKind::StateIndex {
            env.mdp = env.mdp.with_reward(|s, _| s as f64);
        }
        Ok(env)
    }

    /// Keeps the first `n` seeds, or extends with consecutive ones.
    pub fn with_seed_count(mut self, n: usize) -> Self {
        let next = self.seeds.iter().max().map_or(0, |m| m + 1);
        let extra = n.saturating_sub(self.seeds.len()) as u64;
        self.seeds.extend(next..next + extra);
        self.seeds.truncate(n);
        self
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
