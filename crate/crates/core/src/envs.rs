//! Benchmark environments and feature maps.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{DiceError, Result};
use crate::mdp::{build_occupancy, FiniteMdp, OccupancyModel, PolicyTable};

pub const BOYAN_STATES: usize = 13;

/// Boyan's chain state features, indexed by state (s₀ first).
const BOYAN_STATE_FEATURES: [[f64; 4]; BOYAN_STATES] = [
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.25, 0.75],
    [0.0, 0.0, 0.5, 0.5],
    [0.0, 0.0, 0.75, 0.25],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.25, 0.75, 0.0],
    [0.0, 0.5, 0.5, 0.0],
    [0.0, 0.75, 0.25, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.25, 0.75, 0.0, 0.0],
    [0.5, 0.5, 0.0, 0.0],
    [0.75, 0.25, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
];

/// Singular-value floor for the full-column-rank check.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Tabular,
    BoyanLinear,
    Custom,
}

/// Feature matrix X (N_sa × K) with linearly independent columns.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    x: DMatrix<f64>,
    kind: FeatureKind,
    row_major: Vec<f64>,
}

impl FeatureMap {
    pub fn new(x: DMatrix<f64>, kind: FeatureKind) -> Result<Self> {
        let min_sv = if x.ncols() > x.nrows() {
            0.0
        } else {
            x.clone().singular_values().min()
        };
        if x.ncols() == 0 || !(min_sv > RANK_TOL) {
            return Err(DiceError::RankDeficientFeatures(min_sv));
        }
        let row_major = x.transpose().as_slice().to_vec();
        Ok(Self { x, kind, row_major })
    }

    pub fn tabular(n_pairs: usize) -> Self {
        Self::new(DMatrix::identity(n_pairs, n_pairs), FeatureKind::Tabular)
            .expect("identity has full rank")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_pairs(&self) -> usize {
        self.x.nrows()
    }

    /// x(s,a) for flattened pair index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.dim();
        &self.row_major[i * k..(i + 1) * k]
    }
}

/// Boyan's chain state feature x(s).
pub fn boyan_state_feature(s: usize) -> [f64; 4] {
    BOYAN_STATE_FEATURES[s]
}

/// Per-action block features (K = 8) when `per_action`, tabular otherwise.
pub fn boyan_features(per_action: bool) -> FeatureMap {
    if !per_action {
        return FeatureMap::tabular(BOYAN_STATES * 2);
    }
    let x = DMatrix::from_fn(BOYAN_STATES * 2, 8, |i, j| {
        let (s, a) = (i / 2, i % 2);
        if j / 4 == a {
            BOYAN_STATE_FEATURES[s][j % 4]
        } else {
            0.0
        }
    });
    FeatureMap::new(x, FeatureKind::BoyanLinear).expect("Boyan features have full rank")
}

/// An MDP together with its target policy and sampling distribution.
#[derive(Debug, Clone)]
pub struct EnvInstance {
    pub name: EnvName,
    pub mdp: FiniteMdp,
    pub policy: PolicyTable,
    pub d_mu: Vec<f64>,
}

impl EnvInstance {
    pub fn occupancy(&self) -> Result<OccupancyModel> {
        build_occupancy(&self.mdp, &self.policy, &self.d_mu)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.mdp = self.mdp.with_gamma(gamma)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoyanVariant {
    Episodic,
    Continuing,
}

/// Boyan's chain with target policy π(a₀|s) = 0.1 and uniform d_μ.
///
/// The discount defaults to 1 for the continuing variant and 0.5 for the
/// episodic one; use [`EnvInstance::with_gamma`] to change it.
pub fn boyan_chain(variant: BoyanVariant) -> EnvInstance {
    let n = BOYAN_STATES;
    let transition = (0..n)
        .map(|s| {
            (0..2)
                .map(|a| {
                    let mut row = vec![0.0; n];
                    match (s, variant) {
                        (0, BoyanVariant::Episodic) => row[0] = 1.0,
                        (0, BoyanVariant::Continuing) => row.fill(1.0 / n as f64),
                        (1, _) => row[0] = 1.0,
                        _ => row[s - 1 - a] = 1.0,
                    }
                    row
                })
                .collect()
        })
        .collect();
    let (gamma, name) = match variant {
        BoyanVariant::Episodic => (0.5, EnvName::BoyanEpisodic),
        BoyanVariant::Continuing => (1.0, EnvName::BoyanContinuing),
    };
    let mdp = FiniteMdp::new(transition, vec![vec![0.0; 2]; n], gamma, vec![1.0 / n as f64; n])
        .expect("Boyan chain is well formed");
    EnvInstance {
        name,
        mdp,
        policy: PolicyTable::uniform_rows(n, &[0.1, 0.9]).expect("valid policy"),
        d_mu: vec![1.0 / (2 * n) as f64; 2 * n],
    }
}

/// Single state, two self-looping actions, γ = 1, everything uniform.
pub fn hard_mdp() -> EnvInstance {
    let mdp = FiniteMdp::new(vec![vec![vec![1.0], vec![1.0]]], vec![vec![0.0, 0.0]], 1.0, vec![1.0])
        .expect("single-state MDP is well formed");
    EnvInstance {
        name: EnvName::Hard,
        mdp,
        policy: PolicyTable::new(vec![vec![0.5, 0.5]]).expect("valid policy"),
        d_mu: vec![0.5, 0.5],
    }
}

const TRANSITION_FLOOR: f64 = 1e-3;
const POLICY_FLOOR: f64 = 1e-2;
const SAMPLING_FLOOR: f64 = 1e-3;

/// Dirichlet(1) draw mixed with a uniform floor so every entry is at least
/// `floor` (capped at half the uniform mass for very wide rows).
fn floored_simplex(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let floor = floor.min(0.5 / n as f64);
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let scale = 1.0 - n as f64 * floor;
    let mut row: Vec<f64> = raw.iter().map(|v| floor + scale * v / total).collect();
    // push rounding residue into the largest entry so the row sums to 1
    let residue = 1.0 - row.iter().sum::<f64>();
    let imax = (0..n).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap_or(0);
    row[imax] += residue;
    row
}

/// Random strictly positive MDP fixture, deterministic in `seed`.
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, gamma: f64) -> Result<EnvInstance> {
    if n_states == 0 || n_actions == 0 {
        return Err(DiceError::InvalidMdp("n_states and n_actions must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..n_states)
        .map(|_| {
            (0..n_actions)
                .map(|_| floored_simplex(&mut rng, n_states, TRANSITION_FLOOR))
                .collect()
        })
        .collect();
    let reward = (0..n_states)
        .map(|_| (0..n_actions).map(|_| rng.random::<f64>()).collect())
        .collect();
    let initial = floored_simplex(&mut rng, n_states, 0.0);
    let policy_rows = (0..n_states)
        .map(|_| floored_simplex(&mut rng, n_actions, POLICY_FLOOR))
        .collect();
    let d_mu = floored_simplex(&mut rng, n_states * n_actions, SAMPLING_FLOOR);
    Ok(EnvInstance {
        name: EnvName::Random { seed, n_states, n_actions },
        mdp: FiniteMdp::new(transition, reward, gamma, initial)?,
        policy: PolicyTable::new(policy_rows)?,
        d_mu,
    })
}

/// CLI-addressable environment name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EnvName {
    BoyanEpisodic,
    BoyanContinuing,
    /// Episodic chain for γ < 1, continuing chain for γ = 1.
    Boyan,
    Hard,
    Random { seed: u64, n_states: usize, n_actions: usize },
}

impl EnvName {
    /// Builds the environment; `gamma` overrides the default discount.
    pub fn instantiate(&self, gamma: Option<f64>) -> Result<EnvInstance> {
        let env = match *self {
            EnvName::BoyanEpisodic => boyan_chain(BoyanVariant::Episodic),
            EnvName::BoyanContinuing => boyan_chain(BoyanVariant::Continuing),
            EnvName::Boyan => match gamma {
                Some(g) if g < 1.0 => boyan_chain(BoyanVariant::Episodic),
                _ => boyan_chain(BoyanVariant::Continuing),
            },
            EnvName::Hard => hard_mdp(),
            EnvName::Random { seed, n_states, n_actions } => {
                random_mdp(seed, n_states, n_actions, gamma.unwrap_or(0.9))?
            }
        };
        match gamma {
            Some(g) => env.with_gamma(g),
            None => Ok(env),
        }
    }

    /// Name of the concrete environment used at discount `gamma`.
    pub fn resolve(&self, gamma: f64) -> EnvName {
        match self {
            EnvName::Boyan if gamma < 1.0 => EnvName::BoyanEpisodic,
            EnvName::Boyan => EnvName::BoyanContinuing,
            other => *other,
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvName::BoyanEpisodic => f.write_str("boyan-episodic"),
            EnvName::BoyanContinuing => f.write_str("boyan-continuing"),
            EnvName::Boyan => f.write_str("boyan"),
            EnvName::Hard => f.write_str("hard"),
            EnvName::Random { seed, n_states, n_actions } => {
                write!(f, "random:{seed}:{n_states}:{n_actions}")
            }
        }
    }
}

impl FromStr for EnvName {
    type Err = DiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boyan-episodic" => Ok(EnvName::BoyanEpisodic),
            "boyan-continuing" => Ok(EnvName::BoyanContinuing),
            "boyan" => Ok(EnvName::Boyan),
            "hard" => Ok(EnvName::Hard),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                let bad = || DiceError::UnknownEnv(s.to_string());
                match parts.as_slice() {
                    ["random", seed, ns, na] => Ok(EnvName::Random {
                        seed: seed.parse().map_err(|_| bad())?,
                        n_states: ns.parse().map_err(|_| bad())?,
                        n_actions: na.parse().map_err(|_| bad())?,
                    }),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl TryFrom<String> for EnvName {
    type Error = DiceError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EnvName> for String {
    fn from(name: EnvName) -> Self {
        name.to_string()
    }
}
