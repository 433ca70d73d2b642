//! Offline datasets: i.i.d. transitions under d_μ bundled with an independent
//! μ₀ draw, CSV persistence, and shuffled minibatch streams.

use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DiceError, Result};
use crate::mdp::{FiniteMdp, OccupancyModel, PolicyTable};

/// One training sample: (s₀,a₀) ∼ μ₀ and (s,a) ∼ d_μ, s' ∼ p(·|s,a), a' ∼ π(·|s').
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    pub init_s: usize,
    pub init_a: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub a_next: usize,
}

impl TransitionSample {
    pub fn init_pair(&self, n_actions: usize) -> usize {
        self.init_s * n_actions + self.init_a
    }

    pub fn pair(&self, n_actions: usize) -> usize {
        self.s * n_actions + self.a
    }

    pub fn next_pair(&self, n_actions: usize) -> usize {
        self.s_next * n_actions + self.a_next
    }
}

/// Draws [`TransitionSample`]s on demand.
#[derive(Debug, Clone)]
pub struct Sampler {
    n_actions: usize,
    mu0: WeightedIndex<f64>,
    d_mu: WeightedIndex<f64>,
    next_state: Vec<WeightedIndex<f64>>,
    policy: Vec<WeightedIndex<f64>>,
    reward: Vec<f64>,
    noise: Option<Normal<f64>>,
}

impl Sampler {
    pub fn new(
        model: &OccupancyModel,
        mdp: &FiniteMdp,
        policy: &PolicyTable,
        reward_noise_std: f64,
    ) -> Result<Self> {
        let weights = |w: &[f64], what: &str| {
            WeightedIndex::new(w).map_err(|e| DiceError::InvalidConfig(format!("{what}: {e}")))
        };
        let na = mdp.n_actions();
        let noise = if reward_noise_std > 0.0 {
            Some(Normal::new(0.0, reward_noise_std).map_err(|e| DiceError::InvalidConfig(e.to_string()))?)
        } else if reward_noise_std == 0.0 {
            None
        } else {
            return Err(DiceError::InvalidConfig("reward_noise_std must be >= 0".into()));
        };
        Ok(Self {
            n_actions: na,
            mu0: weights(model.mu0().as_slice(), "mu0")?,
            d_mu: weights(model.d_mu().as_slice(), "d_mu")?,
            next_state: (0..mdp.n_pairs())
                .map(|i| weights(mdp.next_state_probs(i / na, i % na), "transition"))
                .collect::<Result<_>>()?,
            policy: (0..mdp.n_states())
                .map(|s| weights(policy.row(s), "policy"))
                .collect::<Result<_>>()?,
            reward: mdp.reward_vector().as_slice().to_vec(),
            noise,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> TransitionSample {
        let pair = self.d_mu.sample(rng);
        self.sample_from_pair(pair, rng)
    }

    /// A transition whose (s, a) is fixed to `pair`; the initial pair and the
    /// successor are drawn as usual.
    pub fn sample_from_pair(&self, pair: usize, rng: &mut ChaCha8Rng) -> TransitionSample {
        let na = self.n_actions;
        let init = self.mu0.sample(rng);
        let s_next = self.next_state[pair].sample(rng);
        let a_next = self.policy[s_next].sample(rng);
        let r = self.reward[pair] + self.noise.map_or(0.0, |n| n.sample(rng));
        TransitionSample {
            init_s: init / na,
            init_a: init % na,
            s: pair / na,
            a: pair % na,
            r,
            s_next,
            a_next,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub source: String,
    pub n: usize,
    pub reward_noise_std: f64,
}

/// A fixed, replayable offline dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TransitionSample>,
    pub seed: u64,
    pub source: String,
    pub reward_noise_std: f64,
}

pub fn sample_dataset(
    model: &OccupancyModel,
    mdp: &FiniteMdp,
    policy: &PolicyTable,
    n: usize,
    seed: u64,
    reward_noise_std: f64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(DiceError::InvalidConfig("dataset size must be >= 1".into()));
    }
    let sampler = Sampler::new(model, mdp, policy, reward_noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Dataset {
        samples: (0..n).map(|_| sampler.sample(&mut rng)).collect(),
        seed,
        source: "custom".into(),
        reward_noise_std,
    })
}

impl Dataset {
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            seed: self.seed,
            source: self.source.clone(),
            n: self.samples.len(),
            reward_noise_std: self.reward_noise_std,
        }
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(stem.with_extension("csv"))?;
        for sample in &self.samples {
            writer.serialize(sample)?;
        }
        writer.flush()?;
        serde_json::to_writer_pretty(File::create(stem.with_extension("json"))?, &self.meta())?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_reader(File::open(stem.with_extension("json"))?)?;
        let mut reader = csv::Reader::from_path(stem.with_extension("csv"))?;
        let samples = reader.deserialize().collect::<std::result::Result<Vec<TransitionSample>, _>>()?;
        if samples.len() != meta.n {
            return Err(DiceError::InvalidConfig(format!(
                "sidecar says {} samples, csv has {}",
                meta.n,
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            seed: meta.seed,
            source: meta.source,
            reward_noise_std: meta.reward_noise_std,
        })
    }

    pub fn minibatches(&self, batch_size: usize) -> Result<MinibatchStream<'_>> {
        MinibatchStream::new(self, batch_size)
    }
}

/// Endless stream of minibatches over shuffled epochs of a dataset.
///
/// The shuffle order is derived from the dataset seed, so two streams over the
/// same dataset yield identical batches. The final batch of an epoch may be
/// short.
#[derive(Debug, Clone)]
pub struct MinibatchStream<'a> {
    ds: &'a Dataset,
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl<'a> MinibatchStream<'a> {
    fn new(ds: &'a Dataset, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(DiceError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if ds.is_empty() {
            return Err(DiceError::InvalidConfig("cannot stream an empty dataset".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ds.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut rng);
        Ok(Self { ds, batch_size, rng, order, pos: 0 })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.ds.len().div_ceil(self.batch_size)
    }
}

impl<'a> Iterator for MinibatchStream<'a> {
    type Item = Vec<&'a TransitionSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].iter().map(|&i| &self.ds.samples[i]).collect();
        self.pos = end;
        Some(batch)
    }
}
