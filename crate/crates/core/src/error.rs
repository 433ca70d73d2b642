use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiceError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("sampling distribution must be a strictly positive probability vector: {0}")]
    InvalidSamplingDist(String),

    #[error("chain induced by the policy is not ergodic ({0})")]
    NonErgodic(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("feature matrix columns are not linearly independent (smallest singular value {0:e})")]
    RankDeficientFeatures(f64),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("learner diverged at step {step}")]
    Diverged { step: u64 },

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DiceError>;
