//! Offline estimation of the stationary density ratio τ\* = d_γ / d_μ on finite
//! MDPs.
//!
//! The crate pairs stochastic learners (GradientDICE, its projected variant,
//! GenDICE and DualDICE) with an exact analytic engine, so every learned
//! quantity can be checked against a ground truth computed from the model.

pub mod analytic;
pub mod data;
pub mod envs;
pub mod error;
pub mod harness;
pub mod learners;
pub mod mdp;

pub use error::{DiceError, Result};
