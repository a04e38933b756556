//! Bayesian Additive Regression Trees with a probit link and group-level
//! random intercepts, a Random Forest baseline, a synthetic LMS data
//! generator and the evaluation harness used for early-warning analyses.
//!
//! The crate is organised bottom-up:
//!
//! - [`data_model`]: entity records, cleaning rules and the monthly
//!   cumulative feature matrix.
//! - [`synth`]: a generator of entity datasets with known ground truth.
//! - [`bart`]: the sum-of-trees model and its Gibbs/Metropolis-Hastings sampler.
//! - [`rf`]: a Gini random forest classifier.
//! - [`eval`]: metrics, month sweeps, school-effect flagging, usage profiles
//!   and random-search tuning.

pub mod bart;
pub mod container;
pub mod data_model;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod rf;
pub mod stats;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::{ColumnKind, ColumnSpec, Matrix};
