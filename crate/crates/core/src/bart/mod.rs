//! Bayesian Additive Regression Trees with an optional probit link and a
//! group-level random intercept:
//!
//! `y_ig = f(x_i) + u_g + ε_ig` (continuous) or
//! `P(y_ig = 1) = Φ(f(x_i) + u_g)` (probit), with `f` a sum of trees.

pub mod candidates;
pub mod config;
pub mod conjugate;
pub mod model;
pub mod prior;
pub mod proposal;
pub mod sampler;
pub mod tree;
pub mod truncnorm;

pub use config::{BartConfig, MoveProbs};
pub use model::{fit, FitHeader, GroupHandling, Grouping, PosteriorDraws, Prediction, Response};
pub use prior::Mode;
pub use sampler::Draw;
