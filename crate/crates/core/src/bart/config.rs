use serde::{Deserialize, Serialize};

use super::conjugate::VariancePrior;
use crate::error::{Error, Result};

/// Relative frequencies of the tree moves. They are renormalised over the
/// moves that are valid for the current tree; all zero freezes the trees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            grow: 0.3,
            prune: 0.3,
            change: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BartConfig {
    pub n_trees: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub nu: f64,
    pub q: f64,
    pub n_iter: usize,
    pub n_burn: usize,
    pub n_thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub move_probs: MoveProbs,
    /// Nodes at this depth are never split.
    pub max_depth: Option<usize>,
    pub sigma_u_prior: VariancePrior,
    /// Holds σ² fixed (continuous mode) instead of sampling it.
    pub sigma2_fixed: Option<f64>,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            alpha: 0.95,
            beta: 2.0,
            k: 2.0,
            nu: 3.0,
            q: 0.90,
            n_iter: 1200,
            n_burn: 200,
            n_thin: 1,
            n_chains: 4,
            seed: 1,
            move_probs: MoveProbs::default(),
            max_depth: None,
            sigma_u_prior: VariancePrior::default(),
            sigma2_fixed: None,
        }
    }
}

impl BartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if !(self.k > 0.0) || !(self.nu > 0.0) {
            return Err(Error::invalid("k and nu must be positive"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::invalid(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.n_iter <= self.n_burn {
            return Err(Error::invalid(format!(
                "n_iter ({}) must exceed n_burn ({})",
                self.n_iter, self.n_burn
            )));
        }
        if self.n_thin == 0 || self.n_chains == 0 {
            return Err(Error::invalid("n_thin and n_chains must be at least 1"));
        }
        let m = self.move_probs;
        if [m.grow, m.prune, m.change]
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::invalid("move probabilities must be finite and non-negative"));
        }
        if !(self.sigma_u_prior.nu > 0.0 && self.sigma_u_prior.lambda > 0.0) {
            return Err(Error::invalid("sigma_u prior parameters must be positive"));
        }
        if let Some(s) = self.sigma2_fixed {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("sigma2_fixed must be positive"));
            }
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn draws_per_chain(&self) -> usize {
        (self.n_iter - self.n_burn) / self.n_thin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = BartConfig::default();
        c.validate().unwrap();
        assert_eq!(c.draws_per_chain(), 1000);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            BartConfig {
                alpha: 1.0,
                ..Default::default()
            },
            BartConfig {
                beta: 0.0,
                ..Default::default()
            },
            BartConfig {
                n_trees: 0,
                ..Default::default()
            },
            BartConfig {
                n_iter: 200,
                ..Default::default()
            },
            BartConfig {
                n_thin: 0,
                ..Default::default()
            },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
