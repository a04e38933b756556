//! One MCMC chain: Bayesian backfitting over the trees followed by the
//! conjugate updates of σ² (or the probit latents), the group intercepts
//! and their variance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::candidates::Predictors;
use super::config::BartConfig;
use super::conjugate::{draw_group_effects, draw_leaf_mu, draw_sigma2, draw_sigma_u2, GroupStats, LeafStats};
use super::prior::Mode;
use super::proposal::{mh_accept_tree, Decision, Move, TreePrior};
use super::tree::{FlatTree, Tree};
use super::truncnorm::draw_latent_probit;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower bound on σ² in model units.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Largest tolerated gap between the incrementally maintained fit and a
/// from-scratch sum of the trees at the end of a sweep.
pub const DRIFT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
    /// Chosen moves that found no candidate rule.
    pub failed: [u64; 3],
    pub nonfinite: u64,
}

impl MoveCounts {
    pub fn acceptance_rate(&self, m: Move) -> f64 {
        let p = self.proposed[m.index()];
        if p == 0 {
            0.0
        } else {
            self.accepted[m.index()] as f64 / p as f64
        }
    }
}

/// Everything a chain needs besides the predictors, in model units.
#[derive(Clone, Debug)]
pub struct ChainSetup {
    pub mode: Mode,
    /// Rescaled response (continuous) or 0/1 labels (probit).
    pub y: Vec<f64>,
    /// Group index per row; `None` disables the random intercept.
    pub groups: Option<(Vec<usize>, usize)>,
    pub sigma_mu: f64,
    pub lambda: f64,
    pub init_sigma2: f64,
    pub init_offset: f64,
}

/// Model-unit state retained at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub chain: u32,
    pub iter: u32,
    pub offset: f64,
    pub trees: Vec<FlatTree>,
    pub u: Vec<f64>,
    pub sigma2: f64,
    pub sigma_u2: f64,
    /// `offset + Σ trees` on the training rows; not persisted.
    #[serde(skip)]
    pub train_fit: Vec<f64>,
}

pub struct Chain<'a> {
    preds: Predictors<'a>,
    config: BartConfig,
    prior: TreePrior,
    mode: Mode,
    y: Vec<f64>,
    target: Vec<f64>,
    group_of: Vec<usize>,
    grouped: bool,
    u: Vec<f64>,
    trees: Vec<Tree>,
    assign: Vec<Vec<u32>>,
    total: Vec<f64>,
    offset: f64,
    sigma2: f64,
    sigma_u2: f64,
    sigma_mu2: f64,
    lambda: f64,
    rng: ChaCha8Rng,
    counts: MoveCounts,
    partial: Vec<f64>,
    resid: Vec<f64>,
    mu_of: Vec<f64>,
    leaf_stats: Vec<LeafStats>,
    iter: usize,
}

impl<'a> Chain<'a> {
    pub fn new(x: &'a Matrix, setup: &ChainSetup, config: &BartConfig, chain_seed: u64) -> Self {
        let n = x.n_rows();
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);
        let (group_of, n_groups, grouped) = match &setup.groups {
            Some((g, k)) => (g.clone(), *k, true),
            None => (vec![0; n], 1, false),
        };
        let sigma2 = match (setup.mode, config.sigma2_fixed) {
            (Mode::Probit, _) => 1.0,
            (Mode::Continuous, Some(s)) => s,
            (Mode::Continuous, None) => setup.init_sigma2.max(SIGMA2_FLOOR),
        };
        let target = match setup.mode {
            Mode::Continuous => setup.y.clone(),
            Mode::Probit => setup
                .y
                .iter()
                .map(|&y| draw_latent_probit(y as u8, setup.init_offset, &mut rng))
                .collect(),
        };
        Self {
            preds: Predictors::new(x),
            prior: TreePrior {
                alpha: config.alpha,
                beta: config.beta,
                max_depth: config.max_depth,
            },
            config: config.clone(),
            mode: setup.mode,
            y: setup.y.clone(),
            target,
            group_of,
            grouped,
            u: vec![0.0; n_groups],
            trees: vec![Tree::stump(0.0); config.n_trees],
            assign: vec![vec![0; n]; config.n_trees],
            total: vec![0.0; n],
            offset: setup.init_offset,
            sigma2,
            sigma_u2: if grouped { config.sigma_u_prior.lambda } else { 0.0 },
            sigma_mu2: setup.sigma_mu * setup.sigma_mu,
            lambda: setup.lambda,
            rng,
            counts: MoveCounts::default(),
            partial: vec![0.0; n],
            resid: vec![0.0; n],
            mu_of: Vec::new(),
            leaf_stats: Vec::new(),
            iter: 0,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma_u2(&self) -> f64 {
        self.sigma_u2
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn counts(&self) -> &MoveCounts {
        &self.counts
    }

    /// Incrementally maintained `Σ_b tree_b(x_i)`.
    pub fn total_fit(&self) -> &[f64] {
        &self.total
    }

    fn refresh_mu_of(&mut self, b: usize) {
        let tree = &self.trees[b];
        self.mu_of.clear();
        self.mu_of.resize(tree.capacity(), 0.0);
        for id in tree.leaves() {
            self.mu_of[id as usize] = tree.mu(id);
        }
    }

    /// `target − offset − u − Σ_{j≠b} tree_j` from the cached total.
    pub fn residual_without(&mut self, b: usize) -> Vec<f64> {
        self.refresh_mu_of(b);
        (0..self.total.len())
            .map(|i| {
                let partial = self.total[i] - self.mu_of[self.assign[b][i] as usize];
                self.target[i] - self.offset - self.u[self.group_of[i]] - partial
            })
            .collect()
    }

    /// The same residual with every other tree re-evaluated from scratch.
    pub fn residual_without_exact(&self, b: usize) -> Vec<f64> {
        let x = self.preds.x;
        (0..self.total.len())
            .map(|i| {
                let others: f64 = (0..self.trees.len())
                    .filter(|&j| j != b)
                    .map(|j| self.trees[j].mu(self.trees[j].route(x, i, 0)))
                    .sum();
                self.target[i] - self.offset - self.u[self.group_of[i]] - others
            })
            .collect()
    }

    fn update_tree(&mut self, b: usize) {
        self.refresh_mu_of(b);
        let assign = &self.assign[b];
        for i in 0..self.total.len() {
            self.partial[i] = self.total[i] - self.mu_of[assign[i] as usize];
            self.resid[i] = self.target[i] - self.offset - self.u[self.group_of[i]] - self.partial[i];
        }

        let outcome = mh_accept_tree(
            &mut self.trees[b],
            &mut self.assign[b],
            &self.resid,
            self.sigma2,
            self.sigma_mu2,
            &mut self.preds,
            &self.prior,
            &self.config.move_probs,
            &mut self.rng,
        );
        match outcome {
            None => {}
            Some((m, None)) => self.counts.failed[m.index()] += 1,
            Some((m, Some(d))) => {
                self.counts.proposed[m.index()] += 1;
                match d {
                    Decision::Accept => self.counts.accepted[m.index()] += 1,
                    Decision::Reject => {}
                    Decision::NonFinite => self.counts.nonfinite += 1,
                }
            }
        }

        let tree = &mut self.trees[b];
        let assign = &self.assign[b];
        self.leaf_stats.clear();
        self.leaf_stats.resize(tree.capacity(), LeafStats::default());
        for (i, &leaf) in assign.iter().enumerate() {
            self.leaf_stats[leaf as usize].push(self.resid[i]);
        }
        self.mu_of.clear();
        self.mu_of.resize(tree.capacity(), 0.0);
        for id in tree.leaves() {
            let mu = draw_leaf_mu(
                &self.leaf_stats[id as usize],
                self.sigma2,
                self.sigma_mu2,
                &mut self.rng,
            );
            tree.set_mu(id, mu);
            self.mu_of[id as usize] = mu;
        }
        for (i, &leaf) in assign.iter().enumerate() {
            self.total[i] = self.partial[i] + self.mu_of[leaf as usize];
        }
    }

    /// Re-sums the trees in order and replaces the cached total.
    fn exact_refresh(&mut self) -> Result<()> {
        let n = self.total.len();
        let mut exact = vec![0.0; n];
        for b in 0..self.trees.len() {
            self.refresh_mu_of(b);
            for (e, &leaf) in exact.iter_mut().zip(&self.assign[b]) {
                *e += self.mu_of[leaf as usize];
            }
        }
        let drift = exact
            .iter()
            .zip(&self.total)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !(drift <= DRIFT_TOLERANCE) {
            return Err(Error::Internal(format!(
                "cached fit drifted by {drift:e} from the sum of trees at iteration {}",
                self.iter
            )));
        }
        self.total = exact;
        Ok(())
    }

    /// One full Gibbs sweep.
    pub fn step(&mut self) -> Result<()> {
        for b in 0..self.trees.len() {
            self.update_tree(b);
        }
        self.exact_refresh()?;
        let n = self.total.len();

        match self.mode {
            Mode::Continuous => {
                if self.config.sigma2_fixed.is_none() {
                    let sse: f64 = (0..n)
                        .map(|i| {
                            let e = self.target[i] - self.offset - self.u[self.group_of[i]] - self.total[i];
                            e * e
                        })
                        .sum();
                    self.sigma2 = draw_sigma2(sse, n, self.config.nu, self.lambda, &mut self.rng).max(SIGMA2_FLOOR);
                }
            }
            Mode::Probit => {
                for i in 0..n {
                    let fit = self.offset + self.total[i] + self.u[self.group_of[i]];
                    self.target[i] = draw_latent_probit(self.y[i] as u8, fit, &mut self.rng);
                }
            }
        }

        if self.grouped {
            let resid: Vec<f64> = (0..n).map(|i| self.target[i] - self.offset - self.total[i]).collect();
            let stats = GroupStats::from_residuals(&self.group_of, &resid, self.u.len());
            self.u = draw_group_effects(&stats, self.sigma2, self.sigma_u2, &mut self.rng);
            let shift = self.u.iter().sum::<f64>() / self.u.len() as f64;
            for u in &mut self.u {
                *u -= shift;
            }
            self.offset += shift;
            self.sigma_u2 = draw_sigma_u2(&self.u, &self.config.sigma_u_prior, &mut self.rng);
        }
        self.iter += 1;
        Ok(())
    }

    pub fn snapshot(&self, chain: usize) -> Draw {
        Draw {
            chain: chain as u32,
            iter: self.iter as u32,
            offset: self.offset,
            trees: self.trees.iter().map(Tree::flatten).collect(),
            u: if self.grouped { self.u.clone() } else { Vec::new() },
            sigma2: self.sigma2,
            sigma_u2: self.sigma_u2,
            train_fit: self.total.iter().map(|t| self.offset + t).collect(),
        }
    }
}
