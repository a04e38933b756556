//! GROW / PRUNE / CHANGE proposals and the Metropolis-Hastings decision.
//!
//! The tree prior splits a node at depth `d` with probability
//! `α(1+d)^(−β)` (zero at the depth cap), picks the predictor uniformly among
//! all `p`, and the rule uniformly among that predictor's candidates at the
//! node, with a fair coin for the missing-value direction. Proposals draw new
//! rules from the same distribution, so rule terms cancel except for the
//! descendants of a CHANGE-d node, whose candidate sets may move.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::candidates::Predictors;
use super::config::MoveProbs;
use super::conjugate::{leaf_marginal_loglik, LeafStats};
use super::prior::split_prob;
use super::tree::Tree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Grow,
    Prune,
    Change,
}

impl Move {
    pub const ALL: [Move; 3] = [Move::Grow, Move::Prune, Move::Change];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreePrior {
    pub alpha: f64,
    pub beta: f64,
    pub max_depth: Option<usize>,
}

impl TreePrior {
    pub fn can_split(&self, depth: usize) -> bool {
        self.max_depth.is_none_or(|cap| depth < cap)
    }

    /// Split probability, zero at or beyond the depth cap.
    pub fn p_split(&self, depth: usize) -> f64 {
        if self.can_split(depth) {
            split_prob(depth, self.alpha, self.beta)
        } else {
            0.0
        }
    }
}

/// Move probabilities renormalised over the moves valid for `tree`.
pub fn move_distribution(tree: &Tree, prior: &TreePrior, probs: &MoveProbs) -> [f64; 3] {
    let has_internal = tree.n_leaves() > 1;
    let can_grow = tree.leaves().iter().any(|&l| prior.can_split(tree.depth(l)));
    let raw = [
        if can_grow { probs.grow } else { 0.0 },
        if has_internal { probs.prune } else { 0.0 },
        if has_internal { probs.change } else { 0.0 },
    ];
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.map(|p| p / total)
    } else {
        [0.0; 3]
    }
}

fn pick_move<R: Rng + ?Sized>(dist: &[f64; 3], rng: &mut R) -> Option<Move> {
    if dist.iter().sum::<f64>() <= 0.0 {
        return None;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for m in Move::ALL {
        acc += dist[m.index()];
        if u < acc {
            return Some(m);
        }
    }
    Move::ALL.into_iter().rev().find(|m| dist[m.index()] > 0.0)
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub kind: Move,
    pub tree: Tree,
    /// Rows whose leaf changes, with their leaf in the proposed tree.
    pub changes: Vec<(u32, u32)>,
    pub log_proposal_ratio: f64,
    pub log_prior_ratio: f64,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    /// No move has positive probability (e.g. frozen trees).
    NoMove,
    /// The chosen move found no candidate rule; the chain stays put.
    Failed(Move),
    Proposed(Proposal),
}

pub fn rows_in_leaf(assign: &[u32], leaf: u32) -> Vec<u32> {
    (0..assign.len() as u32)
        .filter(|&i| assign[i as usize] == leaf)
        .collect()
}

/// Rows whose leaf lies in the subtree rooted at `id`.
pub fn rows_under(tree: &Tree, assign: &[u32], id: u32) -> Vec<u32> {
    let mut inside = vec![false; tree.capacity()];
    for n in tree.subtree(id) {
        inside[n as usize] = true;
    }
    (0..assign.len() as u32)
        .filter(|&i| inside[assign[i as usize] as usize])
        .collect()
}

/// Routes `rows` down from `from` and records, for every node below `from`
/// that each row visits, the rows reaching it (indexed by node id).
pub fn rows_by_node(tree: &Tree, preds: &Predictors, from: u32, rows: &[u32]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![Vec::new(); tree.capacity()];
    for &i in rows {
        let mut id = from;
        while let Some((l, r)) = tree.children(id) {
            let rule = tree.rule(id).expect("internal");
            id = if rule.goes_left(preds.x.get(i as usize, rule.var)) {
                l
            } else {
                r
            };
            out[id as usize].push(i);
        }
    }
    out
}

pub fn propose_tree<R: Rng + ?Sized>(
    tree: &Tree,
    assign: &[u32],
    preds: &mut Predictors,
    prior: &TreePrior,
    probs: &MoveProbs,
    rng: &mut R,
) -> Outcome {
    let dist = move_distribution(tree, prior, probs);
    let Some(kind) = pick_move(&dist, rng) else {
        return Outcome::NoMove;
    };
    let proposal = match kind {
        Move::Grow => propose_grow(tree, assign, preds, prior, probs, &dist, rng),
        Move::Prune => Some(propose_prune(tree, assign, prior, probs, &dist, rng)),
        Move::Change => propose_change(tree, assign, preds, rng),
    };
    match proposal {
        Some(p) => Outcome::Proposed(p),
        None => Outcome::Failed(kind),
    }
}

fn growable(tree: &Tree, prior: &TreePrior) -> Vec<u32> {
    tree.leaves()
        .into_iter()
        .filter(|&l| prior.can_split(tree.depth(l)))
        .collect()
}

fn propose_grow<R: Rng + ?Sized>(
    tree: &Tree,
    assign: &[u32],
    preds: &mut Predictors,
    prior: &TreePrior,
    probs: &MoveProbs,
    dist: &[f64; 3],
    rng: &mut R,
) -> Option<Proposal> {
    let candidates = growable(tree, prior);
    let leaf = candidates[rng.random_range(0..candidates.len())];
    let var = rng.random_range(0..preds.n_vars());
    let rows = rows_in_leaf(assign, leaf);
    let rule = preds.draw_rule(var, &rows, rng)?;
    let mut new_tree = tree.clone();
    let (l, r) = new_tree.grow(leaf, rule.clone());
    let changes = rows
        .iter()
        .map(|&i| {
            (
                i,
                if rule.goes_left(preds.x.get(i as usize, var)) {
                    l
                } else {
                    r
                },
            )
        })
        .collect();

    let d = tree.depth(leaf);
    let log_prior_ratio =
        prior.p_split(d).ln() + 2.0 * (1.0 - prior.p_split(d + 1)).ln() - (1.0 - prior.p_split(d)).ln();
    let new_dist = move_distribution(&new_tree, prior, probs);
    let log_proposal_ratio =
        new_dist[Move::Prune.index()].ln() - (new_tree.nog().len() as f64).ln() - dist[Move::Grow.index()].ln()
            + (candidates.len() as f64).ln();
    Some(Proposal {
        kind: Move::Grow,
        tree: new_tree,
        changes,
        log_proposal_ratio,
        log_prior_ratio,
    })
}

fn propose_prune<R: Rng + ?Sized>(
    tree: &Tree,
    assign: &[u32],
    prior: &TreePrior,
    probs: &MoveProbs,
    dist: &[f64; 3],
    rng: &mut R,
) -> Proposal {
    let nogs = tree.nog();
    let node = nogs[rng.random_range(0..nogs.len())];
    let (l, r) = tree.children(node).expect("internal");
    let mut new_tree = tree.clone();
    new_tree.prune(node);
    let changes = (0..assign.len() as u32)
        .filter(|&i| assign[i as usize] == l || assign[i as usize] == r)
        .map(|i| (i, node))
        .collect();

    let d = tree.depth(node);
    let log_prior_ratio =
        (1.0 - prior.p_split(d)).ln() - prior.p_split(d).ln() - 2.0 * (1.0 - prior.p_split(d + 1)).ln();
    let new_dist = move_distribution(&new_tree, prior, probs);
    let log_proposal_ratio = new_dist[Move::Grow.index()].ln()
        - (growable(&new_tree, prior).len() as f64).ln()
        - dist[Move::Prune.index()].ln()
        + (nogs.len() as f64).ln();
    Proposal {
        kind: Move::Prune,
        tree: new_tree,
        changes,
        log_proposal_ratio,
        log_prior_ratio,
    }
}

fn propose_change<R: Rng + ?Sized>(
    tree: &Tree,
    assign: &[u32],
    preds: &mut Predictors,
    rng: &mut R,
) -> Option<Proposal> {
    let internal = tree.internal();
    let node = internal[rng.random_range(0..internal.len())];
    let var = rng.random_range(0..preds.n_vars());
    let rows = rows_under(tree, assign, node);
    let rule = preds.draw_rule(var, &rows, rng)?;
    let mut new_tree = tree.clone();
    new_tree.set_rule(node, rule);

    let descendants: Vec<u32> = tree
        .subtree(node)
        .into_iter()
        .skip(1)
        .filter(|&id| !tree.is_leaf(id))
        .collect();
    let mut log_prior_ratio = 0.0;
    if !descendants.is_empty() {
        let old_rows = rows_by_node(tree, preds, node, &rows);
        let new_rows = rows_by_node(&new_tree, preds, node, &rows);
        for id in descendants {
            let rule = tree.rule(id).expect("internal");
            let now = &new_rows[id as usize];
            if !preds.in_support(rule, now) {
                log_prior_ratio = f64::NEG_INFINITY;
                break;
            }
            let lc_old = preds
                .log_n_candidates(rule.var, &old_rows[id as usize])
                .expect("current rule in support");
            let lc_new = preds.log_n_candidates(rule.var, now).expect("checked support");
            log_prior_ratio += lc_old - lc_new;
        }
    }
    let changes = if log_prior_ratio == f64::NEG_INFINITY {
        Vec::new()
    } else {
        rows.iter()
            .map(|&i| (i, new_tree.route(preds.x, i as usize, node)))
            .collect()
    };
    Some(Proposal {
        kind: Move::Change,
        tree: new_tree,
        changes,
        log_proposal_ratio: 0.0,
        log_prior_ratio,
    })
}

/// Change in the integrated log likelihood between the current partition
/// and the proposal.
pub fn log_likelihood_ratio(p: &Proposal, assign: &[u32], residuals: &[f64], sigma2: f64, sigma_mu2: f64) -> f64 {
    let width = assign
        .iter()
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0)
        .max(p.tree.capacity());
    let mut old = vec![LeafStats::default(); width];
    let mut new = vec![LeafStats::default(); width];
    for &(i, l) in &p.changes {
        let r = residuals[i as usize];
        old[assign[i as usize] as usize].push(r);
        new[l as usize].push(r);
    }
    let total = |v: &[LeafStats]| {
        v.iter()
            .map(|s| leaf_marginal_loglik(s, sigma2, sigma_mu2))
            .sum::<f64>()
    };
    total(&new) - total(&old)
}

/// Log of the MH acceptance ratio.
pub fn log_acceptance(p: &Proposal, assign: &[u32], residuals: &[f64], sigma2: f64, sigma_mu2: f64) -> f64 {
    if p.log_prior_ratio == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    log_likelihood_ratio(p, assign, residuals, sigma2, sigma_mu2) + p.log_prior_ratio + p.log_proposal_ratio
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
    /// The ratio was NaN or +∞; treated as a rejection.
    NonFinite,
}

pub fn mh_decide<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> Decision {
    if log_ratio.is_nan() || log_ratio == f64::INFINITY {
        return Decision::NonFinite;
    }
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Proposes a move for `tree` and applies it if accepted. Returns the move
/// tried, if any, and the decision.
#[allow(clippy::too_many_arguments)]
pub fn mh_accept_tree<R: Rng + ?Sized>(
    tree: &mut Tree,
    assign: &mut [u32],
    residuals: &[f64],
    sigma2: f64,
    sigma_mu2: f64,
    preds: &mut Predictors,
    prior: &TreePrior,
    probs: &MoveProbs,
    rng: &mut R,
) -> Option<(Move, Option<Decision>)> {
    match propose_tree(tree, assign, preds, prior, probs, rng) {
        Outcome::NoMove => None,
        Outcome::Failed(m) => Some((m, None)),
        Outcome::Proposed(p) => {
            let decision = mh_decide(log_acceptance(&p, assign, residuals, sigma2, sigma_mu2), rng);
            if decision == Decision::Accept {
                for &(i, l) in &p.changes {
                    assign[i as usize] = l;
                }
                *tree = p.tree;
            }
            Some((p.kind, Some(decision)))
        }
    }
}
