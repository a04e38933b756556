//! Random forest classifier: bootstrap samples, `mtry` candidate predictors
//! per node and exact greedy Gini splits. Missing values always go left.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::matrix::{ColumnSpec, Matrix};
use crate::tree::{CategorySet, SplitKind, SplitRule};

pub const CONTAINER_KIND: &str = "rf";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfConfig {
    pub n_trees: usize,
    /// Candidate predictors per node; `None` means `⌊√p⌋`.
    pub mtry: Option<usize>,
    /// Nodes with at most this many rows are not split.
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    /// Off grows every tree on the full training set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node_size: 10,
            max_depth: None,
            bootstrap: true,
            seed: 1,
        }
    }
}

impl RfConfig {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or(((p as f64).sqrt().floor() as usize).max(1))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        let m = self.resolved_mtry(p);
        if m == 0 || m > p {
            return Err(Error::invalid(format!("mtry must lie in [1, {p}], got {m}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RfNode {
    Leaf {
        /// Share of each class among the node's training rows.
        proportions: Vec<f64>,
        /// Majority class, ties to the lower index.
        class: usize,
    },
    Internal {
        rule: SplitRule,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RfTree {
    pub nodes: Vec<RfNode>,
}

impl RfTree {
    pub fn leaf_for(&self, x: &Matrix, i: usize) -> &RfNode {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                RfNode::Internal { rule, left, right } => {
                    k = if rule.goes_left(x.get(i, rule.var)) {
                        *left
                    } else {
                        *right
                    } as usize;
                }
                leaf => return leaf,
            }
        }
    }

    pub fn vote(&self, x: &Matrix, i: usize) -> usize {
        match self.leaf_for(x, i) {
            RfNode::Leaf { class, .. } => *class,
            RfNode::Internal { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, RfNode::Leaf { .. })).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfHeader {
    pub config: RfConfig,
    pub columns: Vec<ColumnSpec>,
    pub n_classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfForest {
    pub header: RfHeader,
    pub trees: Vec<RfTree>,
    /// Out-of-bag training rows of each tree.
    pub oob: Vec<Vec<u32>>,
}

fn argmax_low(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Compares `a_num / a_den` with `b_num / b_den` exactly.
fn cmp_ratio(a_num: u128, a_den: u128, b_num: u128, b_den: u128) -> Ordering {
    (a_num * b_den).cmp(&(b_num * a_den))
}

/// Split quality `Σ_k l_k²/n_l + Σ_k r_k²/n_r` as an exact fraction; larger
/// means lower weighted Gini impurity.
#[derive(Clone, Copy, Debug)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn of(left: &[usize], right: &[usize]) -> Self {
        let nl: usize = left.iter().sum();
        let nr: usize = right.iter().sum();
        let sl: usize = left.iter().map(|c| c * c).sum();
        let sr: usize = right.iter().map(|c| c * c).sum();
        Self {
            num: sl as u128 * nr as u128 + sr as u128 * nl as u128,
            den: nl as u128 * nr as u128,
        }
    }

    fn parent(counts: &[usize]) -> Self {
        let n: usize = counts.iter().sum();
        Self {
            num: counts.iter().map(|c| (c * c) as u128).sum(),
            den: n as u128,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        cmp_ratio(self.num, self.den, other.num, other.den)
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    min_node_size: usize,
    max_depth: Option<usize>,
}

struct Candidate {
    score: Score,
    rule: SplitRule,
}

impl Grower<'_> {
    fn counts(&self, rows: &[u32]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in rows {
            c[self.y[i as usize]] += 1;
        }
        c
    }

    fn grow<R: Rng>(&self, rows: Vec<u32>, depth: usize, nodes: &mut Vec<RfNode>, rng: &mut R) -> u32 {
        let slot = nodes.len() as u32;
        let counts = self.counts(&rows);
        let n = rows.len();
        let leaf = RfNode::Leaf {
            proportions: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            class: argmax_low(&counts),
        };
        nodes.push(leaf);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || n <= self.min_node_size || self.max_depth.is_some_and(|cap| depth >= cap) {
            return slot;
        }
        let mut vars = sample(rng, self.x.n_cols(), self.mtry).into_vec();
        vars.sort_unstable();
        let parent = Score::parent(&counts);
        let mut best: Option<Candidate> = None;
        for var in vars {
            if let Some(c) = self.best_split(var, &rows, &counts) {
                // strict improvement keeps the lower predictor index on ties
                if best.as_ref().is_none_or(|b| c.score.cmp(&b.score) == Ordering::Greater) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best.filter(|b| b.score.cmp(&parent) == Ordering::Greater) else {
            return slot;
        };
        let (l, r): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&i| best.rule.goes_left(self.x.get(i as usize, best.rule.var)));
        let left = self.grow(l, depth + 1, nodes, rng);
        let right = self.grow(r, depth + 1, nodes, rng);
        nodes[slot as usize] = RfNode::Internal {
            rule: best.rule,
            left,
            right,
        };
        slot
    }

    /// Best split on one predictor. Missing rows sit on the left of every
    /// candidate; ties keep the lowest threshold.
    fn best_split(&self, var: usize, rows: &[u32], counts: &[usize]) -> Option<Candidate> {
        let col = self.x.column(var);
        let mut missing = vec![0; self.n_classes];
        let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for &i in rows {
            let v = col[i as usize];
            if v.is_nan() {
                missing[self.y[i as usize]] += 1;
            } else {
                present.push((v, self.y[i as usize]));
            }
        }
        let categorical = self.x.columns()[var].kind.is_categorical();
        // For categorical predictors, rank levels by their class-1 share.
        let mut level_rank: Vec<(f64, usize)> = Vec::new();
        if categorical {
            let n_levels = self.x.columns()[var].kind.n_levels();
            let mut per = vec![(0usize, 0usize); n_levels];
            for &(v, c) in &present {
                per[v as usize].0 += 1;
                per[v as usize].1 += usize::from(c == 1);
            }
            let mut levels: Vec<usize> = (0..n_levels).filter(|&l| per[l].0 > 0).collect();
            levels.sort_by(|&a, &b| {
                cmp_ratio(per[a].1 as u128, per[a].0 as u128, per[b].1 as u128, per[b].0 as u128).then(a.cmp(&b))
            });
            level_rank = vec![(f64::NAN, 0); n_levels];
            for (r, &l) in levels.iter().enumerate() {
                level_rank[l] = (r as f64, l);
            }
            for p in &mut present {
                p.0 = level_rank[p.0 as usize].0;
            }
        }
        present.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = missing.clone();
        let mut best: Option<(Score, usize)> = None;
        for k in 0..present.len().saturating_sub(1) {
            left[present[k].1] += 1;
            if present[k].0 == present[k + 1].0 {
                continue;
            }
            let right: Vec<usize> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
            let s = Score::of(&left, &right);
            if best.as_ref().is_none_or(|(b, _)| s.cmp(b) == Ordering::Greater) {
                best = Some((s, k));
            }
        }
        let (score, k) = best?;
        let (lo, hi) = (present[k].0, present[k + 1].0);
        let rule = if categorical {
            let set = CategorySet::from_codes(level_rank.iter().filter(|(r, _)| *r <= lo).map(|&(_, l)| l));
            SplitRule::subset(var, set, true)
        } else {
            SplitRule::threshold(var, lo + (hi - lo) / 2.0, true)
        };
        Some(Candidate { score, rule })
    }
}

pub fn fit_rf(x: &Matrix, y: &[usize], config: &RfConfig) -> Result<RfForest> {
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(Error::invalid("training data is empty"));
    }
    if y.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", y.len())));
    }
    config.validate(x.n_cols())?;
    let n_classes = y.iter().copied().max().unwrap_or(0) + 1;
    let grower = Grower {
        x,
        y,
        n_classes: n_classes.max(2),
        mtry: config.resolved_mtry(x.n_cols()),
        min_node_size: config.min_node_size,
        max_depth: config.max_depth,
    };
    let grown: Vec<(RfTree, Vec<u32>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64 + 1);
            let (rows, oob) = if config.bootstrap {
                let rows: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
                let mut seen = vec![false; n];
                rows.iter().for_each(|&i| seen[i as usize] = true);
                (rows, (0..n as u32).filter(|&i| !seen[i as usize]).collect())
            } else {
                ((0..n as u32).collect(), Vec::new())
            };
            let mut nodes = Vec::new();
            grower.grow(rows, 0, &mut nodes, &mut rng);
            (RfTree { nodes }, oob)
        })
        .collect();
    let (trees, oob) = grown.into_iter().unzip();
    Ok(RfForest {
        header: RfHeader {
            config: config.clone(),
            columns: x.columns().to_vec(),
            n_classes: grower.n_classes,
        },
        trees,
        oob,
    })
}

impl RfForest {
    /// Per-row vote counts per class.
    pub fn votes(&self, x: &Matrix) -> Result<Vec<Vec<usize>>> {
        x.check_schema(&self.header.columns)?;
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let mut v = vec![0; self.header.n_classes];
                for t in &self.trees {
                    v[t.vote(x, i)] += 1;
                }
                v
            })
            .collect())
    }

    /// Majority vote; ties go to the lower class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.votes(x)?.iter().map(|v| argmax_low(v)).collect())
    }

    /// Share of trees voting for class 1.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        let b = self.trees.len() as f64;
        Ok(self.votes(x)?.iter().map(|v| v[1] as f64 / b).collect())
    }

    /// Out-of-bag misclassification rate over rows with at least one
    /// out-of-bag tree; `None` without bootstrap.
    pub fn oob_error(&self, x: &Matrix, y: &[usize]) -> Option<f64> {
        let mut votes = vec![vec![0usize; self.header.n_classes]; x.n_rows()];
        for (t, oob) in self.trees.iter().zip(&self.oob) {
            for &i in oob {
                votes[i as usize][t.vote(x, i as usize)] += 1;
            }
        }
        let scored: Vec<usize> = (0..x.n_rows()).filter(|&i| votes[i].iter().any(|&c| c > 0)).collect();
        if scored.is_empty() {
            return None;
        }
        let wrong = scored.iter().filter(|&&i| argmax_low(&votes[i]) != y[i]).count();
        Some(wrong as f64 / scored.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write(path, CONTAINER_KIND, &self.header, &(&self.trees, &self.oob))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, (trees, oob)) = container::read(path, CONTAINER_KIND)?;
        Ok(Self { header, trees, oob })
    }
}

/// Threshold or subset of a rule, for display and comparisons.
pub fn describe_rule(rule: &SplitRule) -> String {
    match &rule.kind {
        SplitKind::Threshold(c) => format!("x{} <= {c}", rule.var),
        SplitKind::Subset(s) => format!("x{} in {:?}", rule.var, s.codes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: Vec<Vec<f64>>) -> Matrix {
        let n = cols[0].len();
        Matrix::from_rows(&(0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn separating_predictor_gives_perfect_training_accuracy() {
        let x = matrix(vec![
            (0..40).map(|i| i as f64).collect(),
            (0..40).map(|i| ((i * 7) % 11) as f64).collect(),
        ]);
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 17)).collect();
        let forest = fit_rf(
            &x,
            &y,
            &RfConfig {
                n_trees: 25,
                min_node_size: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(forest.predict(&x).unwrap(), y);
    }

    #[test]
    fn pure_labels_give_stumps() {
        let x = matrix(vec![(0..20).map(|i| i as f64).collect()]);
        let y = vec![1; 20];
        let forest = fit_rf(
            &x,
            &y,
            &RfConfig {
                n_trees: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(forest.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(forest.predict(&x).unwrap().iter().all(|&c| c == 1));
        assert!(forest.predict_proba(&x).unwrap().iter().all(|&p| p == 1.0));
    }

    fn stump(class: usize) -> RfTree {
        let mut proportions = vec![0.0, 0.0];
        proportions[class] = 1.0;
        RfTree {
            nodes: vec![RfNode::Leaf { proportions, class }],
        }
    }

    fn forest_of(classes: &[usize]) -> RfForest {
        RfForest {
            header: RfHeader {
                config: RfConfig::default(),
                columns: vec![ColumnSpec::numeric("x1")],
                n_classes: 2,
            },
            trees: classes.iter().map(|&c| stump(c)).collect(),
            oob: vec![Vec::new(); classes.len()],
        }
    }

    #[test]
    fn majority_and_tie_rules() {
        let x = matrix(vec![vec![0.0]]);
        assert_eq!(forest_of(&[1, 1, 0]).predict(&x).unwrap(), vec![1]);
        assert_eq!(forest_of(&[1, 1, 0, 0]).predict(&x).unwrap(), vec![0]);
        assert_eq!(forest_of(&[1, 1]).predict_proba(&x).unwrap(), vec![1.0]);
        assert_eq!(forest_of(&[1, 0]).predict_proba(&x).unwrap(), vec![0.5]);
    }

    #[test]
    fn vote_fraction_matches_per_tree_traversal() {
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..60).map(|i| ((i * (j + 3) * 13) % 17) as f64).collect())
            .collect();
        let x = matrix(cols);
        let y: Vec<usize> = (0..60).map(|i| usize::from((i * 5) % 7 > 2)).collect();
        let forest = fit_rf(
            &x,
            &y,
            &RfConfig {
                n_trees: 15,
                mtry: Some(2),
                min_node_size: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let probs = forest.predict_proba(&x).unwrap();
        let labels = forest.predict(&x).unwrap();
        for i in 0..10 {
            // walk each tree by hand from the serialized node table
            let mut ones = 0;
            for t in &forest.trees {
                let mut k = 0usize;
                let class = loop {
                    match &t.nodes[k] {
                        RfNode::Leaf { proportions, class } => {
                            assert!((proportions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                            break *class;
                        }
                        RfNode::Internal { rule, left, right } => {
                            let v = x.get(i, rule.var);
                            k = if v.is_nan() || matches!(rule.kind, SplitKind::Threshold(c) if v <= c) {
                                *left
                            } else {
                                *right
                            } as usize;
                        }
                    }
                };
                ones += usize::from(class == 1);
            }
            assert_eq!(probs[i], ones as f64 / 15.0);
            assert_eq!(labels[i], usize::from(2 * ones > 15));
        }
    }

    #[test]
    fn missing_values_go_left_and_categoricals_split() {
        let levels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let x = Matrix::from_columns(
            vec![ColumnSpec::categorical("g", levels)],
            vec![vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, f64::NAN, f64::NAN]],
        )
        .unwrap();
        let y = vec![1, 1, 0, 0, 1, 1, 0, 0];
        let cfg = RfConfig {
            n_trees: 1,
            mtry: Some(1),
            min_node_size: 1,
            bootstrap: false,
            ..Default::default()
        };
        let forest = fit_rf(&x, &y, &cfg).unwrap();
        assert_eq!(forest.predict(&x).unwrap(), y);
        match &forest.trees[0].nodes[0] {
            RfNode::Internal { rule, .. } => {
                assert!(rule.missing_left);
                assert!(matches!(&rule.kind, SplitKind::Subset(s) if s.codes() == vec![1]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_and_round_trips() {
        let x = matrix(vec![
            (0..50).map(|i| (i % 9) as f64).collect(),
            (0..50).map(|i| (i % 4) as f64).collect(),
        ]);
        let y: Vec<usize> = (0..50).map(|i| usize::from(i % 9 > 4)).collect();
        let cfg = RfConfig {
            n_trees: 20,
            ..Default::default()
        };
        let a = fit_rf(&x, &y, &cfg).unwrap();
        assert_eq!(a, fit_rf(&x, &y, &cfg).unwrap());
        assert!(a.oob_error(&x, &y).is_some());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.bin");
        a.save(&path).unwrap();
        assert_eq!(RfForest::load(&path).unwrap(), a);
    }

    #[test]
    fn rejects_bad_input() {
        let x = matrix(vec![vec![0.0, 1.0]]);
        assert!(fit_rf(&x, &[0], &RfConfig::default()).is_err());
        assert!(fit_rf(
            &x,
            &[0, 1],
            &RfConfig {
                mtry: Some(2),
                ..Default::default()
            }
        )
        .is_err());
        let other = matrix(vec![vec![0.0], vec![1.0]]);
        let f = fit_rf(
            &x,
            &[0, 1],
            &RfConfig {
                n_trees: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(f.predict(&other).is_err());
    }
}
