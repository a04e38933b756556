//! Split-rule candidates at a node: midpoints between consecutive distinct
//! values for numeric predictors, nonempty proper subsets of the levels
//! present for categorical ones.

use rand::Rng;

use crate::matrix::Matrix;
use crate::tree::{CategorySet, SplitKind, SplitRule};

enum ColInfo {
    /// `ranks[i]` indexes `uniques`; `u32::MAX` marks a missing value.
    Numeric {
        ranks: Vec<u32>,
        uniques: Vec<f64>,
    },
    Categorical,
}

pub struct Predictors<'a> {
    pub x: &'a Matrix,
    cols: Vec<ColInfo>,
    mark: Vec<bool>,
    list: Vec<u32>,
}

const MISSING_RANK: u32 = u32::MAX;

/// Midpoint that keeps `lo` on the left and `hi` on the right even for
/// adjacent floating-point values.
fn cut_between(lo: f64, hi: f64) -> f64 {
    let c = lo + (hi - lo) / 2.0;
    if c >= hi {
        lo
    } else {
        c
    }
}

/// `ln(2^k − 2)` without overflow.
fn log_subset_count(k: usize) -> f64 {
    k as f64 * std::f64::consts::LN_2 + (-(2f64.powi(1 - k as i32))).ln_1p()
}

impl<'a> Predictors<'a> {
    pub fn new(x: &'a Matrix) -> Self {
        let mut width = 0;
        let cols = (0..x.n_cols())
            .map(|j| {
                let kind = &x.columns()[j].kind;
                if kind.is_categorical() {
                    width = width.max(kind.n_levels());
                    return ColInfo::Categorical;
                }
                let col = x.column(j);
                let mut uniques: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
                uniques.sort_by(f64::total_cmp);
                uniques.dedup();
                let ranks = col
                    .iter()
                    .map(|v| {
                        if v.is_nan() {
                            MISSING_RANK
                        } else {
                            uniques.partition_point(|u| u < v) as u32
                        }
                    })
                    .collect();
                width = width.max(uniques.len());
                ColInfo::Numeric { ranks, uniques }
            })
            .collect();
        Self {
            x,
            cols,
            mark: vec![false; width],
            list: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.cols.len()
    }

    /// Collects the distinct ranks (numeric) or level codes (categorical)
    /// present among `rows` into `self.list`, unsorted, and clears the marks.
    fn collect_distinct(&mut self, var: usize, rows: &[u32]) {
        self.list.clear();
        match &self.cols[var] {
            ColInfo::Numeric { ranks, .. } => {
                for &i in rows {
                    let r = ranks[i as usize];
                    if r != MISSING_RANK && !self.mark[r as usize] {
                        self.mark[r as usize] = true;
                        self.list.push(r);
                    }
                }
            }
            ColInfo::Categorical => {
                let col = self.x.column(var);
                for &i in rows {
                    let v = col[i as usize];
                    if !v.is_nan() && !self.mark[v as usize] {
                        self.mark[v as usize] = true;
                        self.list.push(v as u32);
                    }
                }
            }
        }
        for &r in &self.list {
            self.mark[r as usize] = false;
        }
    }

    /// Log of the number of candidate rules on `var` at a node holding
    /// `rows`, or `None` when there is no candidate.
    pub fn log_n_candidates(&mut self, var: usize, rows: &[u32]) -> Option<f64> {
        self.collect_distinct(var, rows);
        let d = self.list.len();
        if d < 2 {
            return None;
        }
        Some(match self.cols[var] {
            ColInfo::Numeric { .. } => ((d - 1) as f64).ln(),
            ColInfo::Categorical => log_subset_count(d),
        })
    }

    /// Draws a rule on `var` uniformly among the candidates, with the
    /// missing-value direction chosen by a fair coin.
    pub fn draw_rule<R: Rng + ?Sized>(&mut self, var: usize, rows: &[u32], rng: &mut R) -> Option<SplitRule> {
        self.collect_distinct(var, rows);
        let d = self.list.len();
        if d < 2 {
            return None;
        }
        let rule = match &self.cols[var] {
            ColInfo::Numeric { uniques, .. } => {
                let k = rng.random_range(0..d - 1);
                let (_, &mut lo, above) = self.list.select_nth_unstable(k);
                let hi = *above.iter().min().expect("k < d - 1");
                let c = cut_between(uniques[lo as usize], uniques[hi as usize]);
                SplitRule::threshold(var, c, rng.random())
            }
            ColInfo::Categorical => {
                self.list.sort_unstable();
                let set = loop {
                    let picks: Vec<bool> = (0..d).map(|_| rng.random()).collect();
                    let n_in = picks.iter().filter(|&&b| b).count();
                    if n_in > 0 && n_in < d {
                        break CategorySet::from_codes(
                            self.list
                                .iter()
                                .zip(&picks)
                                .filter(|(_, &b)| b)
                                .map(|(&c, _)| c as usize),
                        );
                    }
                };
                SplitRule::subset(var, set, rng.random())
            }
        };
        Some(rule)
    }

    /// Whether `rule` is one of the candidates at a node holding `rows`.
    pub fn in_support(&mut self, rule: &SplitRule, rows: &[u32]) -> bool {
        let col = self.x.column(rule.var);
        match &rule.kind {
            SplitKind::Threshold(c) => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for &i in rows {
                    let v = col[i as usize];
                    if v <= *c {
                        lo = lo.max(v);
                    } else if v > *c {
                        hi = hi.min(v);
                    }
                }
                lo.is_finite() && hi.is_finite() && cut_between(lo, hi) == *c
            }
            SplitKind::Subset(set) => {
                self.collect_distinct(rule.var, rows);
                let d = self.list.len();
                let inside = self.list.iter().filter(|&&c| set.contains(c as usize)).count();
                inside > 0 && inside < d && inside == set.len()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ColumnSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn matrix() -> Matrix {
        let levels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        Matrix::from_columns(
            vec![ColumnSpec::numeric("x"), ColumnSpec::categorical("g", levels)],
            vec![vec![3.0, 1.0, f64::NAN, 1.0, 7.0], vec![0.0, 1.0, 2.0, 2.0, f64::NAN]],
        )
        .unwrap()
    }

    #[test]
    fn numeric_candidates_are_node_midpoints() {
        let x = matrix();
        let mut p = Predictors::new(&x);
        let rows = [0, 1, 2, 3, 4];
        assert_eq!(p.log_n_candidates(0, &rows), Some(2f64.ln()));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cuts: BTreeSet<String> = (0..200)
            .map(|_| match p.draw_rule(0, &rows, &mut rng).unwrap().kind {
                SplitKind::Threshold(c) => c.to_string(),
                SplitKind::Subset(_) => unreachable!(),
            })
            .collect();
        assert_eq!(cuts, ["2", "5"].iter().map(|s| s.to_string()).collect());
        assert!(p.in_support(&SplitRule::threshold(0, 2.0, true), &rows));
        assert!(!p.in_support(&SplitRule::threshold(0, 2.5, true), &rows));
        // on rows {0, 4} only 5 is a midpoint
        assert!(!p.in_support(&SplitRule::threshold(0, 2.0, true), &[0, 4]));
        assert!(p.in_support(&SplitRule::threshold(0, 5.0, true), &[0, 4]));
        assert_eq!(p.log_n_candidates(0, &[1, 3]), None);
    }

    #[test]
    fn categorical_candidates_are_proper_subsets() {
        let x = matrix();
        let mut p = Predictors::new(&x);
        let rows = [0, 1, 2, 3, 4];
        assert!((p.log_n_candidates(1, &rows).unwrap() - 6f64.ln()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = BTreeSet::new();
        for _ in 0..500 {
            let rule = p.draw_rule(1, &rows, &mut rng).unwrap();
            assert!(p.in_support(&rule, &rows));
            if let SplitKind::Subset(s) = rule.kind {
                seen.insert(s.codes());
            }
        }
        assert_eq!(seen.len(), 6);
        let ab = SplitRule::subset(1, CategorySet::from_codes([0, 1]), true);
        assert!(!p.in_support(&ab, &[0, 1]));
        assert_eq!(p.log_n_candidates(1, &[2, 3, 4]), None);
    }

    #[test]
    fn adjacent_floats_split_cleanly() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let c = cut_between(a, b);
        assert!(a <= c && b > c);
    }

    #[test]
    fn subset_count_large_k() {
        assert!((log_subset_count(3) - 6f64.ln()).abs() < 1e-12);
        assert!((log_subset_count(80) - 80.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }
}
