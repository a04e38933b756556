//! Classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn class_counts(labels: &[u8]) -> Result<(u64, u64)> {
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    Ok((pos, labels.len() as u64 - pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from integer pair counts, so the result is
/// exactly `concordant + ties/2` over `positives × negatives`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let (pos, neg) = class_counts(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the Mann-Whitney U of the positives
    let mut u2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let (mut p, mut n) = (0u128, 0u128);
        for &i in &order[k..end] {
            if labels[i] == 1 {
                p += 1;
            } else {
                n += 1;
            }
        }
        u2 += p * (2 * neg_below + n);
        neg_below += n;
        k = end;
    }
    Ok(u2 as f64 / (2 * pos as u128 * neg as u128) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    /// Recall on class 1 (reaches the level).
    pub sensitivity: f64,
    /// Recall on class 0.
    pub specificity: f64,
    pub roc_auc: f64,
    pub threshold: f64,
    pub n: usize,
}

impl MetricReport {
    /// Rows of the metric table, in the order they are reported.
    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("accuracy", self.accuracy),
            ("sens", self.sensitivity),
            ("spec", self.specificity),
            ("roc_auc", self.roc_auc),
        ]
    }
}

/// A row is predicted positive when its probability is at least `threshold`.
pub fn confusion_metrics(probs: &[f64], labels: &[u8], threshold: f64) -> Result<MetricReport> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("probabilities must lie in [0, 1]"));
    }
    let auc = roc_auc(probs, labels)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &l) in probs.iter().zip(labels) {
        match (p >= threshold, l == 1) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = labels.len();
    Ok(MetricReport {
        accuracy: (tp + tn) as f64 / n as f64,
        sensitivity: tp as f64 / (tp + fn_) as f64,
        specificity: tn as f64 / (tn + fp) as f64,
        roc_auc: auc,
        threshold,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn confusion_extremes() {
        let labels = [0, 1, 1, 0, 1];
        let exact: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let r = confusion_metrics(&exact, &labels, 0.5).unwrap();
        assert_eq!(
            (r.accuracy, r.sensitivity, r.specificity, r.roc_auc),
            (1.0, 1.0, 1.0, 1.0)
        );
        let flipped: Vec<f64> = labels.iter().map(|&l| 1.0 - l as f64).collect();
        let r = confusion_metrics(&flipped, &labels, 0.5).unwrap();
        assert_eq!((r.accuracy, r.sensitivity, r.specificity), (0.0, 0.0, 0.0));
    }

    #[test]
    fn confusion_hand_case() {
        let probs = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.55];
        let labels = [1, 1, 0, 1, 0, 1, 0, 0, 0, 1];
        // positives at >= 0.5: rows 0,1,2,3,4,9 -> tp 4, fp 2; negatives: tn 3, fn 1
        let r = confusion_metrics(&probs, &labels, 0.5).unwrap();
        assert_eq!(r.accuracy, 0.7);
        assert_eq!(r.sensitivity, 0.8);
        assert_eq!(r.specificity, 0.6);
        assert_eq!(r.n, 10);
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(-5.0f64..5.0, 2..40),
            seed in 0u64..1000,
        ) {
            let labels: Vec<u8> = (0..scores.len()).map(|i| ((i as u64 * 31 + seed) % 3 == 0) as u8).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let a = roc_auc(&scores, &labels).unwrap();
            let t: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(a, roc_auc(&t, &labels).unwrap());
        }

        #[test]
        fn auc_complement_without_ties(
            scores in proptest::collection::hash_set(-1_000_000i64..1_000_000, 2..40),
            seed in 0u64..1000,
        ) {
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64).collect();
            let labels: Vec<u8> = (0..scores.len()).map(|i| ((i as u64 * 17 + seed) % 2) as u8).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            let sum = roc_auc(&scores, &labels).unwrap() + roc_auc(&scores, &flipped).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
