//! Student-level stratified train/test partition.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Sorted student ids.
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Indices of a stratified split: within each class, `round(n_c · test_frac)`
/// rows go to the second part. Both parts are returned sorted.
pub fn stratified_indices(labels: &[u8], test_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * test_frac).round() as usize;
        second.extend_from_slice(&idx[..k]);
        first.extend_from_slice(&idx[k..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

impl Partition {
    pub fn stratified(fm: &FeatureMatrix, test_frac: f64, seed: u64) -> Result<Self> {
        if !(test_frac > 0.0 && test_frac < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction must lie in (0, 1), got {test_frac}"
            )));
        }
        let (train, test) = stratified_indices(&fm.response, test_frac, seed);
        let ids = |rows: Vec<usize>| {
            let mut v: Vec<String> = rows.into_iter().map(|i| fm.student_ids[i].clone()).collect();
            v.sort();
            v
        };
        Ok(Self {
            train: ids(train),
            test: ids(test),
        })
    }

    /// Row subsets of `fm` for the training and test students. Students not
    /// present in `fm` are an error.
    pub fn apply(&self, fm: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let pos: HashMap<&str, usize> = fm
            .student_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let rows = |ids: &[String]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| {
                    pos.get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::invalid(format!("student {id} missing from feature matrix")))
                })
                .collect()
        };
        Ok((fm.select_rows(&rows(&self.train)?), fm.select_rows(&rows(&self.test)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<u8> = (0..400).map(|i| u8::from(i % 5 < 3)).collect();
        let (a, b) = stratified_indices(&labels, 0.25, 3);
        assert_eq!(a.len() + b.len(), 400);
        assert_eq!(b.len(), 100);
        assert_eq!(b.iter().filter(|&&i| labels[i] == 1).count(), 60);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(stratified_indices(&labels, 0.25, 3), (a, b));
    }
}
