//! Uniform fit-and-score interface over the two classifiers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bart::{self, BartConfig, GroupHandling, Grouping, Response};
use crate::data_model::FeatureMatrix;
use crate::error::Result;
use crate::rf::{fit_rf, RfConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Bart,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Rf => "RF",
            ModelKind::Bart => "BART",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelConfig {
    Rf(RfConfig),
    Bart(BartConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Rf(_) => ModelKind::Rf,
            ModelConfig::Bart(_) => ModelKind::Bart,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ModelConfig::Rf(r) => r.seed = seed,
            ModelConfig::Bart(b) => b.seed = seed,
        }
        c
    }
}

/// Seed for job `job` of a run seeded with `seed`.
pub fn job_seed(seed: u64, job: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(job.wrapping_add(1));
    rng.next_u64()
}

/// Fits on `train` and returns the predicted probability of class 1 for each
/// row of `test`. BART is a probit model with a school intercept; test rows
/// use their school's posterior effect.
pub fn fit_predict(config: &ModelConfig, train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Vec<f64>> {
    match config {
        ModelConfig::Rf(c) => {
            let y: Vec<usize> = train.response.iter().map(|&v| usize::from(v)).collect();
            fit_rf(&train.matrix, &y, c)?.predict_proba(&test.matrix)
        }
        ModelConfig::Bart(c) => {
            let grouping = Grouping::from_labels(&train.school_ids);
            let draws = bart::fit(&train.matrix, Response::Binary(&train.response), Some(&grouping), c)?;
            Ok(draws
                .predict(&test.matrix, GroupHandling::Known(&test.school_ids))?
                .mean)
        }
    }
}
