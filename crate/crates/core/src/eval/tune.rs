//! Uniform random search over model hyperparameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::roc_auc;
use super::models::{fit_predict, job_seed, ModelConfig};
use super::split::stratified_indices;
use crate::data_model::FeatureMatrix;
use crate::error::{Error, Result};

/// Inclusive bounds per tuned hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SearchSpace {
    Bart {
        n_trees: (usize, usize),
        k: (f64, f64),
        alpha: (f64, f64),
        beta: (f64, f64),
    },
    Rf {
        n_trees: (usize, usize),
        /// Upper bound `None` means the number of predictors.
        mtry: (usize, Option<usize>),
        min_node_size: (usize, usize),
    },
}

impl SearchSpace {
    pub fn bart_default() -> Self {
        SearchSpace::Bart {
            n_trees: (50, 400),
            k: (1.0, 5.0),
            alpha: (0.5, 0.99),
            beta: (1.0, 3.0),
        }
    }

    pub fn rf_default() -> Self {
        SearchSpace::Rf {
            n_trees: (200, 1000),
            mtry: (1, None),
            min_node_size: (1, 50),
        }
    }

    /// Replaces the tuned fields of `base` with a uniform draw.
    pub fn sample<R: Rng>(&self, base: &ModelConfig, p: usize, rng: &mut R) -> Result<ModelConfig> {
        let mut c = base.clone();
        match (self, &mut c) {
            (
                SearchSpace::Bart {
                    n_trees,
                    k,
                    alpha,
                    beta,
                },
                ModelConfig::Bart(b),
            ) => {
                b.n_trees = rng.random_range(n_trees.0..=n_trees.1);
                b.k = rng.random_range(k.0..=k.1);
                b.alpha = rng.random_range(alpha.0..=alpha.1);
                b.beta = rng.random_range(beta.0..=beta.1);
            }
            (
                SearchSpace::Rf {
                    n_trees,
                    mtry,
                    min_node_size,
                },
                ModelConfig::Rf(r),
            ) => {
                let hi = mtry.1.unwrap_or(p).min(p);
                r.n_trees = rng.random_range(n_trees.0..=n_trees.1);
                r.mtry = Some(rng.random_range(mtry.0.min(hi)..=hi));
                r.min_node_size = rng.random_range(min_node_size.0..=min_node_size.1);
            }
            _ => return Err(Error::invalid("search space does not match the model kind")),
        }
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SearchSpace::Bart {
                n_trees,
                k,
                alpha,
                beta,
            } => n_trees.0 <= n_trees.1 && k.0 <= k.1 && alpha.0 <= alpha.1 && beta.0 <= beta.1,
            SearchSpace::Rf {
                n_trees,
                mtry,
                min_node_size,
            } => n_trees.0 <= n_trees.1 && mtry.1.is_none_or(|hi| mtry.0 <= hi) && min_node_size.0 <= min_node_size.1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("search space has a lower bound above its upper bound"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: ModelConfig,
    pub auc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: ModelConfig,
    pub best_auc: f64,
    pub trace: Vec<Trial>,
}

/// Evaluates `budget` sampled configurations by validation AUC on a
/// stratified split of `data` and returns the best one (earliest on ties).
pub fn tune(
    base: &ModelConfig,
    space: &SearchSpace,
    budget: usize,
    data: &FeatureMatrix,
    validation_frac: f64,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::invalid("tuning budget must be at least 1"));
    }
    space.validate()?;
    let (fit_rows, val_rows) = stratified_indices(&data.response, validation_frac, seed);
    let (train, val) = (data.select_rows(&fit_rows), data.select_rows(&val_rows));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = (0..budget)
        .map(|i| {
            Ok(space
                .sample(base, data.matrix.n_cols(), &mut rng)?
                .with_seed(job_seed(seed, i as u64)))
        })
        .collect::<Result<Vec<_>>>()?;
    let trace: Vec<Trial> = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| {
            let scored = fit_predict(&config, &train, &val).and_then(|p| roc_auc(&p, &val.response));
            let (auc, error) = match scored {
                Ok(a) => (Some(a), None),
                Err(e) => {
                    log::warn!("tuning trial {index} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            Trial {
                index,
                config,
                auc,
                error,
            }
        })
        .collect();
    let best =
        trace
            .iter()
            .filter_map(|t| t.auc.map(|a| (t, a)))
            .fold(None::<(&Trial, f64)>, |acc, (t, a)| match acc {
                Some((_, b)) if b >= a => acc,
                _ => Some((t, a)),
            });
    match best {
        Some((t, a)) => Ok(TuneResult {
            best: t.config.clone(),
            best_auc: a,
            trace: trace.clone(),
        }),
        None => Err(Error::TuningFailed {
            failures: trace.into_iter().map(|t| t.error.unwrap_or_default()).collect(),
        }),
    }
}
