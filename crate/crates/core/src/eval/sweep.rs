//! Test AUC of each model variant as the data cutoff month moves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::roc_auc;
use super::models::{fit_predict, job_seed, ModelConfig, ModelKind};
use super::split::Partition;
use super::tune::{tune, SearchSpace};
use crate::bart::BartConfig;
use crate::data_model::{build_features, EntitySet, FeatureMatrix, FIRST_MONTH, LAST_MONTH};
use crate::error::{Error, Result};
use crate::rf::RfConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuning {
    Default,
    Tuned,
}

impl Tuning {
    pub fn label(self) -> &'static str {
        match self {
            Tuning::Default => "default",
            Tuning::Tuned => "tuned",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub model: ModelKind,
    pub tuning: Tuning,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant {
            model: ModelKind::Rf,
            tuning: Tuning::Default,
        },
        Variant {
            model: ModelKind::Rf,
            tuning: Tuning::Tuned,
        },
        Variant {
            model: ModelKind::Bart,
            tuning: Tuning::Default,
        },
        Variant {
            model: ModelKind::Bart,
            tuning: Tuning::Tuned,
        },
    ];

    fn position(self) -> u64 {
        Self::ALL.iter().position(|v| *v == self).expect("listed variant") as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub months: Vec<u32>,
    pub test_frac: f64,
    /// Share of the training split held out for tuning.
    pub validation_frac: f64,
    pub tune_budget: usize,
    pub seed: u64,
    pub rf: RfConfig,
    pub bart: BartConfig,
    pub rf_space: SearchSpace,
    pub bart_space: SearchSpace,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            months: (FIRST_MONTH..=LAST_MONTH).collect(),
            test_frac: 0.25,
            validation_frac: 0.25,
            tune_budget: 10,
            seed: 1,
            rf: RfConfig::default(),
            bart: BartConfig::default(),
            rf_space: SearchSpace::rf_default(),
            bart_space: SearchSpace::bart_default(),
        }
    }
}

impl SweepSpec {
    fn base(&self, model: ModelKind) -> ModelConfig {
        match model {
            ModelKind::Rf => ModelConfig::Rf(self.rf.clone()),
            ModelKind::Bart => ModelConfig::Bart(self.bart.clone()),
        }
    }

    fn space(&self, model: ModelKind) -> &SearchSpace {
        match model {
            ModelKind::Rf => &self.rf_space,
            ModelKind::Bart => &self.bart_space,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub model: ModelKind,
    pub tuning: Tuning,
    pub month: u32,
    /// `None` when the cell failed.
    pub auc: Option<f64>,
    pub error: Option<String>,
    /// The configuration that produced the test predictions.
    pub config: Option<ModelConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub partition: Partition,
    /// Sorted by model, tuning, month.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn auc(&self, variant: Variant, month: u32) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.model == variant.model && c.tuning == variant.tuning && c.month == month)
            .and_then(|c| c.auc)
    }
}

/// Fits one variant on `train` (tuning on an inner validation split first
/// when asked) and scores `test`.
pub fn evaluate_variant(
    variant: Variant,
    spec: &SweepSpec,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    seed: u64,
) -> Result<(ModelConfig, f64)> {
    let base = spec.base(variant.model).with_seed(seed);
    let config = match variant.tuning {
        Tuning::Default => base,
        Tuning::Tuned => tune(
            &base,
            spec.space(variant.model),
            spec.tune_budget,
            train,
            spec.validation_frac,
            seed,
        )?
        .best
        .with_seed(seed),
    };
    let probs = fit_predict(&config, train, test)?;
    Ok((config, roc_auc(&probs, &test.response)?))
}

/// Trains every variant at every cutoff month on one fixed student-level
/// partition and records test AUC. A failing cell is recorded and the sweep
/// continues.
pub fn month_sweep(entities: &EntitySet, variants: &[Variant], spec: &SweepSpec) -> Result<SweepResult> {
    if spec.months.is_empty() {
        return Err(Error::invalid("no months to sweep"));
    }
    let mut months = spec.months.clone();
    months.sort_unstable();
    months.dedup();
    let mut variants = variants.to_vec();
    variants.sort();
    variants.dedup();
    let features = months
        .iter()
        .map(|&m| build_features(entities, m))
        .collect::<Result<Vec<_>>>()?;
    let partition = Partition::stratified(&features[0], spec.test_frac, spec.seed)?;
    let splits = features
        .iter()
        .map(|f| partition.apply(f))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Variant)> = variants
        .iter()
        .flat_map(|&v| (0..months.len()).map(move |k| (k, v)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(k, variant)| {
            let month = months[k];
            let job = u64::from(month - FIRST_MONTH) * Variant::ALL.len() as u64 + variant.position();
            let (train, test) = &splits[k];
            let (auc, error, config) = match evaluate_variant(variant, spec, train, test, job_seed(spec.seed, job)) {
                Ok((c, a)) => (Some(a), None, Some(c)),
                Err(e) => {
                    log::warn!(
                        "{} {} month {month} failed: {e}",
                        variant.model.label(),
                        variant.tuning.label()
                    );
                    (None, Some(e.to_string()), None)
                }
            };
            SweepCell {
                model: variant.model,
                tuning: variant.tuning,
                month,
                auc,
                error,
                config,
            }
        })
        .collect();
    Ok(SweepResult { partition, cells })
}
