//! Metrics and the evaluation analyses: the month sweep, school-effect
//! flagging, counterfactual usage profiles and hyperparameter search.

pub mod metrics;
pub mod models;
pub mod profiles;
pub mod ranef;
pub mod report;
pub mod split;
pub mod svg;
pub mod sweep;
pub mod tune;

pub use metrics::{confusion_metrics, roc_auc, MetricReport};
pub use models::{fit_predict, job_seed, ModelConfig, ModelKind};
pub use profiles::{profile_grid, ProfileGrid, ProfileRow, UsageLevel};
pub use ranef::{ranef_report, school_quintiles, Flag, RanefReport, SchoolEffect};
pub use split::Partition;
pub use sweep::{month_sweep, SweepCell, SweepResult, SweepSpec, Tuning, Variant};
pub use tune::{tune, SearchSpace, Trial, TuneResult};
