//! Run configuration: built-in defaults, then the JSON file given with
//! `--config`, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lmsbart::bart::BartConfig;
use lmsbart::data_model::{FIRST_MONTH, LAST_MONTH};
use lmsbart::eval::{ModelKind, SearchSpace, SweepSpec};
use lmsbart::rf::RfConfig;
use lmsbart::synth::SynthConfig;
use lmsbart::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            test_frac: 0.25,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub model: ModelKind,
    pub bart: BartConfig,
    pub rf: RfConfig,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            model: ModelKind::Bart,
            bart: BartConfig::default(),
            rf: RfConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub model: ModelKind,
    pub budget: usize,
    pub validation_frac: f64,
    pub seed: u64,
    pub bart_space: SearchSpace,
    pub rf_space: SearchSpace,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            model: ModelKind::Bart,
            budget: 10,
            validation_frac: 0.25,
            seed: 1,
            bart_space: SearchSpace::bart_default(),
            rf_space: SearchSpace::rf_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub months: Vec<u32>,
    pub seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            months: (FIRST_MONTH..=LAST_MONTH).collect(),
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesSection {
    pub seed: u64,
}

impl Default for ProfilesSection {
    fn default() -> Self {
        Self { seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the entity files (and optionally feature files).
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub month: u32,
    /// When set, replaces every per-section seed.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub split: SplitSection,
    pub synth: SynthConfig,
    pub fit: FitSection,
    pub tune: TuneSection,
    pub sweep: SweepSection,
    pub profiles: ProfilesSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: PathBuf::from("out"),
            month: 5,
            seed: None,
            threads: None,
            split: SplitSection::default(),
            synth: SynthConfig::default(),
            fit: FitSection::default(),
            tune: TuneSection::default(),
            sweep: SweepSection::default(),
            profiles: ProfilesSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    /// Pushes the global seed, if any, into every section.
    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.split.seed = s;
            self.synth.seed = s;
            self.fit.bart.seed = s;
            self.fit.rf.seed = s;
            self.tune.seed = s;
            self.sweep.seed = s;
            self.profiles.seed = s;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(FIRST_MONTH..=LAST_MONTH).contains(&self.month) {
            return Err(Error::InvalidInput(format!(
                "month must lie in {FIRST_MONTH}..={LAST_MONTH}, got {}",
                self.month
            )));
        }
        if let Some(d) = &self.data {
            if !d.is_dir() {
                return Err(Error::InvalidInput(format!(
                    "data directory {} does not exist",
                    d.display()
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("no data directory; pass --data or set \"data\" in the config".into()))
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            months: self.sweep.months.clone(),
            test_frac: self.split.test_frac,
            validation_frac: self.tune.validation_frac,
            tune_budget: self.tune.budget,
            seed: self.sweep.seed,
            rf: self.fit.rf.clone(),
            bart: self.fit.bart.clone(),
            rf_space: self.tune.rf_space.clone(),
            bart_space: self.tune.bart_space.clone(),
        }
    }
}
