//! Posterior summaries of the school random intercepts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bart::PosteriorDraws;
use crate::data_model::EntitySet;
use crate::error::{Error, Result};
use crate::stats::{mean, sd};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Positive,
    Negative,
    Null,
}

impl Flag {
    /// An effect is flagged when its one-sd error bar excludes zero.
    pub fn from_summary(mean: f64, sd: f64) -> Self {
        if mean - sd > 0.0 {
            Flag::Positive
        } else if mean + sd < 0.0 {
            Flag::Negative
        } else {
            Flag::Null
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Flag::Positive => "positive",
            Flag::Negative => "negative",
            Flag::Null => "null",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchoolEffect {
    pub school_id: String,
    pub quintile: u8,
    /// On the probit scale.
    pub mean: f64,
    pub sd: f64,
    pub flag: Flag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RanefReport {
    /// Sorted by school id.
    pub schools: Vec<SchoolEffect>,
}

impl RanefReport {
    pub fn count(&self, flag: Flag) -> usize {
        self.schools.iter().filter(|s| s.flag == flag).count()
    }
}

/// School id to quintile, from the student table.
pub fn school_quintiles(entities: &EntitySet) -> BTreeMap<String, u8> {
    entities
        .students
        .iter()
        .map(|s| (s.school_id.clone(), s.quintile))
        .collect()
}

/// Mean and sd of each school's intercept across retained draws. Schools
/// missing from `quintiles` are skipped with a warning.
pub fn ranef_report(draws: &PosteriorDraws, quintiles: &BTreeMap<String, u8>) -> Result<RanefReport> {
    let names = &draws.header.group_names;
    if names.is_empty() {
        return Err(Error::invalid("model was fitted without a school grouping"));
    }
    if draws.draws.is_empty() {
        return Err(Error::invalid("model has no retained draws"));
    }
    let per_draw: Vec<Vec<f64>> = draws.draws.iter().map(|d| draws.group_effects(d)).collect();
    let mut schools = Vec::with_capacity(names.len());
    for (g, name) in names.iter().enumerate() {
        let Some(&quintile) = quintiles.get(name) else {
            log::warn!("school {name} has no metadata; skipped");
            continue;
        };
        let u: Vec<f64> = per_draw.iter().map(|d| d[g]).collect();
        let (m, s) = (mean(&u), sd(&u));
        schools.push(SchoolEffect {
            school_id: name.clone(),
            quintile,
            mean: m,
            sd: s,
            flag: Flag::from_summary(m, s),
        });
    }
    schools.sort_by(|a, b| a.school_id.cmp(&b.school_id));
    Ok(RanefReport { schools })
}
