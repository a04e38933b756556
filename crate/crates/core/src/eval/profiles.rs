//! Counterfactual usage profiles: synthetic students at low, median and
//! high usage in each quintile, everything else held fixed.

use serde::{Deserialize, Serialize};

use crate::bart::{GroupHandling, Mode, PosteriorDraws};
use crate::data_model::FeatureMatrix;
use crate::error::{Error, Result};
use crate::matrix::{ColumnKind, Matrix};
use crate::stats::quantile;

pub const PROFILE_DEPARTMENT: &str = "Montevideo";
pub const PROFILE_ZONE: &str = "Urban";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UsageLevel {
    P10,
    P50,
    P90,
}

impl UsageLevel {
    pub const ALL: [UsageLevel; 3] = [UsageLevel::P10, UsageLevel::P50, UsageLevel::P90];

    pub fn percentile(self) -> f64 {
        match self {
            UsageLevel::P10 => 0.1,
            UsageLevel::P50 => 0.5,
            UsageLevel::P90 => 0.9,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            UsageLevel::P10 => "p10",
            UsageLevel::P50 => "p50",
            UsageLevel::P90 => "p90",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub usage: UsageLevel,
    pub quintile: u8,
    pub probability: f64,
    /// 5% and 95% posterior quantiles.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    /// Usage level major, quintile minor.
    pub rows: Vec<ProfileRow>,
    /// The 15 synthetic predictor rows, in the same order.
    pub inputs: Matrix,
}

impl ProfileGrid {
    pub fn get(&self, usage: UsageLevel, quintile: u8) -> &ProfileRow {
        &self.rows[UsageLevel::ALL.iter().position(|u| *u == usage).expect("usage level") * 5 + quintile as usize - 1]
    }
}

fn level_code(kind: &ColumnKind, name: &str) -> Option<f64> {
    match kind {
        ColumnKind::Categorical { levels } => levels.iter().position(|l| l == name).map(|p| p as f64),
        ColumnKind::Numeric => None,
    }
}

/// Most frequent non-missing value, ties to the smallest; `NaN` if none.
fn mode(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (f64::NAN, 0);
    let mut k = 0;
    while k < v.len() {
        let end = k + v[k..].iter().take_while(|x| **x == v[k]).count();
        if end - k > best_n {
            best = v[k];
            best_n = end - k;
        }
        k = end;
    }
    best
}

/// The 15 synthetic predictor rows. Usage columns take their empirical
/// percentile over `train` (missing if the column has no observed value);
/// department and zone are fixed, class columns take their modal level and
/// any other column its median.
pub fn profile_inputs(train: &FeatureMatrix) -> Result<Matrix> {
    let x = &train.matrix;
    let usage = train.usage_columns();
    let mut values = vec![Vec::with_capacity(15); x.n_cols()];
    for level in UsageLevel::ALL {
        for q in 1..=5u8 {
            for (j, spec) in x.columns().iter().enumerate() {
                let col = x.column(j);
                let v = if usage.contains(&j) {
                    quantile(col, level.percentile()).unwrap_or(f64::NAN)
                } else {
                    match spec.name.as_str() {
                        "sociocultural_context" => f64::from(q),
                        "department" => level_code(&spec.kind, PROFILE_DEPARTMENT).unwrap_or_else(|| mode(col)),
                        "zone" => level_code(&spec.kind, PROFILE_ZONE).unwrap_or_else(|| mode(col)),
                        _ if spec.kind.is_categorical() => mode(col),
                        _ => quantile(col, 0.5).unwrap_or(f64::NAN),
                    }
                };
                values[j].push(v);
            }
        }
    }
    Matrix::from_columns(x.columns().to_vec(), values)
}

/// Predicted probability and 90% interval for each profile, averaging over
/// school effects drawn from their fitted distribution.
pub fn profile_grid(train: &FeatureMatrix, draws: &PosteriorDraws, seed: u64) -> Result<ProfileGrid> {
    if draws.mode() != Mode::Probit {
        return Err(Error::invalid("profiles need a probit model"));
    }
    let inputs = profile_inputs(train)?;
    let pred = draws.predict(&inputs, GroupHandling::Integrate { seed })?;
    let mut rows = Vec::with_capacity(15);
    for (k, usage) in UsageLevel::ALL
        .iter()
        .flat_map(|u| std::iter::repeat_n(*u, 5))
        .enumerate()
    {
        rows.push(ProfileRow {
            usage,
            quintile: (k % 5) as u8 + 1,
            probability: pred.mean[k],
            lower: pred.lower[k],
            upper: pred.upper[k],
        });
    }
    Ok(ProfileGrid { rows, inputs })
}
