//! Fitting entry point, the posterior draw collection and prediction.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::BartConfig;
use super::prior::{calibrate_lambda, calibrate_leaf_sd, LambdaCalibration, Mode};
use super::sampler::{Chain, ChainSetup, Draw, MoveCounts};
use crate::container;
use crate::error::{Error, Result};
use crate::matrix::{ColumnSpec, Matrix};
use crate::stats::{norm_cdf, norm_quantile, quantile};

pub const CONTAINER_KIND: &str = "bart";

pub enum Response<'a> {
    Continuous(&'a [f64]),
    Binary(&'a [u8]),
}

/// Row-to-group assignment with the group labels, indexed by position.
#[derive(Clone, Debug, PartialEq)]
pub struct Grouping {
    pub index: Vec<usize>,
    pub names: Vec<String>,
}

impl Grouping {
    /// Groups rows by label; groups are numbered in sorted label order.
    pub fn from_labels(labels: &[String]) -> Self {
        let mut names: Vec<String> = labels.to_vec();
        names.sort();
        names.dedup();
        let pos: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let index = labels.iter().map(|l| pos[l.as_str()]).collect();
        Self { index, names }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub seed: u64,
    pub moves: MoveCounts,
    /// σ² per iteration (original units), burn-in included.
    pub sigma2_trace: Vec<f64>,
    pub sigma_u2_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub chains: Vec<ChainDiagnostics>,
    pub sigma_mu: f64,
    /// Continuous mode only; in model units.
    pub lambda: Option<LambdaCalibration>,
}

/// Everything about a fit except the draws themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitHeader {
    pub config: BartConfig,
    pub mode: Mode,
    pub columns: Vec<ColumnSpec>,
    /// Continuous responses are modelled as `(y − center) / scale`.
    pub y_center: f64,
    pub y_scale: f64,
    pub group_names: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub header: FitHeader,
    pub draws: Vec<Draw>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupHandling<'a> {
    /// Use each row's group effect; labels not seen in training get 0.
    Known(&'a [String]),
    /// Ignore group effects.
    Zero,
    /// Draw a fresh `u ~ N(0, σ_u²)` per row and posterior draw.
    Integrate { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Posterior mean probability (probit) or mean response (continuous).
    pub mean: Vec<f64>,
    /// 5% and 95% posterior quantiles.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn validate_inputs(x: &Matrix, response: &Response, grouping: Option<&Grouping>) -> Result<()> {
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(Error::invalid("feature matrix is empty"));
    }
    let len = match response {
        Response::Continuous(y) => {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("continuous response has non-finite values"));
            }
            y.len()
        }
        Response::Binary(y) => {
            if y.iter().any(|&v| v > 1) {
                return Err(Error::invalid("binary response must be 0 or 1"));
            }
            if y.iter().all(|&v| v == y[0]) {
                return Err(Error::DegenerateResponse(format!(
                    "every label is {}; a probit model needs both classes",
                    y[0]
                )));
            }
            y.len()
        }
    };
    if len != n {
        return Err(Error::invalid(format!("response has {len} values for {n} rows")));
    }
    if let Some(g) = grouping {
        if g.index.len() != n {
            return Err(Error::invalid(format!(
                "grouping has {} entries for {n} rows",
                g.index.len()
            )));
        }
        if g.index.iter().any(|&i| i >= g.names.len()) {
            return Err(Error::invalid("group index out of range"));
        }
    }
    Ok(())
}

pub fn fit(x: &Matrix, response: Response, grouping: Option<&Grouping>, config: &BartConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    validate_inputs(x, &response, grouping)?;

    let (mode, y, center, scale) = match response {
        Response::Continuous(y) => {
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = if hi > lo { hi - lo } else { 1.0 };
            let center = (hi + lo) / 2.0;
            (
                Mode::Continuous,
                y.iter().map(|v| (v - center) / scale).collect::<Vec<_>>(),
                center,
                scale,
            )
        }
        Response::Binary(y) => (Mode::Probit, y.iter().map(|&v| v as f64).collect(), 0.0, 1.0),
    };
    let sigma_mu = calibrate_leaf_sd(mode, config.k, config.n_trees);
    let (lambda, init_sigma2, init_offset) = match mode {
        Mode::Continuous => {
            let cal = calibrate_lambda(&y, x, config.nu, config.q);
            (Some(cal), cal.s2, 0.0)
        }
        Mode::Probit => {
            let ybar = y.iter().sum::<f64>() / y.len() as f64;
            (None, 1.0, norm_quantile(ybar))
        }
    };
    let setup = ChainSetup {
        mode,
        y,
        groups: grouping.map(|g| (g.index.clone(), g.names.len())),
        sigma_mu,
        lambda: lambda.map_or(0.0, |c| c.lambda),
        init_sigma2,
        init_offset,
    };

    let results: Vec<Result<(Vec<Draw>, ChainDiagnostics)>> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(x, &setup, config, c, scale))
        .collect();
    let mut draws = Vec::with_capacity(config.n_chains * config.draws_per_chain());
    let mut chains = Vec::with_capacity(config.n_chains);
    for r in results {
        let (d, diag) = r?;
        draws.extend(d);
        chains.push(diag);
    }

    Ok(PosteriorDraws {
        header: FitHeader {
            config: config.clone(),
            mode,
            columns: x.columns().to_vec(),
            y_center: center,
            y_scale: scale,
            group_names: grouping.map(|g| g.names.clone()).unwrap_or_default(),
            diagnostics: FitDiagnostics {
                chains,
                sigma_mu,
                lambda,
            },
        },
        draws,
    })
}

fn run_chain(
    x: &Matrix,
    setup: &ChainSetup,
    config: &BartConfig,
    c: usize,
    scale: f64,
) -> Result<(Vec<Draw>, ChainDiagnostics)> {
    let seed = config.seed.wrapping_add(c as u64);
    let mut chain = Chain::new(x, setup, config, seed);
    let mut draws = Vec::with_capacity(config.draws_per_chain());
    let mut sigma2_trace = Vec::with_capacity(config.n_iter);
    let mut sigma_u2_trace = Vec::with_capacity(config.n_iter);
    for it in 0..config.n_iter {
        chain.step()?;
        sigma2_trace.push(chain.sigma2() * scale * scale);
        sigma_u2_trace.push(chain.sigma_u2() * scale * scale);
        if it >= config.n_burn && (it - config.n_burn + 1) % config.n_thin == 0 {
            draws.push(chain.snapshot(c));
        }
    }
    Ok((
        draws,
        ChainDiagnostics {
            chain: c,
            seed,
            moves: chain.counts().clone(),
            sigma2_trace,
            sigma_u2_trace,
        },
    ))
}

impl PosteriorDraws {
    pub fn mode(&self) -> Mode {
        self.header.mode
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    /// σ² of a draw in response units.
    pub fn sigma2(&self, d: &Draw) -> f64 {
        d.sigma2 * self.header.y_scale * self.header.y_scale
    }

    /// Group effects of a draw in response units (probit: latent scale).
    pub fn group_effects(&self, d: &Draw) -> Vec<f64> {
        d.u.iter().map(|u| u * self.header.y_scale).collect()
    }

    pub fn sigma_u2(&self, d: &Draw) -> f64 {
        d.sigma_u2 * self.header.y_scale * self.header.y_scale
    }

    /// Sum-of-trees fit of one draw on row `i`, in model units.
    #[inline]
    pub fn draw_fit(d: &Draw, x: &Matrix, i: usize) -> f64 {
        let mut s = 0.0;
        for t in &d.trees {
            s += t.eval(x, i);
        }
        d.offset + s
    }

    fn to_response(&self, f: f64) -> f64 {
        match self.header.mode {
            Mode::Probit => norm_cdf(f),
            Mode::Continuous => self.header.y_center + self.header.y_scale * f,
        }
    }

    /// Per-draw predictions (outer index: draw, inner: row) on the
    /// probability or response scale.
    pub fn predict_draws(&self, x: &Matrix, groups: GroupHandling) -> Result<Vec<Vec<f64>>> {
        x.check_schema(&self.header.columns)?;
        let n = x.n_rows();
        let known: Option<Vec<Option<usize>>> = match groups {
            GroupHandling::Known(labels) => {
                if labels.len() != n {
                    return Err(Error::invalid(format!("{} group labels for {n} rows", labels.len())));
                }
                let pos: HashMap<&str, usize> = self
                    .header
                    .group_names
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), i))
                    .collect();
                Some(labels.iter().map(|l| pos.get(l.as_str()).copied()).collect())
            }
            _ => None,
        };
        Ok(self
            .draws
            .par_iter()
            .enumerate()
            .map(|(k, d)| {
                let mut rng = match groups {
                    GroupHandling::Integrate { seed } => {
                        let mut r = ChaCha8Rng::seed_from_u64(seed);
                        r.set_stream(k as u64 + 1);
                        Some(r)
                    }
                    _ => None,
                };
                let su = d.sigma_u2.sqrt();
                (0..n)
                    .map(|i| {
                        let f = Self::draw_fit(d, x, i);
                        let u = match (&known, rng.as_mut()) {
                            (Some(idx), _) => idx[i].and_then(|g| d.u.get(g).copied()).unwrap_or(0.0),
                            (None, Some(r)) => su * r.sample::<f64, _>(StandardNormal),
                            (None, None) => 0.0,
                        };
                        self.to_response(f + u)
                    })
                    .collect()
            })
            .collect())
    }

    pub fn predict(&self, x: &Matrix, groups: GroupHandling) -> Result<Prediction> {
        let per_draw = self.predict_draws(x, groups)?;
        Ok(summarize(&per_draw, x.n_rows()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write(path, CONTAINER_KIND, &self.header, &self.draws)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, draws) = container::read(path, CONTAINER_KIND)?;
        Ok(Self { header, draws })
    }
}

/// Mean and central 90% interval per row of a draw-major table.
pub fn summarize(per_draw: &[Vec<f64>], n_rows: usize) -> Prediction {
    let m = per_draw.len() as f64;
    let mut out = Prediction {
        mean: Vec::with_capacity(n_rows),
        lower: Vec::with_capacity(n_rows),
        upper: Vec::with_capacity(n_rows),
    };
    let mut column = Vec::with_capacity(per_draw.len());
    for i in 0..n_rows {
        column.clear();
        column.extend(per_draw.iter().map(|d| d[i]));
        out.mean.push(column.iter().sum::<f64>() / m);
        out.lower.push(quantile(&column, 0.05).unwrap_or(f64::NAN));
        out.upper.push(quantile(&column, 0.95).unwrap_or(f64::NAN));
    }
    out
}
