//! One function per subcommand; each returns the paths it wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_summary, write_text};
use lmsbart::bart::{self, GroupHandling, Grouping, Mode, PosteriorDraws, Response};
use lmsbart::container;
use lmsbart::data_model::{build_features, io, FeatureMatrix};
use lmsbart::eval::{self, report, svg, ModelConfig, ModelKind, Partition, SearchSpace, Variant};
use lmsbart::rf::{fit_rf, RfForest};
use lmsbart::stats::{mean, quantile, sd};
use lmsbart::synth::{write_dataset, GROUND_TRUTH_FILE};
use lmsbart::{Error, Result};

fn kind_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Bart => "bart",
        ModelKind::Rf => "rf",
    }
}

fn stem(kind: &str, m: u32) -> String {
    format!("{kind}_m{m:02}")
}

/// Reads `features_mMM` from the data directory when present, otherwise
/// builds it from the entity files there.
fn load_features(cfg: &RunConfig) -> Result<FeatureMatrix> {
    let dir = cfg.data_dir()?;
    let (csv_path, json_path) = io::feature_paths(dir, cfg.month);
    if csv_path.is_file() && json_path.is_file() {
        io::read_features(&csv_path, &json_path)
    } else {
        build_features(&io::read_entities(dir)?, cfg.month)
    }
}

fn split(cfg: &RunConfig, fm: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureMatrix)> {
    Partition::stratified(fm, cfg.split.test_frac, cfg.split.seed)?.apply(fm)
}

pub fn synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct Counts {
        schools: usize,
        students: usize,
        tests: usize,
        attempts: usize,
        messages: usize,
    }
    let (entities, truth) = write_dataset(&cfg.out, &cfg.synth)?;
    let mut written: Vec<PathBuf> = io::ENTITY_FILES.iter().map(|f| cfg.out.join(f)).collect();
    written.push(cfg.out.join(GROUND_TRUTH_FILE));
    let counts = Counts {
        schools: truth.schools.len(),
        students: entities.students.len(),
        tests: entities.tests.len(),
        attempts: entities.attempts.len(),
        messages: entities.messages.len(),
    };
    written.push(write_summary(
        &cfg.out.join("synth_summary.json"),
        "synth",
        cfg,
        &counts,
    )?);
    Ok(written)
}

pub fn features(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let fm = build_features(&io::read_entities(cfg.data_dir()?)?, cfg.month)?;
    let (c, j) = io::write_features(&cfg.out, &fm)?;
    Ok(vec![c, j])
}

#[derive(Serialize)]
struct TraceSummary {
    mean: f64,
    sd: f64,
    q05: f64,
    q50: f64,
    q95: f64,
}

impl TraceSummary {
    fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(xs),
            sd: sd(xs),
            q05: quantile(xs, 0.05)?,
            q50: quantile(xs, 0.5)?,
            q95: quantile(xs, 0.95)?,
        })
    }
}

#[derive(Serialize)]
struct Acceptance {
    grow: f64,
    prune: f64,
    change: f64,
}

#[derive(Serialize)]
struct ChainReport {
    chain: usize,
    seed: u64,
    acceptance: Acceptance,
    proposed: [u64; 3],
    failed: [u64; 3],
    nonfinite: u64,
    /// Post burn-in summaries.
    sigma2: Option<TraceSummary>,
    sigma_u2: Option<TraceSummary>,
}

#[derive(Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
enum FitReport {
    Bart {
        mode: Mode,
        n_rows: usize,
        n_draws: usize,
        n_groups: usize,
        sigma_mu: f64,
        chains: Vec<ChainReport>,
    },
    Rf {
        n_rows: usize,
        n_trees: usize,
        mtry: usize,
        oob_error: Option<f64>,
    },
}

fn bart_report(draws: &PosteriorDraws, n_rows: usize) -> FitReport {
    use lmsbart::bart::proposal::Move;
    let burn = draws.header.config.n_burn;
    let chains = draws
        .header
        .diagnostics
        .chains
        .iter()
        .map(|c| ChainReport {
            chain: c.chain,
            seed: c.seed,
            acceptance: Acceptance {
                grow: c.moves.acceptance_rate(Move::Grow),
                prune: c.moves.acceptance_rate(Move::Prune),
                change: c.moves.acceptance_rate(Move::Change),
            },
            proposed: c.moves.proposed,
            failed: c.moves.failed,
            nonfinite: c.moves.nonfinite,
            sigma2: match draws.header.mode {
                Mode::Continuous => TraceSummary::of(c.sigma2_trace.get(burn..).unwrap_or(&[])),
                Mode::Probit => None,
            },
            sigma_u2: if draws.header.group_names.is_empty() {
                None
            } else {
                TraceSummary::of(c.sigma_u2_trace.get(burn..).unwrap_or(&[]))
            },
        })
        .collect();
    FitReport::Bart {
        mode: draws.header.mode,
        n_rows,
        n_draws: draws.n_draws(),
        n_groups: draws.header.group_names.len(),
        sigma_mu: draws.header.diagnostics.sigma_mu,
        chains,
    }
}

pub fn fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let fm = load_features(cfg)?;
    let (train, _) = split(cfg, &fm)?;
    let kind = kind_name(cfg.fit.model);
    let model_path = cfg.out.join(format!("{}.model", stem(kind, cfg.month)));
    let report = match cfg.fit.model {
        ModelKind::Bart => {
            let grouping = Grouping::from_labels(&train.school_ids);
            let draws = bart::fit(
                &train.matrix,
                Response::Binary(&train.response),
                Some(&grouping),
                &cfg.fit.bart,
            )?;
            draws.save(&model_path)?;
            bart_report(&draws, train.n_rows())
        }
        ModelKind::Rf => {
            let y: Vec<usize> = train.response.iter().map(|&v| usize::from(v)).collect();
            let forest = fit_rf(&train.matrix, &y, &cfg.fit.rf)?;
            forest.save(&model_path)?;
            FitReport::Rf {
                n_rows: train.n_rows(),
                n_trees: forest.trees.len(),
                mtry: cfg.fit.rf.resolved_mtry(train.matrix.n_cols()),
                oob_error: forest.oob_error(&train.matrix, &y),
            }
        }
    };
    let summary = cfg.out.join(format!("{}_fit.json", stem(kind, cfg.month)));
    Ok(vec![model_path, write_summary(&summary, "fit", cfg, &report)?])
}

fn load_bart(path: &Path) -> Result<PosteriorDraws> {
    let kind = container::kind(path)?;
    if kind != bart::model::CONTAINER_KIND {
        return Err(Error::InvalidInput(format!(
            "{} holds a {kind} model; a BART fit is required",
            path.display()
        )));
    }
    PosteriorDraws::load(path)
}

pub fn eval(cfg: &RunConfig, model: &Path) -> Result<Vec<PathBuf>> {
    let kind = container::kind(model)?;
    let fm = load_features(cfg)?;
    let (_, test) = split(cfg, &fm)?;
    let probs = match kind.as_str() {
        bart::model::CONTAINER_KIND => {
            PosteriorDraws::load(model)?
                .predict(&test.matrix, GroupHandling::Known(&test.school_ids))?
                .mean
        }
        lmsbart::rf::CONTAINER_KIND => RfForest::load(model)?.predict_proba(&test.matrix)?,
        other => return Err(Error::InvalidInput(format!("unknown model kind {other}"))),
    };
    let metrics = eval::confusion_metrics(&probs, &test.response, 0.5)?;
    let base = stem(&kind, cfg.month);
    let csv = cfg.out.join(format!("metrics_{base}.csv"));
    report::write_metrics(&csv, &metrics)?;
    let json = write_summary(&cfg.out.join(format!("metrics_{base}.json")), "eval", cfg, &metrics)?;
    Ok(vec![csv, json])
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let entities = io::read_entities(cfg.data_dir()?)?;
    let result = eval::month_sweep(&entities, &Variant::ALL, &cfg.sweep_spec())?;
    let csv = cfg.out.join("sweep.csv");
    report::write_sweep(&csv, &result)?;
    let json = write_summary(&cfg.out.join("sweep.json"), "sweep", cfg, &result)?;
    let figure = write_text(&cfg.out.join("sweep.svg"), &svg::sweep_svg(&result))?;
    Ok(vec![csv, json, figure])
}

pub fn ranef(cfg: &RunConfig, model: &Path) -> Result<Vec<PathBuf>> {
    let draws = load_bart(model)?;
    let entities = io::read_entities(cfg.data_dir()?)?;
    let result = eval::ranef_report(&draws, &eval::school_quintiles(&entities))?;
    let csv = cfg.out.join("ranef.csv");
    report::write_ranef(&csv, &result)?;
    let json = write_summary(&cfg.out.join("ranef.json"), "ranef", cfg, &result)?;
    Ok(vec![csv, json])
}

pub fn profiles(cfg: &RunConfig, model: &Path) -> Result<Vec<PathBuf>> {
    let draws = load_bart(model)?;
    let fm = load_features(cfg)?;
    let (train, _) = split(cfg, &fm)?;
    let grid = eval::profile_grid(&train, &draws, cfg.profiles.seed)?;
    let csv = cfg.out.join("profiles.csv");
    report::write_profiles(&csv, &grid)?;
    let json = write_summary(&cfg.out.join("profiles.json"), "profiles", cfg, &grid.rows)?;
    let figure = write_text(&cfg.out.join("profiles.svg"), &svg::profiles_svg(&grid))?;
    Ok(vec![csv, json, figure])
}

pub fn tune(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let fm = load_features(cfg)?;
    let (train, _) = split(cfg, &fm)?;
    let (base, space): (ModelConfig, &SearchSpace) = match cfg.tune.model {
        ModelKind::Bart => (ModelConfig::Bart(cfg.fit.bart.clone()), &cfg.tune.bart_space),
        ModelKind::Rf => (ModelConfig::Rf(cfg.fit.rf.clone()), &cfg.tune.rf_space),
    };
    let result = eval::tune(
        &base,
        space,
        cfg.tune.budget,
        &train,
        cfg.tune.validation_frac,
        cfg.tune.seed,
    )?;
    let base_name = format!("tune_{}", stem(kind_name(cfg.tune.model), cfg.month));
    let csv = cfg.out.join(format!("{base_name}.csv"));
    report::write_trace(&csv, &result)?;
    let json = write_summary(&cfg.out.join(format!("{base_name}.json")), "tune", cfg, &result)?;
    Ok(vec![csv, json])
}
