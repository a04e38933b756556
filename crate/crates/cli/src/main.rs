//! `lmsbart` command-line pipeline.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use lmsbart::eval::ModelKind;

#[derive(Parser, Debug)]
#[command(
    name = "lmsbart",
    version,
    about = "BART and Random Forest early-warning analyses on LMS data"
)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed applied to every stage (synthesis, splits, models).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Directory with the entity files.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Cutoff month (3..=11).
    #[arg(long, value_name = "M")]
    month: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with ground truth.
    Synth,
    /// Build the feature matrix at a cutoff month.
    Features(DataArgs),
    /// Fit a model on the training split.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        model: Option<Kind>,
    },
    /// Score a fitted model on the test split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Model artifact written by `fit`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
    /// Test AUC of RF and BART, default and tuned, for every cutoff month.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Tuning budget for the tuned variants.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// School random-effect summaries and flags from a BART fit.
    Ranef {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
    /// Counterfactual usage profiles from a BART fit.
    Profiles {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
    /// Random search over model hyperparameters.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        model: Option<Kind>,
        #[arg(long)]
        budget: Option<usize>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Bart,
    Rf,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Bart => ModelKind::Bart,
            Kind::Rf => ModelKind::Rf,
        }
    }
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if let Some(p) = &d.data {
        cfg.data = Some(p.clone());
    }
    if let Some(m) = d.month {
        cfg.month = m;
    }
}

fn run(cli: Cli) -> lmsbart::Result<Vec<PathBuf>> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    match &cli.command {
        Command::Synth => {}
        Command::Features(d) | Command::Eval { data: d, .. } | Command::Ranef { data: d, .. } => {
            apply_data(&mut cfg, d)
        }
        Command::Profiles { data: d, .. } => apply_data(&mut cfg, d),
        Command::Fit { data, model } => {
            apply_data(&mut cfg, data);
            if let Some(m) = model {
                cfg.fit.model = (*m).into();
            }
        }
        Command::Sweep { data, budget } => {
            apply_data(&mut cfg, data);
            if let Some(b) = budget {
                cfg.tune.budget = *b;
            }
        }
        Command::Tune { data, model, budget } => {
            apply_data(&mut cfg, data);
            if let Some(m) = model {
                cfg.tune.model = (*m).into();
            }
            if let Some(b) = budget {
                cfg.tune.budget = *b;
            }
        }
    }
    cfg.apply_seed();
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| lmsbart::Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| lmsbart::Error::Io {
        path: cfg.out.clone(),
        source: e,
    })?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Features(_) => commands::features(&cfg),
        Command::Fit { .. } => commands::fit(&cfg),
        Command::Eval { model, .. } => commands::eval(&cfg, &model),
        Command::Sweep { .. } => commands::sweep(&cfg),
        Command::Ranef { model, .. } => commands::ranef(&cfg, &model),
        Command::Profiles { model, .. } => commands::profiles(&cfg, &model),
        Command::Tune { .. } => commands::tune(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(written) => {
            let mut stdout = std::io::stdout().lock();
            for p in written {
                if writeln!(stdout, "{}", p.display()).is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
