//! `facmarket`: batch front end for the faculty hiring market model.

mod config;
mod error;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, SynthConfig};
use error::CliError;
use stages::{Session, Target};

#[derive(Parser, Debug)]
#[command(name = "facmarket", version, about = "Generative model of the faculty hiring market")]
struct Cli {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random substream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Base output directory; each configuration writes to `<out>/<hash>`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Simulated histories.
    #[arg(long)]
    runs: Option<usize>,
    /// Weights JSON (a fit.json or a map of feature to weight).
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and filter the input tables.
    Ingest,
    /// Minimum violation prestige ranking.
    Rank,
    /// Topic model and productivity scores.
    Topics,
    /// Fit match weights, optionally by greedy feature selection.
    Fit {
        /// Comma-separated feature names.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Greedy forward selection over the features.
        #[arg(long, conflicts_with = "no_greedy")]
        greedy: bool,
        /// Fit all features jointly.
        #[arg(long)]
        no_greedy: bool,
    },
    /// Simulate hiring histories.
    Simulate {
        #[arg(long, value_parser = ["uniform", "step", "logistic"])]
        model: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare network statistics of observed and simulated histories.
    Check {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Counterfactual and descriptive analyses.
    Analyze {
        #[arg(value_enum)]
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Extrapolate the female share of hires to parity.
    Forecast,
    /// Write a synthetic input bundle.
    Synth {
        #[arg(long)]
        institutions: Option<usize>,
        #[arg(long)]
        years: Option<usize>,
        #[arg(long)]
        hires: Option<f64>,
    },
    /// Every stage in order.
    Pipeline,
}

fn apply_run_args(cfg: &mut Config, run: &RunArgs) {
    if let Some(r) = run.runs {
        cfg.runs = r;
    }
    if let Some(w) = &run.weights {
        cfg.weights = Some(w.clone());
    }
}

/// Effective configuration: defaults, then the file, then flags.
fn resolve(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Fit {
            features,
            lambda,
            replicates,
            greedy,
            no_greedy,
        } => {
            if let Some(f) = features {
                cfg.features = f.clone();
            }
            if let Some(l) = lambda {
                cfg.lambda = *l;
            }
            if let Some(r) = replicates {
                cfg.replicates = *r;
            }
            if *greedy {
                cfg.greedy = true;
            }
            if *no_greedy {
                cfg.greedy = false;
            }
        }
        Command::Simulate { model, run } => {
            if let Some(m) = model {
                cfg.model = m.clone();
            }
            apply_run_args(&mut cfg, run);
        }
        Command::Check { run } | Command::Analyze { run, .. } => apply_run_args(&mut cfg, run),
        Command::Synth {
            institutions,
            years,
            hires,
        } => {
            let s = cfg.synthetic.get_or_insert_with(SynthConfig::default);
            if let Some(n) = institutions {
                s.n_institutions = *n;
            }
            if let Some(y) = years {
                s.n_years = *y;
            }
            if let Some(h) = hires {
                s.hires_per_year = *h;
            }
        }
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let session = Session::new(resolve(cli)?, &cli.out)?;
    match &cli.command {
        Command::Ingest => {
            stages::ingest(&session)?;
        }
        Command::Rank => {
            let inputs = stages::ingest(&session)?;
            stages::rank(&session, &inputs)?;
        }
        Command::Topics => {
            let mut inputs = stages::ingest(&session)?;
            stages::topics(&session, &mut inputs)?;
        }
        Command::Fit { .. } => {
            let market = stages::prepare(&session)?;
            stages::fit(&session, &market)?;
        }
        Command::Simulate { .. } => {
            let market = stages::prepare(&session)?;
            stages::simulate(&session, &market)?;
        }
        Command::Check { .. } => {
            let market = stages::prepare(&session)?;
            stages::check(&session, &market)?;
        }
        Command::Analyze { target, .. } => {
            let market = stages::prepare(&session)?;
            stages::analyze(&session, &market, *target)?;
        }
        Command::Forecast => {
            let market = stages::prepare(&session)?;
            stages::forecast(&session, &market)?;
        }
        Command::Synth { .. } => stages::synth(&session, &session.dir)?,
        Command::Pipeline => stages::pipeline(&session)?,
    }
    Ok(session.dir)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("facmarket: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
