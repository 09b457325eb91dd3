//! Pipeline stages. Each stage recomputes what it needs from the inputs and
//! the named seed substreams, so any stage can run on its own and reproduce
//! the artifacts a full pipeline run would write.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use hiring_core::analysis::stats::{ks_uniform, quantile_sorted};
use hiring_core::analysis::{
    candidate_placement_errors, descriptive_report, error_trend, female_hire_distributions, parity_forecast,
    performance_by_gender, placement_error_by_year, rank_band_summary, yearly_female_fraction, ParityForecast,
    PARITY,
};
use hiring_core::checking::{check_report, STATISTIC_NAMES};
use hiring_core::data::{
    build_network, filter_cohort, load_faculty, load_institutions, load_publications, write_faculty, FacultyRecord,
    Gender, HiringNetwork, Institution, Publication, Region,
};
use hiring_core::fitting::{fit_weights, greedy_select, GreedyParams, NelderMeadParams, Objective};
use hiring_core::market::{simulate_history, Feature, Market, MatchModel, SimulationRun, Weights};
use hiring_core::productivity::{score_productivity, LdaParams};
use hiring_core::ranking::{mean_rank, sample_mvr, MvrParams, PrestigeRanking};
use hiring_core::seeds;
use hiring_core::synth::{generate_synthetic, SyntheticSpec};

use crate::config::Config;
use crate::error::{CliError, Stage, StageExt};
use crate::output::{opt, write_csv, write_json};

/// Top words per topic in `topics.csv`.
const TOP_WORDS: usize = 20;
/// Projection horizon cap of `forecast.csv`, in years past the data.
const FORECAST_HORIZON: i32 = 200;

pub struct Session {
    pub cfg: Config,
    pub dir: PathBuf,
}

impl Session {
    pub fn new(cfg: Config, base: &Path) -> Result<Session, CliError> {
        cfg.validate()?;
        let dir = base.join(cfg.hash());
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(Stage::Config, &dir, e))?;
        write_json(Stage::Config, &dir.join("config.json"), &cfg)?;
        Ok(Session { cfg, dir })
    }

    fn seed(&self, stream: &str) -> u64 {
        seeds::named(self.cfg.seed, stream)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub struct Inputs {
    pub institutions: Vec<Institution>,
    pub records: Vec<FacultyRecord>,
    pub publications: Vec<Publication>,
}

fn synth_spec(s: &crate::config::SynthConfig) -> SyntheticSpec {
    SyntheticSpec {
        n_institutions: s.n_institutions,
        n_years: s.n_years,
        hires_per_year: s.hires_per_year,
        ..SyntheticSpec::paper_scale()
    }
}

/// Generates the configured synthetic bundle into `dir`.
pub fn synth(session: &Session, dir: &Path) -> Result<(), CliError> {
    let spec = synth_spec(&session.cfg.synthetic.clone().unwrap_or_default());
    let bundle = generate_synthetic(&spec, session.seed("synth")).at(Stage::Synth)?;
    bundle.write(dir).at(Stage::Synth)
}

fn input_paths(session: &Session) -> Result<[PathBuf; 3], CliError> {
    let cfg = &session.cfg;
    match (&cfg.institutions, &cfg.faculty, &cfg.publications) {
        (Some(i), Some(f), Some(p)) => Ok([i.clone(), f.clone(), p.clone()]),
        (None, None, None) if cfg.synthetic.is_some() => {
            let dir = session.path("inputs");
            synth(session, &dir)?;
            Ok(["institutions.csv", "faculty.csv", "publications.csv"].map(|f| dir.join(f)))
        }
        _ => Err(CliError::usage(
            Stage::Ingest,
            "configure all of institutions, faculty and publications, or a synthetic block",
        )),
    }
}

fn apply_region_map(path: &Path, institutions: &mut [Institution]) -> Result<(), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(Stage::Ingest, path, e))?;
    let mut map = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::io(Stage::Ingest, path, e))?;
        if row.len() != 2 {
            return Err(CliError::data(Stage::Ingest, format!("{}: expected institution_id,region", path.display())));
        }
        let region: Region = row[1].parse().at(Stage::Ingest)?;
        map.insert(row[0].to_string(), region);
    }
    for inst in institutions.iter_mut() {
        if let Some(r) = map.get(&inst.id) {
            inst.region = *r;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    institutions: usize,
    faculty_rows: usize,
    kept: usize,
    dropped_out_of_window: usize,
    dropped_out_of_sample: usize,
    female_fraction: f64,
    publications: usize,
}

pub fn ingest(session: &Session) -> Result<Inputs, CliError> {
    let [ipath, fpath, ppath] = input_paths(session)?;
    let mut institutions = load_institutions(&ipath).at(Stage::Ingest)?;
    if let Some(map) = &session.cfg.region_map {
        apply_region_map(map, &mut institutions)?;
    }
    let faculty = load_faculty(&fpath, &institutions).at(Stage::Ingest)?;
    let publications = load_publications(&ppath).at(Stage::Ingest)?;
    let cohort = filter_cohort(&faculty, &institutions);
    if cohort.kept.is_empty() {
        return Err(CliError::data(Stage::Ingest, "no faculty records fall in the study cohort"));
    }
    write_faculty(session.path("cohort.csv"), &cohort.kept).at(Stage::Ingest)?;
    write_json(
        Stage::Ingest,
        &session.path("ingest.json"),
        &IngestSummary {
            institutions: institutions.len(),
            faculty_rows: faculty.len(),
            kept: cohort.kept.len(),
            dropped_out_of_window: cohort.dropped_out_of_window,
            dropped_out_of_sample: cohort.dropped_out_of_sample,
            female_fraction: cohort.female_fraction(),
            publications: publications.len(),
        },
    )?;
    Ok(Inputs {
        institutions,
        records: cohort.kept,
        publications,
    })
}

#[derive(Serialize)]
struct RankSummary {
    min_violations: u64,
    violation_fraction: f64,
    samples: usize,
}

pub fn rank(session: &Session, inputs: &Inputs) -> Result<(HiringNetwork, PrestigeRanking), CliError> {
    let network = build_network(&inputs.institutions, &inputs.records);
    let params = MvrParams {
        restarts: session.cfg.mvr_restarts,
        samples: session.cfg.mvr_samples,
        seed: session.seed("ranking"),
        ..MvrParams::default()
    };
    let samples = sample_mvr(&network, &params).at(Stage::Rank)?;
    let ranking = mean_rank(&network, &samples).at(Stage::Rank)?;
    write_csv(
        Stage::Rank,
        &session.path("ranks.csv"),
        &["institution_id", "mean_rank", "normalized_rank"],
        (0..ranking.len()).map(|i| {
            [
                network.institution(i).id.clone(),
                ranking.rank(i).to_string(),
                ranking.normalized(i).to_string(),
            ]
        }),
    )?;
    write_json(
        Stage::Rank,
        &session.path("rank.json"),
        &RankSummary {
            min_violations: ranking.min_violations,
            violation_fraction: ranking.violation_fraction,
            samples: ranking.samples,
        },
    )?;
    Ok((network, ranking))
}

/// Scores productivity in place and writes the topic tables.
pub fn topics(session: &Session, inputs: &mut Inputs) -> Result<(), CliError> {
    let cfg = &session.cfg;
    let params = LdaParams {
        topics: cfg.topics,
        alpha: cfg.alpha,
        beta: cfg.beta,
        iterations: cfg.lda_iterations,
        seed: session.seed("lda"),
    };
    let out = score_productivity(&mut inputs.records, &inputs.publications, &params).at(Stage::Topics)?;
    let mut rows = Vec::new();
    for k in 0..out.model.topics {
        for (i, (word, p)) in out.model.top_words(&out.corpus, k, TOP_WORDS).into_iter().enumerate() {
            rows.push([k.to_string(), (i + 1).to_string(), word.to_string(), p.to_string()]);
        }
    }
    write_csv(Stage::Topics, &session.path("topics.csv"), &["topic", "rank", "word", "probability"], rows)?;
    let mut header = vec!["faculty_id".to_string(), "pub_count".into(), "z".into()];
    header.extend((1..=out.model.topics).map(|k| format!("theta_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        Stage::Topics,
        &session.path("productivity.csv"),
        &header,
        inputs.records.iter().map(|r| {
            let mut row = vec![r.id.clone(), r.pub_count.to_string(), opt(r.productivity_z)];
            row.extend(r.topic_mix.iter().flatten().map(|t| t.to_string()));
            row
        }),
    )
}

/// Ingest, rank and productivity scoring, assembled into a market.
pub fn prepare(session: &Session) -> Result<Market, CliError> {
    let mut inputs = ingest(session)?;
    let (network, ranking) = rank(session, &inputs)?;
    topics(session, &mut inputs)?;
    Market::new(&network, &inputs.records, &ranking).at(Stage::Rank)
}

fn objective(session: &Session) -> Objective {
    Objective {
        lambda: session.cfg.lambda,
        replicates: session.cfg.replicates,
        master_seed: session.seed("fit"),
    }
}

fn optimizer(session: &Session) -> NelderMeadParams {
    NelderMeadParams {
        restarts: session.cfg.fit_restarts,
        max_iter: session.cfg.fit_max_iter,
        seed: seeds::named(session.seed("fit"), "optimizer"),
        ..NelderMeadParams::default()
    }
}

fn weights_map(w: &Weights) -> BTreeMap<String, f64> {
    let mut m: BTreeMap<String, f64> = w.active().into_iter().map(|f| (f.name().to_string(), w.get(f))).collect();
    if let Some(b) = w.intercept() {
        m.insert("intercept".into(), b);
    }
    m
}

#[derive(Serialize)]
struct FitOutput {
    features: Vec<&'static str>,
    lambda: f64,
    replicates: usize,
    weights: BTreeMap<String, f64>,
    err: f64,
    /// `(iteration, objective)` of the optimizer, or `(stage, objective)`
    /// for greedy selection.
    trace: Vec<(usize, f64)>,
    evaluations: Option<usize>,
}

pub fn fit(session: &Session, market: &Market) -> Result<Weights, CliError> {
    let features = session.cfg.feature_list()?;
    let objective = objective(session);
    let optimizer = optimizer(session);
    let with_intercept = |w: Weights| if session.cfg.intercept { w.with_intercept(0.0) } else { w };
    let (output, weights) = if session.cfg.greedy {
        let params = GreedyParams {
            objective,
            optimizer,
            eval_seed: seeds::named(session.seed("fit"), "eval"),
            max_stages: None,
        };
        let trace = greedy_select(market, &features, &params).at(Stage::Fit)?;
        let pct = trace.pct_reduction_vs_step();
        write_csv(
            Stage::Fit,
            &session.path("greedy.csv"),
            &["stage", "feature", "err", "pct_reduction_vs_step", "p_value", "p_value_vs_step"],
            trace.stages.iter().zip(&pct).enumerate().map(|(i, (s, p))| {
                [
                    (i + 1).to_string(),
                    s.feature.name().to_string(),
                    s.err_after.to_string(),
                    p.to_string(),
                    s.p_value.to_string(),
                    s.p_value_vs_step.to_string(),
                ]
            }),
        )?;
        let last = trace
            .stages
            .last()
            .ok_or_else(|| CliError::usage(Stage::Fit, "no features to select"))?;
        let output = FitOutput {
            features: trace.order().iter().map(|f| f.name()).collect(),
            lambda: objective.lambda,
            replicates: objective.replicates,
            weights: weights_map(&last.weights),
            err: last.objective,
            trace: trace.stages.iter().enumerate().map(|(i, s)| (i + 1, s.objective)).collect(),
            evaluations: None,
        };
        (output, last.weights)
    } else {
        let w0 = with_intercept(Weights::zeros(&features));
        let result = fit_weights(market, &objective, &w0, &optimizer);
        let output = FitOutput {
            features: features.iter().map(|f| f.name()).collect(),
            lambda: objective.lambda,
            replicates: objective.replicates,
            weights: weights_map(&result.weights),
            err: result.err,
            trace: result.trace.clone(),
            evaluations: Some(result.evaluations),
        };
        (output, result.weights)
    };
    write_json(Stage::Fit, &session.path("fit.json"), &output)?;
    Ok(weights)
}

/// Parses a weights file: either a `fit.json` or a bare map of feature name
/// to weight, with an optional `intercept` key.
pub fn read_weights(stage: Stage, path: &Path) -> Result<Weights, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(stage, path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::io(stage, path, e))?;
    let map = value
        .get("weights")
        .unwrap_or(&value)
        .as_object()
        .ok_or_else(|| CliError::data(stage, format!("{}: expected an object of weights", path.display())))?;
    let mut pairs = Vec::new();
    let mut intercept = None;
    for (k, v) in map {
        let x = v
            .as_f64()
            .ok_or_else(|| CliError::data(stage, format!("{}: weight `{k}` is not a number", path.display())))?;
        if k == "intercept" {
            intercept = Some(x);
        } else {
            let f: Feature = k.parse().at(stage)?;
            pairs.push((f, x));
        }
    }
    let w = Weights::from_pairs(&pairs);
    Ok(match intercept {
        Some(b) => w.with_intercept(b),
        None => w,
    })
}

/// Weights for the logistic model: an explicit file, this run's `fit.json`,
/// or a fresh fit.
pub fn logistic_weights(session: &Session, market: &Market, stage: Stage) -> Result<Weights, CliError> {
    if let Some(p) = &session.cfg.weights {
        return read_weights(stage, p);
    }
    let cached = session.path("fit.json");
    if cached.exists() {
        return read_weights(stage, &cached);
    }
    fit(session, market)
}

pub fn chosen_model(session: &Session, market: &Market, stage: Stage) -> Result<MatchModel, CliError> {
    Ok(match session.cfg.model.as_str() {
        "uniform" => MatchModel::Uniform,
        "step" => MatchModel::Step,
        _ => MatchModel::Logistic(logistic_weights(session, market, stage)?),
    })
}

pub fn simulate_runs(session: &Session, market: &Market, model: &MatchModel) -> Vec<SimulationRun> {
    let master = session.seed("simulate");
    (0..session.cfg.runs as u64)
        .map(|r| simulate_history(market, model, seeds::derive(master, r)))
        .collect()
}

pub fn simulate(session: &Session, market: &Market) -> Result<Vec<SimulationRun>, CliError> {
    let model = chosen_model(session, market, Stage::Simulate)?;
    let runs = simulate_runs(session, market, &model);
    let dir = session.path("placements");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(Stage::Simulate, &dir, e))?;
    for (i, run) in runs.iter().enumerate() {
        write_csv(
            Stage::Simulate,
            &dir.join(format!("placements_{i}.csv")),
            &["faculty_id", "simulated_institution", "year"],
            market.candidates.iter().zip(&run.placements).map(|(c, &v)| {
                [c.id.clone(), market.institutions[v].id.clone(), c.year.to_string()]
            }),
        )?;
    }
    Ok(runs)
}

pub fn check(session: &Session, market: &Market) -> Result<(), CliError> {
    let w = logistic_weights(session, market, Stage::Check)?;
    let models = [MatchModel::Uniform, MatchModel::Step, MatchModel::Logistic(w)];
    let report = check_report(market, &models, session.cfg.runs, session.seed("simulate")).at(Stage::Check)?;
    let observed = report.observed.to_array();
    let cols: Vec<([f64; 6], [f64; 6])> = report.models.iter().map(|m| (m.mean.to_array(), m.se.to_array())).collect();
    write_csv(
        Stage::Check,
        &session.path("model_check.csv"),
        &["statistic", "observed", "uniform", "uniform_se", "step", "step_se", "logistic", "logistic_se"],
        (0..6).map(|i| {
            let mut row = vec![STATISTIC_NAMES[i].to_string(), observed[i].to_string()];
            for (mean, se) in &cols {
                row.push(mean[i].to_string());
                row.push(se[i].to_string());
            }
            row
        }),
    )?;
    write_json(Stage::Check, &session.path("check.json"), &report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Institutions,
    Candidates,
    Parity,
    Descriptives,
    All,
}

pub fn analyze(session: &Session, market: &Market, target: Target) -> Result<(), CliError> {
    let needs_runs = matches!(target, Target::Institutions | Target::Candidates | Target::All);
    let runs = if needs_runs {
        let w = logistic_weights(session, market, Stage::Analyze)?;
        simulate_runs(session, market, &MatchModel::Logistic(w))
    } else {
        Vec::new()
    };
    if matches!(target, Target::Institutions | Target::All) {
        institutions(session, market, &runs)?;
    }
    if matches!(target, Target::Candidates | Target::All) {
        candidates(session, market, &runs)?;
    }
    if matches!(target, Target::Parity | Target::All) {
        parity(session, market)?;
    }
    if matches!(target, Target::Descriptives | Target::All) {
        descriptives(session, market)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InstitutionSummary {
    institutions: usize,
    runs: usize,
    above_95th_percentile: usize,
    below_5th_percentile: usize,
    /// KS test of randomized percentiles against Uniform(0, 100).
    calibration_ks_statistic: f64,
    calibration_ks_p_value: f64,
    expected_is: &'static str,
}

fn institutions(session: &Session, market: &Market, runs: &[SimulationRun]) -> Result<(), CliError> {
    let dists = female_hire_distributions(market, runs, session.seed("simulate")).at(Stage::Analyze)?;
    let mut long = Vec::new();
    for d in &dists {
        for (t, year) in d.years.iter().enumerate() {
            let mut at: Vec<f64> = d.trajectories.iter().map(|tr| f64::from(tr[t])).collect();
            at.sort_by(f64::total_cmp);
            let mean = at.iter().sum::<f64>() / at.len() as f64;
            for (series, value) in [
                ("actual", f64::from(d.actual_trajectory[t])),
                ("expected", mean),
                ("p25", quantile_sorted(&at, 0.25)),
                ("p75", quantile_sorted(&at, 0.75)),
            ] {
                long.push([d.institution.clone(), year.to_string(), value.to_string(), series.to_string()]);
            }
        }
    }
    write_csv(Stage::Analyze, &session.path("institutions.csv"), &["entity", "year", "value", "series"], long)?;
    let bands = rank_band_summary(&dists, market, session.cfg.top_n);
    write_csv(
        Stage::Analyze,
        &session.path("institutions_bands.csv"),
        &["institution", "rank", "actual", "expected", "expected_median", "difference", "band_low", "band_high"],
        bands.iter().map(|b| {
            [
                b.institution.clone(),
                b.rank.to_string(),
                b.actual.to_string(),
                b.expected.to_string(),
                b.expected_median.to_string(),
                b.difference.to_string(),
                b.band_low.to_string(),
                b.band_high.to_string(),
            ]
        }),
    )?;
    write_csv(
        Stage::Analyze,
        &session.path("institutions_percentiles.csv"),
        &["institution", "actual", "expected", "percentile", "randomized_percentile"],
        dists.iter().map(|d| {
            [
                d.institution.clone(),
                d.actual_final.to_string(),
                d.expected_mean.to_string(),
                d.percentile_of_actual.to_string(),
                d.randomized_percentile.to_string(),
            ]
        }),
    )?;
    let pits: Vec<f64> = dists.iter().map(|d| d.randomized_percentile).collect();
    let ks = ks_uniform(&pits, 0.0, 100.0).at(Stage::Analyze)?;
    write_json(
        Stage::Analyze,
        &session.path("institutions.json"),
        &InstitutionSummary {
            institutions: dists.len(),
            runs: runs.len(),
            above_95th_percentile: dists.iter().filter(|d| d.percentile_of_actual > 95.0).count(),
            below_5th_percentile: dists.iter().filter(|d| d.percentile_of_actual < 5.0).count(),
            calibration_ks_statistic: ks.statistic,
            calibration_ks_p_value: ks.p_value,
            expected_is: "mean of simulated final counts",
        },
    )
}

#[derive(Serialize)]
struct Trend {
    slope: f64,
    intercept: f64,
    slope_p_value: f64,
}

#[derive(Serialize)]
struct CandidateSummary {
    trends: BTreeMap<&'static str, Option<Trend>>,
    performance: hiring_core::analysis::PerformanceTests,
}

fn candidates(session: &Session, market: &Market, runs: &[SimulationRun]) -> Result<(), CliError> {
    let outcomes = candidate_placement_errors(market, runs).at(Stage::Analyze)?;
    write_csv(
        Stage::Analyze,
        &session.path("candidates.csv"),
        &["faculty_id", "year", "gender", "observed_rank", "mean_simulated_rank", "delta"],
        market.candidates.iter().zip(&outcomes).map(|(c, o)| {
            [
                o.faculty_id.clone(),
                c.year.to_string(),
                c.gender.token().to_string(),
                o.observed_rank.to_string(),
                (o.observed_rank - o.delta).to_string(),
                o.delta.to_string(),
            ]
        }),
    )?;
    let points = placement_error_by_year(market, &outcomes);
    write_csv(
        Stage::Analyze,
        &session.path("candidates_by_year.csv"),
        &["entity", "year", "value", "series"],
        points.iter().flat_map(|p| {
            [("mean_delta", p.mean_delta), ("half_width", p.half_width), ("n", p.n as f64)].map(|(s, v)| {
                [p.gender.token().to_string(), p.year.to_string(), v.to_string(), s.to_string()]
            })
        }),
    )?;
    let trend = |g: Gender| {
        error_trend(&points, g).map(|f| Trend {
            slope: f.slope,
            intercept: f.intercept,
            slope_p_value: f.slope_p_value(),
        })
    };
    let mut trends = BTreeMap::new();
    trends.insert("men", trend(Gender::Male));
    trends.insert("women", trend(Gender::Female));
    write_json(
        Stage::Analyze,
        &session.path("candidates.json"),
        &CandidateSummary {
            trends,
            performance: performance_by_gender(market, &outcomes),
        },
    )
}

fn forecast_of(market: &Market, stage: Stage) -> Result<(Vec<(i32, f64)>, ParityForecast), CliError> {
    let series = yearly_female_fraction(market);
    let years: Vec<f64> = series.iter().map(|(y, _)| f64::from(*y)).collect();
    let fractions: Vec<f64> = series.iter().map(|(_, f)| *f).collect();
    let f = parity_forecast(&years, &fractions).at(stage)?;
    Ok((series, f))
}

fn parity(session: &Session, market: &Market) -> Result<(), CliError> {
    let (series, f) = forecast_of(market, Stage::Analyze)?;
    write_csv(
        Stage::Analyze,
        &session.path("parity.csv"),
        &["entity", "year", "value", "series"],
        series.iter().flat_map(|&(y, v)| {
            [("observed", v), ("fitted", f.intercept + f.slope * f64::from(y))]
                .map(|(s, x)| ["women".to_string(), y.to_string(), x.to_string(), s.to_string()])
        }),
    )?;
    write_json(Stage::Analyze, &session.path("parity.json"), &f)
}

pub fn forecast(session: &Session, market: &Market) -> Result<(), CliError> {
    let (series, f) = forecast_of(market, Stage::Forecast)?;
    let first = series.first().map(|s| s.0).unwrap_or_default();
    let last = series.last().map(|s| s.0).unwrap_or_default();
    let until = f
        .ci_high
        .or(f.crossing_year)
        .map(|y| (y.ceil() as i32).clamp(last, last + FORECAST_HORIZON))
        .unwrap_or(last);
    write_csv(
        Stage::Forecast,
        &session.path("forecast.csv"),
        &["entity", "year", "value", "series"],
        (first..=until).map(|y| {
            let v = (f.intercept + f.slope * f64::from(y)).clamp(0.0, 1.0);
            ["women".to_string(), y.to_string(), v.to_string(), "projected".to_string()]
        }),
    )?;
    #[derive(Serialize)]
    struct Out {
        parity: f64,
        #[serde(flatten)]
        forecast: ParityForecast,
    }
    write_json(Stage::Forecast, &session.path("forecast.json"), &Out { parity: PARITY, forecast: f })
}

fn descriptives(session: &Session, market: &Market) -> Result<(), CliError> {
    let d = descriptive_report(market);
    let mut rows = Vec::new();
    for t in &d.tables {
        for r in 0..2 {
            for c in 0..2 {
                rows.push([
                    t.name.clone(),
                    t.rows[r].clone(),
                    t.cols[c].clone(),
                    t.counts[r][c].to_string(),
                    opt(t.row_pct(r, c)),
                ]);
            }
        }
    }
    write_csv(
        Stage::Analyze,
        &session.path("descriptives_tables.csv"),
        &["table", "row", "col", "count", "row_pct"],
        rows,
    )?;
    write_csv(
        Stage::Analyze,
        &session.path("descriptives_comparisons.csv"),
        &["comparison", "group", "n", "median", "p_value"],
        d.comparisons.iter().flat_map(|c| {
            (0..2).map(|g| {
                [
                    c.name.clone(),
                    c.groups[g].clone(),
                    c.n[g].to_string(),
                    opt(c.medians[g]),
                    opt(c.test.map(|t| t.p_value)),
                ]
            })
        }),
    )?;
    #[derive(Serialize)]
    struct Out<'a> {
        chi_squared: &'static str,
        mann_whitney: &'static str,
        #[serde(flatten)]
        report: &'a hiring_core::analysis::Descriptives,
    }
    write_json(
        Stage::Analyze,
        &session.path("descriptives.json"),
        &Out {
            chi_squared: "Pearson, 1 df, no continuity correction",
            mann_whitney: "two-sided normal approximation, tie-corrected, continuity 0.5",
            report: &d,
        },
    )
}

/// Every stage in order, materializing all artifacts.
pub fn pipeline(session: &Session) -> Result<(), CliError> {
    let market = prepare(session)?;
    fit(session, &market)?;
    simulate(session, &market)?;
    check(session, &market)?;
    analyze(session, &market, Target::All)?;
    forecast(session, &market)
}
