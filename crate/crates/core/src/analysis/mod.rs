//! Result layers built on simulated histories: institution-level female-hire
//! counterfactuals, candidate-level placement errors, the parity forecast and
//! descriptive hypothesis tests on the observed records.

pub mod stats;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::Gender;
use crate::error::{Error, Result};
use crate::market::{Market, SimulationRun};
use crate::seeds;
use stats::{chi_squared_2x2, mann_whitney_u, median, ols, quantile_sorted, LinearFit, TestResult};

/// Midpoint percentile of `x` within `sample`: share strictly below plus half
/// the share equal, times 100.
pub fn midpoint_percentile(sample: &[u32], x: u32) -> f64 {
    let below = sample.iter().filter(|&&s| s < x).count() as f64;
    let equal = sample.iter().filter(|&&s| s == x).count() as f64;
    100.0 * (below + 0.5 * equal) / sample.len() as f64
}

/// Randomized percentile: ties are broken by `u ∈ [0, 1)`. Exactly uniform
/// when `x` is exchangeable with the sample, unlike the midpoint version.
pub fn randomized_percentile(sample: &[u32], x: u32, u: f64) -> f64 {
    let below = sample.iter().filter(|&&s| s < x).count() as f64;
    let equal = sample.iter().filter(|&&s| s == x).count() as f64;
    // the actual value itself is one of the `equal + 1` tied positions
    100.0 * (below + u * (equal + 1.0)) / (sample.len() + 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstitutionHireDistribution {
    pub institution: String,
    pub years: Vec<i32>,
    /// `trajectories[run][t]`: cumulative female hires through `years[t]`.
    pub trajectories: Vec<Vec<u32>>,
    pub final_counts: Vec<u32>,
    pub actual_trajectory: Vec<u32>,
    pub actual_final: u32,
    pub percentile_of_actual: f64,
    pub randomized_percentile: f64,
    pub expected_mean: f64,
    pub expected_median: f64,
}

/// Per-institution cumulative female hires across `runs`, compared with the
/// observed history. `seed` drives only the randomized percentile.
pub fn female_hire_distributions(
    market: &Market,
    runs: &[SimulationRun],
    seed: u64,
) -> Result<Vec<InstitutionHireDistribution>> {
    if runs.is_empty() {
        return Err(Error::Empty("no simulation runs"));
    }
    let years = market.year_list();
    let n_inst = market.institution_count();
    let year_slot: Vec<usize> = market
        .candidates
        .iter()
        .map(|c| years.binary_search(&c.year).expect("candidate year is a market year"))
        .collect();
    let cumulative = |placements: &[usize]| -> Vec<Vec<u32>> {
        let mut counts = vec![vec![0u32; years.len()]; n_inst];
        for (c, &v) in placements.iter().enumerate() {
            if market.candidates[c].gender == Gender::Female {
                counts[v][year_slot[c]] += 1;
            }
        }
        for row in &mut counts {
            for t in 1..row.len() {
                row[t] += row[t - 1];
            }
        }
        counts
    };
    let actual = cumulative(&market.observed);
    let simulated: Vec<Vec<Vec<u32>>> = runs.iter().map(|r| cumulative(&r.placements)).collect();
    let last = years.len().saturating_sub(1);
    let mut rng = seeds::rng(seed);
    Ok((0..n_inst)
        .map(|v| {
            let trajectories: Vec<Vec<u32>> = simulated.iter().map(|s| s[v].clone()).collect();
            let final_counts: Vec<u32> = trajectories.iter().map(|t| t.get(last).copied().unwrap_or(0)).collect();
            let actual_final = actual[v].get(last).copied().unwrap_or(0);
            let as_f: Vec<f64> = final_counts.iter().map(|&c| f64::from(c)).collect();
            InstitutionHireDistribution {
                institution: market.institutions[v].id.clone(),
                years: years.clone(),
                percentile_of_actual: midpoint_percentile(&final_counts, actual_final),
                randomized_percentile: randomized_percentile(&final_counts, actual_final, rng.random()),
                expected_mean: as_f.iter().sum::<f64>() / as_f.len() as f64,
                expected_median: median(&as_f).expect("nonempty runs"),
                actual_trajectory: actual[v].clone(),
                actual_final,
                trajectories,
                final_counts,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBandRow {
    pub institution: String,
    pub rank: f64,
    pub actual: u32,
    /// Mean simulated final count.
    pub expected: f64,
    pub expected_median: f64,
    /// `actual − expected`.
    pub difference: f64,
    /// 25th and 75th percentiles of `simulated − expected`.
    pub band_low: f64,
    pub band_high: f64,
}

/// Actual minus expected female hires for the `top_n` best-ranked
/// institutions, in rank order.
pub fn rank_band_summary(
    distributions: &[InstitutionHireDistribution],
    market: &Market,
    top_n: usize,
) -> Vec<RankBandRow> {
    let mut order: Vec<usize> = (0..distributions.len()).collect();
    order.sort_by(|&a, &b| market.raw_rank[a].total_cmp(&market.raw_rank[b]));
    order
        .into_iter()
        .take(top_n)
        .map(|v| {
            let d = &distributions[v];
            let mut centered: Vec<f64> = d
                .final_counts
                .iter()
                .map(|&c| f64::from(c) - d.expected_mean)
                .collect();
            centered.sort_by(f64::total_cmp);
            RankBandRow {
                institution: d.institution.clone(),
                rank: market.raw_rank[v],
                actual: d.actual_final,
                expected: d.expected_mean,
                expected_median: d.expected_median,
                difference: f64::from(d.actual_final) - d.expected_mean,
                band_low: quantile_sorted(&centered, 0.25),
                band_high: quantile_sorted(&centered, 0.75),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub faculty_id: String,
    /// Normalized rank of the simulated placement, one per run.
    pub simulated_ranks: Vec<f64>,
    pub observed_rank: f64,
    /// Observed minus mean simulated normalized rank; negative means the
    /// candidate placed better than the model expected.
    pub delta: f64,
}

pub fn candidate_placement_errors(market: &Market, runs: &[SimulationRun]) -> Result<Vec<CandidateOutcome>> {
    if runs.is_empty() {
        return Err(Error::Empty("no simulation runs"));
    }
    if runs.iter().any(|r| r.placements.len() != market.candidate_count()) {
        return Err(Error::CandidateMismatch);
    }
    Ok(market
        .candidates
        .iter()
        .enumerate()
        .map(|(c, cand)| {
            let simulated_ranks: Vec<f64> = runs.iter().map(|r| market.norm_rank[r.placements[c]]).collect();
            let mean = simulated_ranks.iter().sum::<f64>() / simulated_ranks.len() as f64;
            let observed_rank = market.norm_rank[market.observed[c]];
            CandidateOutcome {
                faculty_id: cand.id.clone(),
                delta: observed_rank - mean,
                observed_rank,
                simulated_ranks,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearErrorPoint {
    pub year: i32,
    pub gender: Gender,
    pub n: usize,
    pub mean_delta: f64,
    /// 1.96 standard errors; 0 for a single candidate.
    pub half_width: f64,
}

/// Mean placement error per hiring year and gender. Unknown gender is
/// excluded.
pub fn placement_error_by_year(market: &Market, outcomes: &[CandidateOutcome]) -> Vec<YearErrorPoint> {
    let mut out = Vec::new();
    for year in market.year_list() {
        for gender in [Gender::Female, Gender::Male] {
            let deltas: Vec<f64> = market
                .candidates
                .iter()
                .zip(outcomes)
                .filter(|(c, _)| c.year == year && c.gender == gender)
                .map(|(_, o)| o.delta)
                .collect();
            if deltas.is_empty() {
                continue;
            }
            let n = deltas.len() as f64;
            let mean = deltas.iter().sum::<f64>() / n;
            let half_width = if deltas.len() > 1 {
                let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
                1.96 * (var / n).sqrt()
            } else {
                0.0
            };
            out.push(YearErrorPoint {
                year,
                gender,
                n: deltas.len(),
                mean_delta: mean,
                half_width,
            });
        }
    }
    out
}

/// OLS trend of one gender's yearly mean error; `None` with < 3 years.
pub fn error_trend(points: &[YearErrorPoint], gender: Gender) -> Option<LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.gender == gender)
        .map(|p| (f64::from(p.year), p.mean_delta))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    ols(&x, &y).ok()
}

/// Women vs men among candidates who over-performed (delta < 0) and,
/// separately, under-performed (delta > 0). Exact zeros are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTests {
    pub over: Option<TestResult>,
    pub under: Option<TestResult>,
    pub excluded_zero: usize,
}

pub fn performance_by_gender(market: &Market, outcomes: &[CandidateOutcome]) -> PerformanceTests {
    let pick = |gender: Gender, over: bool| -> Vec<f64> {
        market
            .candidates
            .iter()
            .zip(outcomes)
            .filter(|(c, o)| c.gender == gender && if over { o.delta < 0.0 } else { o.delta > 0.0 })
            .map(|(_, o)| o.delta)
            .collect()
    };
    PerformanceTests {
        over: mann_whitney_u(&pick(Gender::Female, true), &pick(Gender::Male, true)).ok(),
        under: mann_whitney_u(&pick(Gender::Female, false), &pick(Gender::Male, false)).ok(),
        excluded_zero: outcomes.iter().filter(|o| o.delta == 0.0).count(),
    }
}

pub const PARITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityForecast {
    pub slope: f64,
    /// Fitted fraction at year 0.
    pub intercept: f64,
    /// `None` when the trend never reaches parity.
    pub crossing_year: Option<f64>,
    /// `None` when the confidence band never reaches parity on that side.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

pub const MIN_FORECAST_POINTS: usize = 10;

/// Linear extrapolation of the yearly female share to 0.5.
///
/// The interval is where the 95% confidence band of the mean response meets
/// 0.5: solving `(0.5 − ŷ(x))² = t² s² (1/n + (x − x̄)²/Sxx)` for `x`.
pub fn parity_forecast(years: &[f64], fractions: &[f64]) -> Result<ParityForecast> {
    if years.len() < MIN_FORECAST_POINTS {
        return Err(Error::TooFewYears {
            needed: MIN_FORECAST_POINTS,
            found: years.len(),
        });
    }
    let fit = ols(years, fractions)?;
    let first = years.iter().copied().fold(f64::INFINITY, f64::min);
    let base = ParityForecast {
        slope: fit.slope,
        intercept: fit.intercept,
        crossing_year: None,
        ci_low: None,
        ci_high: None,
    };
    if fit.predict(first) >= PARITY - 1e-12 {
        return Ok(ParityForecast {
            crossing_year: Some(first),
            ci_low: Some(first),
            ci_high: Some(first),
            ..base
        });
    }
    if fit.slope <= 0.0 {
        return Ok(base);
    }
    let crossing = fit.x_mean + (PARITY - fit.y_mean) / fit.slope;
    let n = fit.n as f64;
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    let c = (t * fit.residual_se).powi(2);
    let a0 = PARITY - fit.y_mean;
    let qa = fit.slope * fit.slope - c / fit.sxx;
    let qb = -2.0 * a0 * fit.slope;
    let qc = a0 * a0 - c / n;
    let (ci_low, ci_high) = if c == 0.0 {
        (Some(crossing), Some(crossing))
    } else if qa > 0.0 {
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        let d1 = (-qb - disc) / (2.0 * qa);
        let d2 = (-qb + disc) / (2.0 * qa);
        (Some(fit.x_mean + d1.min(crossing - fit.x_mean)), Some(fit.x_mean + d2.max(crossing - fit.x_mean)))
    } else if qa < 0.0 {
        // slope not significant: the upper band meets 0.5 once, the lower never
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        let r1 = (-qb - disc) / (2.0 * qa);
        let r2 = (-qb + disc) / (2.0 * qa);
        let low = r1.min(r2).min(crossing - fit.x_mean);
        (Some(fit.x_mean + low), None)
    } else {
        (None, None)
    };
    Ok(ParityForecast {
        crossing_year: Some(crossing),
        ci_low,
        ci_high,
        ..base
    })
}

/// Female share of each year's hires with known gender.
pub fn yearly_female_fraction(market: &Market) -> Vec<(i32, f64)> {
    market
        .years
        .iter()
        .filter_map(|y| {
            let known: Vec<Gender> = y
                .candidates
                .iter()
                .map(|&c| market.candidates[c].gender)
                .filter(|g| *g != Gender::Unknown)
                .collect();
            if known.is_empty() {
                return None;
            }
            let f = known.iter().filter(|g| **g == Gender::Female).count();
            Some((y.year, f as f64 / known.len() as f64))
        })
        .collect()
}

/// First hiring year of the "recent" cohort in before/after splits.
pub const RECENT_FROM: i32 = 2002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub name: String,
    pub rows: [String; 2],
    pub cols: [String; 2],
    pub counts: [[u64; 2]; 2],
    /// Skipped when a marginal is zero.
    pub test: Option<TestResult>,
}

impl CrossTab {
    fn new(name: &str, rows: [&str; 2], cols: [&str; 2], counts: [[u64; 2]; 2]) -> Self {
        CrossTab {
            name: name.into(),
            rows: rows.map(String::from),
            cols: cols.map(String::from),
            test: chi_squared_2x2(counts).ok(),
            counts,
        }
    }

    /// Row percentage of cell `(r, c)`; `None` for an empty row.
    pub fn row_pct(&self, r: usize, c: usize) -> Option<f64> {
        let total = self.counts[r][0] + self.counts[r][1];
        (total > 0).then(|| 100.0 * self.counts[r][c] as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub groups: [String; 2],
    pub n: [usize; 2],
    pub medians: [Option<f64>; 2],
    /// Skipped when either group is empty.
    pub test: Option<TestResult>,
}

impl Comparison {
    fn new(name: &str, groups: [&str; 2], a: &[f64], b: &[f64]) -> Self {
        Comparison {
            name: name.into(),
            groups: groups.map(String::from),
            n: [a.len(), b.len()],
            medians: [median(a), median(b)],
            test: mann_whitney_u(a, b).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub tables: Vec<CrossTab>,
    pub comparisons: Vec<Comparison>,
}

impl Descriptives {
    pub fn table(&self, name: &str) -> Option<&CrossTab> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn comparison(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }
}

/// Cross-tabulations and group comparisons of the observed hires.
///
/// "Up" means the hiring institution is strictly better ranked than the
/// doctoral one; everything else that is not a self-hire counts as "down".
/// Records of unknown gender are left out.
pub fn descriptive_report(market: &Market) -> Descriptives {
    struct Row {
        female: bool,
        self_hire: bool,
        up: bool,
        same_region: bool,
        postdoc: bool,
        recent: bool,
        z: f64,
        doctoral_rank: f64,
        hiring_rank: f64,
    }
    let rows: Vec<Row> = market
        .candidates
        .iter()
        .zip(&market.observed)
        .filter(|(c, _)| c.gender != Gender::Unknown)
        .map(|(c, &v)| {
            let u = c.doctoral;
            Row {
                female: c.female,
                self_hire: u == v,
                up: market.raw_rank[v] < market.raw_rank[u],
                same_region: market.region(u) == market.region(v),
                postdoc: c.postdoc,
                recent: c.year >= RECENT_FROM,
                z: c.productivity_z,
                doctoral_rank: market.norm_rank[u],
                hiring_rank: market.norm_rank[v],
            }
        })
        .collect();

    let tab = |keep: &dyn Fn(&Row) -> bool, col: &dyn Fn(&Row) -> bool| -> [[u64; 2]; 2] {
        let mut t = [[0u64; 2]; 2];
        for r in rows.iter().filter(|r| keep(r)) {
            t[usize::from(r.female)][usize::from(col(r))] += 1;
        }
        t
    };
    let gender_rows = ["men", "women"];
    let moves = ["down", "up"];
    let mut tables = vec![
        CrossTab::new("moves_by_gender", gender_rows, moves, tab(&|r| !r.self_hire, &|r| r.up)),
        CrossTab::new("self_hires_by_gender", gender_rows, ["other", "self-hire"], tab(&|_| true, &|r| r.self_hire)),
        CrossTab::new("same_region_by_gender", gender_rows, ["changed", "same"], tab(&|_| true, &|r| r.same_region)),
        CrossTab::new(
            "moves_by_gender_same_region",
            gender_rows,
            moves,
            tab(&|r| !r.self_hire && r.same_region, &|r| r.up),
        ),
        CrossTab::new(
            "moves_by_gender_changed_region",
            gender_rows,
            moves,
            tab(&|r| !r.same_region, &|r| r.up),
        ),
        CrossTab::new(
            "region_change_by_gender_up",
            gender_rows,
            ["same", "changed"],
            tab(&|r| r.up, &|r| !r.same_region),
        ),
        CrossTab::new("postdoc_by_gender", gender_rows, ["no postdoc", "postdoc"], tab(&|_| true, &|r| r.postdoc)),
        CrossTab::new(
            "moves_by_gender_postdoc",
            gender_rows,
            moves,
            tab(&|r| !r.self_hire && r.postdoc, &|r| r.up),
        ),
        CrossTab::new(
            "postdoc_by_gender_recent",
            gender_rows,
            ["no postdoc", "postdoc"],
            tab(&|r| r.recent, &|r| r.postdoc),
        ),
        CrossTab::new(
            "self_hires_by_gender_recent",
            gender_rows,
            ["other", "self-hire"],
            tab(&|r| r.recent, &|r| r.self_hire),
        ),
    ];
    // period rather than gender on the rows
    let mut period = [[0u64; 2]; 2];
    for r in &rows {
        period[usize::from(r.recent)][usize::from(r.postdoc)] += 1;
    }
    tables.push(CrossTab::new(
        "postdoc_by_period",
        ["before", "recent"],
        ["no postdoc", "postdoc"],
        period,
    ));

    let values = |keep: &dyn Fn(&Row) -> bool, f: &dyn Fn(&Row) -> f64| -> Vec<f64> {
        rows.iter().filter(|r| keep(r)).map(f).collect()
    };
    let z = |r: &Row| r.z;
    let wm = ["women", "men"];
    let by_gender = |name: &str, keep: &dyn Fn(&Row) -> bool, f: &dyn Fn(&Row) -> f64| {
        Comparison::new(
            name,
            wm,
            &values(&|r| r.female && keep(r), f),
            &values(&|r| !r.female && keep(r), f),
        )
    };
    let comparisons = vec![
        by_gender("doctoral_rank", &|_| true, &|r| r.doctoral_rank),
        by_gender("hiring_rank", &|_| true, &|r| r.hiring_rank),
        by_gender("rank_diff", &|_| true, &|r| r.hiring_rank - r.doctoral_rank),
        by_gender("rank_diff_excl_self", &|r| !r.self_hire, &|r| r.hiring_rank - r.doctoral_rank),
        by_gender("z_down", &|r| !r.self_hire && !r.up, &z),
        by_gender("z_up", &|r| r.up, &z),
        by_gender("z_all", &|_| true, &z),
        by_gender("z_recent", &|r| r.recent, &z),
        by_gender("z_recent_postdoc", &|r| r.recent && r.postdoc, &z),
        Comparison::new(
            "z_postdoc_all",
            ["postdoc", "no postdoc"],
            &values(&|r| r.postdoc, &z),
            &values(&|r| !r.postdoc, &z),
        ),
        Comparison::new(
            "z_postdoc_women",
            ["postdoc", "no postdoc"],
            &values(&|r| r.female && r.postdoc, &z),
            &values(&|r| r.female && !r.postdoc, &z),
        ),
        Comparison::new(
            "z_postdoc_men",
            ["postdoc", "no postdoc"],
            &values(&|r| !r.female && r.postdoc, &z),
            &values(&|r| !r.female && !r.postdoc, &z),
        ),
        Comparison::new(
            "z_recent_women_postdoc_vs_men_without",
            ["women with postdoc", "men without postdoc"],
            &values(&|r| r.recent && r.female && r.postdoc, &z),
            &values(&|r| r.recent && !r.female && !r.postdoc, &z),
        ),
    ];
    Descriptives { tables, comparisons }
}
