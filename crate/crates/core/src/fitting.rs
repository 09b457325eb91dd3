//! Weight estimation for the logistic match function.
//!
//! The objective is the mean squared placement error between observed and
//! simulated normalized ranks, averaged over `R` simulated histories, plus an
//! L1 penalty on the active weights. Replicate `r` always uses the random
//! stream `derive(master_seed, r)`, so the objective is a deterministic
//! (piecewise-constant) function of the weights.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::stats::mann_whitney_u;
use crate::error::{Error, Result};
use crate::market::{simulate_history, Feature, Market, MatchModel, Weights};
use crate::seeds;

/// Mean squared difference of normalized placement ranks.
pub fn placement_error(simulated: &[usize], observed: &[usize], norm_rank: &[f64]) -> Result<f64> {
    if simulated.len() != observed.len() {
        return Err(Error::CandidateMismatch);
    }
    if observed.is_empty() {
        return Err(Error::Empty("no candidates"));
    }
    let sum: f64 = simulated
        .iter()
        .zip(observed)
        .map(|(&s, &o)| (norm_rank[o] - norm_rank[s]).powi(2))
        .sum();
    Ok(sum / observed.len() as f64)
}

/// Placement MSEs in normalized-rank units span about 0.01 between the
/// featureless and the best models, so the penalty must be far below that.
pub const DEFAULT_LAMBDA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub lambda: f64,
    pub replicates: usize,
    pub master_seed: u64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            lambda: DEFAULT_LAMBDA,
            replicates: 25,
            master_seed: 0,
        }
    }
}

impl Objective {
    pub fn new(lambda: f64, replicates: usize, master_seed: u64) -> Result<Self> {
        if !(lambda >= 0.0) || replicates == 0 {
            return Err(Error::InvalidParameter(format!(
                "objective needs lambda >= 0 and replicates >= 1 (got {lambda}, {replicates})"
            )));
        }
        Ok(Objective {
            lambda,
            replicates,
            master_seed,
        })
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        seeds::derive(self.master_seed, r as u64)
    }

    /// Placement error of each replicate, in replicate order.
    pub fn replicate_errors(&self, market: &Market, model: &MatchModel) -> Vec<f64> {
        (0..self.replicates)
            .into_par_iter()
            .map(|r| {
                let run = simulate_history(market, model, self.replicate_seed(r));
                placement_error(&run.placements, &market.observed, &market.norm_rank)
                    .expect("simulation covers every candidate")
            })
            .collect()
    }

    /// Mean placement error without the penalty.
    pub fn mse(&self, market: &Market, model: &MatchModel) -> f64 {
        mean(&self.replicate_errors(market, model))
    }

    /// Penalized objective of logistic weights `w`.
    pub fn value(&self, market: &Market, w: &Weights) -> f64 {
        self.mse(market, &MatchModel::Logistic(*w)) + self.lambda * w.l1_norm()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadParams {
    /// Converged once the spread of vertex values is below this...
    pub tol: f64,
    /// ...and every vertex lies within this distance of the best one.
    pub xtol: f64,
    /// Defaults to `500 · dim` per start.
    pub max_iter: Option<usize>,
    pub restarts: usize,
    /// Edge length of the initial simplex and scale of restart perturbations.
    pub step: f64,
    pub seed: u64,
}

impl Default for NelderMeadParams {
    fn default() -> Self {
        NelderMeadParams {
            tol: 1e-6,
            xtol: 1e-5,
            max_iter: None,
            restarts: 5,
            step: 0.5,
            seed: 0,
        }
    }
}

/// Result of a direct search. `trace` holds `(iteration, best value so far)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub trace: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// Nelder–Mead simplex search with reflection 1, expansion 2, contraction
/// 0.5 and shrink 0.5.
///
/// The first start is the axis simplex around `x0`; each restart begins at
/// the best point so far plus a uniform perturbation of size `step`. The
/// result is never worse than `f(x0)`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], params: &NelderMeadParams) -> Minimum {
    let dim = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best_x = x0.to_vec();
    let mut best_v = eval(x0);
    let mut trace = vec![(0usize, best_v)];
    if dim == 0 {
        return Minimum {
            x: best_x,
            value: best_v,
            trace,
            evaluations,
        };
    }
    let max_iter = params.max_iter.unwrap_or(500 * dim);
    let mut rng = seeds::rng(params.seed);
    let mut iteration = 0usize;

    for start in 0..=params.restarts {
        let origin: Vec<f64> = if start == 0 {
            x0.to_vec()
        } else {
            best_x
                .iter()
                .map(|v| v + params.step * rng.random_range(-1.0..1.0))
                .collect()
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let v0 = if start == 0 { best_v } else { eval(&origin) };
        simplex.push((origin.clone(), v0));
        for i in 0..dim {
            let mut p = origin.clone();
            p[i] += params.step;
            let v = eval(&p);
            simplex.push((p, v));
        }

        for _ in 0..max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            iteration += 1;
            if simplex[0].1 < best_v {
                best_v = simplex[0].1;
                best_x = simplex[0].0.clone();
            }
            trace.push((iteration, best_v));
            if converged(&simplex, params) {
                break;
            }
            let worst = simplex[dim].clone();
            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|p| p.0[k]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
                continue;
            }
            // contraction: outside if the reflection beat the worst vertex
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for p in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = anchor
                    .iter()
                    .zip(&p.0)
                    .map(|(a, v)| a + 0.5 * (v - a))
                    .collect();
                let v = eval(&x);
                *p = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_v {
            best_v = simplex[0].1;
            best_x = simplex[0].0.clone();
            trace.push((iteration, best_v));
        }
    }
    Minimum {
        x: best_x,
        value: best_v,
        trace,
        evaluations,
    }
}

fn converged(simplex: &[(Vec<f64>, f64)], params: &NelderMeadParams) -> bool {
    let spread = simplex.last().expect("nonempty simplex").1 - simplex[0].1;
    let best = &simplex[0].0;
    let diameter = simplex
        .iter()
        .flat_map(|p| p.0.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    spread < params.tol && diameter < params.xtol
}

/// Fitted logistic weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: Weights,
    /// Penalized objective at `weights`.
    pub err: f64,
    pub trace: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// Minimizes the objective over the active weights of `w0`.
pub fn fit_weights(
    market: &Market,
    objective: &Objective,
    w0: &Weights,
    params: &NelderMeadParams,
) -> FitResult {
    let m = nelder_mead(
        |p| objective.value(market, &w0.with_params(p)),
        &w0.to_params(),
        params,
    );
    FitResult {
        weights: w0.with_params(&m.x),
        err: m.value,
        trace: m.trace,
        evaluations: m.evaluations,
    }
}

/// One accepted stage of greedy feature addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStage {
    pub feature: Feature,
    /// Training MSE of the previous model (the featureless model before
    /// stage one).
    pub err_before: f64,
    pub err_after: f64,
    /// Penalized objective of the fitted model.
    pub objective: f64,
    /// Mann–Whitney on per-replicate evaluation errors, previous vs this model.
    pub p_value: f64,
    /// Same test against the step model.
    pub p_value_vs_step: f64,
    pub weights: Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelectionTrace {
    pub step_err: f64,
    /// Training MSE of the featureless (uniform-equivalent) model.
    pub empty_err: f64,
    pub stages: Vec<SelectionStage>,
}

impl FeatureSelectionTrace {
    pub fn order(&self) -> Vec<Feature> {
        self.stages.iter().map(|s| s.feature).collect()
    }

    /// Percent error reduction of each stage relative to the step model.
    pub fn pct_reduction_vs_step(&self) -> Vec<f64> {
        self.stages
            .iter()
            .map(|s| 100.0 * (self.step_err - s.err_after) / self.step_err)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyParams {
    pub objective: Objective,
    pub optimizer: NelderMeadParams,
    /// Seed of the held-out replicates used for p-values.
    pub eval_seed: u64,
    /// Stop after this many stages (gender, if forced last, counts).
    pub max_stages: Option<usize>,
}

/// Greedy forward selection over `candidates`, starting from the featureless
/// model.
///
/// Each stage fits every remaining feature added to the current model and
/// keeps the one with the lowest penalized objective. Gender, if offered, is
/// always added last. Errors are also reported against the step model.
pub fn greedy_select(
    market: &Market,
    candidates: &[Feature],
    params: &GreedyParams,
) -> Result<FeatureSelectionTrace> {
    if candidates.is_empty() {
        return Err(Error::Empty("no candidate features"));
    }
    let eval = Objective {
        master_seed: params.eval_seed,
        ..params.objective
    };
    let empty = MatchModel::Logistic(Weights::zeros(&[]));
    let step_err = params.objective.mse(market, &MatchModel::Step);
    let empty_err = params.objective.mse(market, &empty);
    let step_eval = eval.replicate_errors(market, &MatchModel::Step);
    let mut prev_eval = eval.replicate_errors(market, &empty);
    let mut prev_err = empty_err;
    let mut current = Weights::zeros(&[]);
    let mut remaining: Vec<Feature> = Vec::new();
    for f in candidates {
        if *f != Feature::Female && !remaining.contains(f) {
            remaining.push(*f);
        }
    }
    let gender_last = candidates.contains(&Feature::Female);
    let limit = params.max_stages.unwrap_or(usize::MAX);
    let mut stages = Vec::new();

    while stages.len() < limit
        && (!remaining.is_empty() || gender_last && !current.is_active(Feature::Female))
    {
        let offered: Vec<Feature> = if remaining.is_empty() {
            vec![Feature::Female]
        } else {
            remaining.clone()
        };
        let (feature, fit) = offered
            .iter()
            .map(|&f| {
                let w0 = current.activate(f);
                (f, fit_weights(market, &params.objective, &w0, &params.optimizer))
            })
            .min_by(|a, b| a.1.err.total_cmp(&b.1.err))
            .expect("at least one offered feature");
        let model = MatchModel::Logistic(fit.weights);
        let err_after = params.objective.mse(market, &model);
        let eval_errors = eval.replicate_errors(market, &model);
        stages.push(SelectionStage {
            feature,
            err_before: prev_err,
            err_after,
            objective: fit.err,
            p_value: mann_whitney_u(&prev_eval, &eval_errors)?.p_value,
            p_value_vs_step: mann_whitney_u(&step_eval, &eval_errors)?.p_value,
            weights: fit.weights,
        });
        remaining.retain(|f| *f != feature);
        current = fit.weights;
        prev_err = err_after;
        prev_eval = eval_errors;
    }
    Ok(FeatureSelectionTrace {
        step_err,
        empty_err,
        stages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvFold {
    pub held_out: Vec<i32>,
    pub weights: Weights,
    pub train_err: f64,
    pub test_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub feature: Feature,
    pub mean: f64,
    pub std: f64,
    /// Every fold fitted the same nonzero sign.
    pub sign_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<CvFold>,
    pub summary: Vec<WeightSummary>,
}

pub const HOLDOUT_YEARS: usize = 5;

/// Fits `w0`'s active features with five random years held out per fold and
/// evaluates each fit on its held-out years.
pub fn cross_validate(
    market: &Market,
    w0: &Weights,
    folds: usize,
    objective: &Objective,
    optimizer: &NelderMeadParams,
    seed: u64,
) -> Result<CvReport> {
    let years = market.year_list();
    if years.len() <= HOLDOUT_YEARS {
        return Err(Error::TooFewYears {
            needed: HOLDOUT_YEARS + 1,
            found: years.len(),
        });
    }
    if folds == 0 {
        return Err(Error::InvalidParameter("folds must be positive".into()));
    }
    let mut rng = seeds::rng(seed);
    let splits: Vec<Vec<i32>> = (0..folds)
        .map(|_| {
            let mut held: Vec<i32> =
                rand::seq::index::sample(&mut rng, years.len(), HOLDOUT_YEARS)
                    .into_iter()
                    .map(|i| years[i])
                    .collect();
            held.sort_unstable();
            held
        })
        .collect();
    let mut out = Vec::with_capacity(folds);
    for held in splits {
        let train_years: Vec<i32> = years.iter().copied().filter(|y| !held.contains(y)).collect();
        let train = market.restrict_years(&train_years);
        let test = market.restrict_years(&held);
        let fit = fit_weights(&train, objective, w0, optimizer);
        out.push(CvFold {
            test_err: objective.mse(&test, &MatchModel::Logistic(fit.weights)),
            train_err: objective.mse(&train, &MatchModel::Logistic(fit.weights)),
            held_out: held,
            weights: fit.weights,
        });
    }
    let summary = w0
        .active()
        .into_iter()
        .map(|f| {
            let vals: Vec<f64> = out.iter().map(|c| c.weights.get(f)).collect();
            let m = mean(&vals);
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                / (vals.len().max(2) - 1) as f64;
            let sign_stable = vals.iter().all(|v| *v > 0.0) || vals.iter().all(|v| *v < 0.0);
            WeightSummary {
                feature: f,
                mean: m,
                std: var.sqrt(),
                sign_stable,
            }
        })
        .collect();
    Ok(CvReport {
        folds: out,
        summary,
    })
}

/// Extra papers a woman needs for `x·w` to match an otherwise identical man:
/// `|w_gender / w_productivity|` in z units, times the mass-weighted mean
/// subfield standard deviation.
pub fn papers_equivalent_to_gender(w: &Weights, weighted_mean_sigma: f64) -> Result<f64> {
    let wp = w.get(Feature::Productivity);
    if wp == 0.0 {
        return Err(Error::ZeroProductivityWeight);
    }
    Ok((w.get(Feature::Female) / wp).abs() * weighted_mean_sigma)
}
