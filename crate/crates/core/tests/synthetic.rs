use std::time::{Duration, Instant};

use hiring_core::analysis::{
    candidate_placement_errors, error_trend, female_hire_distributions, placement_error_by_year, rank_band_summary,
};
use hiring_core::data::Gender;
use hiring_core::fitting::{cross_validate, greedy_select, GreedyParams, NelderMeadParams, Objective};
use hiring_core::market::{simulate_history, Feature, Market, MatchModel, SimulationRun, Weights};
use hiring_core::seeds;
use hiring_core::synth::{generate_synthetic, SyntheticSpec};

fn market_of(spec: &SyntheticSpec, seed: u64) -> Market {
    generate_synthetic(spec, seed)
        .expect("synthetic market")
        .truth_market()
        .expect("truth market")
}

fn runs(market: &Market, model: &MatchModel, n: u64, seed: u64) -> Vec<SimulationRun> {
    (0..n)
        .map(|r| simulate_history(market, model, seeds::derive(seed, r)))
        .collect()
}

fn quick_optimizer(seed: u64) -> NelderMeadParams {
    NelderMeadParams {
        tol: 1e-7,
        xtol: 1e-3,
        max_iter: Some(200),
        restarts: 1,
        step: 1.0,
        seed,
    }
}

#[test]
fn paper_scale_generation_is_fast_and_hierarchical() {
    let spec = SyntheticSpec::paper_scale();
    let start = Instant::now();
    let bundle = generate_synthetic(&spec, 7).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    assert_eq!(bundle.institutions.len(), 205);
    let hires = bundle.faculty.len() as f64;
    // 42 Poisson(63.3) years: mean 2659, sd ≈ 52
    assert!((hires - 2659.0).abs() < 5.0 * 52.0, "{hires} hires");
    let v = bundle.truth.violation_fraction;
    assert!((0.08..=0.16).contains(&v), "violation fraction {v}");
}

#[test]
fn female_share_follows_the_ramp() {
    let spec = SyntheticSpec::paper_scale();
    let bundle = generate_synthetic(&spec, 8).unwrap();
    let (a, b) = spec.female_fraction;
    for k in 0..spec.n_years {
        let year = spec.first_year + k as i32;
        let cohort: Vec<_> = bundle.faculty.iter().filter(|r| r.hire_year == year).collect();
        let n = cohort.len() as f64;
        let p = a + (b - a) * k as f64 / (spec.n_years - 1) as f64;
        let women = cohort.iter().filter(|r| r.gender == Gender::Female).count() as f64;
        let z = (women / n - p) / (p * (1.0 - p) / n).sqrt();
        assert!(z.abs() < 4.0, "year {year}: {women}/{n} vs {p}");
    }
}

#[test]
fn greedy_picks_the_only_planted_feature_first() {
    let spec = SyntheticSpec {
        w_true: Weights::from_pairs(&[(Feature::RankDiff, 8.0)]),
        ..SyntheticSpec::small(80, 20, 30.0)
    };
    let market = market_of(&spec, 3);
    let params = GreedyParams {
        objective: Objective::new(0.001, 8, 31).unwrap(),
        optimizer: quick_optimizer(32),
        eval_seed: 33,
        max_stages: Some(1),
    };
    let trace = greedy_select(&market, &Feature::ALL, &params).unwrap();
    assert_eq!(trace.stages[0].feature, Feature::RankDiff);
    assert!(trace.stages[0].p_value < 0.05, "p = {}", trace.stages[0].p_value);
}

#[test]
fn cross_validation_matches_the_generator() {
    let w_true = Weights::from_pairs(&[(Feature::RankDiff, 8.0), (Feature::Productivity, 1.0)]);
    let spec = SyntheticSpec {
        w_true,
        ..SyntheticSpec::small(100, 25, 50.0)
    };
    let market = market_of(&spec, 4);
    let objective = Objective::new(0.001, 8, 41).unwrap();
    let report = cross_validate(
        &market,
        &Weights::zeros(&[Feature::RankDiff, Feature::Productivity]),
        3,
        &objective,
        &quick_optimizer(42),
        43,
    )
    .unwrap();
    for fold in &report.folds {
        let test = market.restrict_years(&fold.held_out);
        let generator_err = objective.mse(&test, &MatchModel::Logistic(w_true));
        assert!(
            fold.test_err <= 1.1 * generator_err,
            "fold {:?}: fitted {} vs generator {}",
            fold.held_out,
            fold.test_err,
            generator_err
        );
    }
    assert!(report.summary.iter().all(|s| s.sign_stable), "{:?}", report.summary);
}

/// Moves women into `target`'s observed slots by swapping placements with men
/// hired elsewhere in the same year; yearly stubs are unchanged.
fn skew_female(market: &Market, target: usize) -> Market {
    let mut observed = market.observed.clone();
    for year in &market.years {
        let mut men_at_target: Vec<usize> = year
            .candidates
            .iter()
            .copied()
            .filter(|&c| observed[c] == target && !market.candidates[c].female)
            .collect();
        for &c in &year.candidates {
            if market.candidates[c].female && observed[c] != target {
                let Some(m) = men_at_target.pop() else { break };
                observed.swap(c, m);
            }
        }
    }
    Market::from_parts(
        market.institutions.clone(),
        market.raw_rank.clone(),
        market.candidates.clone(),
        observed,
    )
}

#[test]
fn female_skewed_institution_exceeds_its_simulated_range() {
    let spec = SyntheticSpec::small(40, 30, 25.0);
    let market = market_of(&spec, 5);
    // the institution with the most openings
    let mut openings = vec![0usize; market.institution_count()];
    for &v in &market.observed {
        openings[v] += 1;
    }
    let target = (0..openings.len()).max_by_key(|&v| openings[v]).unwrap();
    let skewed = skew_female(&market, target);
    let model = MatchModel::Logistic(spec.w_true);
    let sims = runs(&skewed, &model, 200, 51);
    let dists = female_hire_distributions(&skewed, &sims, 52).unwrap();
    let d = &dists[target];
    assert!(d.percentile_of_actual > 95.0, "percentile {}", d.percentile_of_actual);
}

#[test]
fn unbiased_market_half_inside_quartile_bands() {
    let spec = SyntheticSpec::small(100, 30, 40.0);
    let market = market_of(&spec, 6);
    let model = MatchModel::Logistic(spec.w_true);
    let sims = runs(&market, &model, 200, 61);
    let dists = female_hire_distributions(&market, &sims, 62).unwrap();
    let rows = rank_band_summary(&dists, &market, market.institution_count());
    // only institutions whose simulated count varies have a meaningful band
    let live: Vec<_> = rows.iter().filter(|r| r.band_high > r.band_low).collect();
    let inside = live
        .iter()
        .filter(|r| r.band_low <= r.difference && r.difference <= r.band_high)
        .count() as f64
        / live.len() as f64;
    // closed bands over integer counts hold a little over half
    assert!((0.4..=0.75).contains(&inside), "{inside} inside over {} institutions", live.len());
}

#[test]
fn productive_candidate_places_above_the_pool() {
    let spec = SyntheticSpec::small(60, 10, 30.0);
    let mut market = market_of(&spec, 9);
    let year = &market.years[5];
    let star = year.candidates[0];
    let pool = year.candidates.clone();
    market.candidates[star].productivity_z = 6.0;
    let model = MatchModel::Logistic(spec.w_true);
    let sims = runs(&market, &model, 300, 91);
    let outcomes = candidate_placement_errors(&market, &sims).unwrap();
    let mean = |c: usize| {
        let r = &outcomes[c].simulated_ranks;
        r.iter().sum::<f64>() / r.len() as f64
    };
    let pool_mean = pool.iter().map(|&c| mean(c)).sum::<f64>() / pool.len() as f64;
    assert!(mean(star) < pool_mean, "star {} vs pool {pool_mean}", mean(star));
}

#[test]
fn gender_blind_market_has_flat_error_trends() {
    let spec = SyntheticSpec::small(100, 30, 40.0);
    assert_eq!(spec.w_true.get(Feature::Female), 0.0);
    let market = market_of(&spec, 10);
    let model = MatchModel::Logistic(spec.w_true);
    let sims = runs(&market, &model, 100, 101);
    let outcomes = candidate_placement_errors(&market, &sims).unwrap();
    let points = placement_error_by_year(&market, &outcomes);
    for g in [Gender::Male, Gender::Female] {
        let fit = error_trend(&points, g).expect("enough years");
        assert!(fit.slope_p_value() > 0.05, "{g:?} slope {} p {}", fit.slope, fit.slope_p_value());
    }
}
