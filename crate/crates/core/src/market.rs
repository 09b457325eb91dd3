//! Sequential stochastic matching of candidates to openings.
//!
//! Each hiring year is re-matched independently. Openings are filled one at a
//! time: an unfilled opening `v` is drawn with probability proportional to
//! `1 / rank(v)` (raw mean rank), then a candidate is drawn from the remaining
//! pool with probability proportional to the match score `f(x[u, v])`. Both
//! are removed and the process repeats until the year is exhausted, so the
//! per-year degree sequences are always those observed.
//!
//! Every pick consumes exactly two uniforms, one for the opening and one for
//! the candidate. With a fixed seed the opening order is therefore identical
//! for every model, which keeps objective surfaces coherent under common
//! random numbers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FacultyRecord, Gender, HiringNetwork, Institution, Region};
use crate::error::{Error, Result};
use crate::ranking::PrestigeRanking;
use crate::seeds;

pub const FEATURE_COUNT: usize = 6;

/// Pair features, in feature-vector slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    RankDiff,
    Productivity,
    HiringRank,
    Postdoc,
    SameRegion,
    Female,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::RankDiff,
        Feature::Productivity,
        Feature::HiringRank,
        Feature::Postdoc,
        Feature::SameRegion,
        Feature::Female,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::RankDiff => "rank_diff",
            Feature::Productivity => "productivity",
            Feature::HiringRank => "hiring_rank",
            Feature::Postdoc => "postdoc",
            Feature::SameRegion => "same_region",
            Feature::Female => "gender",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .or(match s {
                "female" | "gender_female" => Some(Feature::Female),
                "region" => Some(Feature::SameRegion),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature `{s}`")))
    }
}

/// `(rank_diff, productivity_z, hiring_rank, postdoc, same_region, female)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.slot()]
    }
}

/// Weights over the six feature slots. Inactive slots are held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    values: [f64; FEATURE_COUNT],
    mask: [bool; FEATURE_COUNT],
    /// Optional bias term for sensitivity runs; absent by default.
    intercept: Option<f64>,
}

impl Weights {
    /// All-zero weights over the given active features.
    pub fn zeros(active: &[Feature]) -> Self {
        let mut mask = [false; FEATURE_COUNT];
        for f in active {
            mask[f.slot()] = true;
        }
        Weights {
            values: [0.0; FEATURE_COUNT],
            mask,
            intercept: None,
        }
    }

    pub fn from_pairs(pairs: &[(Feature, f64)]) -> Self {
        let mut w = Weights::zeros(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        for &(f, v) in pairs {
            w.values[f.slot()] = v;
        }
        w
    }

    pub fn with_intercept(mut self, value: f64) -> Self {
        self.intercept = Some(value);
        self
    }

    pub fn intercept(&self) -> Option<f64> {
        self.intercept
    }

    pub fn get(&self, f: Feature) -> f64 {
        self.values[f.slot()]
    }

    pub fn is_active(&self, f: Feature) -> bool {
        self.mask[f.slot()]
    }

    /// Sets an active weight. Writes to inactive slots are ignored.
    pub fn set(&mut self, f: Feature, value: f64) {
        if self.mask[f.slot()] {
            self.values[f.slot()] = value;
        }
    }

    pub fn active(&self) -> Vec<Feature> {
        Feature::ALL.into_iter().filter(|f| self.is_active(*f)).collect()
    }

    /// Adds `f` to the active set with weight zero.
    pub fn activate(mut self, f: Feature) -> Self {
        self.mask[f.slot()] = true;
        self
    }

    pub fn values(&self) -> [f64; FEATURE_COUNT] {
        self.values
    }

    /// Sum of absolute active weights; the intercept is not penalized.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn dot(&self, x: &FeatureVector) -> f64 {
        self.values
            .iter()
            .zip(&x.0)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.intercept.unwrap_or(0.0)
    }

    /// Active weights (slot order) followed by the intercept, if any.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = Feature::ALL
            .iter()
            .filter(|f| self.is_active(**f))
            .map(|f| self.values[f.slot()])
            .collect();
        if let Some(b) = self.intercept {
            p.push(b);
        }
        p
    }

    /// Inverse of [`Weights::to_params`], keeping this mask and intercept flag.
    pub fn with_params(&self, params: &[f64]) -> Self {
        let mut w = *self;
        let mut it = params.iter().copied();
        for f in Feature::ALL {
            if w.mask[f.slot()] {
                w.values[f.slot()] = it.next().expect("parameter count matches mask");
            }
        }
        if w.intercept.is_some() {
            w.intercept = Some(it.next().expect("intercept parameter"));
        }
        w
    }

    pub fn param_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count() + usize::from(self.intercept.is_some())
    }
}

/// The match function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "weights", rename_all = "snake_case")]
pub enum MatchModel {
    /// Every candidate equally likely; the configuration model.
    Uniform,
    /// Only candidates from strictly more prestigious institutions score.
    Step,
    Logistic(Weights),
}

impl MatchModel {
    pub fn name(&self) -> &'static str {
        match self {
            MatchModel::Uniform => "uniform",
            MatchModel::Step => "step",
            MatchModel::Logistic(_) => "logistic",
        }
    }
}

/// Match score of one candidate-opening pair.
pub fn score(model: &MatchModel, x: &FeatureVector) -> f64 {
    match model {
        MatchModel::Uniform => 1.0,
        // rank_diff > 0 exactly when the doctoral rank is strictly better
        MatchModel::Step => {
            if x.get(Feature::RankDiff) > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        MatchModel::Logistic(w) => logistic(w.dot(x)),
    }
}

#[inline]
fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// A candidate in matrix form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub doctoral: usize,
    pub year: i32,
    pub productivity_z: f64,
    pub postdoc: bool,
    pub female: bool,
    pub gender: Gender,
}

/// Index-based stubs of one hiring year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearStubs {
    pub year: i32,
    pub candidates: Vec<usize>,
    pub openings: Vec<usize>,
}

/// Everything the matching process needs, in index form: institutions with
/// ranks, candidates with attributes, yearly stubs and observed placements.
#[derive(Debug, Clone)]
pub struct Market {
    pub institutions: Vec<Institution>,
    /// Raw mean ranks; drive opening selection.
    pub raw_rank: Vec<f64>,
    /// `raw_rank / N`; used in features and errors.
    pub norm_rank: Vec<f64>,
    pub candidates: Vec<Candidate>,
    pub years: Vec<YearStubs>,
    /// Observed hiring institution of each candidate.
    pub observed: Vec<usize>,
}

impl Market {
    /// Builds the market of `records` over `network`'s institutions. Records
    /// without a productivity score enter with z = 0.
    pub fn new(
        network: &HiringNetwork,
        records: &[FacultyRecord],
        ranking: &PrestigeRanking,
    ) -> Result<Market> {
        let n = network.node_count();
        let mut raw_rank = vec![0.0; n];
        for (i, inst) in network.institutions().iter().enumerate() {
            raw_rank[i] = ranking.rank_of(&inst.id)?;
        }
        let lookup = |id: &str| {
            network
                .index_of(id)
                .ok_or_else(|| Error::UnknownInstitution(id.to_string()))
        };
        let mut candidates = Vec::with_capacity(records.len());
        let mut observed = Vec::with_capacity(records.len());
        for r in records {
            candidates.push(Candidate {
                id: r.id.clone(),
                doctoral: lookup(&r.doctoral_institution)?,
                year: r.hire_year,
                productivity_z: r.productivity_z.unwrap_or(0.0),
                postdoc: r.postdoc,
                female: r.gender.is_female(),
                gender: r.gender,
            });
            observed.push(lookup(&r.hiring_institution)?);
        }
        Ok(Market::from_parts(
            network.institutions().to_vec(),
            raw_rank,
            candidates,
            observed,
        ))
    }

    /// Assembles a market; yearly stubs are derived from candidate years and
    /// observed placements.
    pub fn from_parts(
        institutions: Vec<Institution>,
        raw_rank: Vec<f64>,
        candidates: Vec<Candidate>,
        observed: Vec<usize>,
    ) -> Market {
        assert_eq!(institutions.len(), raw_rank.len());
        assert_eq!(candidates.len(), observed.len());
        let n = raw_rank.len() as f64;
        let norm_rank = raw_rank.iter().map(|r| r / n).collect();
        let mut by_year: std::collections::BTreeMap<i32, YearStubs> = Default::default();
        for (c, cand) in candidates.iter().enumerate() {
            let y = by_year.entry(cand.year).or_insert_with(|| YearStubs {
                year: cand.year,
                candidates: Vec::new(),
                openings: Vec::new(),
            });
            y.candidates.push(c);
            y.openings.push(observed[c]);
        }
        let years = by_year
            .into_values()
            .map(|mut y| {
                y.openings.sort_unstable();
                y
            })
            .collect();
        Market {
            institutions,
            raw_rank,
            norm_rank,
            candidates,
            years,
            observed,
        }
    }

    /// A market with the same institutions but only the given hiring years.
    pub fn restrict_years(&self, keep: &[i32]) -> Market {
        let idx: Vec<usize> = (0..self.candidates.len())
            .filter(|&c| keep.contains(&self.candidates[c].year))
            .collect();
        Market::from_parts(
            self.institutions.clone(),
            self.raw_rank.clone(),
            idx.iter().map(|&c| self.candidates[c].clone()).collect(),
            idx.iter().map(|&c| self.observed[c]).collect(),
        )
    }

    pub fn institution_count(&self) -> usize {
        self.institutions.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn year_list(&self) -> Vec<i32> {
        self.years.iter().map(|y| y.year).collect()
    }

    pub fn region(&self, inst: usize) -> Region {
        self.institutions[inst].region
    }

    /// Feature vector of candidate `c` against an opening at `v`.
    pub fn features(&self, c: usize, v: usize) -> FeatureVector {
        let cand = &self.candidates[c];
        let u = cand.doctoral;
        FeatureVector([
            self.norm_rank[v] - self.norm_rank[u],
            cand.productivity_z,
            self.norm_rank[v],
            f64::from(u8::from(cand.postdoc)),
            f64::from(u8::from(self.region(u) == self.region(v))),
            f64::from(u8::from(cand.female)),
        ])
    }

    pub fn candidate_index(&self) -> HashMap<&str, usize> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect()
    }
}

/// Feature vector for a record and an opening, by institution id.
pub fn build_features(
    record: &FacultyRecord,
    opening: &str,
    ranking: &PrestigeRanking,
    network: &HiringNetwork,
) -> Result<FeatureVector> {
    let n = ranking.len() as f64;
    let ru = ranking.rank_of(&record.doctoral_institution)?;
    let rv = ranking.rank_of(opening)?;
    let region = |id: &str| {
        network
            .index_of(id)
            .map(|i| network.institution(i).region)
            .ok_or_else(|| Error::UnknownInstitution(id.to_string()))
    };
    Ok(FeatureVector([
        rv / n - ru / n,
        record.productivity_z.unwrap_or(0.0),
        rv / n,
        f64::from(u8::from(record.postdoc)),
        f64::from(u8::from(region(&record.doctoral_institution)? == region(opening)?)),
        f64::from(u8::from(record.gender.is_female())),
    ]))
}

/// Inverse-CDF draw: index `i` with probability `weights[i] / Σ weights`.
/// Falls back to a uniform index when every weight is zero.
fn pick_weighted(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // rounding: land on the last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Draws an opening with probability proportional to `1 / rank`; returns an
/// index into `unfilled`.
pub fn select_opening<R: Rng>(unfilled: &[usize], raw_rank: &[f64], rng: &mut R) -> Result<usize> {
    if unfilled.is_empty() {
        return Err(Error::Empty("no unfilled openings"));
    }
    let w: Vec<f64> = unfilled.iter().map(|&v| 1.0 / raw_rank[v]).collect();
    Ok(pick_weighted(&w, rng.random()))
}

/// Draws a candidate for the opening at `opening`; returns an index into
/// `pool`. Probabilities are scores normalized over the pool, or uniform when
/// every score is zero.
pub fn select_candidate<R: Rng>(
    model: &MatchModel,
    market: &Market,
    pool: &[usize],
    opening: usize,
    rng: &mut R,
) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::Empty("empty candidate pool"));
    }
    let w: Vec<f64> = pool
        .iter()
        .map(|&c| score(model, &market.features(c, opening)))
        .collect();
    Ok(pick_weighted(&w, rng.random()))
}

/// Per-market precomputation of the match score.
///
/// For the logistic model `x·w` splits into a candidate term, an opening
/// term and the region interaction, so a pair score costs one exp.
enum Scorer {
    Uniform,
    Step,
    Logistic {
        candidate_term: Vec<f64>,
        opening_term: Vec<f64>,
        region_weight: f64,
    },
}

impl Scorer {
    fn new(model: &MatchModel, market: &Market) -> Self {
        match model {
            MatchModel::Uniform => Scorer::Uniform,
            MatchModel::Step => Scorer::Step,
            MatchModel::Logistic(w) => {
                let g = |f| w.get(f);
                let candidate_term = market
                    .candidates
                    .iter()
                    .map(|c| {
                        -g(Feature::RankDiff) * market.norm_rank[c.doctoral]
                            + g(Feature::Productivity) * c.productivity_z
                            + g(Feature::Postdoc) * f64::from(u8::from(c.postdoc))
                            + g(Feature::Female) * f64::from(u8::from(c.female))
                    })
                    .collect();
                let opening_term = market
                    .norm_rank
                    .iter()
                    .map(|r| (g(Feature::RankDiff) + g(Feature::HiringRank)) * r + w.intercept().unwrap_or(0.0))
                    .collect();
                Scorer::Logistic {
                    candidate_term,
                    opening_term,
                    region_weight: g(Feature::SameRegion),
                }
            }
        }
    }

    #[inline]
    fn score(&self, market: &Market, c: usize, v: usize) -> f64 {
        match self {
            Scorer::Uniform => 1.0,
            Scorer::Step => {
                if market.raw_rank[market.candidates[c].doctoral] < market.raw_rank[v] {
                    1.0
                } else {
                    0.0
                }
            }
            Scorer::Logistic {
                candidate_term,
                opening_term,
                region_weight,
            } => {
                let mut s = candidate_term[c] + opening_term[v];
                if market.region(market.candidates[c].doctoral) == market.region(v) {
                    s += region_weight;
                }
                logistic(s)
            }
        }
    }
}

/// One filled opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pick {
    pub candidate: usize,
    pub institution: usize,
}

/// Step-by-step matcher for one year. Exposes the remaining pool and
/// openings between picks.
pub struct YearMatcher<'a> {
    market: &'a Market,
    scorer: std::borrow::Cow<'a, Scorer>,
    pool: Vec<usize>,
    openings: Vec<usize>,
    buf: Vec<f64>,
}

impl Clone for Scorer {
    fn clone(&self) -> Self {
        match self {
            Scorer::Uniform => Scorer::Uniform,
            Scorer::Step => Scorer::Step,
            Scorer::Logistic {
                candidate_term,
                opening_term,
                region_weight,
            } => Scorer::Logistic {
                candidate_term: candidate_term.clone(),
                opening_term: opening_term.clone(),
                region_weight: *region_weight,
            },
        }
    }
}

impl<'a> YearMatcher<'a> {
    pub fn new(market: &'a Market, year_index: usize, model: &MatchModel) -> Self {
        Self::with_scorer(market, year_index, std::borrow::Cow::Owned(Scorer::new(model, market)))
    }

    fn with_scorer(market: &'a Market, year_index: usize, scorer: std::borrow::Cow<'a, Scorer>) -> Self {
        let stubs = &market.years[year_index];
        YearMatcher {
            market,
            scorer,
            pool: stubs.candidates.clone(),
            openings: stubs.openings.clone(),
            buf: Vec::with_capacity(stubs.candidates.len()),
        }
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn openings(&self) -> &[usize] {
        &self.openings
    }

    pub fn is_done(&self) -> bool {
        self.openings.is_empty() || self.pool.is_empty()
    }

    /// Fills one opening, or returns `None` once the year is exhausted.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Option<Pick> {
        if self.is_done() {
            return None;
        }
        let u_open: f64 = rng.random();
        let u_cand: f64 = rng.random();
        self.buf.clear();
        self.buf
            .extend(self.openings.iter().map(|&v| 1.0 / self.market.raw_rank[v]));
        let v = self.openings.remove(pick_weighted(&self.buf, u_open));
        self.buf.clear();
        for &c in &self.pool {
            self.buf.push(self.scorer.score(self.market, c, v));
        }
        let c = self.pool.remove(pick_weighted(&self.buf, u_cand));
        Some(Pick {
            candidate: c,
            institution: v,
        })
    }
}

/// Matches every candidate of one year.
pub fn simulate_year<R: Rng>(
    market: &Market,
    year_index: usize,
    model: &MatchModel,
    rng: &mut R,
) -> Vec<Pick> {
    let mut m = YearMatcher::new(market, year_index, model);
    std::iter::from_fn(|| m.step(rng)).collect()
}

/// One complete synthetic hiring history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    /// Simulated hiring institution, indexed by candidate.
    pub placements: Vec<usize>,
    pub seed: u64,
    pub model: MatchModel,
}

impl SimulationRun {
    /// The simulated network: one edge per candidate, doctoral → placement.
    pub fn to_network(&self, market: &Market) -> HiringNetwork {
        let edges = market
            .candidates
            .iter()
            .zip(&self.placements)
            .map(|(c, &v)| crate::data::Edge {
                source: c.doctoral,
                target: v,
                year: c.year,
                faculty_id: c.id.clone(),
            })
            .collect();
        HiringNetwork::from_parts(market.institutions.clone(), edges)
    }
}

/// Runs every year in order with one random stream seeded by `seed`.
pub fn simulate_history(market: &Market, model: &MatchModel, seed: u64) -> SimulationRun {
    let scorer = Scorer::new(model, market);
    let mut rng = seeds::rng(seed);
    let mut placements = vec![usize::MAX; market.candidate_count()];
    for y in 0..market.years.len() {
        let mut m = YearMatcher::with_scorer(market, y, std::borrow::Cow::Borrowed(&scorer));
        while let Some(p) = m.step(&mut rng) {
            placements[p.candidate] = p.institution;
        }
    }
    SimulationRun {
        placements,
        seed,
        model: *model,
    }
}

/// The observed placements as a run, for code paths that take runs.
pub fn observed_run(market: &Market) -> SimulationRun {
    SimulationRun {
        placements: market.observed.clone(),
        seed: 0,
        model: MatchModel::Uniform,
    }
}
