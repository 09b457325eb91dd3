//! Synthetic hiring markets with a planted hierarchy and planted match
//! weights, for tests, demos and parameter-recovery experiments.
//!
//! Institutions are ranked by index. Each year's openings and doctoral
//! origins are drawn with probabilities decaying in rank, candidate
//! attributes and publication records are drawn independently, and the
//! placements come from [`simulate_history`] under the planted logistic
//! weights, so the bundle follows the model exactly.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{
    self, build_network, FacultyRecord, Gender, Institution, Publication, Region,
};
use crate::error::{Error, Result};
use crate::market::{simulate_history, Candidate, Feature, Market, MatchModel, Weights};
use crate::productivity::{composite_z, subfield_count_stats};
use crate::ranking::{count_violations, PrestigeRanking, RankOrdering};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_institutions: usize,
    pub first_year: i32,
    pub n_years: usize,
    /// Poisson mean of hires per year; every year gets at least one.
    pub hires_per_year: f64,
    /// Doctoral origin drawn with probability ∝ rank^(−exponent).
    pub doctoral_exponent: f64,
    /// Openings drawn with probability ∝ rank^(−exponent).
    pub opening_exponent: f64,
    /// Most openings one institution may post in a year.
    pub max_openings_per_institution: usize,
    pub w_true: Weights,
    /// Female share ramps linearly from the first to the last year.
    pub female_fraction: (f64, f64),
    pub postdoc_rate: f64,
    /// Per-topic mean publication counts by one year after hire.
    pub topic_rates: Vec<f64>,
    /// Symmetric Dirichlet concentration of each person's topic mix.
    pub topic_concentration: f64,
    /// Multiplier on the publication rate of postdocs.
    pub postdoc_boost: f64,
    pub words_per_topic: usize,
    pub words_per_title: usize,
    /// Publications dated after the counting cutoff, per person.
    pub late_publications: usize,
}

impl SyntheticSpec {
    /// Planted weights with rank difference dominant.
    pub fn default_weights() -> Weights {
        Weights::from_pairs(&[
            (Feature::RankDiff, 6.0),
            (Feature::Productivity, 0.7),
            (Feature::HiringRank, -0.3),
            (Feature::Postdoc, 0.3),
            (Feature::SameRegion, 0.3),
            (Feature::Female, 0.0),
        ])
    }

    /// Roughly the size of the real market: 205 institutions, 42 years,
    /// about 2650 hires.
    pub fn paper_scale() -> Self {
        SyntheticSpec {
            n_institutions: 205,
            first_year: 1970,
            n_years: 42,
            hires_per_year: 63.3,
            doctoral_exponent: 1.15,
            opening_exponent: 0.2,
            max_openings_per_institution: 6,
            w_true: Self::default_weights(),
            female_fraction: (0.05, 0.20),
            postdoc_rate: 0.2,
            topic_rates: vec![2.0, 3.0, 4.0, 5.0, 6.0, 3.0, 2.5, 4.5, 3.5, 8.0],
            topic_concentration: 0.3,
            postdoc_boost: 1.5,
            words_per_topic: 12,
            words_per_title: 4,
            late_publications: 2,
        }
    }

    /// A small market for tests and demos.
    pub fn small(n_institutions: usize, n_years: usize, hires_per_year: f64) -> Self {
        SyntheticSpec {
            n_institutions,
            n_years,
            hires_per_year,
            topic_rates: vec![2.0, 4.0, 6.0],
            ..Self::paper_scale()
        }
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_institutions == 0 || self.n_years == 0 {
            return Err(Error::InfeasibleSpec("need at least one institution and one year".into()));
        }
        if !(self.hires_per_year > 0.0) {
            return Err(Error::InfeasibleSpec("hires per year must be positive".into()));
        }
        if !prob(self.female_fraction.0) || !prob(self.female_fraction.1) || !prob(self.postdoc_rate) {
            return Err(Error::InfeasibleSpec("probabilities must lie in [0, 1]".into()));
        }
        if self.topic_rates.is_empty() || self.topic_rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InfeasibleSpec("topic rates must be positive".into()));
        }
        if !(self.topic_concentration > 0.0) || self.words_per_topic == 0 || self.words_per_title == 0 {
            return Err(Error::InfeasibleSpec("topic model settings must be positive".into()));
        }
        // Poisson mass beyond capacity is negligible only if the mean is well inside it
        let capacity = (self.n_institutions * self.max_openings_per_institution) as f64;
        if self.hires_per_year > capacity {
            return Err(Error::InfeasibleSpec(format!(
                "{} hires per year exceed the {} openings institutions can post",
                self.hires_per_year, capacity
            )));
        }
        Ok(())
    }

    fn female_probability(&self, year_index: usize) -> f64 {
        let (a, b) = self.female_fraction;
        if self.n_years == 1 {
            return a;
        }
        a + (b - a) * year_index as f64 / (self.n_years - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCandidate {
    pub id: String,
    pub doctoral: String,
    pub hiring: String,
    pub year: i32,
    pub female: bool,
    pub postdoc: bool,
    pub theta: Vec<f64>,
    pub pub_count: u32,
    pub productivity_z: f64,
}

/// Ground truth written next to a synthetic bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub w_true: Weights,
    pub institution_ids: Vec<String>,
    /// Planted rank of each institution, aligned with `institution_ids`.
    pub ranks: Vec<f64>,
    pub violation_fraction: f64,
    pub candidates: Vec<TruthCandidate>,
}

impl Truth {
    pub fn ranking(&self) -> PrestigeRanking {
        PrestigeRanking::from_ranks(self.institution_ids.clone(), self.ranks.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub institutions: Vec<Institution>,
    pub faculty: Vec<FacultyRecord>,
    pub publications: Vec<Publication>,
    pub truth: Truth,
}

impl SyntheticBundle {
    /// The market under the planted ranking and true productivity scores.
    pub fn truth_market(&self) -> Result<Market> {
        let mut records = self.faculty.clone();
        for (r, t) in records.iter_mut().zip(&self.truth.candidates) {
            r.productivity_z = Some(t.productivity_z);
        }
        let net = build_network(&self.institutions, &records);
        Market::new(&net, &records, &self.truth.ranking())
    }

    /// Writes `institutions.csv`, `faculty.csv`, `publications.csv` and
    /// `truth.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        data::write_institutions(dir.join("institutions.csv"), &self.institutions)?;
        data::write_faculty(dir.join("faculty.csv"), &self.faculty)?;
        data::write_publications(dir.join("publications.csv"), &self.publications)?;
        let path = dir.join("truth.json");
        let json = serde_json::to_string_pretty(&self.truth)
            .map_err(|e| Error::Numerical(format!("truth serialization: {e}")))?;
        std::fs::write(&path, json).map_err(|source| Error::Io { path, source })
    }
}

fn weighted_index<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

fn power_cdf(n: usize, exponent: f64) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=n)
        .map(|r| {
            acc += (r as f64).powf(-exponent);
            acc
        })
        .collect()
}

fn dirichlet<R: Rng>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u32
}

/// Generates a complete input bundle and its ground truth.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticBundle> {
    spec.validate()?;
    let mut rng = seeds::rng(seeds::named(seed, "synth"));
    let n = spec.n_institutions;
    let k = spec.topic_rates.len();
    let institutions: Vec<Institution> = (0..n)
        .map(|i| Institution {
            id: format!("u{:03}", i + 1),
            name: format!("Synthetic University {}", i + 1),
            region: Region::ALL[rng.random_range(0..Region::ALL.len())],
        })
        .collect();
    let raw_rank: Vec<f64> = (1..=n).map(|r| r as f64).collect();
    let doctoral_cdf = power_cdf(n, spec.doctoral_exponent);
    let opening_cdf = power_cdf(n, spec.opening_exponent);

    let mut candidates = Vec::new();
    let mut openings = Vec::new();
    let mut thetas = Vec::new();
    let mut counts = Vec::new();
    let mut publications = Vec::new();
    let vocab = |topic: usize, word: usize| format!("t{topic}w{word}");
    for t in 0..spec.n_years {
        let year = spec.first_year + t as i32;
        let hires = poisson(spec.hires_per_year, &mut rng).max(1) as usize;
        let hires = hires.min(n * spec.max_openings_per_institution);
        let mut posted = vec![0usize; n];
        for _ in 0..hires {
            let v = loop {
                let v = weighted_index(&opening_cdf, &mut rng);
                if posted[v] < spec.max_openings_per_institution {
                    break v;
                }
            };
            posted[v] += 1;
            openings.push(v);
        }
        let p_female = spec.female_probability(t);
        for _ in 0..hires {
            let c = candidates.len();
            let female = rng.random_bool(p_female);
            let postdoc = rng.random_bool(spec.postdoc_rate);
            let theta = dirichlet(spec.topic_concentration, k, &mut rng);
            let rate: f64 = theta.iter().zip(&spec.topic_rates).map(|(a, b)| a * b).sum::<f64>()
                * if postdoc { spec.postdoc_boost } else { 1.0 };
            let count = poisson(rate, &mut rng);
            let id = format!("f{:05}", c + 1);
            let topic_cdf: Vec<f64> = theta
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect();
            for p in 0..count as usize + spec.late_publications {
                let title: Vec<String> = (0..spec.words_per_title)
                    .map(|_| vocab(weighted_index(&topic_cdf, &mut rng), rng.random_range(0..spec.words_per_topic)))
                    .collect();
                let pub_year = if p < count as usize {
                    year - rng.random_range(0..6) + 1
                } else {
                    year + 2 + rng.random_range(0..4)
                };
                publications.push(Publication {
                    faculty_id: id.clone(),
                    title: title.join(" "),
                    year: pub_year,
                });
            }
            candidates.push(Candidate {
                id,
                doctoral: weighted_index(&doctoral_cdf, &mut rng),
                year,
                productivity_z: 0.0,
                postdoc,
                female,
                gender: if female { Gender::Female } else { Gender::Male },
            });
            thetas.push(theta);
            counts.push(f64::from(count));
        }
    }

    let stats = subfield_count_stats(&thetas, &counts)?;
    for (c, cand) in candidates.iter_mut().enumerate() {
        cand.productivity_z = composite_z(&thetas[c], counts[c], &stats);
    }
    // stubs depend only on each year's opening multiset, so any provisional
    // assignment of openings to candidates will do
    let market = Market::from_parts(institutions.clone(), raw_rank.clone(), candidates, openings);
    let run = simulate_history(&market, &MatchModel::Logistic(spec.w_true), seeds::named(seed, "simulate"));

    let faculty: Vec<FacultyRecord> = market
        .candidates
        .iter()
        .zip(&run.placements)
        .map(|(c, &v)| FacultyRecord {
            id: c.id.clone(),
            doctoral_institution: institutions[c.doctoral].id.clone(),
            hiring_institution: institutions[v].id.clone(),
            hire_year: c.year,
            gender: c.gender,
            postdoc: c.postdoc,
            pub_count: 0,
            topic_mix: None,
            productivity_z: None,
        })
        .collect();
    let network = build_network(&institutions, &faculty);
    let violations = count_violations(&network, &RankOrdering::identity(n))?;
    let non_loops = network.non_loop_edge_count();
    let truth = Truth {
        seed,
        w_true: spec.w_true,
        institution_ids: institutions.iter().map(|i| i.id.clone()).collect(),
        ranks: raw_rank,
        violation_fraction: if non_loops == 0 { 0.0 } else { violations as f64 / non_loops as f64 },
        candidates: market
            .candidates
            .iter()
            .zip(&run.placements)
            .enumerate()
            .map(|(i, (c, &v))| TruthCandidate {
                id: c.id.clone(),
                doctoral: institutions[c.doctoral].id.clone(),
                hiring: institutions[v].id.clone(),
                year: c.year,
                female: c.female,
                postdoc: c.postdoc,
                theta: thetas[i].clone(),
                pub_count: counts[i] as u32,
                productivity_z: c.productivity_z,
            })
            .collect(),
    };
    Ok(SyntheticBundle {
        institutions,
        faculty,
        publications,
        truth,
    })
}
