//! Field-normalized productivity scores.
//!
//! Publication titles of each faculty member are pooled into one document and
//! a topic model is fit by collapsed Gibbs sampling. Each topic acts as a
//! subfield: publication counts are standardized within every subfield using
//! topic-weighted moments, and a person's composite z-score averages those
//! standardized counts with their own topic mixture as weights.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FacultyRecord, Publication};
use crate::error::{Error, Result};
use crate::seeds;

/// Smallest subfield standard deviation used when standardizing.
pub const SIGMA_FLOOR: f64 = 1e-6;

pub const STOPWORDS_VERSION: &str = "v1";
const STOPWORDS_V1: &str = include_str!("../data/stopwords_v1.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// Lowercases, splits on non-alphanumerics, drops one-character tokens and
/// stopwords.
pub fn tokenize_titles<S: AsRef<str>>(titles: &[S]) -> Vec<String> {
    let stop = stopwords();
    titles
        .iter()
        .flat_map(|t| {
            t.as_ref()
                .split(|c: char| !c.is_alphanumeric())
                .map(str::to_lowercase)
                .filter(|w| w.chars().count() >= 2 && !stop.contains(w.as_str()))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Token-index documents over a shared vocabulary.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub doc_ids: Vec<String>,
    pub documents: Vec<Vec<usize>>,
    pub vocabulary: Vec<String>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_document(&mut self, id: impl Into<String>, tokens: &[String]) {
        let doc = tokens
            .iter()
            .map(|t| match self.index.get(t) {
                Some(&i) => i,
                None => {
                    let i = self.vocabulary.len();
                    self.vocabulary.push(t.clone());
                    self.index.insert(t.clone(), i);
                    i
                }
            })
            .collect();
        self.doc_ids.push(id.into());
        self.documents.push(doc);
    }

    /// One document per record, built from all of that person's titles.
    pub fn from_publications(records: &[FacultyRecord], pubs: &[Publication]) -> Self {
        let mut titles: HashMap<&str, Vec<&str>> = HashMap::new();
        for p in pubs {
            titles.entry(p.faculty_id.as_str()).or_default().push(&p.title);
        }
        let mut corpus = Corpus::new();
        for r in records {
            let t = titles.get(r.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            corpus.add_document(r.id.clone(), &tokenize_titles(t));
        }
        corpus
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams {
            topics: 10,
            alpha: 5.0,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
        }
    }
}

/// Point estimate from the final Gibbs state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `phi[k][w]`, rows sum to one.
    pub phi: Vec<Vec<f64>>,
    /// `theta[d][k]`, rows sum to one.
    pub theta: Vec<Vec<f64>>,
}

impl TopicModel {
    /// The `n` most probable words of topic `k`, with probabilities.
    pub fn top_words<'a>(&self, corpus: &'a Corpus, k: usize, n: usize) -> Vec<(&'a str, f64)> {
        let mut idx: Vec<usize> = (0..self.phi[k].len()).collect();
        idx.sort_by(|&a, &b| self.phi[k][b].total_cmp(&self.phi[k][a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|w| (corpus.vocabulary[w].as_str(), self.phi[k][w]))
            .collect()
    }
}

/// Collapsed Gibbs sampling for latent Dirichlet allocation.
pub fn fit_lda(corpus: &Corpus, params: &LdaParams) -> Result<TopicModel> {
    let k_topics = params.topics;
    let v = corpus.vocab_size();
    if corpus.documents.is_empty() || v == 0 {
        return Err(Error::Empty("corpus has no tokens"));
    }
    if k_topics == 0 || !(params.alpha > 0.0) || !(params.beta > 0.0) {
        return Err(Error::InvalidParameter(
            "topics, alpha and beta must be positive".into(),
        ));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let v_beta = v as f64 * beta;
    let mut rng = seeds::rng(params.seed);

    // word-major topic counts: nwk[w * K + k]
    let mut nwk = vec![0u32; v * k_topics];
    let mut ndk = vec![0u32; corpus.documents.len() * k_topics];
    let mut nk = vec![0u32; k_topics];
    let mut z: Vec<Vec<usize>> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let k = rng.random_range(0..k_topics);
                    nwk[w * k_topics + k] += 1;
                    ndk[d * k_topics + k] += 1;
                    nk[k] += 1;
                    k
                })
                .collect()
        })
        .collect();

    let mut p = vec![0.0f64; k_topics];
    for _ in 0..params.iterations {
        for (d, doc) in corpus.documents.iter().enumerate() {
            let nd = &mut ndk[d * k_topics..(d + 1) * k_topics];
            for (slot, &w) in z[d].iter_mut().zip(doc) {
                let old = *slot;
                let nw = &mut nwk[w * k_topics..(w + 1) * k_topics];
                nw[old] -= 1;
                nd[old] -= 1;
                nk[old] -= 1;
                let mut total = 0.0;
                for k in 0..k_topics {
                    total += (f64::from(nd[k]) + alpha) * (f64::from(nw[k]) + beta)
                        / (f64::from(nk[k]) + v_beta);
                    p[k] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = p.iter().position(|&c| u < c).unwrap_or(k_topics - 1);
                nw[new] += 1;
                nd[new] += 1;
                nk[new] += 1;
                *slot = new;
            }
        }
    }

    let phi = (0..k_topics)
        .map(|k| {
            let denom = f64::from(nk[k]) + v_beta;
            (0..v)
                .map(|w| (f64::from(nwk[w * k_topics + k]) + beta) / denom)
                .collect()
        })
        .collect();
    let theta = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let denom = doc.len() as f64 + k_topics as f64 * alpha;
            (0..k_topics)
                .map(|k| (f64::from(ndk[d * k_topics + k]) + alpha) / denom)
                .collect()
        })
        .collect();
    Ok(TopicModel {
        topics: k_topics,
        alpha,
        beta,
        phi,
        theta,
    })
}

/// Topic-weighted moments of publication counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubfieldStats {
    pub mu: Vec<f64>,
    /// Weighted population standard deviation, floored at [`SIGMA_FLOOR`].
    pub sigma: Vec<f64>,
    /// Total topic weight `Σ_i θ_ik` behind each subfield.
    pub mass: Vec<f64>,
}

impl SubfieldStats {
    /// Mean subfield standard deviation, weighted by subfield mass.
    pub fn weighted_mean_sigma(&self) -> f64 {
        let total: f64 = self.mass.iter().sum();
        self.sigma
            .iter()
            .zip(&self.mass)
            .map(|(s, m)| s * m)
            .sum::<f64>()
            / total
    }
}

pub fn subfield_count_stats(theta_all: &[Vec<f64>], counts: &[f64]) -> Result<SubfieldStats> {
    if theta_all.len() != counts.len() {
        return Err(Error::InvalidParameter(format!(
            "{} topic mixtures for {} counts",
            theta_all.len(),
            counts.len()
        )));
    }
    let k_topics = theta_all.first().ok_or(Error::Empty("no topic mixtures"))?.len();
    let mut mass = vec![0.0; k_topics];
    let mut mu = vec![0.0; k_topics];
    for (theta, &n) in theta_all.iter().zip(counts) {
        for k in 0..k_topics {
            mass[k] += theta[k];
            mu[k] += theta[k] * n;
        }
    }
    for k in 0..k_topics {
        if !(mass[k] > 0.0) {
            return Err(Error::ZeroTopicWeight(k));
        }
        mu[k] /= mass[k];
    }
    let mut var = vec![0.0; k_topics];
    for (theta, &n) in theta_all.iter().zip(counts) {
        for k in 0..k_topics {
            var[k] += theta[k] * (n - mu[k]).powi(2);
        }
    }
    let sigma = var
        .iter()
        .zip(&mass)
        .map(|(v, m)| (v / m).sqrt().max(SIGMA_FLOOR))
        .collect();
    Ok(SubfieldStats { mu, sigma, mass })
}

/// `Σ_k θ_k (n − μ_k) / σ_k`.
pub fn composite_z(theta: &[f64], count: f64, stats: &SubfieldStats) -> f64 {
    theta
        .iter()
        .zip(stats.mu.iter().zip(&stats.sigma))
        .map(|(t, (m, s))| t * (count - m) / s)
        .sum()
}

/// Sets `pub_count` to the number of publications dated no later than one year
/// after the hire. People without publication rows get zero.
pub fn count_publications(records: &mut [FacultyRecord], pubs: &[Publication]) {
    let mut years: HashMap<&str, Vec<i32>> = HashMap::new();
    for p in pubs {
        years.entry(p.faculty_id.as_str()).or_default().push(p.year);
    }
    for r in records.iter_mut() {
        r.pub_count = years
            .get(r.id.as_str())
            .map_or(0, |ys| ys.iter().filter(|&&y| y <= r.hire_year + 1).count() as u32);
    }
}

/// Everything produced by [`score_productivity`].
#[derive(Debug, Clone)]
pub struct ProductivityOutput {
    pub corpus: Corpus,
    pub model: TopicModel,
    pub stats: SubfieldStats,
}

/// Counts publications, fits the topic model and fills `topic_mix` and
/// `productivity_z` on every record.
pub fn score_productivity(
    records: &mut [FacultyRecord],
    pubs: &[Publication],
    params: &LdaParams,
) -> Result<ProductivityOutput> {
    count_publications(records, pubs);
    let corpus = Corpus::from_publications(records, pubs);
    let model = fit_lda(&corpus, params)?;
    let counts: Vec<f64> = records.iter().map(|r| f64::from(r.pub_count)).collect();
    let stats = subfield_count_stats(&model.theta, &counts)?;
    for (r, theta) in records.iter_mut().zip(&model.theta) {
        r.productivity_z = Some(composite_z(theta, f64::from(r.pub_count), &stats));
        r.topic_mix = Some(theta.clone());
    }
    Ok(ProductivityOutput {
        corpus,
        model,
        stats,
    })
}
