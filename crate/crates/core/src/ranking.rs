//! Minimum violation ranking (MVR) of institutions.
//!
//! A violation is a non-self-loop edge `(u, v)` where `v` sits above `u` in the
//! ordering, i.e. a graduate hired "up" the hierarchy. Prestige is the mean
//! position of each institution over orderings with the fewest violations.
//!
//! [`sample_mvr`] explores those orderings with a zero-temperature Metropolis
//! walk: proposals are adjacent transpositions or arbitrary pair swaps (50/50)
//! and are accepted whenever they do not add violations, so the walk drifts
//! down to a minimum and then wanders across the plateau of tied orderings.
//! The plateau walk is one reasonable exploration schedule, not the only one.
//! [`brute_force_mvr`] enumerates every ordering of small graphs and serves as
//! the reference for the sampler.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::HiringNetwork;
use crate::error::{Error, Result};
use crate::seeds;

pub const BRUTE_FORCE_MAX_NODES: usize = 8;

/// A total order of the nodes; position 1 is the most prestigious.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankOrdering {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl RankOrdering {
    /// `order[p]` is the node at 0-based position `p`. Returns `None` unless
    /// `order` is a permutation of `0..order.len()`.
    pub fn from_order(order: Vec<usize>) -> Option<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (p, &node) in order.iter().enumerate() {
            if node >= n || position[node] != usize::MAX {
                return None;
            }
            position[node] = p;
        }
        Some(RankOrdering { order, position })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_order((0..n).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 1-based position of `node`.
    pub fn position(&self, node: usize) -> usize {
        self.position[node] + 1
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// Mean-rank prestige scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrestigeRanking {
    /// Institution ids, aligned with `mean_rank`.
    pub ids: Vec<String>,
    /// Mean 1-based position, in `[1, N]`.
    pub mean_rank: Vec<f64>,
    pub min_violations: u64,
    /// `min_violations` over the number of non-self-loop edges.
    pub violation_fraction: f64,
    pub samples: usize,
}

impl PrestigeRanking {
    pub fn len(&self) -> usize {
        self.mean_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_rank.is_empty()
    }

    pub fn rank(&self, idx: usize) -> f64 {
        self.mean_rank[idx]
    }

    /// `rank / N`, in `[1/N, 1]`. This is the scale features are built on.
    pub fn normalized(&self, idx: usize) -> f64 {
        self.mean_rank[idx] / self.len() as f64
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn rank_of(&self, id: &str) -> Result<f64> {
        self.index_of(id)
            .map(|i| self.mean_rank[i])
            .ok_or_else(|| Error::UnknownInstitution(id.to_string()))
    }

    /// A ranking taken as given, e.g. a planted one. `ranks[i]` belongs to `ids[i]`.
    pub fn from_ranks(ids: Vec<String>, ranks: Vec<f64>) -> Self {
        assert_eq!(ids.len(), ranks.len());
        PrestigeRanking {
            ids,
            mean_rank: ranks,
            min_violations: 0,
            violation_fraction: 0.0,
            samples: 0,
        }
    }

    /// Fills `min_violations` / `violation_fraction` by treating the mean ranks
    /// as an ordering (ties broken by index).
    pub fn with_violations_of(mut self, network: &HiringNetwork) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.mean_rank[a].total_cmp(&self.mean_rank[b]).then(a.cmp(&b)));
        let ordering = RankOrdering::from_order(order).expect("permutation");
        let v = count_violations(network, &ordering).expect("ordering covers network");
        self.min_violations = v;
        self.violation_fraction = fraction(v, network.non_loop_edge_count());
        self
    }

    /// Indices sorted from most to least prestigious.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.mean_rank[a].total_cmp(&self.mean_rank[b]).then(a.cmp(&b)));
        idx
    }
}

fn fraction(violations: u64, edges: usize) -> f64 {
    if edges == 0 {
        0.0
    } else {
        violations as f64 / edges as f64
    }
}

/// Non-self-loop edges `(u, v)` with `v` placed above `u`, with multiplicity.
pub fn count_violations(network: &HiringNetwork, ordering: &RankOrdering) -> Result<u64> {
    if ordering.len() != network.node_count() {
        let missing = (ordering.len()..network.node_count())
            .next()
            .map(|i| network.institution(i).id.clone())
            .unwrap_or_else(|| format!("index {}", network.node_count()));
        return Err(Error::OrderingMissingNode(missing));
    }
    Ok(network
        .edges()
        .iter()
        .filter(|e| !e.is_self_loop() && ordering.position(e.target) < ordering.position(e.source))
        .count() as u64)
}

/// Rank difference `(rank(v) − rank(u)) / N`.
///
/// Positive when the candidate moved down the hierarchy (hired below their
/// doctoral institution), negative when they moved up.
pub fn rank_difference(ranking: &PrestigeRanking, u: &str, v: &str) -> Result<f64> {
    let ru = ranking.rank_of(u)?;
    let rv = ranking.rank_of(v)?;
    Ok((rv - ru) / ranking.len() as f64)
}

/// Sampler settings. `sweeps` defaults to `N²` proposals between samples.
///
/// Each restart anneals a random ordering down to inverse temperature `beta`,
/// then runs Metropolis there and records only states at the lowest count
/// seen.
/// Conditioned on that count the stationary law is uniform, so the recorded
/// orderings sample the minimal set evenly even when it is disconnected under
/// swaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvrParams {
    pub restarts: usize,
    pub sweeps: Option<usize>,
    pub samples: usize,
    pub beta: f64,
    /// Annealing length in sample spacings before recording starts.
    pub anneal_sweeps: usize,
    /// Give up after `samples × max_spacings_factor` spacings; the restart
    /// then returns what it has.
    pub max_spacings_factor: usize,
    pub seed: u64,
}

impl Default for MvrParams {
    fn default() -> Self {
        MvrParams {
            restarts: 10,
            sweeps: None,
            samples: 100,
            beta: 8.0,
            anneal_sweeps: 100,
            max_spacings_factor: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MvrSample {
    pub ordering: RankOrdering,
    pub violations: u64,
}

/// Antisymmetric net-flow matrix: `flow[a][b] = A[a][b] − A[b][a]`, flattened.
struct NetFlow {
    n: usize,
    flow: Vec<i64>,
}

impl NetFlow {
    fn new(network: &HiringNetwork) -> Self {
        let n = network.node_count();
        let mut flow = vec![0i64; n * n];
        for e in network.edges() {
            if !e.is_self_loop() {
                flow[e.source * n + e.target] += 1;
                flow[e.target * n + e.source] -= 1;
            }
        }
        NetFlow { n, flow }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> i64 {
        self.flow[a * self.n + b]
    }
}

struct Chain<'a> {
    flow: &'a NetFlow,
    order: Vec<usize>,
    violations: u64,
}

impl Chain<'_> {
    /// Change in violations from swapping positions `i < j`.
    ///
    /// Node `a` moves from `i` down to `j`, `b` from `j` up to `i`; every node
    /// `m` in between flips its relation to both.
    fn swap_delta(&self, i: usize, j: usize) -> i64 {
        let a = self.order[i];
        let b = self.order[j];
        let mut delta = self.flow.get(a, b);
        for &m in &self.order[i + 1..j] {
            delta += self.flow.get(a, m) + self.flow.get(m, b);
        }
        delta
    }

    /// Change in violations from moving the node at `from` to `to`, shifting
    /// the nodes in between by one.
    fn shift_delta(&self, from: usize, to: usize) -> i64 {
        let a = self.order[from];
        if from < to {
            self.order[from + 1..=to].iter().map(|&m| self.flow.get(a, m)).sum()
        } else {
            self.order[to..from].iter().map(|&m| self.flow.get(m, a)).sum()
        }
    }

    /// One Metropolis proposal; `accept[d]` is the acceptance probability of
    /// an increase by `d + 1`, empty at zero temperature. Adjacent swaps,
    /// random transpositions and random shifts are each symmetric.
    fn propose<R: Rng>(&mut self, rng: &mut R, accept: &[f64]) {
        let n = self.order.len();
        let kind = rng.random_range(0..3u8);
        let (i, j) = if kind == 0 {
            let i = rng.random_range(0..n - 1);
            (i, i + 1)
        } else {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        };
        let delta = if kind == 2 {
            self.shift_delta(i, j)
        } else {
            self.swap_delta(i.min(j), i.max(j))
        };
        let ok = delta <= 0
            || accept
                .get(delta as usize - 1)
                .is_some_and(|&p| rng.random::<f64>() < p);
        if ok {
            if kind == 2 {
                let a = self.order.remove(i);
                self.order.insert(j, a);
            } else {
                self.order.swap(i, j);
            }
            self.violations = (self.violations as i64 + delta) as u64;
        }
    }
}

/// Violations net of reciprocal pairs: for each pair with `a` above `b`, the
/// excess of `b -> a` edges over `a -> b` edges.
fn violations_of(flow: &NetFlow, order: &[usize]) -> u64 {
    let mut v = 0i64;
    for (p, &a) in order.iter().enumerate() {
        for &b in &order[p + 1..] {
            v += flow.get(b, a).max(0);
        }
    }
    v as u64
}

/// Increases beyond this many violations are never accepted.
const MAX_UPHILL: i32 = 16;
const ANNEAL_START_BETA: f64 = 0.1;

fn run_restart(
    flow: &NetFlow,
    cancelled: u64,
    sweeps: usize,
    params: &MvrParams,
    seed: u64,
) -> (u64, Vec<Vec<usize>>) {
    let n = flow.n;
    let mut rng = seeds::rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let violations = violations_of(flow, &order);
    let mut chain = Chain {
        flow,
        order,
        violations,
    };

    // anneal from hot to the sampling temperature, then sample at it
    let anneal = params.anneal_sweeps * sweeps;
    let mut accept = vec![0.0; MAX_UPHILL as usize];
    for t in 0..anneal {
        if t % sweeps == 0 {
            let frac = t as f64 / anneal as f64;
            let beta = ANNEAL_START_BETA * (params.beta / ANNEAL_START_BETA).powf(frac);
            for (d, a) in accept.iter_mut().enumerate() {
                *a = (-beta * (d + 1) as f64).exp();
            }
        }
        chain.propose(&mut rng, &accept);
    }
    let accept: Vec<f64> = (1..=MAX_UPHILL).map(|d| (-params.beta * f64::from(d)).exp()).collect();
    let mut level = chain.violations;
    let mut best = chain.order.clone();
    let mut recorded = Vec::with_capacity(params.samples);
    let budget = params.samples.saturating_mul(params.max_spacings_factor.max(1));
    let mut spacings = 0usize;
    while recorded.len() < params.samples && spacings < budget {
        // a random extra step keeps the sampled chain aperiodic
        let spacing = sweeps + usize::from(rng.random_bool(0.5));
        for _ in 0..spacing {
            chain.propose(&mut rng, &accept);
            if chain.violations < level {
                level = chain.violations;
                best.clone_from(&chain.order);
                recorded.clear();
            }
        }
        spacings += 1;
        if chain.violations == level {
            recorded.push(chain.order.clone());
        }
    }
    if recorded.is_empty() {
        recorded.push(best);
    }
    (level + cancelled, recorded)
}

/// Samples orderings at the minimum violation count found over all restarts.
///
/// Deterministic for a given `params.seed`; restarts run on independent
/// substreams and are merged in restart order.
pub fn sample_mvr(network: &HiringNetwork, params: &MvrParams) -> Result<Vec<MvrSample>> {
    let n = network.node_count();
    if n == 0 {
        return Err(Error::Empty("network has no nodes"));
    }
    if params.restarts == 0 || params.samples == 0 {
        return Err(Error::InvalidParameter(
            "restarts and samples must be positive".into(),
        ));
    }
    if !(params.beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be positive (got {})",
            params.beta
        )));
    }
    if n == 1 {
        return Ok(vec![MvrSample {
            ordering: RankOrdering::identity(1),
            violations: 0,
        }]);
    }
    let flow = NetFlow::new(network);
    // reciprocal edge pairs cancel in the net-flow matrix; each pair always
    // contributes exactly one violation whatever the ordering
    let mut cancelled = 0u64;
    let counts = network.adjacency_counts();
    for a in 0..n {
        for b in a + 1..n {
            cancelled += u64::from(counts[a][b].min(counts[b][a]));
        }
    }
    let sweeps = params.sweeps.unwrap_or(n * n).max(1);
    let runs: Vec<(u64, Vec<Vec<usize>>)> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            run_restart(
                &flow,
                cancelled,
                sweeps,
                params,
                seeds::derive(params.seed, r as u64),
            )
        })
        .collect();
    let best = runs.iter().map(|(v, _)| *v).min().expect("at least one restart");
    Ok(runs
        .into_iter()
        .filter(|(v, _)| *v == best)
        .flat_map(|(v, orders)| {
            orders.into_iter().map(move |order| MvrSample {
                ordering: RankOrdering::from_order(order).expect("chain keeps a permutation"),
                violations: v,
            })
        })
        .collect())
}

/// Mean positions over `samples`, which must all share the minimal count.
pub fn mean_rank(network: &HiringNetwork, samples: &[MvrSample]) -> Result<PrestigeRanking> {
    let first = samples.first().ok_or(Error::Empty("no ranking samples"))?;
    let n = network.node_count();
    let min = samples.iter().map(|s| s.violations).min().unwrap_or(first.violations);
    let mut sums = vec![0.0; n];
    let mut used = 0usize;
    for s in samples.iter().filter(|s| s.violations == min) {
        if s.ordering.len() != n {
            return Err(Error::OrderingMissingNode(format!(
                "sample covers {} of {n} nodes",
                s.ordering.len()
            )));
        }
        for (node, sum) in sums.iter_mut().enumerate() {
            *sum += s.ordering.position(node) as f64;
        }
        used += 1;
    }
    Ok(PrestigeRanking {
        ids: network.institutions().iter().map(|i| i.id.clone()).collect(),
        mean_rank: sums.into_iter().map(|s| s / used as f64).collect(),
        min_violations: min,
        violation_fraction: fraction(min, network.non_loop_edge_count()),
        samples: used,
    })
}

/// Exact mean ranks by enumerating all `N!` orderings.
pub fn brute_force_mvr(network: &HiringNetwork) -> Result<PrestigeRanking> {
    let n = network.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooManyNodes(n, BRUTE_FORCE_MAX_NODES));
    }
    if n == 0 {
        return Err(Error::Empty("network has no nodes"));
    }
    let counts = network.adjacency_counts();
    let violations = |order: &[usize]| -> u64 {
        let mut v = 0u64;
        for p in 0..n {
            for q in p + 1..n {
                // order[q] sits below order[p]; an edge from below to above violates
                v += u64::from(counts[order[q]][order[p]]);
            }
        }
        v
    };

    let mut best = u64::MAX;
    let mut sums = vec![0.0; n];
    let mut hits = 0usize;
    let mut visit = |order: &[usize]| {
        let v = violations(order);
        if v < best {
            best = v;
            sums.iter_mut().for_each(|s| *s = 0.0);
            hits = 0;
        }
        if v == best {
            for (p, &node) in order.iter().enumerate() {
                sums[node] += (p + 1) as f64;
            }
            hits += 1;
        }
    };

    // Heap's algorithm
    let mut order: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&order);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            visit(&order);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }

    Ok(PrestigeRanking {
        ids: network.institutions().iter().map(|i| i.id.clone()).collect(),
        mean_rank: sums.into_iter().map(|s| s / hits as f64).collect(),
        min_violations: best,
        violation_fraction: fraction(best, network.non_loop_edge_count()),
        samples: hits,
    })
}
