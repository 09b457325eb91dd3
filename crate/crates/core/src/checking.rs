//! Structural statistics for comparing observed and simulated networks.
//!
//! Path length and clustering use the undirected simple projection: edge
//! direction and multiplicity are dropped and self-loops ignored. The hiring
//! statistics use the directed multigraph.

use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::HiringNetwork;
use crate::error::{Error, Result};
use crate::market::{simulate_history, Market, MatchModel};
use crate::seeds;

/// Neighbor lists of the undirected simple projection, sorted.
fn projection(net: &HiringNetwork) -> Vec<Vec<usize>> {
    let n = net.node_count();
    let mut sets: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for e in net.edges() {
        if e.source != e.target {
            sets[e.source].insert(e.target);
            sets[e.target].insert(e.source);
        }
    }
    sets.into_iter()
        .map(|s| {
            let mut v: Vec<usize> = s.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Mean shortest-path length over connected ordered pairs; 0 without any.
pub fn mean_geodesic(net: &HiringNetwork) -> f64 {
    let adj = projection(net);
    let n = adj.len();
    let mut total = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.fill(u32::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    total += u64::from(dist[v]);
                    pairs += 1;
                    queue.push_back(v);
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total as f64 / pairs as f64
    }
}

/// Mean local clustering coefficient; nodes of degree < 2 contribute 0.
pub fn mean_clustering(net: &HiringNetwork) -> f64 {
    let adj = projection(net);
    let n = adj.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = adj
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if adj[a].binary_search(&b).is_ok() {
                        links += 1;
                    }
                }
            }
            links as f64 / (k * (k - 1) / 2) as f64
        })
        .sum();
    sum / n as f64
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Share of non-self-loop edges `(u, v)` with at least one `(v, u)` edge.
pub fn pct_reciprocated_hires(net: &HiringNetwork) -> f64 {
    let counts = net.adjacency_counts();
    let loops: Vec<_> = net.edges().iter().filter(|e| !e.is_self_loop()).collect();
    let hits = loops.iter().filter(|e| counts[e.target][e.source] > 0).count();
    pct(hits, loops.len())
}

/// Share of institutions in at least one mutually hiring pair.
pub fn pct_reciprocating_institutions(net: &HiringNetwork) -> f64 {
    let counts = net.adjacency_counts();
    let n = net.node_count();
    let hits = (0..n)
        .filter(|&u| (0..n).any(|v| v != u && counts[u][v] > 0 && counts[v][u] > 0))
        .count();
    pct(hits, n)
}

pub fn pct_self_hires(net: &HiringNetwork) -> f64 {
    let loops = net.edges().iter().filter(|e| e.is_self_loop()).count();
    pct(loops, net.edge_count())
}

/// Share of edges within one region; self-loops count as within.
pub fn pct_same_region(net: &HiringNetwork) -> f64 {
    let same = net
        .edges()
        .iter()
        .filter(|e| net.institution(e.source).region == net.institution(e.target).region)
        .count();
    pct(same, net.edge_count())
}

pub const STATISTIC_NAMES: [&str; 6] = [
    "mean geodesic path length",
    "mean local clustering coefficient",
    "% reciprocated hires",
    "% reciprocating institutions",
    "% self-hires",
    "% placements within same region",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub mean_geodesic: f64,
    pub mean_clustering: f64,
    pub pct_reciprocated_hires: f64,
    pub pct_reciprocating_institutions: f64,
    pub pct_self_hires: f64,
    pub pct_same_region: f64,
}

impl NetworkStats {
    pub fn compute(net: &HiringNetwork) -> Result<NetworkStats> {
        if net.node_count() == 0 {
            return Err(Error::Empty("network has no nodes"));
        }
        Ok(NetworkStats {
            mean_geodesic: mean_geodesic(net),
            mean_clustering: mean_clustering(net),
            pct_reciprocated_hires: pct_reciprocated_hires(net),
            pct_reciprocating_institutions: pct_reciprocating_institutions(net),
            pct_self_hires: pct_self_hires(net),
            pct_same_region: pct_same_region(net),
        })
    }

    /// Values in [`STATISTIC_NAMES`] order.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.mean_geodesic,
            self.mean_clustering,
            self.pct_reciprocated_hires,
            self.pct_reciprocating_institutions,
            self.pct_self_hires,
            self.pct_same_region,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        NetworkStats {
            mean_geodesic: v[0],
            mean_clustering: v[1],
            pct_reciprocated_hires: v[2],
            pct_reciprocating_institutions: v[3],
            pct_self_hires: v[4],
            pct_same_region: v[5],
        }
    }
}

/// Simulated mean and standard error of each statistic under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelColumn {
    pub model: String,
    pub mean: NetworkStats,
    pub se: NetworkStats,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub observed: NetworkStats,
    pub models: Vec<ModelColumn>,
    /// Definition used for the reciprocating-institutions row.
    pub reciprocating_definition: String,
}

/// Statistics of `n_runs` simulated histories per model next to the observed
/// network. Run `i` of model `m` uses seed `derive(named(seed, m.name), i)`.
pub fn check_report(
    market: &Market,
    models: &[MatchModel],
    n_runs: usize,
    seed: u64,
) -> Result<CheckReport> {
    if n_runs < 2 {
        return Err(Error::InvalidParameter("model checking needs at least 2 runs".into()));
    }
    let observed_net = crate::market::observed_run(market).to_network(market);
    let observed = NetworkStats::compute(&observed_net)?;
    let mut columns = Vec::with_capacity(models.len());
    for model in models {
        let base = seeds::named(seed, model.name());
        let stats: Vec<[f64; 6]> = (0..n_runs)
            .into_par_iter()
            .map(|i| {
                let run = simulate_history(market, model, seeds::derive(base, i as u64));
                NetworkStats::compute(&run.to_network(market)).map(|s| s.to_array())
            })
            .collect::<Result<_>>()?;
        let n = n_runs as f64;
        let mut mean = [0.0; 6];
        let mut se = [0.0; 6];
        for k in 0..6 {
            let m = stats.iter().map(|s| s[k]).sum::<f64>() / n;
            let var = stats.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
            mean[k] = m;
            se[k] = (var / n).sqrt();
        }
        columns.push(ModelColumn {
            model: model.name().to_string(),
            mean: NetworkStats::from_array(mean),
            se: NetworkStats::from_array(se),
            runs: n_runs,
        });
    }
    Ok(CheckReport {
        observed,
        models: columns,
        reciprocating_definition:
            "institutions in at least one mutually hiring pair, over all institutions".into(),
    })
}
