//! Structural summaries used to compare observed and sampled graphs.
//!
//! All statistics look at the undirected simple structure: directed inputs are
//! symmetrized, weights are ignored and self-loops dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeLabels};

/// Undirected simple-graph view: sorted neighbour lists without self-loops.
pub struct SimpleStructure {
    adj: Vec<Vec<NodeId>>,
    n_edges: usize,
}

impl SimpleStructure {
    pub fn new(g: &Graph) -> Self {
        let sym;
        let g = if g.is_directed() {
            sym = g.symmetrize();
            &sym
        } else {
            g
        };
        let adj: Vec<Vec<NodeId>> = (0..g.n_nodes())
            .map(|v| g.neighbors(v).iter().copied().filter(|&t| t != v).collect())
            .collect();
        let n_edges = adj.iter().map(Vec::len).sum::<usize>() / 2;
        SimpleStructure { adj, n_edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().filter(move |&&t| s < t).map(move |&t| (s, t)))
    }
}

pub fn degree_stats(g: &Graph) -> Result<(f64, usize)> {
    let s = SimpleStructure::new(g);
    degree_stats_of(&s)
}

fn degree_stats_of(s: &SimpleStructure) -> Result<(f64, usize)> {
    if s.n_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    let max = (0..s.n_nodes()).map(|v| s.degree(v)).max().unwrap_or(0);
    Ok((2.0 * s.n_edges() as f64 / s.n_nodes() as f64, max))
}

pub fn cross_community_fraction(g: &Graph, labels: &NodeLabels) -> Result<f64> {
    cross_community_of(&SimpleStructure::new(g), labels)
}

fn cross_community_of(s: &SimpleStructure, labels: &NodeLabels) -> Result<f64> {
    if labels.len() != s.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: s.n_nodes(),
            actual: labels.len(),
        });
    }
    if s.n_edges() == 0 {
        return Err(Error::Undefined("cross-community fraction of an edgeless graph".into()));
    }
    let mut cross = 0usize;
    for (a, b) in s.edges() {
        if labels.require(a)? != labels.require(b)? {
            cross += 1;
        }
    }
    Ok(cross as f64 / s.n_edges() as f64)
}

fn choose3(n: usize) -> u128 {
    let n = n as u128;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// `sum_v C(d(v), 3) / C(|E|, 3)`.
pub fn claw_fraction(g: &Graph) -> Result<f64> {
    claw_of(&SimpleStructure::new(g))
}

fn claw_of(s: &SimpleStructure) -> Result<f64> {
    if s.n_edges() < 3 {
        return Err(Error::Undefined(format!(
            "claw fraction needs at least 3 edges, graph has {}",
            s.n_edges()
        )));
    }
    let claws: u128 = (0..s.n_nodes()).map(|v| choose3(s.degree(v))).sum();
    Ok(claws as f64 / choose3(s.n_edges()) as f64)
}

/// Entropy of the degree distribution divided by `log N`.
///
/// Returns `(normalized, verbatim)`: the first uses `d(v) / sum d` (a proper
/// distribution, in `[0, 1]`); the second uses `d(v) / |E|` as written in the
/// usual statement of the metric, which sums to 2 on undirected graphs.
pub fn edge_distribution_entropy(g: &Graph) -> Result<(f64, f64)> {
    entropy_of(&SimpleStructure::new(g))
}

fn entropy_of(s: &SimpleStructure) -> Result<(f64, f64)> {
    if s.n_edges() == 0 {
        return Err(Error::Undefined("entropy of an edgeless graph".into()));
    }
    let n = s.n_nodes();
    let log_n = (n as f64).ln();
    let h = |denom: f64| {
        (0..n)
            .map(|v| s.degree(v) as f64 / denom)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum::<f64>()
            / log_n
    };
    let e = s.n_edges() as f64;
    Ok((h(2.0 * e), h(e)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStatistics {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub avg_degree: f64,
    pub max_degree: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_community: Option<f64>,
    pub claw_fraction: f64,
    pub edge_entropy_relative: f64,
    pub edge_entropy_verbatim: f64,
}

pub fn summarize(g: &Graph, labels: Option<&NodeLabels>) -> Result<GraphStatistics> {
    let s = SimpleStructure::new(g);
    let (avg, max) = degree_stats_of(&s)?;
    let cross = labels.map(|l| cross_community_of(&s, l)).transpose()?;
    let (rel, verb) = entropy_of(&s)?;
    Ok(GraphStatistics {
        n_nodes: s.n_nodes(),
        n_edges: s.n_edges(),
        avg_degree: avg,
        max_degree: max as f64,
        cross_community: cross,
        claw_fraction: claw_of(&s)?,
        edge_entropy_relative: rel,
        edge_entropy_verbatim: verb,
    })
}

/// Field-wise mean, with counts reported as means too (`n_edges` rounded).
pub fn mean_statistics(all: &[GraphStatistics]) -> Result<GraphStatistics> {
    if all.is_empty() {
        return Err(Error::InvalidParameter("no statistics to average".into()));
    }
    let k = all.len() as f64;
    // Averaging deviations from the first entry keeps identical inputs exact.
    let mean = |f: &dyn Fn(&GraphStatistics) -> f64| {
        let x0 = f(&all[0]);
        x0 + all.iter().map(|s| f(s) - x0).sum::<f64>() / k
    };
    let cross = if all.iter().all(|s| s.cross_community.is_some()) {
        Some(mean(&|s| s.cross_community.unwrap_or(0.0)))
    } else {
        None
    };
    Ok(GraphStatistics {
        n_nodes: all[0].n_nodes,
        n_edges: mean(&|s| s.n_edges as f64).round() as usize,
        avg_degree: mean(&|s| s.avg_degree),
        max_degree: mean(&|s| s.max_degree),
        cross_community: cross,
        claw_fraction: mean(&|s| s.claw_fraction),
        edge_entropy_relative: mean(&|s| s.edge_entropy_relative),
        edge_entropy_verbatim: mean(&|s| s.edge_entropy_verbatim),
    })
}
