//! The node copying model: replacement distributions, the copy map and graph sampling.
//!
//! A replacement vector `zeta` turns an observed adjacency `A` into `C_zeta A`, where
//! `C_zeta` selects row `zeta[i]` for row `i`. Undirected graphs are copied as
//! directed graphs and then symmetrized with the max rule.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{DistanceMatrix, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Graph, NodeId, NodeLabels};
use crate::io;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// One draw of the replacement node for every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementVector(Vec<NodeId>);

impl ReplacementVector {
    pub fn new(zeta: Vec<NodeId>) -> Result<Self> {
        let n = zeta.len();
        if let Some(&bad) = zeta.iter().find(|&&z| z >= n) {
            return Err(Error::NodeOutOfRange { node: bad, n_nodes: n });
        }
        Ok(ReplacementVector(zeta))
    }

    pub fn identity(n: usize) -> Self {
        ReplacementVector((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    /// Replacement for node `i`, i.e. the column of the single 1 in row `i` of `C_zeta`.
    pub fn get(&self, i: NodeId) -> NodeId {
        self.0[i]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,zeta\n");
        for (i, z) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{i},{z}");
        }
        out
    }

    pub fn load_csv(path: &Path, n_nodes: usize) -> Result<Self> {
        let mut zeta = vec![None; n_nodes];
        for (line, f) in io::read_csv_rows(path, 2)? {
            let i: usize = io::parse_field(path, line, &f[0], "node id")?;
            let z: usize = io::parse_field(path, line, &f[1], "replacement id")?;
            if i >= n_nodes || z >= n_nodes {
                return Err(Error::NodeOutOfRange {
                    node: i.max(z),
                    n_nodes,
                });
            }
            zeta[i] = Some(z);
        }
        let zeta = zeta
            .into_iter()
            .enumerate()
            .map(|(i, z)| z.ok_or(Error::MissingLabel(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(zeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    LabelUniform,
    Knn,
    OrderStatistic,
    Jaccard,
    SelfCopy,
    Custom,
}

#[derive(Debug, Clone)]
enum Row {
    /// Uniform over a candidate set that may be shared between rows (one per class).
    Uniform(Arc<[NodeId]>),
    Weighted {
        candidates: Vec<NodeId>,
        probs: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

/// Independent categorical distribution over replacement nodes, one per node.
#[derive(Debug, Clone)]
pub struct CopyingDistribution {
    kind: DistributionKind,
    rows: Vec<Row>,
}

impl CopyingDistribution {
    /// Validates and normalizes sparse rows. Rows must sum to 1 within `1e-9`.
    pub fn from_rows(kind: DistributionKind, rows: Vec<Vec<(NodeId, f64)>>) -> Result<Self> {
        let n = rows.len();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(v, mut entries)| {
                entries.retain(|&(_, p)| p != 0.0);
                entries.sort_by_key(|&(m, _)| m);
                if entries.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(invalid_row(v, "repeated candidate"));
                }
                if let Some(&(m, _)) = entries.iter().find(|&&(m, _)| m >= n) {
                    return Err(invalid_row(v, &format!("candidate {m} out of range")));
                }
                if entries.iter().any(|&(_, p)| !(p > 0.0) || !p.is_finite()) {
                    return Err(invalid_row(v, "negative or non-finite probability"));
                }
                let total: f64 = entries.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(invalid_row(v, &format!("probabilities sum to {total}")));
                }
                Ok(weighted_row(entries))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CopyingDistribution { kind, rows })
    }

    /// Every node copies itself.
    pub fn self_copy(n: usize) -> Self {
        CopyingDistribution {
            kind: DistributionKind::SelfCopy,
            rows: (0..n).map(|v| Row::Uniform(Arc::from(vec![v]))).collect(),
        }
    }

    /// Every row uniform over all `n` nodes.
    pub fn uniform_all(n: usize) -> Self {
        let all: Arc<[NodeId]> = (0..n).collect::<Vec<_>>().into();
        CopyingDistribution {
            kind: DistributionKind::Custom,
            rows: vec![Row::Uniform(all); n],
        }
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.rows.len()
    }

    /// `(candidate, probability)` pairs of row `v`, ascending by candidate.
    pub fn row(&self, v: NodeId) -> Vec<(NodeId, f64)> {
        match &self.rows[v] {
            Row::Uniform(c) => {
                let p = 1.0 / c.len() as f64;
                c.iter().map(|&m| (m, p)).collect()
            }
            Row::Weighted { candidates, probs, .. } => candidates.iter().copied().zip(probs.iter().copied()).collect(),
        }
    }

    pub fn support_size(&self, v: NodeId) -> usize {
        match &self.rows[v] {
            Row::Uniform(c) => c.len(),
            Row::Weighted { candidates, .. } => candidates.len(),
        }
    }

    pub fn probability(&self, v: NodeId, m: NodeId) -> f64 {
        match &self.rows[v] {
            Row::Uniform(c) => {
                if c.binary_search(&m).is_ok() {
                    1.0 / c.len() as f64
                } else {
                    0.0
                }
            }
            Row::Weighted { candidates, probs, .. } => {
                candidates.binary_search(&m).map_or(0.0, |k| probs[k])
            }
        }
    }

    pub fn sample_row<R: Rng + ?Sized>(&self, v: NodeId, rng: &mut R) -> NodeId {
        match &self.rows[v] {
            Row::Uniform(c) => {
                if c.len() == 1 {
                    c[0]
                } else {
                    c[rng.random_range(0..c.len())]
                }
            }
            Row::Weighted {
                candidates, cumulative, ..
            } => {
                if candidates.len() == 1 {
                    return candidates[0];
                }
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let k = cumulative.partition_point(|&c| c <= u);
                candidates[k.min(candidates.len() - 1)]
            }
        }
    }

    /// `node,candidate,prob` triplets.
    pub fn to_triplets(&self) -> String {
        let mut out = String::from("node,candidate,prob\n");
        for v in 0..self.n_nodes() {
            for (m, p) in self.row(v) {
                let _ = writeln!(out, "{v},{m},{p}");
            }
        }
        out
    }

    pub fn load_triplets(path: &Path, n_nodes: usize) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_nodes];
        for (line, f) in io::read_csv_rows(path, 3)? {
            let v: usize = io::parse_field(path, line, &f[0], "node id")?;
            let m: usize = io::parse_field(path, line, &f[1], "candidate id")?;
            let p: f64 = io::parse_field(path, line, &f[2], "probability")?;
            if v >= n_nodes {
                return Err(Error::NodeOutOfRange { node: v, n_nodes });
            }
            rows[v].push((m, p));
        }
        Self::from_rows(DistributionKind::Custom, rows)
    }
}

fn invalid_row(row: usize, message: &str) -> Error {
    Error::InvalidDistribution {
        row,
        message: message.to_string(),
    }
}

fn weighted_row(entries: Vec<(NodeId, f64)>) -> Row {
    let candidates: Vec<NodeId> = entries.iter().map(|&(m, _)| m).collect();
    let probs: Vec<f64> = entries.iter().map(|&(_, p)| p).collect();
    let cumulative = probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    Row::Weighted {
        candidates,
        probs,
        cumulative,
    }
}

/// Uniform over all nodes sharing the node's (predicted) label. Self-copy is included.
pub fn build_label_uniform(labels: &NodeLabels) -> Result<CopyingDistribution> {
    let dense = labels.to_dense()?;
    Ok(label_uniform_from_dense(&dense))
}

pub fn label_uniform_from_dense(labels: &[usize]) -> CopyingDistribution {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); n_classes];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }
    let members: Vec<Arc<[NodeId]>> = members.into_iter().map(Arc::from).collect();
    CopyingDistribution {
        kind: DistributionKind::LabelUniform,
        rows: labels.iter().map(|&c| Row::Uniform(Arc::clone(&members[c]))).collect(),
    }
}

/// The `k` nodes other than `v` with the smallest `(distance, id)`, ascending by id.
fn k_smallest(v: NodeId, k: usize, distance: impl Fn(NodeId) -> f64, n: usize) -> Vec<NodeId> {
    let mut cand: Vec<(f64, NodeId)> = (0..n).filter(|&m| m != v).map(|m| (distance(m), m)).collect();
    let by_key = |a: &(f64, NodeId), b: &(f64, NodeId)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_key);
        cand.truncate(k);
    }
    let mut out: Vec<NodeId> = cand.into_iter().map(|(_, m)| m).collect();
    out.sort_unstable();
    out
}

/// Uniform over the `k` nearest other nodes in Euclidean embedding distance.
pub fn build_knn_embedding(embeddings: &EmbeddingMatrix, k: usize) -> Result<CopyingDistribution> {
    let n = embeddings.n_nodes();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "knn requires 1 <= K < N (K = {k}, N = {n})"
        )));
    }
    let e = embeddings.as_array();
    let rows = (0..n)
        .into_par_iter()
        .map(|v| {
            let ev = e.row(v);
            let dist = |m: NodeId| {
                ev.iter()
                    .zip(e.row(m).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            };
            Row::Uniform(Arc::from(k_smallest(v, k, dist, n)))
        })
        .collect();
    Ok(CopyingDistribution {
        kind: DistributionKind::Knn,
        rows,
    })
}

/// Candidates of one order-statistic row: the `p` closest other nodes, ties by id.
pub fn order_statistic_candidates(dist: &DistanceMatrix, v: NodeId, p: usize) -> Vec<NodeId> {
    let row = dist.row(v);
    k_smallest(v, p, |m| row[m], dist.n_nodes())
}

/// Uniform over the `p` smallest order statistics of each distance row (self excluded).
pub fn build_order_statistic(dist: &DistanceMatrix, p: usize) -> Result<CopyingDistribution> {
    let n = dist.n_nodes();
    if p == 0 || p >= n {
        return Err(Error::InvalidParameter(format!(
            "order statistic requires 1 <= P < N (P = {p}, N = {n})"
        )));
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|v| Row::Uniform(Arc::from(order_statistic_candidates(dist, v, p))))
        .collect();
    Ok(CopyingDistribution {
        kind: DistributionKind::OrderStatistic,
        rows,
    })
}

/// Jaccard index of two sorted item sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// User-to-user copying weighted by Jaccard similarity of item sets, laid out over
/// the `n_users + n_items` nodes of [`BipartiteGraph::to_graph`]. Items copy
/// themselves. With `include_self`, `rho(j, j) = 1` enters each user's row.
pub fn build_jaccard_user(bg: &BipartiteGraph, include_self: bool) -> CopyingDistribution {
    let n_users = bg.n_users();
    let item_users = bg.item_users();
    let mut rows: Vec<Row> = (0..n_users)
        .into_par_iter()
        .map(|j| {
            let mut overlap: BTreeMap<usize, usize> = BTreeMap::new();
            for &i in bg.items_of(j) {
                for &m in &item_users[i] {
                    if m != j {
                        *overlap.entry(m).or_default() += 1;
                    }
                }
            }
            let a = bg.items_of(j).len();
            let mut entries: Vec<(NodeId, f64)> = overlap
                .into_iter()
                .map(|(m, inter)| {
                    let b = bg.items_of(m).len();
                    (m, inter as f64 / (a + b - inter) as f64)
                })
                .collect();
            if include_self || entries.is_empty() {
                if entries.is_empty() && !include_self {
                    log::warn!("user {j} shares no items with any other user; falling back to self-copy");
                }
                entries.push((j, 1.0));
                entries.sort_by_key(|&(m, _)| m);
            }
            let total: f64 = entries.iter().map(|&(_, r)| r).sum();
            weighted_row(entries.into_iter().map(|(m, r)| (m, r / total)).collect())
        })
        .collect();
    rows.extend((0..bg.n_items()).map(|i| Row::Uniform(Arc::from(vec![n_users + i]))));
    CopyingDistribution {
        kind: DistributionKind::Jaccard,
        rows,
    }
}

/// Draws every entry independently from its row.
pub fn sample_zeta<R: Rng + ?Sized>(dist: &CopyingDistribution, rng: &mut R) -> ReplacementVector {
    ReplacementVector((0..dist.n_nodes()).map(|v| dist.sample_row(v, rng)).collect())
}

/// `C_zeta A`: row `i` of the result is row `zeta[i]` of `g`. The result is flagged directed.
pub fn apply_copy(g: &Graph, zeta: &ReplacementVector) -> Result<Graph> {
    if zeta.len() != g.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: g.n_nodes(),
            actual: zeta.len(),
        });
    }
    let rows: Vec<Vec<(NodeId, f64)>> = zeta.as_slice().iter().map(|&z| g.row_entries(z).collect()).collect();
    Ok(Graph::from_sorted_rows(g.n_nodes(), true, &rows))
}

/// Copies on the directed view of an undirected graph, then symmetrizes with the max rule.
pub fn apply_copy_undirected(g: &Graph, zeta: &ReplacementVector) -> Result<Graph> {
    if g.is_directed() {
        return Err(Error::Directedness("undirected"));
    }
    Ok(apply_copy(g, zeta)?.symmetrize())
}

/// One sample from the copying model, keeping the directedness of `g`.
pub fn sample_graph<R: Rng + ?Sized>(g: &Graph, dist: &CopyingDistribution, rng: &mut R) -> Result<Graph> {
    Ok(sample_graph_with_zeta(g, dist, rng)?.0)
}

pub fn sample_graph_with_zeta<R: Rng + ?Sized>(
    g: &Graph,
    dist: &CopyingDistribution,
    rng: &mut R,
) -> Result<(Graph, ReplacementVector)> {
    if dist.n_nodes() != g.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: g.n_nodes(),
            actual: dist.n_nodes(),
        });
    }
    let zeta = sample_zeta(dist, rng);
    let sample = if g.is_directed() {
        apply_copy(g, &zeta)?
    } else {
        apply_copy_undirected(g, &zeta)?
    };
    Ok((sample, zeta))
}
