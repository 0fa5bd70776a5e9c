//! Targeted DICE attacks and the node-copying error correction for attacked nodes.

use std::collections::BTreeSet;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copying::{build_order_statistic, CopyingDistribution};
use crate::embedding::{pairwise_distances, spectral_embedding, EmbeddingMatrix, SpectralConfig};
use crate::error::{Error, Result};
use crate::gcn::{gcn_train, GcnConfig, GcnModel};
use crate::graph::{check_node, FeatureMatrix, Graph, NodeId, NodeLabels};
use crate::rng;
use crate::view::SingleCopyView;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub targets: Vec<NodeId>,
    /// Fraction of same-class neighbours to disconnect, in [0, 1].
    pub beta: f64,
}

impl AttackSpec {
    pub fn new(targets: Vec<NodeId>, beta: f64, train: &[NodeId]) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta {beta} outside [0, 1]")));
        }
        if let Some(v) = targets.iter().find(|v| train.contains(v)) {
            return Err(Error::InvalidParameter(format!("target {v} is a training node")));
        }
        Ok(AttackSpec { targets, beta })
    }

    /// `count` distinct random nodes outside `train`, ascending.
    pub fn random_targets(n_nodes: usize, train: &[NodeId], count: usize, beta: f64, seed: u64) -> Result<Self> {
        let mut pool: Vec<NodeId> = (0..n_nodes).filter(|v| !train.contains(v)).collect();
        if pool.len() < count {
            return Err(Error::InvalidParameter(format!(
                "{count} targets requested, {} eligible nodes",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng::stream(seed, "attack-targets", 0));
        pool.truncate(count);
        pool.sort_unstable();
        Self::new(pool, beta, train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEdits {
    pub target: NodeId,
    pub same_class_neighbors: usize,
    pub removed: Vec<NodeId>,
    pub added: Vec<NodeId>,
    /// Edges that could not be added for lack of different-class non-neighbours.
    pub shortfall: usize,
}

/// `round(beta * s)` with halves rounded up.
pub fn removal_count(beta: f64, s: usize) -> usize {
    (beta * s as f64 + 0.5).floor() as usize
}

/// Targets are attacked in the order given, each from its own random stream, on
/// the graph as modified by the earlier targets.
pub fn dice_attack(g: &Graph, labels: &NodeLabels, spec: &AttackSpec, seed: u64) -> Result<(Graph, Vec<TargetEdits>)> {
    if g.is_directed() {
        return Err(Error::Directedness("undirected"));
    }
    let n = g.n_nodes();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let mut adj: Vec<BTreeSet<NodeId>> = (0..n).map(|v| g.neighbors(v).iter().copied().collect()).collect();
    let mut manifest = Vec::with_capacity(spec.targets.len());
    for (k, &v) in spec.targets.iter().enumerate() {
        check_node(v, n)?;
        let c = labels.require(v)?;
        let mut r = rng::stream(seed, "dice", k as u64);
        let same: Vec<NodeId> = adj[v].iter().copied().filter(|&u| u != v && labels.get(u) == Some(c)).collect();
        let m = removal_count(spec.beta, same.len());
        let mut removed: Vec<NodeId> = same.choose_multiple(&mut r, m).copied().collect();
        removed.sort_unstable();
        for &u in &removed {
            adj[v].remove(&u);
            adj[u].remove(&v);
        }
        let pool: Vec<NodeId> = (0..n)
            .filter(|&u| u != v && !adj[v].contains(&u) && labels.get(u).is_some_and(|cu| cu != c))
            .collect();
        let mut added: Vec<NodeId> = pool.choose_multiple(&mut r, m).copied().collect();
        added.sort_unstable();
        for &u in &added {
            adj[v].insert(u);
            adj[u].insert(v);
        }
        let shortfall = m - added.len();
        if shortfall > 0 {
            warn!("target {v}: only {} of {m} cross-class edges could be added", added.len());
        }
        manifest.push(TargetEdits {
            target: v,
            same_class_neighbors: same.len(),
            removed,
            added,
            shortfall,
        });
    }
    let edges = (0..n).flat_map(|s| adj[s].iter().filter(move |&&t| s <= t).map(move |&t| (s, t, 1.0)));
    let edges: Vec<_> = edges.collect();
    Ok((Graph::from_edges(n, false, edges)?, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseConfig {
    /// Replacement draws per target.
    pub n_samples: usize,
    /// Candidate pool: the `p` nearest nodes in embedding space.
    pub p: usize,
    pub gcn: GcnConfig,
    pub embedding: SpectralConfig,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            n_samples: 10,
            p: 5,
            gcn: GcnConfig::default(),
            embedding: SpectralConfig {
                feature_dim: 16,
                ..SpectralConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDefense {
    pub node: NodeId,
    pub replacements: Vec<NodeId>,
    /// Prediction of the classifier on the attacked graph.
    pub attacked: Vec<f64>,
    /// Mean prediction over the single-node-copied views.
    pub defended: Vec<f64>,
}

impl TargetDefense {
    pub fn defended_class(&self) -> usize {
        argmax(&self.defended)
    }

    pub fn attacked_class(&self) -> usize {
        argmax(&self.attacked)
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = k;
        }
    }
    best
}

/// Corrects each target with an already-trained model: draw replacements, copy
/// each in place of the target and average the target's softmax rows. No other
/// node's prediction is touched.
pub fn defend_with_model(
    g: &Graph,
    x: &FeatureMatrix,
    model: &GcnModel,
    dist: &CopyingDistribution,
    targets: &[NodeId],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<TargetDefense>> {
    if g.is_directed() {
        return Err(Error::Directedness("undirected"));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if dist.n_nodes() != g.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: g.n_nodes(),
            actual: dist.n_nodes(),
        });
    }
    for &v in targets {
        check_node(v, g.n_nodes())?;
    }
    let xw1 = model.feature_projection(x);
    targets
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut r = rng::stream(seed, "defense-replacements", k as u64);
            let replacements: Vec<NodeId> = (0..n_samples).map(|_| dist.sample_row(v, &mut r)).collect();
            let mut defended = vec![0.0; model.n_classes()];
            for &rep in &replacements {
                let view = SingleCopyView::new(g, v, rep, true)?;
                for (d, p) in defended.iter_mut().zip(model.predict_node(&view, &xw1, v)) {
                    *d += p;
                }
            }
            defended.iter_mut().for_each(|d| *d /= n_samples as f64);
            Ok(TargetDefense {
                node: v,
                replacements,
                attacked: model.predict_node(g, &xw1, v),
                defended,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DefenseOutput {
    pub model: GcnModel,
    pub embeddings: EmbeddingMatrix,
    pub targets: Vec<TargetDefense>,
}

/// Train on the attacked graph, embed it, build the order-statistic distribution
/// and correct the targets. Pass `embeddings` to skip the spectral embedding.
pub fn defend_copying(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &NodeLabels,
    train: &[NodeId],
    targets: &[NodeId],
    embeddings: Option<EmbeddingMatrix>,
    config: &DefenseConfig,
    seed: u64,
) -> Result<DefenseOutput> {
    let trained = gcn_train(g, x, labels, train, &config.gcn, rng::derive_seed(seed, "defense-gcn", 0))?;
    let embeddings = match embeddings {
        Some(e) if e.n_nodes() != g.n_nodes() => {
            return Err(Error::LengthMismatch {
                expected: g.n_nodes(),
                actual: e.n_nodes(),
            })
        }
        Some(e) => e,
        None => spectral_embedding(g, Some(x), &config.embedding, rng::derive_seed(seed, "defense-embedding", 0))?,
    };
    let dist = build_order_statistic(&pairwise_distances(&embeddings), config.p)?;
    let targets = defend_with_model(g, x, &trained.model, &dist, targets, config.n_samples, seed)?;
    Ok(DefenseOutput {
        model: trained.model,
        embeddings,
        targets,
    })
}
