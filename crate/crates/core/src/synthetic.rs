//! Planted-partition benchmarks: labeled graphs with noisy bag-of-words features,
//! and user-item interactions with latent groups.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, FeatureMatrix, Graph, NodeLabels};
use crate::rng;
use crate::theory::{sample_sbm, SbmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedConfig {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub n_features: usize,
    /// Distinct words drawn per node.
    pub words_per_node: usize,
    /// Chance that a word comes from the node's own class vocabulary rather
    /// than the whole vocabulary.
    pub signal: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_nodes: 600,
            n_classes: 2,
            p_in: 0.02,
            p_out: 0.002,
            n_features: 200,
            words_per_node: 12,
            signal: 0.3,
        }
    }
}

impl PlantedConfig {
    pub fn small() -> Self {
        PlantedConfig {
            n_nodes: 120,
            n_classes: 2,
            p_in: 0.1,
            p_out: 0.01,
            n_features: 40,
            words_per_node: 8,
            signal: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedData {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: NodeLabels,
}

/// Node `v` belongs to class `v % n_classes`. Class `c` owns the vocabulary slice
/// `[c * F / K, (c + 1) * F / K)`; features are binary.
pub fn planted_classification(config: &PlantedConfig, seed: u64) -> Result<PlantedData> {
    let PlantedConfig {
        n_nodes: n,
        n_classes: k,
        n_features: f,
        words_per_node,
        signal,
        ..
    } = *config;
    if k == 0 || n < k || f < k || words_per_node == 0 || words_per_node > f / k {
        return Err(Error::InvalidParameter(format!(
            "planted classification needs 1 <= K <= n, K <= F and 1 <= words <= F/K (n={n}, K={k}, F={f}, words={words_per_node})"
        )));
    }
    if !(0.0..=1.0).contains(&signal) {
        return Err(Error::InvalidParameter(format!("signal {signal} outside [0, 1]")));
    }
    let assignment: Vec<usize> = (0..n).map(|v| v % k).collect();
    let beta = (0..k)
        .map(|a| (0..k).map(|b| if a == b { config.p_in } else { config.p_out }).collect())
        .collect();
    let params = SbmParams::new(assignment.clone(), beta)?;
    let graph = sample_sbm(&params, &mut rng::stream(seed, "planted-graph", 0));

    let mut r = rng::stream(seed, "planted-features", 0);
    let mut triplets = Vec::with_capacity(n * words_per_node);
    for (v, &c) in assignment.iter().enumerate() {
        let (lo, hi) = (c * f / k, (c + 1) * f / k);
        let mut words = std::collections::BTreeSet::new();
        while words.len() < words_per_node {
            let w = if r.random::<f64>() < signal {
                r.random_range(lo..hi)
            } else {
                r.random_range(0..f)
            };
            words.insert(w);
        }
        triplets.extend(words.into_iter().map(|w| (v, w, 1.0)));
    }
    let features = FeatureMatrix::from_triplets(n, f, triplets)?;
    Ok(PlantedData {
        graph,
        features,
        labels: NodeLabels::from_dense(&assignment),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_groups: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig {
            n_users: 300,
            n_items: 400,
            n_groups: 5,
            p_in: 0.08,
            p_out: 0.005,
        }
    }
}

/// Users and items get groups `id % n_groups`; each pair interacts with
/// probability `p_in` inside a group and `p_out` across. Users left with no
/// interaction get one random in-group item.
pub fn planted_interactions(config: &InteractionConfig, seed: u64) -> Result<BipartiteGraph> {
    let InteractionConfig {
        n_users,
        n_items,
        n_groups,
        p_in,
        p_out,
    } = *config;
    if n_groups == 0 || n_items < n_groups || n_users == 0 {
        return Err(Error::InvalidParameter("need users, and at least one item per group".into()));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
        }
    }
    let mut r = rng::stream(seed, "planted-interactions", 0);
    let mut pairs = Vec::new();
    for u in 0..n_users {
        let before = pairs.len();
        for i in 0..n_items {
            let p = if u % n_groups == i % n_groups { p_in } else { p_out };
            if r.random::<f64>() < p {
                pairs.push((u, i));
            }
        }
        if pairs.len() == before {
            let slots = (n_items - u % n_groups).div_ceil(n_groups);
            pairs.push((u, u % n_groups + n_groups * r.random_range(0..slots)));
        }
    }
    BipartiteGraph::new(n_users, n_items, pairs)
}
