//! GCN ensembles over graphs drawn from the copying model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copying::{label_uniform_from_dense, sample_graph, CopyingDistribution};
use crate::error::{Error, Result};
use crate::gcn::{gcn_train, gcn_train_with_operator, mc_dropout_predict, GcnConfig, SoftmaxTable};
use crate::graph::{FeatureMatrix, Graph, NodeId, NodeLabels};
use crate::operator::NormalizedAdjacency;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BgcnConfig {
    pub gcn: GcnConfig,
    /// Sampled graphs, one trained member each.
    pub n_graphs: usize,
    /// MC dropout passes per member.
    pub mc_samples: usize,
    /// Predict on each member's sampled graph instead of the observed one.
    pub eval_on_sampled: bool,
}

impl Default for BgcnConfig {
    fn default() -> Self {
        BgcnConfig {
            gcn: GcnConfig::default(),
            n_graphs: 10,
            mc_samples: 10,
            eval_on_sampled: false,
        }
    }
}

impl BgcnConfig {
    pub fn validate(&self) -> Result<()> {
        self.gcn.validate()?;
        if self.n_graphs == 0 || self.mc_samples == 0 {
            return Err(Error::InvalidParameter("n_graphs and mc_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trains one GCN per sampled graph and averages all `n_graphs * mc_samples`
/// dropout passes. Members run in parallel; the average is taken in member order.
pub fn bgcn_ensemble(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &NodeLabels,
    train: &[NodeId],
    dist: &CopyingDistribution,
    config: &BgcnConfig,
    seed: u64,
) -> Result<SoftmaxTable> {
    config.validate()?;
    if g.is_directed() {
        return Err(Error::Directedness("undirected"));
    }
    let observed = (!config.eval_on_sampled).then(|| NormalizedAdjacency::new(g));
    let members: Vec<SoftmaxTable> = (0..config.n_graphs)
        .into_par_iter()
        .map(|i| {
            let i = i as u64;
            let sampled = sample_graph(g, dist, &mut rng::stream(seed, "bgcn-graph", i))?;
            let op = NormalizedAdjacency::new(&sampled);
            let member_seed = rng::derive_seed(seed, "bgcn-member", i);
            let trained = gcn_train_with_operator(&op, x, labels, train, &config.gcn, member_seed)?;
            let eval = observed.as_ref().unwrap_or(&op);
            let passes = mc_dropout_predict(&trained.model, eval, x, config.mc_samples, member_seed)?;
            SoftmaxTable::mean(&passes)
        })
        .collect::<Result<_>>()?;
    SoftmaxTable::mean(&members)
}

#[derive(Debug, Clone)]
pub struct BgcnOutput {
    /// Deterministic predictions of the GCN trained on the observed graph.
    pub base: SoftmaxTable,
    pub ensemble: SoftmaxTable,
    /// Labels driving the copying distribution: training labels where known,
    /// the base argmax elsewhere.
    pub copy_labels: Vec<usize>,
}

/// Base GCN, then an ensemble over graphs sampled with a label-uniform copying
/// distribution built from its predictions.
pub fn bgcn_copy_classify(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &NodeLabels,
    train: &[NodeId],
    config: &BgcnConfig,
    seed: u64,
) -> Result<BgcnOutput> {
    config.validate()?;
    let base_model = gcn_train(g, x, labels, train, &config.gcn, rng::derive_seed(seed, "bgcn-base", 0))?;
    let base = base_model.model.predict(&NormalizedAdjacency::new(g), x)?;
    let mut copy_labels = base.predictions();
    for &v in train {
        copy_labels[v] = labels.require(v)?;
    }
    let dist = label_uniform_from_dense(&copy_labels);
    let ensemble = bgcn_ensemble(g, x, labels, train, &dist, config, seed)?;
    Ok(BgcnOutput {
        base,
        ensemble,
        copy_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::accuracy;
    use crate::synthetic::{planted_classification, PlantedConfig};

    fn small_config() -> BgcnConfig {
        BgcnConfig {
            gcn: GcnConfig {
                epochs: 60,
                ..Default::default()
            },
            n_graphs: 3,
            mc_samples: 2,
            eval_on_sampled: false,
        }
    }

    #[test]
    fn self_copy_members_train_on_the_observed_graph() {
        let data = planted_classification(&PlantedConfig::small(), 4).unwrap();
        let train: Vec<_> = (0..10).collect();
        let cfg = small_config();
        let dist = CopyingDistribution::self_copy(data.graph.n_nodes());
        let a = bgcn_ensemble(&data.graph, &data.features, &data.labels, &train, &dist, &cfg, 1).unwrap();
        let sampled = BgcnConfig {
            eval_on_sampled: true,
            ..cfg
        };
        let b = bgcn_ensemble(&data.graph, &data.features, &data.labels, &train, &dist, &sampled, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let data = planted_classification(&PlantedConfig::small(), 5).unwrap();
        let train: Vec<_> = (0..20).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| bgcn_copy_classify(&data.graph, &data.features, &data.labels, &train, &small_config(), 9))
                .unwrap()
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.base, b.base);
    }

    #[test]
    fn ensemble_classifies_planted_blocks() {
        let data = planted_classification(&PlantedConfig::small(), 6).unwrap();
        let train: Vec<_> = (0..20).collect();
        let test: Vec<_> = (20..data.graph.n_nodes()).collect();
        let out = bgcn_copy_classify(&data.graph, &data.features, &data.labels, &train, &small_config(), 2).unwrap();
        assert!(accuracy(&out.ensemble, &data.labels, &test).unwrap() > 0.7);
        for &v in &train {
            assert_eq!(out.copy_labels[v], data.labels.get(v).unwrap());
        }
    }
}
