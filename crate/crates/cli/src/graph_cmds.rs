//! `stats`, `sample` and `verify`.

use std::path::PathBuf;

use copygraph::copying::{build_knn_embedding, build_label_uniform, build_order_statistic, sample_graph_with_zeta};
use copygraph::embedding::{pairwise_distances, spectral_embedding, EmbeddingMatrix, SpectralConfig};
use copygraph::io::{load_edge_list, load_features, load_labels, write_edge_list, FeatureFormat};
use copygraph::rng;
use copygraph::stats::{mean_statistics, summarize, GraphStatistics};
use copygraph::theory::{
    power_law_distribution, ring_distribution, verify_er_marginal, verify_sbm_marginal, within_class_distribution,
    ErParams, SbmParams, VerifyConfig,
};
use copygraph::{CopyingDistribution, Graph, NodeLabels};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{require, Params, RunConfig};
use crate::error::CliError;
use crate::report::Outcome;

fn stats_json(name: Option<&str>, s: &GraphStatistics) -> Value {
    let mut v = serde_json::to_value(s).expect("statistics serialize");
    if let (Some(name), Value::Object(m)) = (name, &mut v) {
        m.insert("graph".into(), Value::String(name.into()));
    }
    v
}

/// Restricts to the largest connected component, carrying labels along.
fn maybe_lcc(g: Graph, labels: Option<NodeLabels>, lcc: bool) -> Result<(Graph, Option<NodeLabels>), CliError> {
    if !lcc {
        return Ok((g, labels));
    }
    let (sub, remap) = g.largest_connected_component()?;
    let labels = labels.map(|l| l.remap(&remap, sub.n_nodes()));
    Ok((sub, labels))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsParams {
    pub graphs: Vec<PathBuf>,
    pub directed: bool,
    /// Node labels for the cross-community fraction; shared by all graphs.
    pub labels: Option<PathBuf>,
    /// Restrict each graph to its largest connected component first.
    pub lcc: bool,
}

impl Params for StatsParams {
    fn check(&self) -> Vec<String> {
        if self.graphs.is_empty() {
            vec!["graphs: at least one edge list is required".into()]
        } else {
            Vec::new()
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.graphs.iter().chain(&self.labels).cloned().collect()
    }
}

pub fn run_stats(cfg: &RunConfig<StatsParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let rows = p
        .graphs
        .par_iter()
        .map(|path| {
            let g = load_edge_list(path, p.directed)?;
            let labels = p.labels.as_ref().map(|l| load_labels(l, g.n_nodes())).transpose()?;
            let (g, labels) = maybe_lcc(g, labels, p.lcc)?;
            let s = summarize(&g, labels.as_ref())?;
            Ok(stats_json(Some(&path.display().to_string()), &s))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Outcome::new(Value::Array(rows)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    SelfCopy,
    /// Uniform over every node.
    Uniform,
    /// Uniform over nodes sharing the label; needs `labels`.
    LabelUniform,
    /// Uniform over the `k` nearest nodes in embedding space.
    Knn { k: usize },
    /// Uniform over the `p` nearest nodes, the node itself included.
    OrderStatistic { p: usize },
    /// `node,candidate,probability` triplets.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub graph: Option<PathBuf>,
    pub directed: bool,
    pub lcc: bool,
    pub labels: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub feature_format: FeatureFormat,
    /// Precomputed embeddings (CSV, one row per node) for knn and order-statistic laws.
    pub embeddings: Option<PathBuf>,
    /// Spectral embedding used when no embedding file is given.
    pub embedding: SpectralConfig,
    pub distribution: DistributionSpec,
    pub n_samples: usize,
    /// Write each sampled edge list and replacement vector.
    pub write_graphs: bool,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            graph: None,
            directed: false,
            lcc: false,
            labels: None,
            features: None,
            feature_format: FeatureFormat::Triplets,
            embeddings: None,
            embedding: SpectralConfig::default(),
            distribution: DistributionSpec::Knn { k: 5 },
            n_samples: 1,
            write_graphs: true,
        }
    }
}

impl Params for SampleParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        require(&mut e, "graph", &self.graph);
        if self.n_samples == 0 {
            e.push("n_samples: must be at least 1".into());
        }
        match &self.distribution {
            DistributionSpec::LabelUniform if self.labels.is_none() => {
                e.push("distribution: label-uniform needs `labels`".into())
            }
            DistributionSpec::Knn { k: 0 } => e.push("distribution: k must be at least 1".into()),
            DistributionSpec::OrderStatistic { p: 0 } => e.push("distribution: p must be at least 1".into()),
            DistributionSpec::File { .. } if self.lcc => {
                e.push("distribution: a distribution file cannot be combined with `lcc`".into())
            }
            _ => {}
        }
        if (self.features.is_some() || self.embeddings.is_some()) && self.lcc {
            e.push("lcc: not supported together with features or embedding files".into());
        }
        e
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = [&self.graph, &self.labels, &self.features, &self.embeddings]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        if let DistributionSpec::File { path } = &self.distribution {
            v.push(path.clone());
        }
        v
    }
}

fn embeddings_for(g: &Graph, p: &SampleParams, seed: u64) -> Result<EmbeddingMatrix, CliError> {
    if let Some(path) = &p.embeddings {
        let e = EmbeddingMatrix::load_csv(path)?;
        if e.n_nodes() != g.n_nodes() {
            return Err(copygraph::Error::LengthMismatch {
                expected: g.n_nodes(),
                actual: e.n_nodes(),
            }
            .into());
        }
        return Ok(e);
    }
    let x = p
        .features
        .as_ref()
        .map(|f| load_features(f, p.feature_format, g.n_nodes()))
        .transpose()?;
    Ok(spectral_embedding(g, x.as_ref(), &p.embedding, rng::derive_seed(seed, "cli-embedding", 0))?)
}

fn build_distribution(
    g: &Graph,
    labels: Option<&NodeLabels>,
    p: &SampleParams,
    seed: u64,
) -> Result<CopyingDistribution, CliError> {
    let n = g.n_nodes();
    Ok(match &p.distribution {
        DistributionSpec::SelfCopy => CopyingDistribution::self_copy(n),
        DistributionSpec::Uniform => CopyingDistribution::uniform_all(n),
        DistributionSpec::LabelUniform => build_label_uniform(labels.expect("checked at validation"))?,
        DistributionSpec::Knn { k } => build_knn_embedding(&embeddings_for(g, p, seed)?, *k)?,
        DistributionSpec::OrderStatistic { p: pool } => {
            build_order_statistic(&pairwise_distances(&embeddings_for(g, p, seed)?), *pool)?
        }
        DistributionSpec::File { path } => CopyingDistribution::load_triplets(path, n)?,
    })
}

pub fn run_sample(cfg: &RunConfig<SampleParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let g = load_edge_list(p.graph.as_ref().expect("checked"), p.directed)?;
    let labels = p.labels.as_ref().map(|l| load_labels(l, g.n_nodes())).transpose()?;
    let (g, labels) = maybe_lcc(g, labels, p.lcc)?;
    let dist = build_distribution(&g, labels.as_ref(), p, cfg.seed)?;
    let samples = (0..p.n_samples)
        .into_par_iter()
        .map(|i| {
            let (s, zeta) = sample_graph_with_zeta(&g, &dist, &mut rng::stream(cfg.seed, "cli-sample", i as u64))?;
            let stats = summarize(&s, labels.as_ref())?;
            Ok((s, zeta, stats))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let all: Vec<GraphStatistics> = samples.iter().map(|(_, _, s)| s.clone()).collect();
    let observed = summarize(&g, labels.as_ref())?;
    let result = json!({
        "distribution": p.distribution,
        "n_samples": p.n_samples,
        "observed": stats_json(None, &observed),
        "mean": stats_json(None, &mean_statistics(&all)?),
        "samples": all.iter().map(|s| stats_json(None, s)).collect::<Vec<_>>(),
    });
    let mut out = Outcome::new(result);
    if p.write_graphs {
        for (i, (s, zeta, _)) in samples.iter().enumerate() {
            out = out
                .artifact(&format!("sample_{i:03}.txt"), write_edge_list(s))
                .artifact(&format!("zeta_{i:03}.csv"), zeta.to_csv());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Er,
    Sbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyDistribution {
    PowerLaw,
    Ring,
    /// Uniform over all nodes; crosses blocks, so it is the negative control for `sbm`.
    Uniform,
    WithinClass,
    SelfCopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub model: ModelKind,
    pub n_nodes: usize,
    /// Edge probability for `er`.
    pub theta: f64,
    /// Equal-size blocks for `sbm`.
    pub n_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Defaults to power-law for `er` and within-class for `sbm`.
    pub distribution: Option<VerifyDistribution>,
    pub exponent: f64,
    pub harness: VerifyConfig,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            model: ModelKind::Er,
            n_nodes: 300,
            theta: 0.1,
            n_blocks: 2,
            p_in: 0.2,
            p_out: 0.02,
            distribution: None,
            exponent: 1.5,
            harness: VerifyConfig::default(),
        }
    }
}

impl Params for VerifyParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.n_nodes < 2 {
            e.push("n_nodes: need at least 2 nodes".into());
        }
        for (name, x) in [("theta", self.theta), ("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&x) {
                e.push(format!("{name}: {x} outside [0, 1]"));
            }
        }
        if self.model == ModelKind::Sbm && (self.n_blocks == 0 || self.n_blocks > self.n_nodes) {
            e.push(format!("n_blocks: {} must be in 1..=n_nodes", self.n_blocks));
        }
        if self.harness.n_trials == 0 || self.harness.samples_per_trial == 0 {
            e.push("harness: n_trials and samples_per_trial must be at least 1".into());
        }
        e
    }

    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }
}

pub fn run_verify(cfg: &RunConfig<VerifyParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let n = p.n_nodes;
    let blocks: Vec<usize> = match p.model {
        ModelKind::Er => vec![0; n],
        ModelKind::Sbm => (0..n).map(|v| v * p.n_blocks / n).collect(),
    };
    let kind = p.distribution.unwrap_or(match p.model {
        ModelKind::Er => VerifyDistribution::PowerLaw,
        ModelKind::Sbm => VerifyDistribution::WithinClass,
    });
    let dist = match kind {
        VerifyDistribution::PowerLaw => power_law_distribution(n, p.exponent),
        VerifyDistribution::Ring => ring_distribution(n),
        VerifyDistribution::Uniform => CopyingDistribution::uniform_all(n),
        VerifyDistribution::WithinClass => within_class_distribution(&blocks),
        VerifyDistribution::SelfCopy => CopyingDistribution::self_copy(n),
    };
    let report = match p.model {
        ModelKind::Er => verify_er_marginal(&ErParams::new(n, p.theta)?, &dist, &p.harness, cfg.seed)?,
        ModelKind::Sbm => {
            let beta = (0..p.n_blocks)
                .map(|a| (0..p.n_blocks).map(|b| if a == b { p.p_in } else { p.p_out }).collect())
                .collect();
            verify_sbm_marginal(&SbmParams::new(blocks, beta)?, &dist, &p.harness, cfg.seed)?
        }
    };
    let mut result = serde_json::to_value(&report).expect("report serializes");
    if let Value::Object(m) = &mut result {
        m.insert("distribution".into(), serde_json::to_value(kind).expect("enum serializes"));
    }
    Ok(Outcome::new(result))
}
