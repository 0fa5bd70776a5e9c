//! `classify`, `attack` and `defend`.

use std::fmt::Write as _;
use std::path::PathBuf;

use copygraph::adversarial::{defend_copying, dice_attack, AttackSpec, DefenseConfig, TargetEdits};
use copygraph::bgcn::{bgcn_copy_classify, BgcnConfig};
use copygraph::embedding::EmbeddingMatrix;
use copygraph::gcn::{accuracy, gcn_train, LabelSplit};
use copygraph::io::{load_edge_list, load_features, load_labels, write_edge_list, FeatureFormat};
use copygraph::operator::NormalizedAdjacency;
use copygraph::rng;
use copygraph::{FeatureMatrix, Graph, NodeId, NodeLabels};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{require, Params, RunConfig};
use crate::error::{io_err, CliError};
use crate::report::{to_pretty, Outcome};

fn load_labeled_graph(graph: &Option<PathBuf>, labels: &Option<PathBuf>) -> Result<(Graph, NodeLabels), CliError> {
    let g = load_edge_list(graph.as_ref().expect("checked"), false)?;
    let l = load_labels(labels.as_ref().expect("checked"), g.n_nodes())?;
    Ok((g, l))
}

fn load_x(path: &Option<PathBuf>, format: FeatureFormat, n: usize, normalize: bool) -> Result<FeatureMatrix, CliError> {
    let x = load_features(path.as_ref().expect("checked"), format, n)?;
    Ok(if normalize { x.row_normalized() } else { x })
}

fn split_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, "cli-split", 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gcn,
    Bgcn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    pub graph: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub feature_format: FeatureFormat,
    /// Scale each feature row to sum 1.
    pub normalize_features: bool,
    pub labels_per_class: usize,
    /// Test nodes drawn from the unlabeled rest; all of them when unset.
    pub n_test: Option<usize>,
    /// Remove every edge touching a test node before training.
    pub isolate_test: bool,
    pub method: Method,
    pub bgcn: BgcnConfig,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            graph: None,
            labels: None,
            features: None,
            feature_format: FeatureFormat::Triplets,
            normalize_features: true,
            labels_per_class: 20,
            n_test: Some(1000),
            isolate_test: false,
            method: Method::Bgcn,
            bgcn: BgcnConfig::default(),
        }
    }
}

impl Params for ClassifyParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        require(&mut e, "graph", &self.graph);
        require(&mut e, "labels", &self.labels);
        require(&mut e, "features", &self.features);
        if self.labels_per_class == 0 {
            e.push("labels_per_class: must be at least 1".into());
        }
        if let Err(err) = self.bgcn.validate() {
            e.push(format!("bgcn: {err}"));
        }
        e
    }

    fn inputs(&self) -> Vec<PathBuf> {
        [&self.graph, &self.labels, &self.features].into_iter().flatten().cloned().collect()
    }
}

pub fn run_classify(cfg: &RunConfig<ClassifyParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let (g, labels) = load_labeled_graph(&p.graph, &p.labels)?;
    let x = load_x(&p.features, p.feature_format, g.n_nodes(), p.normalize_features)?;
    let split = LabelSplit::random_per_class(&labels, p.labels_per_class, p.n_test, split_seed(cfg.seed))?;
    let g = if p.isolate_test { g.isolate(&split.test) } else { g };
    let train_seed = rng::derive_seed(cfg.seed, "cli-classify", 0);
    let (table, n_g, s) = match p.method {
        Method::Gcn => {
            let trained = gcn_train(&g, &x, &labels, &split.train, &p.bgcn.gcn, train_seed)?;
            (trained.model.predict(&NormalizedAdjacency::new(&g), &x)?, None, None)
        }
        Method::Bgcn => {
            let out = bgcn_copy_classify(&g, &x, &labels, &split.train, &p.bgcn, train_seed)?;
            (out.ensemble, Some(p.bgcn.n_graphs), Some(p.bgcn.mc_samples))
        }
    };
    let acc = accuracy(&table, &labels, &split.test)?;
    let result = json!({
        "method": p.method,
        "accuracy": acc,
        "n_g": n_g,
        "s": s,
        "seed": cfg.seed,
        "n_train": split.train.len(),
        "n_test": split.test.len(),
    });
    Ok(Outcome::new(result)
        .artifact("probabilities.csv", table.to_csv())
        .artifact("split.json", to_pretty(&split)))
}

/// Per-target edits plus the training nodes the targets were chosen around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackManifest {
    pub beta: f64,
    pub train: Vec<NodeId>,
    pub targets: Vec<TargetEdits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackParams {
    pub graph: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub beta: f64,
    /// Random non-training targets, used when `targets` is unset.
    pub n_targets: usize,
    pub targets: Option<Vec<NodeId>>,
    pub labels_per_class: usize,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            graph: None,
            labels: None,
            beta: 0.5,
            n_targets: 40,
            targets: None,
            labels_per_class: 20,
        }
    }
}

impl Params for AttackParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        require(&mut e, "graph", &self.graph);
        require(&mut e, "labels", &self.labels);
        if !(0.0..=1.0).contains(&self.beta) {
            e.push(format!("beta: {} outside [0, 1]", self.beta));
        }
        if self.targets.is_none() && self.n_targets == 0 {
            e.push("n_targets: must be at least 1".into());
        }
        e
    }

    fn inputs(&self) -> Vec<PathBuf> {
        [&self.graph, &self.labels].into_iter().flatten().cloned().collect()
    }
}

pub fn run_attack(cfg: &RunConfig<AttackParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let (g, labels) = load_labeled_graph(&p.graph, &p.labels)?;
    let split = LabelSplit::random_per_class(&labels, p.labels_per_class, None, split_seed(cfg.seed))?;
    let spec = match &p.targets {
        Some(t) => AttackSpec::new(t.clone(), p.beta, &split.train)?,
        None => AttackSpec::random_targets(
            g.n_nodes(),
            &split.train,
            p.n_targets,
            p.beta,
            rng::derive_seed(cfg.seed, "cli-targets", 0),
        )?,
    };
    let (attacked, edits) = dice_attack(&g, &labels, &spec, rng::derive_seed(cfg.seed, "cli-dice", 0))?;
    let result = json!({
        "beta": p.beta,
        "n_targets": edits.len(),
        "n_edges_before": g.n_edges(),
        "n_edges_after": attacked.n_edges(),
        "removed": edits.iter().map(|e| e.removed.len()).sum::<usize>(),
        "added": edits.iter().map(|e| e.added.len()).sum::<usize>(),
        "shortfall": edits.iter().map(|e| e.shortfall).sum::<usize>(),
    });
    let manifest = AttackManifest {
        beta: p.beta,
        train: split.train,
        targets: edits,
    };
    Ok(Outcome::new(result)
        .artifact("attacked.txt", write_edge_list(&attacked))
        .artifact("manifest.json", to_pretty(&manifest)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefendParams {
    /// The attacked graph.
    pub graph: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub feature_format: FeatureFormat,
    pub normalize_features: bool,
    /// Attack manifest; supplies the targets and the training nodes.
    pub manifest: Option<PathBuf>,
    /// Explicit targets when there is no manifest; training nodes then come from the seeded split.
    pub targets: Option<Vec<NodeId>>,
    pub labels_per_class: usize,
    /// Precomputed embeddings; the spectral embedding is used otherwise.
    pub embeddings: Option<PathBuf>,
    pub defense: DefenseConfig,
}

impl Default for DefendParams {
    fn default() -> Self {
        DefendParams {
            graph: None,
            labels: None,
            features: None,
            feature_format: FeatureFormat::Triplets,
            normalize_features: true,
            manifest: None,
            targets: None,
            labels_per_class: 20,
            embeddings: None,
            defense: DefenseConfig::default(),
        }
    }
}

impl Params for DefendParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        require(&mut e, "graph", &self.graph);
        require(&mut e, "labels", &self.labels);
        require(&mut e, "features", &self.features);
        match (&self.manifest, &self.targets) {
            (None, None) => e.push("targets: give `manifest` or `targets`".into()),
            (Some(_), Some(_)) => e.push("targets: give `manifest` or `targets`, not both".into()),
            _ => {}
        }
        if let Err(err) = self.defense.gcn.validate() {
            e.push(format!("defense: {err}"));
        }
        if self.defense.n_samples == 0 || self.defense.p == 0 {
            e.push("defense: n_samples and p must be at least 1".into());
        }
        e
    }

    fn inputs(&self) -> Vec<PathBuf> {
        [&self.graph, &self.labels, &self.features, &self.manifest, &self.embeddings]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

pub fn run_defend(cfg: &RunConfig<DefendParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let (g, labels) = load_labeled_graph(&p.graph, &p.labels)?;
    let x = load_x(&p.features, p.feature_format, g.n_nodes(), p.normalize_features)?;
    let (train, targets) = match &p.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let m: AttackManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(vec![format!("manifest {}: {e}", path.display())]))?;
            (m.train, m.targets.iter().map(|t| t.target).collect::<Vec<_>>())
        }
        None => {
            let split = LabelSplit::random_per_class(&labels, p.labels_per_class, None, split_seed(cfg.seed))?;
            (split.train, p.targets.clone().expect("checked"))
        }
    };
    let embeddings = p.embeddings.as_ref().map(|e| EmbeddingMatrix::load_csv(e)).transpose()?;
    let out = defend_copying(
        &g,
        &x,
        &labels,
        &train,
        &targets,
        embeddings,
        &p.defense,
        rng::derive_seed(cfg.seed, "cli-defend", 0),
    )?;

    let k = out.model.n_classes();
    let mut csv = String::from("node,label,attacked_class,defended_class");
    for c in 0..k {
        write!(csv, ",p{c}").unwrap();
    }
    csv.push('\n');
    let (mut n_labeled, mut hit_attacked, mut hit_defended) = (0usize, 0usize, 0usize);
    for t in &out.targets {
        let label = labels.get(t.node);
        if let Some(y) = label {
            n_labeled += 1;
            hit_attacked += usize::from(t.attacked_class() == y);
            hit_defended += usize::from(t.defended_class() == y);
        }
        let label = label.map_or(String::new(), |y| y.to_string());
        write!(csv, "{},{label},{},{}", t.node, t.attacked_class(), t.defended_class()).unwrap();
        for q in &t.defended {
            write!(csv, ",{q}").unwrap();
        }
        csv.push('\n');
    }
    let frac = |hits: usize| (n_labeled > 0).then(|| hits as f64 / n_labeled as f64);
    let result = json!({
        "n_targets": out.targets.len(),
        "attacked_accuracy": frac(hit_attacked),
        "defended_accuracy": frac(hit_defended),
        "targets": out.targets,
    });
    Ok(Outcome::new(result).artifact("targets.csv", csv))
}
