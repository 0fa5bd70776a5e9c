//! Two-layer graph convolutional classifier with dropout, trained by Adam with
//! hand-written backpropagation, plus Monte Carlo dropout prediction.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, NodeId, NodeLabels};
use crate::operator::{normalized_row, self_loop_degree, NormalizedAdjacency};
use crate::rng::{self, StreamRng};
use crate::view::AdjacencyView;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcnConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    /// L2 penalty `weight_decay / 2 * ||W1||^2` on the first layer.
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: 16,
            dropout: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidParameter("hidden must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive and weight decay nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-node class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxTable(Array2<f64>);

impl SoftmaxTable {
    pub fn new(p: Array2<f64>) -> Result<Self> {
        for (i, row) in p.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            if (s - 1.0).abs() > 1e-6 || row.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidParameter(format!("softmax row {i} sums to {s}")));
            }
        }
        Ok(SoftmaxTable(p))
    }

    pub fn n_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn row(&self, v: NodeId) -> Vec<f64> {
        self.0.row(v).to_vec()
    }

    /// Most probable class; ties go to the smallest class id.
    pub fn argmax(&self, v: NodeId) -> usize {
        argmax(self.0.row(v).iter().copied())
    }

    pub fn predictions(&self) -> Vec<usize> {
        (0..self.n_nodes()).map(|v| self.argmax(v)).collect()
    }

    /// Entrywise mean, summed in slice order.
    pub fn mean(tables: &[SoftmaxTable]) -> Result<SoftmaxTable> {
        let first = tables.first().ok_or_else(|| Error::InvalidParameter("no tables to average".into()))?;
        let mut acc = Array2::zeros(first.0.raw_dim());
        for t in tables {
            if t.0.raw_dim() != acc.raw_dim() {
                return Err(Error::Shape("softmax tables differ in shape".into()));
            }
            acc += &t.0;
        }
        acc /= tables.len() as f64;
        SoftmaxTable::new(acc)
    }

    pub fn with_rows(&self, rows: &[(NodeId, Vec<f64>)]) -> Result<SoftmaxTable> {
        let mut p = self.0.clone();
        for (v, r) in rows {
            p.row_mut(*v).assign(&Array1::from(r.clone()));
        }
        SoftmaxTable::new(p)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for k in 0..self.n_classes() {
            out.push_str(&format!(",p{k}"));
        }
        out.push('\n');
        for (v, row) in self.0.rows().into_iter().enumerate() {
            out.push_str(&v.to_string());
            for x in row {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, x) in it.enumerate() {
        if x > best.1 {
            best = (k, x);
        }
    }
    best.0
}

pub fn accuracy(table: &SoftmaxTable, labels: &NodeLabels, nodes: &[NodeId]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidParameter("accuracy over an empty node set".into()));
    }
    let mut hits = 0usize;
    for &v in nodes {
        if table.argmax(v) == labels.require(v)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / nodes.len() as f64)
}

/// Disjoint training and test nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSplit {
    pub train: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl LabelSplit {
    pub fn new(train: Vec<NodeId>, test: Vec<NodeId>, labels: &NodeLabels) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidParameter("empty training set".into()));
        }
        let mut in_train = vec![false; labels.len()];
        for &v in &train {
            labels.require(v)?;
            in_train[v] = true;
        }
        if let Some(&v) = test.iter().find(|&&v| in_train[v]) {
            return Err(Error::InvalidParameter(format!("node {v} is in both train and test sets")));
        }
        Ok(LabelSplit { train, test })
    }

    /// `per_class` random training nodes from every class; the test set is `n_test`
    /// random labeled nodes from the rest (all of them when `None`).
    pub fn random_per_class(labels: &NodeLabels, per_class: usize, n_test: Option<usize>, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, "label-split", 0);
        let mut by_class: Vec<Vec<NodeId>> = vec![Vec::new(); labels.n_classes()];
        for v in 0..labels.len() {
            if let Some(c) = labels.get(v) {
                by_class[c].push(v);
            }
        }
        let mut train = Vec::new();
        for (c, members) in by_class.iter_mut().enumerate() {
            if members.len() < per_class {
                return Err(Error::InvalidParameter(format!(
                    "class {c} has {} nodes, fewer than {per_class}",
                    members.len()
                )));
            }
            members.shuffle(&mut r);
            train.extend_from_slice(&members[..per_class]);
        }
        train.sort_unstable();
        let mut rest: Vec<NodeId> = (0..labels.len())
            .filter(|&v| labels.get(v).is_some() && train.binary_search(&v).is_err())
            .collect();
        rest.shuffle(&mut r);
        if let Some(k) = n_test {
            rest.truncate(k);
        }
        rest.sort_unstable();
        Self::new(train, rest, labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub dropout: f64,
}

/// Dropout scale factors for one stochastic pass: one per stored feature entry and
/// one per hidden unit. Entries are 0 (dropped) or `1 / (1 - rate)`.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    x: Vec<f64>,
    h: Array2<f64>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(nnz: usize, n: usize, hidden: usize, rate: f64, rng: &mut R) -> Self {
        let keep = 1.0 - rate;
        let mut draw = || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
        let x = (0..nnz).map(|_| draw()).collect();
        let h = Array2::from_shape_simple_fn((n, hidden), draw);
        DropoutMasks { x, h }
    }
}

/// `X_d W` where `X_d` is `X` with its stored entries scaled by the mask.
fn sparse_matmul(x: &FeatureMatrix, mask: Option<&[f64]>, w: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((x.n_rows(), w.ncols()));
    let mut k = 0;
    for i in 0..x.n_rows() {
        let (idx, val) = x.row(i);
        let mut out_row = out.row_mut(i);
        for (&j, &v) in idx.iter().zip(val) {
            let s = mask.map_or(1.0, |m| m[k]);
            if s != 0.0 {
                out_row.scaled_add(v * s, &w.row(j));
            }
            k += 1;
        }
    }
    out
}

/// `X_d^T G`.
fn sparse_t_matmul(x: &FeatureMatrix, mask: Option<&[f64]>, g: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((x.n_cols(), g.ncols()));
    let mut k = 0;
    for i in 0..x.n_rows() {
        let (idx, val) = x.row(i);
        let g_row = g.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            let s = mask.map_or(1.0, |m| m[k]);
            if s != 0.0 {
                out.row_mut(j).scaled_add(v * s, &g_row);
            }
            k += 1;
        }
    }
    out
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

struct Forward {
    h_pre: Array2<f64>,
    h_drop: Array2<f64>,
    p: Array2<f64>,
}

/// Cross-entropy gradients and loss for one pass.
pub struct Gradients {
    pub loss: f64,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl GcnModel {
    /// Glorot-uniform weights.
    pub fn init(n_features: usize, hidden: usize, n_classes: usize, dropout: f64, seed: u64) -> Self {
        let mut r = rng::stream(seed, "gcn-init", 0);
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || r.random_range(-limit..limit))
        };
        let w1 = glorot(n_features, hidden);
        let w2 = glorot(hidden, n_classes);
        GcnModel { w1, w2, dropout }
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }

    fn check_shapes(&self, op: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<()> {
        if x.n_rows() != op.n_nodes() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                x.n_rows(),
                op.n_nodes()
            )));
        }
        if x.n_cols() != self.w1.nrows() {
            return Err(Error::Shape(format!(
                "{} features, model expects {}",
                x.n_cols(),
                self.w1.nrows()
            )));
        }
        Ok(())
    }

    fn forward(&self, op: &NormalizedAdjacency, x: &FeatureMatrix, masks: Option<&DropoutMasks>) -> Forward {
        let xw = sparse_matmul(x, masks.map(|m| m.x.as_slice()), &self.w1);
        let h_pre = op.apply(xw.view());
        let mut h_drop = h_pre.mapv(|v| v.max(0.0));
        if let Some(m) = masks {
            h_drop *= &m.h;
        }
        let hw = h_drop.dot(&self.w2);
        let z = op.apply(hw.view());
        Forward {
            h_pre,
            h_drop,
            p: softmax_rows(&z),
        }
    }

    pub fn predict(&self, op: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<SoftmaxTable> {
        self.check_shapes(op, x)?;
        SoftmaxTable::new(self.forward(op, x, None).p)
    }

    /// One forward pass; with `dropout_on`, masks are drawn from `rng`.
    pub fn forward_pass<R: Rng + ?Sized>(
        &self,
        op: &NormalizedAdjacency,
        x: &FeatureMatrix,
        dropout_on: bool,
        rng: &mut R,
    ) -> Result<SoftmaxTable> {
        self.check_shapes(op, x)?;
        let masks = (dropout_on && self.dropout > 0.0)
            .then(|| DropoutMasks::sample(x.nnz(), x.n_rows(), self.w1.ncols(), self.dropout, rng));
        SoftmaxTable::new(self.forward(op, x, masks.as_ref()).p)
    }

    /// Loss and gradients for fixed dropout masks.
    pub fn gradients(
        &self,
        op: &NormalizedAdjacency,
        x: &FeatureMatrix,
        labels: &NodeLabels,
        train: &[NodeId],
        weight_decay: f64,
        masks: Option<&DropoutMasks>,
    ) -> Result<Gradients> {
        self.check_shapes(op, x)?;
        let f = self.forward(op, x, masks);
        let n_train = train.len() as f64;
        let mut dz = Array2::zeros(f.p.raw_dim());
        let mut loss = 0.0;
        for &v in train {
            let y = labels.require(v)?;
            loss -= f.p[[v, y]].max(f64::MIN_POSITIVE).ln();
            let mut row = dz.row_mut(v);
            row.assign(&f.p.row(v));
            row[y] -= 1.0;
        }
        dz /= n_train;
        loss /= n_train;
        loss += 0.5 * weight_decay * self.w1.iter().map(|w| w * w).sum::<f64>();

        let d_hw = op.apply(dz.view());
        let w2 = f.h_drop.t().dot(&d_hw);
        let mut d_h = d_hw.dot(&self.w2.t());
        if let Some(m) = masks {
            d_h *= &m.h;
        }
        Zip::from(&mut d_h).and(&f.h_pre).for_each(|g, &h| {
            if h <= 0.0 {
                *g = 0.0;
            }
        });
        let d_xw = op.apply(d_h.view());
        let mut w1 = sparse_t_matmul(x, masks.map(|m| m.x.as_slice()), &d_xw);
        w1.scaled_add(weight_decay, &self.w1);
        Ok(Gradients { loss, w1, w2 })
    }

    /// Precomputed `X W1` for localized evaluation.
    pub fn feature_projection(&self, x: &FeatureMatrix) -> Array2<f64> {
        sparse_matmul(x, None, &self.w1)
    }

    /// Deterministic prediction at node `v` of any adjacency view, touching only its
    /// two-hop neighbourhood. `xw1` is [`Self::feature_projection`] of the features.
    pub fn predict_node<V: AdjacencyView + ?Sized>(&self, view: &V, xw1: &Array2<f64>, v: NodeId) -> Vec<f64> {
        let deg = |u: NodeId| self_loop_degree(view, u);
        let row_v = normalized_row(view, v, deg);
        let mut logits = Array1::<f64>::zeros(self.n_classes());
        for &(u, a_vu) in &row_v {
            let mut h = Array1::<f64>::zeros(xw1.ncols());
            for (w, a_uw) in normalized_row(view, u, deg) {
                h.scaled_add(a_uw, &xw1.row(w));
            }
            h.mapv_inplace(|x| x.max(0.0));
            logits.scaled_add(a_vu, &h.dot(&self.w2));
        }
        let p = softmax_rows(&logits.insert_axis(Axis(0)));
        p.row(0).to_vec()
    }
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(shapes: &[&Array2<f64>], lr: f64) -> Self {
        Adam {
            m: shapes.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
            v: shapes.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[&Array2<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            Zip::from(&mut **p)
                .and(&mut self.m[k])
                .and(&mut self.v[k])
                .and(*g)
                .for_each(|p, m, v, &g| {
                    *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                    *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                });
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedGcn {
    pub model: GcnModel,
    pub losses: Vec<f64>,
}

/// Full-batch training with dropout on the features and hidden layer.
pub fn gcn_train_with_operator(
    op: &NormalizedAdjacency,
    x: &FeatureMatrix,
    labels: &NodeLabels,
    train: &[NodeId],
    config: &GcnConfig,
    seed: u64,
) -> Result<TrainedGcn> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if labels.len() != op.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: op.n_nodes(),
            actual: labels.len(),
        });
    }
    let mut model = GcnModel::init(x.n_cols(), config.hidden, labels.n_classes(), config.dropout, seed);
    model.check_shapes(op, x)?;
    let mut adam = Adam::new(&[&model.w1, &model.w2], config.learning_rate);
    let mut r: StreamRng = rng::stream(seed, "gcn-dropout", 0);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let masks = (config.dropout > 0.0)
            .then(|| DropoutMasks::sample(x.nnz(), x.n_rows(), config.hidden, config.dropout, &mut r));
        let g = model.gradients(op, x, labels, train, config.weight_decay, masks.as_ref())?;
        if !g.loss.is_finite() {
            return Err(Error::Divergence(format!("loss {} at epoch {epoch}", g.loss)));
        }
        losses.push(g.loss);
        let GcnModel { w1, w2, .. } = &mut model;
        adam.step(&mut [w1, w2], &[&g.w1, &g.w2]);
    }
    Ok(TrainedGcn { model, losses })
}

pub fn gcn_train(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &NodeLabels,
    train: &[NodeId],
    config: &GcnConfig,
    seed: u64,
) -> Result<TrainedGcn> {
    if g.is_directed() {
        return Err(Error::Directedness("undirected"));
    }
    gcn_train_with_operator(&NormalizedAdjacency::new(g), x, labels, train, config, seed)
}

/// `s` stochastic passes, pass `k` drawing masks from its own stream.
pub fn mc_dropout_predict(
    model: &GcnModel,
    op: &NormalizedAdjacency,
    x: &FeatureMatrix,
    s: usize,
    seed: u64,
) -> Result<Vec<SoftmaxTable>> {
    if s == 0 {
        return Err(Error::InvalidParameter("S must be at least 1".into()));
    }
    (0..s)
        .into_par_iter()
        .map(|k| model.forward_pass(op, x, true, &mut rng::stream(seed, "mc-dropout", k as u64)))
        .collect()
}
