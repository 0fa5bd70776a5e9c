//! Bayesian personalized ranking with one hop of mean-aggregated propagation over
//! the user-item graph, its copying-model ensembles, and top-k metrics.

use std::collections::BTreeSet;

use log::{info, warn};
use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copying::{build_jaccard_user, sample_graph, CopyingDistribution};
use crate::error::{Error, Result};
use crate::expected::ExpectedAdjacency;
use crate::graph::{BipartiteGraph, Graph};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BprConfig {
    pub dim: usize,
    /// Weight of the neighbour mean in `e = (1 - w) base + w mean(neighbour bases)`.
    pub lambda_prop: f64,
    /// L2 coefficient `lambda_theta`.
    pub reg: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
}

impl Default for BprConfig {
    fn default() -> Self {
        BprConfig {
            dim: 32,
            lambda_prop: 0.5,
            reg: 0.01,
            learning_rate: 0.05,
            epochs: 50,
            init_scale: 0.1,
        }
    }
}

impl BprConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_prop) {
            return Err(Error::InvalidParameter(format!("lambda_prop {} outside [0, 1]", self.lambda_prop)));
        }
        if !(self.reg >= 0.0) || !(self.learning_rate > 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "reg must be nonnegative; learning_rate and init_scale positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BprModel {
    pub users: Array2<f64>,
    pub items: Array2<f64>,
    pub lambda_prop: f64,
    pub reg: f64,
}

/// Per-node neighbour lists of a bipartite graph in both directions.
struct Neighbours {
    user_items: Vec<Vec<usize>>,
    item_users: Vec<Vec<usize>>,
}

impl Neighbours {
    fn new(bg: &BipartiteGraph) -> Self {
        Neighbours {
            user_items: (0..bg.n_users()).map(|u| bg.items_of(u).to_vec()).collect(),
            item_users: bg.item_users(),
        }
    }
}

fn propagate(base: ArrayView1<f64>, others: &Array2<f64>, nbrs: &[usize], w: f64) -> Array1<f64> {
    let mut e = base.to_owned() * (1.0 - w);
    if w > 0.0 && !nbrs.is_empty() {
        let s = w / nbrs.len() as f64;
        for &k in nbrs {
            e.scaled_add(s, &others.row(k));
        }
    }
    e
}

impl BprModel {
    pub fn init(n_users: usize, n_items: usize, config: &BprConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, config.init_scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut r = rng::stream(seed, "bpr-init", 0);
        let users = Array2::from_shape_simple_fn((n_users, config.dim), || normal.sample(&mut r));
        let items = Array2::from_shape_simple_fn((n_items, config.dim), || normal.sample(&mut r));
        Ok(BprModel {
            users,
            items,
            lambda_prop: config.lambda_prop,
            reg: config.reg,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.items.nrows()
    }

    fn check(&self, bg: &BipartiteGraph) -> Result<()> {
        if bg.n_users() != self.n_users() || bg.n_items() != self.n_items() {
            return Err(Error::Shape(format!(
                "graph is {}x{}, model is {}x{}",
                bg.n_users(),
                bg.n_items(),
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(())
    }

    /// Graph-conditioned user and item embeddings.
    pub fn embed(&self, bg: &BipartiteGraph) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check(bg)?;
        Ok(self.embed_with(&Neighbours::new(bg)))
    }

    fn embed_with(&self, nb: &Neighbours) -> (Array2<f64>, Array2<f64>) {
        let w = self.lambda_prop;
        let mut eu = Array2::zeros(self.users.raw_dim());
        for (u, mut row) in eu.rows_mut().into_iter().enumerate() {
            row.assign(&propagate(self.users.row(u), &self.items, &nb.user_items[u], w));
        }
        let mut ei = Array2::zeros(self.items.raw_dim());
        for (i, mut row) in ei.rows_mut().into_iter().enumerate() {
            row.assign(&propagate(self.items.row(i), &self.users, &nb.item_users[i], w));
        }
        (eu, ei)
    }

    /// `|U| x |I|` matrix of `e_u . e_i`.
    pub fn scores(&self, bg: &BipartiteGraph) -> Result<Array2<f64>> {
        let (eu, ei) = self.embed(bg)?;
        Ok(eu.dot(&ei.t()))
    }

    /// `sigma(e_u . e_i - e_u . e_j)`.
    pub fn rank_probability(&self, bg: &BipartiteGraph, u: usize, i: usize, j: usize) -> Result<f64> {
        self.check(bg)?;
        for (id, n) in [(u, self.n_users()), (i, self.n_items()), (j, self.n_items())] {
            if id >= n {
                return Err(Error::NodeOutOfRange { node: id, n_nodes: n });
            }
        }
        if i == j {
            return Ok(0.5);
        }
        let nb = Neighbours::new(bg);
        let w = self.lambda_prop;
        let eu = propagate(self.users.row(u), &self.items, &nb.user_items[u], w);
        let e_i = propagate(self.items.row(i), &self.users, &nb.item_users[i], w);
        let e_j = propagate(self.items.row(j), &self.users, &nb.item_users[j], w);
        Ok(sigmoid(eu.dot(&e_i) - eu.dot(&e_j)))
    }

    /// `sum ln sigma(x_uij) - reg * ||Theta||^2` over the given triples, and its gradient
    /// with respect to the base user and item embeddings.
    pub fn objective_and_gradient(
        &self,
        bg: &BipartiteGraph,
        triples: &[(usize, usize, usize)],
    ) -> Result<(f64, Array2<f64>, Array2<f64>)> {
        self.check(bg)?;
        let nb = Neighbours::new(bg);
        let mut gu = Array2::zeros(self.users.raw_dim());
        let mut gi = Array2::zeros(self.items.raw_dim());
        let mut obj = 0.0;
        for &(u, i, j) in triples {
            let step = self.triple_gradient(&nb, u, i, j);
            obj += step.log_sigma;
            step.add_to(&mut gu, &mut gi, 1.0);
        }
        obj -= self.reg * (self.users.iter().map(|x| x * x).sum::<f64>() + self.items.iter().map(|x| x * x).sum::<f64>());
        gu.scaled_add(-2.0 * self.reg, &self.users);
        gi.scaled_add(-2.0 * self.reg, &self.items);
        Ok((obj, gu, gi))
    }

    fn triple_gradient(&self, nb: &Neighbours, u: usize, i: usize, j: usize) -> TripleGradient {
        let w = self.lambda_prop;
        let eu = propagate(self.users.row(u), &self.items, &nb.user_items[u], w);
        let e_i = propagate(self.items.row(i), &self.users, &nb.item_users[i], w);
        let e_j = propagate(self.items.row(j), &self.users, &nb.item_users[j], w);
        let x = eu.dot(&e_i) - eu.dot(&e_j);
        // d ln sigma(x) / dx
        let g = sigmoid(-x);
        let diff = (&e_i - &e_j) * g;
        let eu_g = eu * g;
        let mut users = vec![(u, diff.clone() * (1.0 - w))];
        let mut items = vec![(i, eu_g.clone() * (1.0 - w)), (j, eu_g.clone() * -(1.0 - w))];
        if w > 0.0 {
            let nu = &nb.user_items[u];
            for &k in nu {
                items.push((k, diff.clone() * (w / nu.len() as f64)));
            }
            for (item, sign) in [(i, 1.0), (j, -1.0)] {
                let users_of = &nb.item_users[item];
                for &m in users_of {
                    users.push((m, eu_g.clone() * (sign * w / users_of.len() as f64)));
                }
            }
        }
        TripleGradient {
            log_sigma: -softplus(-x),
            users,
            items,
        }
    }
}

struct TripleGradient {
    log_sigma: f64,
    users: Vec<(usize, Array1<f64>)>,
    items: Vec<(usize, Array1<f64>)>,
}

impl TripleGradient {
    fn add_to(&self, gu: &mut Array2<f64>, gi: &mut Array2<f64>, scale: f64) {
        for (u, g) in &self.users {
            gu.row_mut(*u).scaled_add(scale, g);
        }
        for (i, g) in &self.items {
            gi.row_mut(*i).scaled_add(scale, g);
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative sampler: uniform over items outside a user's positives and exclusions.
struct NegativePool {
    blocked: Vec<BTreeSet<usize>>,
    n_items: usize,
}

impl NegativePool {
    fn sample<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        loop {
            let j = rng.random_range(0..self.n_items);
            if !self.blocked[u].contains(&j) {
                return j;
            }
        }
    }

    fn has_negative(&self, u: usize) -> bool {
        self.blocked[u].len() < self.n_items
    }
}

#[derive(Debug, Clone)]
pub struct TrainedBpr {
    pub model: BprModel,
    /// Mean `ln sigma(x_uij)` over each epoch's triples.
    pub epoch_objective: Vec<f64>,
    pub skipped_users: Vec<usize>,
}

/// SGD over triples drawn on the fly: a user with a usable negative, one of its
/// positives, and a negative outside its positives and `exclusion`. One epoch is
/// as many steps as there are interactions. Regularization is applied to the
/// base rows of `u`, `i` and `j` at each step.
pub fn bpr_train(
    bg: &BipartiteGraph,
    exclusion: Option<&BipartiteGraph>,
    config: &BprConfig,
    seed: u64,
) -> Result<TrainedBpr> {
    let mut model = BprModel::init(bg.n_users(), bg.n_items(), config, seed)?;
    if let Some(ex) = exclusion {
        model.check(ex)?;
    }
    let blocked: Vec<BTreeSet<usize>> = (0..bg.n_users())
        .map(|u| {
            let mut s: BTreeSet<usize> = bg.items_of(u).iter().copied().collect();
            if let Some(ex) = exclusion {
                s.extend(ex.items_of(u).iter().copied());
            }
            s
        })
        .collect();
    let pool = NegativePool {
        blocked,
        n_items: bg.n_items(),
    };
    let mut active = Vec::new();
    let mut skipped_users = Vec::new();
    for u in 0..bg.n_users() {
        if bg.items_of(u).is_empty() {
            continue;
        }
        if pool.has_negative(u) {
            active.push(u);
        } else {
            warn!("user {u} has no item left to use as a negative; skipped in training");
            skipped_users.push(u);
        }
    }
    if active.is_empty() {
        return Err(Error::InvalidParameter("no user has both a positive and a negative".into()));
    }
    let nb = Neighbours::new(bg);
    let steps = bg.n_interactions().max(1);
    let mut r = rng::stream(seed, "bpr-sgd", 0);
    let lr = config.learning_rate;
    let mut epoch_objective = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut total = 0.0;
        for _ in 0..steps {
            let u = active[r.random_range(0..active.len())];
            let pos = bg.items_of(u);
            let i = pos[r.random_range(0..pos.len())];
            let j = pool.sample(u, &mut r);
            let step = model.triple_gradient(&nb, u, i, j);
            total += step.log_sigma;
            let (ru, ri, rj) = (model.users.row(u).to_owned(), model.items.row(i).to_owned(), model.items.row(j).to_owned());
            step.add_to(&mut model.users, &mut model.items, lr);
            model.users.row_mut(u).scaled_add(-2.0 * lr * config.reg, &ru);
            model.items.row_mut(i).scaled_add(-2.0 * lr * config.reg, &ri);
            model.items.row_mut(j).scaled_add(-2.0 * lr * config.reg, &rj);
        }
        let mean = total / steps as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence(format!("BPR objective {mean}")));
        }
        epoch_objective.push(mean);
    }
    Ok(TrainedBpr {
        model,
        epoch_objective,
        skipped_users,
    })
}

/// `N_G` bipartite graphs drawn by copying users' item sets.
pub fn sample_bipartite_graphs(
    bg: &BipartiteGraph,
    dist: &CopyingDistribution,
    n_graphs: usize,
    seed: u64,
    purpose: &str,
) -> Result<Vec<BipartiteGraph>> {
    if n_graphs == 0 {
        return Err(Error::InvalidParameter("N_G must be at least 1".into()));
    }
    let g = bg.to_graph();
    (0..n_graphs)
        .into_par_iter()
        .map(|k| {
            let s = sample_graph(&g, dist, &mut rng::stream(seed, purpose, k as u64))?;
            BipartiteGraph::from_graph(&s, bg.n_users())
        })
        .collect()
}

/// Mean score matrix over the given graphs, summed in slice order.
pub fn ensemble_scores(model: &BprModel, graphs: &[BipartiteGraph]) -> Result<Array2<f64>> {
    if graphs.is_empty() {
        return Err(Error::InvalidParameter("no graphs to ensemble over".into()));
    }
    let per_graph: Vec<Array2<f64>> = graphs.par_iter().map(|g| model.scores(g)).collect::<Result<_>>()?;
    // first + mean deviation, so identical inputs average to themselves exactly
    let first = &per_graph[0];
    let mut dev = Array2::<f64>::zeros(first.raw_dim());
    for s in &per_graph[1..] {
        dev += &(s - first);
    }
    Ok(first + &(dev / graphs.len() as f64))
}

/// Mean over graphs of `p(i >_u j | G_k, W)`.
pub fn ensemble_rank_probability(model: &BprModel, graphs: &[BipartiteGraph], u: usize, i: usize, j: usize) -> Result<f64> {
    if graphs.is_empty() {
        return Err(Error::InvalidParameter("no graphs to ensemble over".into()));
    }
    let mut total = 0.0;
    for g in graphs {
        total += model.rank_probability(g, u, i, j)?;
    }
    Ok(total / graphs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_graphs: usize,
    /// Threshold on the expected adjacency defining the excluded negatives.
    pub b: f64,
    /// Evaluate on fresh graphs instead of the ones used for the expected adjacency.
    pub resample: bool,
    /// Keep the user itself (Jaccard index 1) among its own candidates.
    pub include_self: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_graphs: 10,
            b: 0.1,
            resample: false,
            include_self: true,
        }
    }
}

/// Scores of an already-trained model averaged over graphs sampled from the
/// Jaccard user-copying distribution of the training graph.
pub fn ebpr_scores(model: &BprModel, train: &BipartiteGraph, config: &EnsembleConfig, seed: u64) -> Result<Array2<f64>> {
    let dist = build_jaccard_user(train, config.include_self);
    let graphs = sample_bipartite_graphs(train, &dist, config.n_graphs, seed, "ebpr-graph")?;
    ensemble_scores(model, &graphs)
}

#[derive(Debug, Clone)]
pub struct SgbprOutput {
    pub trained: TrainedBpr,
    /// User-item pairs of the thresholded expected graph.
    pub exclusion: BipartiteGraph,
    pub scores: Array2<f64>,
}

/// Sample graphs, threshold their mean adjacency, retrain with those pairs removed
/// from the negative pool, and score by averaging over the sampled graphs.
pub fn sgbpr_train_evaluate(
    train: &BipartiteGraph,
    bpr: &BprConfig,
    config: &EnsembleConfig,
    seed: u64,
) -> Result<SgbprOutput> {
    if !(config.b > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold b must be positive, got {}", config.b)));
    }
    let dist = build_jaccard_user(train, config.include_self);
    let graphs = sample_bipartite_graphs(train, &dist, config.n_graphs, seed, "sgbpr-graph")?;
    let as_graphs: Vec<Graph> = graphs.iter().map(BipartiteGraph::to_graph).collect();
    let expected = ExpectedAdjacency::from_samples(&as_graphs)?;
    let exclusion = BipartiteGraph::from_graph(&expected.threshold_binary(config.b)?, train.n_users())?;
    info!(
        "expected graph above b={} has {} user-item pairs ({} observed)",
        config.b,
        exclusion.n_interactions(),
        train.n_interactions()
    );
    let trained = bpr_train(train, Some(&exclusion), bpr, rng::derive_seed(seed, "sgbpr-train", 0))?;
    let eval_graphs = if config.resample {
        sample_bipartite_graphs(train, &dist, config.n_graphs, seed, "sgbpr-eval-graph")?
    } else {
        graphs
    };
    let scores = ensemble_scores(&trained.model, &eval_graphs)?;
    Ok(SgbprOutput {
        trained,
        exclusion,
        scores,
    })
}

/// Items by descending score, ties by ascending id, skipping `exclude`.
pub fn top_k(scores: ArrayView1<f64>, exclude: &[usize], k: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..scores.len()).filter(|i| exclude.binary_search(i).is_err()).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand
}

/// `|positives in top k| / |positives|`.
pub fn recall_at_k(recommended: &[usize], positives: &[usize], k: usize) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Undefined("recall with no positives".into()));
    }
    let hits = recommended.iter().take(k).filter(|i| positives.contains(i)).count();
    Ok(hits as f64 / positives.len() as f64)
}

pub fn ndcg_at_k(recommended: &[usize], positives: &[usize], k: usize) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Undefined("NDCG with no positives".into()));
    }
    let gain = |n: usize| 1.0 / ((n + 1) as f64).log2();
    let dcg: f64 = recommended
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| positives.contains(i))
        .map(|(pos, _)| gain(pos + 1))
        .fold(0.0, |a, g| a + g);
    let idcg: f64 = (1..=k.min(positives.len())).map(gain).sum();
    Ok(dcg / idcg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: usize,
    pub n_positives: usize,
    pub recall_10: f64,
    pub recall_20: f64,
    pub ndcg_10: f64,
    pub ndcg_20: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "recall@10")]
    pub recall_10: f64,
    #[serde(rename = "recall@20")]
    pub recall_20: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg_10: f64,
    #[serde(rename = "ndcg@20")]
    pub ndcg_20: f64,
    pub n_users: usize,
    #[serde(skip)]
    pub per_user: Vec<UserMetrics>,
}

impl MetricsReport {
    pub fn per_user_csv(&self) -> String {
        let mut out = String::from("user,n_positives,recall@10,recall@20,ndcg@10,ndcg@20\n");
        for m in &self.per_user {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                m.user, m.n_positives, m.recall_10, m.recall_20, m.ndcg_10, m.ndcg_20
            ));
        }
        out
    }
}

/// Ranks every item not in the user's training set and scores it against the
/// held-out positives. Users without held-out items are left out.
pub fn evaluate(scores: &Array2<f64>, train: &BipartiteGraph, test: &BipartiteGraph) -> Result<MetricsReport> {
    if scores.dim() != (train.n_users(), train.n_items()) || test.n_users() != train.n_users() {
        return Err(Error::Shape("scores, train and test disagree in size".into()));
    }
    let per_user: Vec<UserMetrics> = (0..train.n_users())
        .into_par_iter()
        .filter(|&u| !test.items_of(u).is_empty())
        .map(|u| {
            let pos = test.items_of(u);
            let rec = top_k(scores.row(u), train.items_of(u), 20);
            Ok(UserMetrics {
                user: u,
                n_positives: pos.len(),
                recall_10: recall_at_k(&rec, pos, 10)?,
                recall_20: recall_at_k(&rec, pos, 20)?,
                ndcg_10: ndcg_at_k(&rec, pos, 10)?,
                ndcg_20: ndcg_at_k(&rec, pos, 20)?,
            })
        })
        .collect::<Result<_>>()?;
    let skipped = (0..train.n_users()).filter(|&u| test.items_of(u).is_empty()).count();
    if skipped > 0 {
        info!("{skipped} users have no held-out items and are not scored");
    }
    if per_user.is_empty() {
        return Err(Error::Undefined("no user has held-out items".into()));
    }
    let n = per_user.len() as f64;
    let mean = |f: fn(&UserMetrics) -> f64| per_user.iter().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        recall_10: mean(|m| m.recall_10),
        recall_20: mean(|m| m.recall_20),
        ndcg_10: mean(|m| m.ndcg_10),
        ndcg_20: mean(|m| m.ndcg_20),
        n_users: per_user.len(),
        per_user,
    })
}

/// Mean per-user AUC of held-out positives against items in neither split.
pub fn auc(scores: &Array2<f64>, train: &BipartiteGraph, test: &BipartiteGraph) -> Result<f64> {
    let per_user: Vec<f64> = (0..train.n_users())
        .into_par_iter()
        .filter_map(|u| {
            let pos = test.items_of(u);
            if pos.is_empty() {
                return None;
            }
            let neg: Vec<f64> = (0..train.n_items())
                .filter(|&i| !train.contains(u, i) && !test.contains(u, i))
                .map(|i| scores[[u, i]])
                .collect();
            if neg.is_empty() {
                return None;
            }
            let mut wins = 0.0;
            for &i in pos {
                let s = scores[[u, i]];
                for &t in &neg {
                    wins += if s > t {
                        1.0
                    } else if s == t {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            Some(wins / (pos.len() * neg.len()) as f64)
        })
        .collect();
    if per_user.is_empty() {
        return Err(Error::Undefined("no user to compute AUC for".into()));
    }
    Ok(per_user.iter().sum::<f64>() / per_user.len() as f64)
}

#[derive(Debug, Clone)]
pub struct InteractionSplit {
    pub train: BipartiteGraph,
    pub valid: BipartiteGraph,
    pub test: BipartiteGraph,
}

/// Per-user random split: `floor(0.2 n)` test, `floor(0.1 n)` validation, rest train.
pub fn split_interactions(bg: &BipartiteGraph, test_frac: f64, valid_frac: f64, seed: u64) -> Result<InteractionSplit> {
    if !(test_frac >= 0.0 && valid_frac >= 0.0 && test_frac + valid_frac < 1.0) {
        return Err(Error::InvalidParameter("split fractions must be nonnegative and sum below 1".into()));
    }
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for u in 0..bg.n_users() {
        let mut items = bg.items_of(u).to_vec();
        items.shuffle(&mut rng::stream(seed, "interaction-split", u as u64));
        let n = items.len() as f64;
        let n_test = (test_frac * n).floor() as usize;
        let n_valid = (valid_frac * n).floor() as usize;
        for (k, &i) in items.iter().enumerate() {
            let bucket = if k < n_test {
                &mut te
            } else if k < n_test + n_valid {
                &mut va
            } else {
                &mut tr
            };
            bucket.push((u, i));
        }
    }
    Ok(InteractionSplit {
        train: BipartiteGraph::new(bg.n_users(), bg.n_items(), tr)?,
        valid: BipartiteGraph::new(bg.n_users(), bg.n_items(), va)?,
        test: BipartiteGraph::new(bg.n_users(), bg.n_items(), te)?,
    })
}

/// Drops users and items with fewer than the given interaction counts (one pass)
/// and renumbers the survivors. Returns the kept original user and item ids.
pub fn filter_min_interactions(
    bg: &BipartiteGraph,
    min_user: usize,
    min_item: usize,
) -> Result<(BipartiteGraph, Vec<usize>, Vec<usize>)> {
    let item_users = bg.item_users();
    let users: Vec<usize> = (0..bg.n_users()).filter(|&u| bg.items_of(u).len() >= min_user).collect();
    let items: Vec<usize> = (0..bg.n_items()).filter(|&i| item_users[i].len() >= min_item).collect();
    let mut item_map = vec![None; bg.n_items()];
    for (k, &i) in items.iter().enumerate() {
        item_map[i] = Some(k);
    }
    let pairs = users
        .iter()
        .enumerate()
        .flat_map(|(nu, &u)| bg.items_of(u).iter().filter_map(|&i| item_map[i].map(|ni| (nu, ni))).collect::<Vec<_>>());
    let out = BipartiteGraph::new(users.len(), items.len(), pairs.collect::<Vec<_>>())?;
    Ok((out, users, items))
}
