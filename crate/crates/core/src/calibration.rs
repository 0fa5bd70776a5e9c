//! Independent-edge baseline: logistic calibration of externally supplied edge
//! probabilities, rescaling to the observed edge count, and Bernoulli sampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng;

const ALPHA_CAP: f64 = 30.0;
const REDUCE_CHUNK: usize = 1 << 14;

fn sigmoid(x: f64) -> f64 {
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

/// Sums per-chunk partial results in chunk order, so the result does not depend
/// on how rayon splits the work.
fn ordered_sum<const K: usize>(len: usize, f: impl Fn(usize) -> [f64; K] + Sync) -> [f64; K] {
    let n_chunks = len.div_ceil(REDUCE_CHUNK);
    let parts: Vec<[f64; K]> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; K];
            for k in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(len) {
                let v = f(k);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for p in parts {
        for (a, x) in total.iter_mut().zip(p) {
            *a += x;
        }
    }
    total
}

/// Symmetric edge probabilities over unordered pairs `i < j`, packed row by row.
/// Pairs can be marked absent (no probability reported by the model).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilityMatrix {
    n: usize,
    probs: Vec<f64>,
    present: Option<Vec<bool>>,
}

impl EdgeProbabilityMatrix {
    fn pair_count(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }

    fn index(&self, i: NodeId, j: NodeId) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[cfg(test)]
    fn pair_of(&self, mut k: usize) -> (NodeId, NodeId) {
        let mut i = 0;
        loop {
            let row = self.n - i - 1;
            if k < row {
                return (i, i + 1 + k);
            }
            k -= row;
            i += 1;
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(NodeId, NodeId) -> f64 + Sync) -> Result<Self> {
        let probs: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
        }
        Ok(EdgeProbabilityMatrix { n, probs, present: None })
    }

    pub fn constant(n: usize, p: f64) -> Result<Self> {
        Self::from_fn(n, |_, _| p)
    }

    /// Sparse triplets `(i, j, p)`; unlisted pairs are absent.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (NodeId, NodeId, f64)>) -> Result<Self> {
        let mut m = EdgeProbabilityMatrix {
            n,
            probs: vec![0.0; Self::pair_count(n)],
            present: Some(vec![false; Self::pair_count(n)]),
        };
        for (i, j, p) in triplets {
            if i >= n || j >= n || i == j {
                return Err(Error::NodeOutOfRange { node: i.max(j), n_nodes: n });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
            }
            let k = m.index(i, j);
            m.probs[k] = p;
            if let Some(present) = &mut m.present {
                present[k] = true;
            }
        }
        Ok(m)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_pairs(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        if i == j {
            0.0
        } else {
            self.probs[self.index(i, j)]
        }
    }

    pub fn is_present(&self, i: NodeId, j: NodeId) -> bool {
        i != j && self.present.as_ref().is_none_or(|p| p[self.index(i, j)])
    }

    fn present_at(&self, k: usize) -> bool {
        self.present.as_ref().is_none_or(|p| p[k])
    }

    pub fn total(&self) -> f64 {
        ordered_sum(self.probs.len(), |k| [self.probs[k]])[0]
    }

    fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        self.probs
            .par_iter()
            .enumerate()
            .map(|(k, &p)| if self.present_at(k) { f(p) } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub alpha: f64,
    pub beta: f64,
    pub converged: bool,
    pub alpha_capped: bool,
    pub iterations: usize,
}

impl CalibrationModel {
    pub fn apply(&self, p: f64) -> f64 {
        sigmoid(self.alpha * p + self.beta)
    }

    /// Calibrated matrix; absent pairs stay at 0.
    pub fn calibrate(&self, p: &EdgeProbabilityMatrix) -> EdgeProbabilityMatrix {
        EdgeProbabilityMatrix {
            n: p.n,
            probs: p.map(|x| self.apply(x)),
            present: p.present.clone(),
        }
    }
}

/// Maximum-likelihood fit of `P(edge) = sigmoid(alpha * p + beta)` over all present
/// pairs, by damped Newton ascent from `(0, 0)` until the mean-likelihood gradient
/// norm drops below `1e-6`. `alpha` is held in `[-30, 30]`; hitting the cap means
/// the data are (near) separable and the fit is reported as not converged.
pub fn fit_calibration(p: &EdgeProbabilityMatrix, g_obs: &Graph) -> Result<CalibrationModel> {
    if g_obs.n_nodes() != p.n {
        return Err(Error::LengthMismatch {
            expected: p.n,
            actual: g_obs.n_nodes(),
        });
    }
    let n_pairs = p.n_pairs();
    let y = |k: usize| {
        let (i, j) = p.pair_of_fast(k);
        if g_obs.has_arc(i, j) || g_obs.has_arc(j, i) {
            1.0
        } else {
            0.0
        }
    };
    let labels: Vec<f64> = (0..n_pairs).into_par_iter().map(y).collect();
    let m = ordered_sum(n_pairs, |k| [if p.present_at(k) { 1.0 } else { 0.0 }])[0];
    if m == 0.0 {
        return Err(Error::InvalidParameter("no pairs to calibrate on".into()));
    }

    let log_lik = |a: f64, b: f64| {
        ordered_sum(n_pairs, |k| {
            if !p.present_at(k) {
                return [0.0];
            }
            let z = a * p.probs[k] + b;
            [labels[k] * z - softplus(z)]
        })[0]
            / m
    };
    // Mean gradient and Hessian of the log-likelihood.
    let derivs = |a: f64, b: f64| {
        let [ga, gb, haa, hab, hbb] = ordered_sum(n_pairs, |k| {
            if !p.present_at(k) {
                return [0.0; 5];
            }
            let x = p.probs[k];
            let s = sigmoid(a * x + b);
            let r = labels[k] - s;
            let w = s * (1.0 - s);
            [r * x, r, -w * x * x, -w * x, -w]
        });
        [ga / m, gb / m, haa / m, hab / m, hbb / m]
    };

    // Complete separation pushes the maximum likelihood slope to infinity; start
    // at the cap so only the intercept is fitted.
    let extreme = |edge: bool, f: fn(f64, f64) -> f64, init: f64| {
        (0..n_pairs)
            .filter(|&k| p.present_at(k) && (labels[k] == 1.0) == edge)
            .map(|k| p.probs[k])
            .fold(init, f)
    };
    let (min_edge, max_edge) = (extreme(true, f64::min, f64::INFINITY), extreme(true, f64::max, f64::NEG_INFINITY));
    let (min_non, max_non) = (extreme(false, f64::min, f64::INFINITY), extreme(false, f64::max, f64::NEG_INFINITY));
    let separated = if max_non < min_edge {
        Some(ALPHA_CAP)
    } else if min_non > max_edge {
        Some(-ALPHA_CAP)
    } else {
        None
    };
    let (mut a, mut b) = (separated.unwrap_or(0.0), 0.0f64);
    let mut capped = separated.is_some();
    let max_iter = 500;
    for it in 0..max_iter {
        let [ga, gb, haa, hab, hbb] = derivs(a, b);
        let free_alpha = !(capped && ga * a.signum() > 0.0);
        let grad_norm = if free_alpha { ga.hypot(gb) } else { gb.abs() };
        if grad_norm < 1e-6 {
            return Ok(CalibrationModel {
                alpha: a,
                beta: b,
                converged: !capped,
                alpha_capped: capped,
                iterations: it,
            });
        }
        // Newton direction on the free coordinates; fall back to the gradient if the
        // Hessian is not safely negative definite.
        let (da, db) = if free_alpha {
            let det = haa * hbb - hab * hab;
            if haa < 0.0 && det > 1e-18 {
                ((-hbb * ga + hab * gb) / det, (hab * ga - haa * gb) / det)
            } else {
                (ga, gb)
            }
        } else if hbb < 0.0 {
            (0.0, -gb / hbb)
        } else {
            (0.0, gb)
        };
        let current = log_lik(a, b);
        let mut step = 1.0;
        loop {
            let na = (a + step * da).clamp(-ALPHA_CAP, ALPHA_CAP);
            let nb = b + step * db;
            if log_lik(na, nb) >= current - 1e-15 || step < 1e-10 {
                capped = na.abs() >= ALPHA_CAP;
                a = na;
                b = nb;
                break;
            }
            step *= 0.5;
        }
    }
    log::warn!("calibration stopped after {max_iter} iterations");
    Ok(CalibrationModel {
        alpha: a,
        beta: b,
        converged: false,
        alpha_capped: capped,
        iterations: max_iter,
    })
}

impl EdgeProbabilityMatrix {
    /// `pair_of` in O(1) via the closed-form row.
    fn pair_of_fast(&self, k: usize) -> (NodeId, NodeId) {
        let n = self.n as f64;
        // Row i starts at i*(2n - i - 1)/2; solve for the largest such i <= k.
        let disc = (2.0 * n - 1.0) * (2.0 * n - 1.0) - 8.0 * k as f64;
        let mut i = (((2.0 * n - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as usize;
        let start = |i: usize| i * (2 * self.n - i - 1) / 2;
        while i > 0 && start(i) > k {
            i -= 1;
        }
        while i + 1 < self.n && start(i + 1) <= k {
            i += 1;
        }
        (i, i + 1 + (k - start(i)))
    }
}

/// `p_cc = |E| * p / sum p`, clipped at 1. Returns the matrix and the number of clipped entries.
pub fn calibrate_and_correct(p_cal: &EdgeProbabilityMatrix, target_edges: usize) -> Result<(EdgeProbabilityMatrix, usize)> {
    let total = p_cal.total();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("calibrated probabilities sum to zero".into()));
    }
    let scale = target_edges as f64 / total;
    let scaled = p_cal.map(|x| x * scale);
    let clipped = scaled.iter().filter(|&&x| x > 1.0).count();
    if clipped > 0 {
        log::warn!("{clipped} corrected edge probabilities exceeded 1 and were clipped");
    }
    Ok((
        EdgeProbabilityMatrix {
            n: p_cal.n,
            probs: scaled.into_iter().map(|x| x.min(1.0)).collect(),
            present: p_cal.present.clone(),
        },
        clipped,
    ))
}

/// Each unordered pair independently present with its probability. Row `i`
/// (pairs `i < j`) draws from its own stream.
pub fn sample_bernoulli_graph(p: &EdgeProbabilityMatrix, seed: u64) -> Graph {
    let n = p.n;
    let upper: Vec<Vec<NodeId>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, "bernoulli-row", i as u64);
            (i + 1..n).filter(|&j| r.random::<f64>() < p.get(i, j)).collect()
        })
        .collect();
    let mut rows: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for (i, targets) in upper.iter().enumerate() {
        for &j in targets {
            rows[i].push((j, 1.0));
            rows[j].push((i, 1.0));
        }
    }
    for row in &mut rows {
        row.sort_by_key(|&(t, _)| t);
    }
    Graph::from_sorted_rows(n, false, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_node_graph() -> Graph {
        Graph::from_edges(
            10,
            false,
            [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (0, 9), (4, 8)].map(|(a, b)| (a, b, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn packed_indexing_round_trips() {
        let m = EdgeProbabilityMatrix::constant(7, 0.0).unwrap();
        let mut k = 0;
        for i in 0..7 {
            for j in i + 1..7 {
                assert_eq!(m.index(i, j), k);
                assert_eq!(m.index(j, i), k);
                assert_eq!(m.pair_of(k), (i, j));
                assert_eq!(m.pair_of_fast(k), (i, j));
                k += 1;
            }
        }
        assert_eq!(k, m.n_pairs());
        let big = EdgeProbabilityMatrix { n: 2485, probs: vec![], present: None };
        for k in [0, 1, 2483, 2484, 3_000_000, 2485 * 2484 / 2 - 1] {
            assert_eq!(big.pair_of(k), big.pair_of_fast(k));
        }
    }

    #[test]
    fn indicator_input_saturates_alpha() {
        let g = ten_node_graph();
        let p = EdgeProbabilityMatrix::from_fn(10, |i, j| if g.has_arc(i, j) { 1.0 } else { 0.0 }).unwrap();
        let fit = fit_calibration(&p, &g).unwrap();
        assert!(fit.alpha_capped && !fit.converged);
        assert_eq!(fit.alpha, 30.0);
        for (i, j, _) in g.edges() {
            assert!(fit.apply(p.get(i, j)) >= 0.95);
        }
    }

    #[test]
    fn constant_input_recovers_density() {
        let g = ten_node_graph();
        let p = EdgeProbabilityMatrix::constant(10, 0.3).unwrap();
        let fit = fit_calibration(&p, &g).unwrap();
        assert!(fit.converged);
        let density = g.n_edges() as f64 / 45.0;
        assert!((fit.apply(0.3) - density).abs() < 1e-6, "{}", fit.apply(0.3));
    }

    #[test]
    fn informative_input_gives_positive_slope() {
        let g = ten_node_graph();
        let p = EdgeProbabilityMatrix::from_fn(10, |i, j| {
            let base = if g.has_arc(i, j) { 0.3 } else { 0.2 };
            base + 0.1 * ((i * 7 + j * 3) % 5) as f64
        })
        .unwrap();
        let fit = fit_calibration(&p, &g).unwrap();
        assert!(fit.converged && fit.alpha > 0.0, "{fit:?}");
    }

    #[test]
    fn correction_examples() {
        let uniform = EdgeProbabilityMatrix::constant(10, 0.5).unwrap();
        let (cc, clipped) = calibrate_and_correct(&uniform, 9).unwrap();
        assert_eq!(clipped, 0);
        assert!((cc.get(0, 1) - 9.0 / 45.0).abs() < 1e-15);
        assert!((cc.total() - 9.0).abs() < 1e-12);

        let already = EdgeProbabilityMatrix::constant(10, 0.2).unwrap();
        let (same, _) = calibrate_and_correct(&already, 9).unwrap();
        for i in 0..10 {
            for j in i + 1..10 {
                assert!((same.get(i, j) - 0.2).abs() < 1e-15);
            }
        }
        assert!(calibrate_and_correct(&EdgeProbabilityMatrix::constant(4, 0.0).unwrap(), 3).is_err());

        let varied = EdgeProbabilityMatrix::from_fn(8, |i, j| ((i + 2 * j) % 7) as f64 / 10.0).unwrap();
        let (v, _) = calibrate_and_correct(&varied, 5).unwrap();
        for (a, b) in [((0, 1), (2, 3)), ((1, 5), (0, 7)), ((3, 4), (2, 6))] {
            let before = varied.get(a.0, a.1).partial_cmp(&varied.get(b.0, b.1));
            let after = v.get(a.0, a.1).partial_cmp(&v.get(b.0, b.1));
            assert_eq!(before, after);
        }
    }

    #[test]
    fn absent_pairs_are_excluded() {
        let m = EdgeProbabilityMatrix::from_triplets(4, [(0, 1, 0.5), (2, 3, 0.25)]).unwrap();
        assert!(m.is_present(1, 0) && !m.is_present(0, 2));
        let fit = CalibrationModel { alpha: 1.0, beta: 0.0, converged: true, alpha_capped: false, iterations: 0 };
        let cal = fit.calibrate(&m);
        assert_eq!(cal.get(0, 2), 0.0);
        assert!((cal.get(0, 1) - sigmoid(0.5)).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_examples() {
        assert_eq!(sample_bernoulli_graph(&EdgeProbabilityMatrix::constant(20, 0.0).unwrap(), 1).n_edges(), 0);
        assert_eq!(sample_bernoulli_graph(&EdgeProbabilityMatrix::constant(20, 1.0).unwrap(), 1).n_edges(), 190);
        let g = sample_bernoulli_graph(&EdgeProbabilityMatrix::constant(100, 0.3).unwrap(), 7);
        let mean = 0.3 * 4950.0;
        let sd = (4950.0f64 * 0.3 * 0.7).sqrt();
        assert!((g.n_edges() as f64 - mean).abs() < 3.0 * sd);
        assert!(g.is_symmetric());
    }

    #[test]
    fn corrected_expected_edge_count() {
        let p = EdgeProbabilityMatrix::from_fn(30, |i, j| ((i * j) % 11) as f64 / 20.0).unwrap();
        let (cc, clipped) = calibrate_and_correct(&p, 40).unwrap();
        assert_eq!(clipped, 0);
        assert!((cc.total() - 40.0).abs() < 1e-9);
    }
}
