//! Unsupervised node embeddings and their Euclidean distance matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, NodeId};
use crate::operator::NormalizedAdjacency;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Array2<f64>);

impl EmbeddingMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if let Some(((i, _), _)) = data.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite embedding in row {i}")));
        }
        Ok(EmbeddingMatrix(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("embedding rows differ in length".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::Shape(e.to_string()))?)
    }

    pub fn n_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.0.rows() {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn load_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| crate::io::parse_field::<f64>(path, k + 1, t.trim(), "embedding value"))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Dense symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, f: impl Fn(NodeId, NodeId) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: NodeId) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.data[i * self.n + j]
    }
}

pub fn pairwise_distances(e: &EmbeddingMatrix) -> DistanceMatrix {
    let n = e.n_nodes();
    let a = e.as_array();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ri = a.row(i);
            (0..n).map(move |j| {
                if i == j {
                    0.0
                } else {
                    ri.iter()
                        .zip(a.row(j).iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                }
            })
        })
        .collect();
    DistanceMatrix { n, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    /// Graph eigenvectors kept.
    pub dim: usize,
    /// Extra columns from the leading singular directions of the row-normalized features; 0 disables.
    pub feature_dim: usize,
    /// Project `Â X` instead of `X`.
    pub smooth_features: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            dim: 16,
            feature_dim: 0,
            smooth_features: false,
            tolerance: 1e-6,
            max_iterations: 20_000,
        }
    }
}

/// Flip each column so its first clearly nonzero coordinate is positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let scale = col.amax();
        if let Some(&x) = col.iter().find(|x| x.abs() > 1e-10 * scale) {
            if x < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Leading `k` eigenpairs (descending) of a symmetric positive semi-definite operator
/// on `R^n`, by subspace iteration with Rayleigh-Ritz extraction.
pub fn top_eigenpairs(
    op: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    n: usize,
    k: usize,
    seed: u64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= d <= N (d = {k}, N = {n})")));
    }
    let block = n.min((2 * k).max(k + 8));
    let ritz = |q: &DMatrix<f64>, y: &DMatrix<f64>| {
        let b = q.transpose() * y;
        let b = (&b + b.transpose()) * 0.5;
        let eig = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let u = DMatrix::from_fn(eig.eigenvectors.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])]);
        let theta: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        (theta, u)
    };

    if block == n {
        // Small problem: the full basis is the subspace.
        let q = DMatrix::identity(n, n);
        let y = op(&q);
        let (theta, u) = ritz(&q, &y);
        let mut v = u;
        fix_signs(&mut v);
        return Ok((theta, v));
    }

    let mut r = rng::stream(seed, "spectral-start", 0);
    let start = DMatrix::from_fn(n, block, |_, _| StandardNormal.sample(&mut r));
    let mut q = start.qr().q();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let y = op(&q);
        let (theta, u) = ritz(&q, &y);
        let x = &q * &u;
        let mx = &y * &u;
        residual = (0..k)
            .map(|c| (mx.column(c) - x.column(c) * theta[c]).norm())
            .fold(0.0, f64::max);
        if residual < tolerance {
            let mut v = x;
            fix_signs(&mut v);
            return Ok((theta, v));
        }
        q = y.qr().q();
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        residual,
    })
}

/// Leading eigenvectors of the normalized adjacency, optionally concatenated with
/// a low-rank projection of the graph-smoothed features.
pub fn spectral_embedding(
    g: &Graph,
    features: Option<&FeatureMatrix>,
    config: &SpectralConfig,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let n = g.n_nodes();
    if config.dim >= n {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {} must be below N = {n}",
            config.dim
        )));
    }
    let op = NormalizedAdjacency::new(g);
    // (Â + I) / 2 has the same eigenvectors and a nonnegative spectrum.
    let shifted = |x: &DMatrix<f64>| (op.apply_dmatrix(x) + x) * 0.5;
    let (_, graph_vecs) = top_eigenpairs(shifted, n, config.dim, seed, config.tolerance, config.max_iterations)?;

    let mut blocks = vec![graph_vecs];
    if let (Some(x), true) = (features, config.feature_dim > 0) {
        if x.n_rows() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: x.n_rows(),
            });
        }
        let f = x.n_cols();
        let mut dense = x.row_normalized().to_dense();
        if config.smooth_features {
            dense = op.apply(dense.view());
        }
        let y = DMatrix::from_fn(n, f, |i, j| dense[[i, j]]);
        let k = config.feature_dim.min(f);
        let gram = |v: &DMatrix<f64>| y.transpose() * (&y * v);
        let (_, right) = top_eigenpairs(gram, f, k, seed ^ 1, config.tolerance, config.max_iterations)?;
        let mut proj = &y * right;
        for mut col in proj.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        fix_signs(&mut proj);
        blocks.push(proj);
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Array2::zeros((n, total));
    let mut c0 = 0;
    for b in &blocks {
        for c in 0..b.ncols() {
            for i in 0..n {
                out[[i, c0 + c]] = b[(i, c)];
            }
        }
        c0 += b.ncols();
    }
    EmbeddingMatrix::new(out)
}
