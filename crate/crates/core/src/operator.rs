//! Symmetric normalized adjacency with self-loops, `D^-1/2 (A + I) D^-1/2`.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::graph::{Graph, NodeId};
use crate::view::AdjacencyView;

#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<NodeId>,
    vals: Vec<f64>,
}

/// Row `v` of `A + I`.
fn row_with_self_loop(mut row: Vec<(NodeId, f64)>, v: NodeId) -> Vec<(NodeId, f64)> {
    match row.binary_search_by_key(&v, |&(t, _)| t) {
        Ok(k) => row[k].1 += 1.0,
        Err(k) => row.insert(k, (v, 1.0)),
    }
    row
}

/// `1 + sum_j A_vj` for the given view.
pub fn self_loop_degree<V: AdjacencyView + ?Sized>(view: &V, v: NodeId) -> f64 {
    1.0 + view.row_vec(v).iter().map(|&(_, w)| w).sum::<f64>()
}

/// Normalized row `v` of a view, given the degrees of its neighbours.
pub fn normalized_row<V: AdjacencyView + ?Sized>(view: &V, v: NodeId, degree: impl Fn(NodeId) -> f64) -> Vec<(NodeId, f64)> {
    let row = row_with_self_loop(view.row_vec(v), v);
    let dv: f64 = row.iter().map(|&(_, w)| w).sum();
    row.into_iter()
        .map(|(t, w)| (t, w / (dv * degree(t)).sqrt()))
        .collect()
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> Self {
        Self::from_view(g)
    }

    pub fn from_view<V: AdjacencyView + ?Sized>(view: &V) -> Self {
        let n = view.n_nodes();
        let degree: Vec<f64> = (0..n).into_par_iter().map(|v| self_loop_degree(view, v)).collect();
        let rows: Vec<Vec<(NodeId, f64)>> = (0..n)
            .into_par_iter()
            .map(|v| normalized_row(view, v, |t| degree[t]))
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for row in rows {
            for (t, w) in row {
                cols.push(t);
                vals.push(w);
            }
            offsets.push(cols.len());
        }
        NormalizedAdjacency { n, offsets, cols, vals }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, v: NodeId) -> (&[NodeId], &[f64]) {
        let (a, b) = (self.offsets[v], self.offsets[v + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn entry(&self, i: NodeId, j: NodeId) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    /// `Â X`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "operator/matrix shape mismatch");
        let mut out = Array2::zeros((self.n, x.ncols()));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut out_row)| {
                let (c, v) = self.row(i);
                for (&j, &w) in c.iter().zip(v) {
                    out_row.scaled_add(w, &x.row(j));
                }
            });
        out
    }

    /// `Â x` for column-major `nalgebra` blocks.
    pub fn apply_dmatrix(&self, x: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        let mut out = nalgebra::DMatrix::zeros(self.n, x.ncols());
        for (k, mut col) in out.column_iter_mut().enumerate() {
            let xc = x.column(k);
            for i in 0..self.n {
                let (c, v) = self.row(i);
                col[i] = c.iter().zip(v).map(|(&j, &w)| w * xc[j]).sum();
            }
        }
        out
    }
}
