//! Read-only adjacency access, so a single copied node can be evaluated without
//! materializing a whole new graph.

use crate::error::Result;
use crate::graph::{check_node, Graph, NodeId};

pub trait AdjacencyView: Sync {
    fn n_nodes(&self) -> usize;

    /// Out-row of `v`, ascending by target.
    fn row_vec(&self, v: NodeId) -> Vec<(NodeId, f64)>;

    fn to_graph(&self, directed: bool) -> Graph {
        let rows: Vec<_> = (0..self.n_nodes()).map(|v| self.row_vec(v)).collect();
        Graph::from_sorted_rows(self.n_nodes(), directed, &rows)
    }
}

impl AdjacencyView for Graph {
    fn n_nodes(&self) -> usize {
        Graph::n_nodes(self)
    }

    fn row_vec(&self, v: NodeId) -> Vec<(NodeId, f64)> {
        self.row_entries(v).collect()
    }
}

/// `base` with node `node` replaced by `replacement`.
///
/// Directed: only row `node` changes, to the base row of `replacement`.
/// Undirected: the same edit as a full copy with every other node copying itself,
/// i.e. row `node` becomes `max(A[replacement], A[node])` off the diagonal, the
/// diagonal becomes `A[replacement][node]`, and the column is mirrored.
pub struct SingleCopyView<'a, V: AdjacencyView + ?Sized> {
    base: &'a V,
    node: NodeId,
    symmetric: bool,
    new_row: Vec<(NodeId, f64)>,
}

impl<'a, V: AdjacencyView + ?Sized> SingleCopyView<'a, V> {
    pub fn new(base: &'a V, node: NodeId, replacement: NodeId, symmetric: bool) -> Result<Self> {
        check_node(node, base.n_nodes())?;
        check_node(replacement, base.n_nodes())?;
        let copied = base.row_vec(replacement);
        let new_row = if !symmetric {
            copied
        } else {
            let own = base.row_vec(node);
            let mut merged: Vec<(NodeId, f64)> = Vec::with_capacity(own.len() + copied.len());
            let (mut i, mut j) = (0, 0);
            while i < own.len() || j < copied.len() {
                let a = own.get(i).copied();
                let b = copied.get(j).copied();
                let (t, w) = match (a, b) {
                    (Some(x), Some(y)) if x.0 == y.0 => {
                        i += 1;
                        j += 1;
                        (x.0, x.1.max(y.1))
                    }
                    (Some(x), Some(y)) if x.0 < y.0 => {
                        i += 1;
                        x
                    }
                    (Some(x), None) => {
                        i += 1;
                        x
                    }
                    (_, Some(y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if t != node {
                    merged.push((t, w));
                }
            }
            if let Some(&(_, w)) = copied.iter().find(|&&(t, _)| t == node) {
                let at = merged.partition_point(|&(t, _)| t < node);
                merged.insert(at, (node, w));
            }
            merged
        };
        Ok(SingleCopyView {
            base,
            node,
            symmetric,
            new_row,
        })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }
}

impl<V: AdjacencyView + ?Sized> AdjacencyView for SingleCopyView<'_, V> {
    fn n_nodes(&self) -> usize {
        self.base.n_nodes()
    }

    fn row_vec(&self, v: NodeId) -> Vec<(NodeId, f64)> {
        if v == self.node {
            return self.new_row.clone();
        }
        let mut row = self.base.row_vec(v);
        if !self.symmetric {
            return row;
        }
        let pos = row.binary_search_by_key(&self.node, |&(t, _)| t);
        let new_w = self
            .new_row
            .binary_search_by_key(&v, |&(t, _)| t)
            .ok()
            .map(|k| self.new_row[k].1);
        match (pos, new_w) {
            (Ok(k), Some(w)) => row[k].1 = w,
            (Ok(k), None) => {
                row.remove(k);
            }
            (Err(k), Some(w)) => row.insert(k, (self.node, w)),
            (Err(_), None) => {}
        }
        row
    }
}

/// Lightweight view of `g` with `node` copied from `replacement`, respecting directedness.
pub fn copy_single_node(g: &Graph, node: NodeId, replacement: NodeId) -> Result<SingleCopyView<'_, Graph>> {
    SingleCopyView::new(g, node, replacement, !g.is_directed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copying::{apply_copy, apply_copy_undirected, ReplacementVector};
    use crate::rng;
    use rand::Rng;

    fn random_graph(n: usize, p: f64, directed: bool, seed: u64) -> Graph {
        let mut r = rng::stream(seed, "view-test", 0);
        let mut edges = Vec::new();
        for s in 0..n {
            for t in 0..n {
                if (directed || s <= t) && r.random::<f64>() < p {
                    edges.push((s, t, 1.0 + r.random_range(0..3) as f64));
                }
            }
        }
        Graph::from_edges(n, directed, edges).unwrap()
    }

    fn one_copy(n: usize, v: usize, r: usize) -> ReplacementVector {
        let mut z: Vec<usize> = (0..n).collect();
        z[v] = r;
        ReplacementVector::new(z).unwrap()
    }

    #[test]
    fn self_replacement_is_identity() {
        for directed in [false, true] {
            let g = random_graph(12, 0.3, directed, 1);
            assert_eq!(copy_single_node(&g, 4, 4).unwrap().to_graph(directed), g);
        }
    }

    #[test]
    fn directed_degree_is_copied() {
        let g = random_graph(15, 0.25, true, 2);
        let view = copy_single_node(&g, 3, 9).unwrap();
        assert_eq!(view.row_vec(3).len(), g.out_degree(9));
    }

    #[test]
    fn matches_full_copy() {
        for seed in 0..30 {
            let n = 20;
            let mut r = rng::stream(seed, "view-pick", 0);
            let (v, rep) = (r.random_range(0..n), r.random_range(0..n));
            let g = random_graph(n, 0.2, false, seed);
            let full = apply_copy_undirected(&g, &one_copy(n, v, rep)).unwrap();
            assert_eq!(copy_single_node(&g, v, rep).unwrap().to_graph(false), full, "seed {seed}");

            let d = random_graph(n, 0.2, true, seed + 100);
            let full = apply_copy(&d, &one_copy(n, v, rep)).unwrap();
            assert_eq!(copy_single_node(&d, v, rep).unwrap().to_graph(true), full);
        }
    }

    #[test]
    fn directed_copies_at_distinct_nodes_commute() {
        let n = 20;
        let g = random_graph(n, 0.2, true, 7);
        let (a, x, b, y) = (2, 11, 5, 17);
        let ab = SingleCopyView::new(&copy_single_node(&g, a, x).unwrap(), b, y, false)
            .unwrap()
            .to_graph(true);
        let ba = SingleCopyView::new(&copy_single_node(&g, b, y).unwrap(), a, x, false)
            .unwrap()
            .to_graph(true);
        let mut z: Vec<usize> = (0..n).collect();
        z[a] = x;
        z[b] = y;
        let full = apply_copy(&g, &ReplacementVector::new(z).unwrap()).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab, full);
    }
}
