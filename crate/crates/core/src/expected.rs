//! Monte Carlo estimate of the expected adjacency under the copying model.

use rayon::prelude::*;

use crate::copying::{sample_graph, CopyingDistribution};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng;

const SAMPLE_CHUNK: usize = 64;

/// `n_samples` graphs, sample `i` drawn from its own stream.
pub fn sample_graphs(g: &Graph, dist: &CopyingDistribution, n_samples: usize, seed: u64) -> Result<Vec<Graph>> {
    (0..n_samples)
        .into_par_iter()
        .map(|i| sample_graph(g, dist, &mut rng::stream(seed, "copy-sample", i as u64)))
        .collect()
}

/// Sparse entrywise mean of sampled adjacencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedAdjacency {
    n_nodes: usize,
    directed: bool,
    n_samples: usize,
    rows: Vec<Vec<(NodeId, f64)>>,
}

fn merge_into(acc: &mut Vec<(NodeId, f64)>, row: impl Iterator<Item = (NodeId, f64)>) {
    let old = std::mem::take(acc);
    let mut old = old.into_iter().peekable();
    let mut new = row.peekable();
    loop {
        match (old.peek().copied(), new.peek().copied()) {
            (Some(a), Some(b)) if a.0 == b.0 => {
                acc.push((a.0, a.1 + b.1));
                old.next();
                new.next();
            }
            (Some(a), Some(b)) if a.0 < b.0 => {
                acc.push(a);
                old.next();
            }
            (Some(a), None) => {
                acc.push(a);
                old.next();
            }
            (_, Some(b)) => {
                acc.push(b);
                new.next();
            }
            (None, None) => break,
        }
    }
}

impl ExpectedAdjacency {
    /// Mean of the given graphs, summed in slice order. Entries below `1 / (2 n)` are dropped.
    pub fn from_samples(samples: &[Graph]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidParameter("N_G must be at least 1".into()))?;
        let mut acc = Accumulator::new(first.n_nodes(), first.is_directed());
        for s in samples {
            acc.add(s)?;
        }
        Ok(acc.finish())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn row(&self, v: NodeId) -> &[(NodeId, f64)] {
        &self.rows[v]
    }

    pub fn get(&self, s: NodeId, t: NodeId) -> f64 {
        let row = &self.rows[s];
        row.binary_search_by_key(&t, |&(c, _)| c).map_or(0.0, |k| row[k].1)
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(t, w)| (s, t, w)))
    }

    /// Binary graph of the entries strictly above `b`.
    pub fn threshold_binary(&self, b: f64) -> Result<Graph> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("threshold must be a positive real, got {b}")));
        }
        let rows: Vec<Vec<(NodeId, f64)>> = self
            .rows
            .iter()
            .map(|row| row.iter().filter(|&&(_, w)| w > b).map(|&(t, _)| (t, 1.0)).collect())
            .collect();
        Ok(Graph::from_sorted_rows(self.n_nodes, self.directed, &rows))
    }
}

struct Accumulator {
    n_nodes: usize,
    directed: bool,
    count: usize,
    rows: Vec<Vec<(NodeId, f64)>>,
}

impl Accumulator {
    fn new(n_nodes: usize, directed: bool) -> Self {
        Accumulator {
            n_nodes,
            directed,
            count: 0,
            rows: vec![Vec::new(); n_nodes],
        }
    }

    fn add(&mut self, g: &Graph) -> Result<()> {
        if g.n_nodes() != self.n_nodes {
            return Err(Error::LengthMismatch {
                expected: self.n_nodes,
                actual: g.n_nodes(),
            });
        }
        self.rows
            .par_iter_mut()
            .enumerate()
            .for_each(|(v, acc)| merge_into(acc, g.row_entries(v)));
        self.count += 1;
        Ok(())
    }

    fn finish(self) -> ExpectedAdjacency {
        let n = self.count as f64;
        let floor = 1.0 / (2.0 * n);
        let rows = self
            .rows
            .into_iter()
            .map(|row| row.into_iter().map(|(t, s)| (t, s / n)).filter(|&(_, w)| w >= floor).collect())
            .collect();
        ExpectedAdjacency {
            n_nodes: self.n_nodes,
            directed: self.directed,
            n_samples: self.count,
            rows,
        }
    }
}

/// Mean adjacency over `n_samples` copying-model samples. Samples are drawn in parallel
/// chunks and summed in index order, so the estimate does not depend on thread count.
pub fn estimate_expected_adjacency(
    g: &Graph,
    dist: &CopyingDistribution,
    n_samples: usize,
    seed: u64,
) -> Result<ExpectedAdjacency> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("N_G must be at least 1".into()));
    }
    let directed = g.is_directed();
    let mut acc = Accumulator::new(g.n_nodes(), directed);
    let mut start = 0;
    while start < n_samples {
        let end = (start + SAMPLE_CHUNK).min(n_samples);
        let chunk: Vec<Graph> = (start..end)
            .into_par_iter()
            .map(|i| sample_graph(g, dist, &mut rng::stream(seed, "copy-sample", i as u64)))
            .collect::<Result<_>>()?;
        for s in &chunk {
            acc.add(s)?;
        }
        start = end;
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copying::DistributionKind;

    fn small() -> Graph {
        Graph::from_edges(4, false, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn self_copy_gives_the_observed_adjacency() {
        let g = small();
        for n_g in [1, 7] {
            let ea = estimate_expected_adjacency(&g, &CopyingDistribution::self_copy(4), n_g, 0).unwrap();
            for (s, t, w) in g.arcs() {
                assert_eq!(ea.get(s, t), w);
            }
            assert_eq!(ea.entries().count(), g.n_arcs());
        }
    }

    #[test]
    fn single_sample_equals_that_sample() {
        let g = small();
        let d = CopyingDistribution::uniform_all(4);
        let ea = estimate_expected_adjacency(&g, &d, 1, 9).unwrap();
        let s = sample_graphs(&g, &d, 1, 9).unwrap().remove(0);
        assert_eq!(ea.threshold_binary(0.5).unwrap(), s);
        assert_eq!(ea, ExpectedAdjacency::from_samples(&[s]).unwrap());
    }

    #[test]
    fn two_outcome_average() {
        // Directed: node 0 copies itself or node 2 with equal probability.
        let g = Graph::from_edges(3, true, [(0, 1, 1.0), (2, 0, 1.0)]).unwrap();
        let d = CopyingDistribution::from_rows(
            DistributionKind::Custom,
            vec![vec![(0, 0.5), (2, 0.5)], vec![(1, 1.0)], vec![(2, 1.0)]],
        )
        .unwrap();
        let n_g = 4000;
        let ea = estimate_expected_adjacency(&g, &d, n_g, 4).unwrap();
        let sigma = (0.25f64 / n_g as f64).sqrt();
        assert!((ea.get(0, 1) - 0.5).abs() < 3.0 * sigma);
        assert!((ea.get(0, 0) - 0.5).abs() < 3.0 * sigma);
        assert_eq!(ea.get(2, 0), 1.0);
    }

    #[test]
    fn threshold_is_strict() {
        let g = Graph::from_edges(3, true, [(0, 1, 1.0), (0, 2, 1.0)]).unwrap();
        let ea = ExpectedAdjacency {
            n_nodes: 3,
            directed: true,
            n_samples: 20,
            rows: vec![vec![(1, 0.4), (2, 0.1)], vec![(0, 0.05)], vec![]],
        };
        let t = ea.threshold_binary(0.1).unwrap();
        assert_eq!(t.arcs().collect::<Vec<_>>(), vec![(0, 1, 1.0)]);
        let empty = ExpectedAdjacency::from_samples(&[Graph::empty(3, true)]).unwrap();
        assert_eq!(empty.threshold_binary(0.1).unwrap().n_arcs(), 0);
        assert!(ea.threshold_binary(0.0).is_err());
        let _ = g;
    }

    #[test]
    fn independent_estimates_agree() {
        let mut edges = Vec::new();
        for i in 0..50 {
            edges.push((i, (i + 1) % 50, 1.0));
            edges.push((i, (i + 7) % 50, 1.0));
        }
        let g = Graph::from_edges(50, false, edges).unwrap();
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let d = crate::copying::label_uniform_from_dense(&labels);
        let a = estimate_expected_adjacency(&g, &d, 10_000, 1).unwrap();
        let b = estimate_expected_adjacency(&g, &d, 10_000, 2).unwrap();
        let mut worst: f64 = 0.0;
        for s in 0..50 {
            for t in 0..50 {
                worst = worst.max((a.get(s, t) - b.get(s, t)).abs());
            }
        }
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn estimate_is_thread_count_independent() {
        let g = small();
        let d = CopyingDistribution::uniform_all(4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_expected_adjacency(&g, &d, 300, 5).unwrap());
        let b = many.install(|| estimate_expected_adjacency(&g, &d, 300, 5).unwrap());
        assert_eq!(a, b);
    }
}
