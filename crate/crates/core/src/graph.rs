//! Row-compressed weighted graphs and the per-node metadata that travels with them.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Directed weighted graph in row-compressed form.
///
/// Undirected graphs are stored as both arcs of every edge (a self-loop is a
/// single arc), so every operation that works on out-rows works unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    directed: bool,
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeMode {
    In,
    Out,
    Total,
}

impl Graph {
    pub fn empty(n_nodes: usize, directed: bool) -> Self {
        Graph {
            n_nodes,
            directed,
            offsets: vec![0; n_nodes + 1],
            targets: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Builds a graph from arcs. For undirected graphs the arc set must already be
    /// symmetric with matching weights.
    pub fn from_arcs(
        n_nodes: usize,
        directed: bool,
        arcs: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n_nodes];
        for (s, t, w) in arcs {
            check_node(s, n_nodes)?;
            check_node(t, n_nodes)?;
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight {
                    source_node: s,
                    target: t,
                    weight: w,
                });
            }
            rows[s].push((t, w));
        }
        let g = Self::from_rows(n_nodes, directed, rows)?;
        if !directed && !g.is_symmetric() {
            return Err(Error::Directedness("symmetric when flagged undirected"));
        }
        Ok(g)
    }

    /// Builds a graph from edges. Undirected edges are listed once and expanded to both
    /// arcs; listing the same pair twice (in either orientation) is a duplicate.
    pub fn from_edges(
        n_nodes: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        if directed {
            return Self::from_arcs(n_nodes, true, edges);
        }
        let mut arcs = Vec::new();
        for (s, t, w) in edges {
            arcs.push((s, t, w));
            if s != t {
                arcs.push((t, s, w));
            }
        }
        Self::from_arcs(n_nodes, false, arcs).map_err(|e| match e {
            Error::DuplicateEdge { source_node, target } => Error::DuplicateEdge {
                source_node: source_node.min(target),
                target: source_node.max(target),
            },
            other => other,
        })
    }

    fn from_rows(n_nodes: usize, directed: bool, mut rows: Vec<Vec<(NodeId, f64)>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        offsets.push(0);
        for (s, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::DuplicateEdge {
                        source_node: s,
                        target: pair[0].0,
                    });
                }
            }
            for &(t, w) in row.iter() {
                targets.push(t);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Ok(Graph {
            n_nodes,
            directed,
            offsets,
            targets,
            weights,
        })
    }

    /// Rows must already be sorted, duplicate-free, in range and positive.
    pub(crate) fn from_sorted_rows(n_nodes: usize, directed: bool, rows: &[Vec<(NodeId, f64)>]) -> Self {
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|p| p[0].0 < p[1].0));
            for &(t, w) in row {
                targets.push(t);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Graph {
            n_nodes,
            directed,
            offsets,
            targets,
            weights,
        }
    }

    /// Drops every arc with an endpoint in `nodes`; the node count is unchanged.
    pub fn isolate(&self, nodes: &[NodeId]) -> Graph {
        let mut drop = vec![false; self.n_nodes];
        for &v in nodes {
            if v < self.n_nodes {
                drop[v] = true;
            }
        }
        let rows: Vec<Vec<(NodeId, f64)>> = (0..self.n_nodes)
            .map(|s| {
                if drop[s] {
                    Vec::new()
                } else {
                    self.row_entries(s).filter(|&(t, _)| !drop[t]).collect()
                }
            })
            .collect();
        Graph::from_sorted_rows(self.n_nodes, self.directed, &rows)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn n_arcs(&self) -> usize {
        self.targets.len()
    }

    /// Undirected edge count for undirected graphs (self-loops counted once); arc count otherwise.
    pub fn n_edges(&self) -> usize {
        if self.directed {
            return self.n_arcs();
        }
        let loops = (0..self.n_nodes)
            .filter(|&v| self.neighbors(v).binary_search(&v).is_ok())
            .count();
        (self.n_arcs() - loops) / 2 + loops
    }

    pub fn row(&self, v: NodeId) -> (&[NodeId], &[f64]) {
        let (a, b) = (self.offsets[v], self.offsets[v + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn row_entries(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let (t, w) = self.row(v);
        t.iter().copied().zip(w.iter().copied())
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &t in &self.targets {
            deg[t] += 1;
        }
        deg
    }

    pub fn degree(&self, v: NodeId, mode: DegreeMode) -> Result<usize> {
        check_node(v, self.n_nodes)?;
        if !self.directed {
            return Ok(self.out_degree(v));
        }
        let in_deg = || self.targets.iter().filter(|&&t| t == v).count();
        Ok(match mode {
            DegreeMode::Out => self.out_degree(v),
            DegreeMode::In => in_deg(),
            DegreeMode::Total => self.out_degree(v) + in_deg(),
        })
    }

    pub fn weight(&self, s: NodeId, t: NodeId) -> Option<f64> {
        let (targets, weights) = self.row(s);
        targets.binary_search(&t).ok().map(|k| weights[k])
    }

    pub fn has_arc(&self, s: NodeId, t: NodeId) -> bool {
        self.neighbors(s).binary_search(&t).is_ok()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.n_nodes).flat_map(move |s| self.row_entries(s).map(move |(t, w)| (s, t, w)))
    }

    /// Undirected graphs: each edge once with `s <= t`. Directed graphs: every arc.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        let directed = self.directed;
        self.arcs().filter(move |&(s, t, _)| directed || s <= t)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_binary(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.arcs().all(|(s, t, w)| self.weight(t, s) == Some(w))
    }

    /// Undirected graph with `A_ij = max(A'_ij, A'_ji)`.
    pub fn symmetrize(&self) -> Graph {
        let mut rows: Vec<BTreeMap<NodeId, f64>> = vec![BTreeMap::new(); self.n_nodes];
        for (s, t, w) in self.arcs() {
            for (a, b) in [(s, t), (t, s)] {
                let e = rows[a].entry(b).or_insert(w);
                if w > *e {
                    *e = w;
                }
            }
        }
        let rows: Vec<Vec<(NodeId, f64)>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        Graph::from_sorted_rows(self.n_nodes, false, &rows)
    }

    /// Same arcs, flagged directed.
    pub fn as_directed(&self) -> Graph {
        Graph {
            directed: true,
            ..self.clone()
        }
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permute(&self, perm: &[NodeId]) -> Result<Graph> {
        if perm.len() != self.n_nodes {
            return Err(Error::LengthMismatch {
                expected: self.n_nodes,
                actual: perm.len(),
            });
        }
        Graph::from_arcs(
            self.n_nodes,
            self.directed,
            self.arcs().map(|(s, t, w)| (perm[s], perm[t], w)),
        )
    }

    /// Induced subgraph on `nodes` (in the given order); returns the old→new map.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> (Graph, Vec<Option<NodeId>>) {
        let mut remap = vec![None; self.n_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = Some(new);
        }
        let rows: Vec<Vec<(NodeId, f64)>> = nodes
            .iter()
            .map(|&old| {
                let mut row: Vec<(NodeId, f64)> = self
                    .row_entries(old)
                    .filter_map(|(t, w)| remap[t].map(|nt| (nt, w)))
                    .collect();
                row.sort_by_key(|&(t, _)| t);
                row
            })
            .collect();
        (Graph::from_sorted_rows(nodes.len(), self.directed, &rows), remap)
    }

    /// Connected components of an undirected graph, each sorted ascending, ordered by smallest member.
    pub fn connected_components(&self) -> Result<Vec<Vec<NodeId>>> {
        if self.directed {
            return Err(Error::Directedness("undirected"));
        }
        let mut seen = vec![false; self.n_nodes];
        let mut components = Vec::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        Ok(components)
    }

    /// Largest connected component; ties go to the component with the smallest node id.
    pub fn largest_connected_component(&self) -> Result<(Graph, Vec<Option<NodeId>>)> {
        if self.n_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        let components = self.connected_components()?;
        // Components are ordered by minimum id, so the first maximum wins ties.
        let best = components
            .iter()
            .fold(&components[0], |best, c| if c.len() > best.len() { c } else { best });
        Ok(self.induced_subgraph(best))
    }

    /// Mutable adjacency maps, for operations that edit edges.
    pub fn to_adjacency_maps(&self) -> Vec<BTreeMap<NodeId, f64>> {
        (0..self.n_nodes).map(|v| self.row_entries(v).collect()).collect()
    }

    pub fn from_adjacency_maps(directed: bool, maps: &[BTreeMap<NodeId, f64>]) -> Graph {
        let rows: Vec<Vec<(NodeId, f64)>> = maps.iter().map(|m| m.iter().map(|(&t, &w)| (t, w)).collect()).collect();
        Graph::from_sorted_rows(maps.len(), directed, &rows)
    }
}

pub(crate) fn check_node(v: NodeId, n_nodes: usize) -> Result<()> {
    if v < n_nodes {
        Ok(())
    } else {
        Err(Error::NodeOutOfRange { node: v, n_nodes })
    }
}

/// Per-node class labels; `None` marks an unlabeled node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLabels {
    labels: Vec<Option<usize>>,
    n_classes: usize,
}

impl NodeLabels {
    pub fn new(labels: Vec<Option<usize>>, n_classes: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} not below class count {n_classes}"
            )));
        }
        Ok(NodeLabels { labels, n_classes })
    }

    /// Fully labeled; the class count is `max + 1`.
    pub fn from_dense(labels: &[usize]) -> Self {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        NodeLabels {
            labels: labels.iter().map(|&c| Some(c)).collect(),
            n_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, v: NodeId) -> Option<usize> {
        self.labels.get(v).copied().flatten()
    }

    pub fn require(&self, v: NodeId) -> Result<usize> {
        self.get(v).ok_or(Error::MissingLabel(v))
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Dense labels, failing on the first unlabeled node.
    pub fn to_dense(&self) -> Result<Vec<usize>> {
        (0..self.labels.len()).map(|v| self.require(v)).collect()
    }

    pub fn remap(&self, remap: &[Option<NodeId>], new_len: usize) -> NodeLabels {
        let mut labels = vec![None; new_len];
        for (old, new) in remap.iter().enumerate() {
            if let Some(new) = new {
                labels[*new] = self.labels[old];
            }
        }
        NodeLabels {
            labels,
            n_classes: self.n_classes,
        }
    }
}

/// Node features in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Shape(format!(
                    "feature row {i} has {} columns, expected {n_cols}",
                    row.len()
                )));
            }
            triplets.extend(row.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(j, &x)| (i, j, x)));
        }
        Self::from_triplets(rows.len(), n_cols, triplets)
    }

    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for (i, j, x) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Shape(format!(
                    "feature entry ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite feature at ({i}, {j})")));
            }
            rows[i].push((j, x));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(p) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::Shape(format!("duplicate feature entry ({i}, {})", p[0].0)));
            }
            for &(j, x) in row.iter() {
                indices.push(j);
                values.push(x);
            }
            indptr.push(indices.len());
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).expect("identity is well formed")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// Rows scaled to unit L1 norm; all-zero rows stay zero.
    pub fn row_normalized(&self) -> FeatureMatrix {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            let s: f64 = self.values[a..b].iter().map(|x| x.abs()).sum();
            if s > 0.0 {
                out.values[a..b].iter_mut().for_each(|x| *x /= s);
            }
        }
        out
    }

    pub fn select_rows(&self, remap: &[Option<usize>], new_len: usize) -> FeatureMatrix {
        let mut triplets = Vec::new();
        for (old, new) in remap.iter().enumerate() {
            if let Some(new) = *new {
                let (idx, val) = self.row(old);
                triplets.extend(idx.iter().zip(val).map(|(&j, &x)| (new, j, x)));
            }
        }
        FeatureMatrix::from_triplets(new_len, self.n_cols, triplets).expect("rows come from a valid matrix")
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut m = ndarray::Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, x) in self.triplets() {
            m[[i, j]] = x;
        }
        m
    }

    /// `X · W` for a dense `W`.
    pub fn matmul(&self, w: &ndarray::Array2<f64>) -> ndarray::Array2<f64> {
        assert_eq!(w.nrows(), self.n_cols, "feature/weight shape mismatch");
        let mut out = ndarray::Array2::zeros((self.n_rows, w.ncols()));
        for i in 0..self.n_rows {
            let (idx, val) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&j, &x) in idx.iter().zip(val) {
                out_row.scaled_add(x, &w.row(j));
            }
        }
        out
    }
}

/// User-item interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    n_users: usize,
    n_items: usize,
    user_items: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(n_users: usize, n_items: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut user_items = vec![Vec::new(); n_users];
        for (u, i) in pairs {
            if u >= n_users {
                return Err(Error::NodeOutOfRange { node: u, n_nodes: n_users });
            }
            if i >= n_items {
                return Err(Error::NodeOutOfRange { node: i, n_nodes: n_items });
            }
            user_items[u].push(i);
        }
        for (u, items) in user_items.iter_mut().enumerate() {
            items.sort_unstable();
            if let Some(p) = items.windows(2).find(|p| p[0] == p[1]) {
                return Err(Error::DuplicateEdge {
                    source_node: u,
                    target: p[0],
                });
            }
        }
        Ok(BipartiteGraph {
            n_users,
            n_items,
            user_items,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_interactions(&self) -> usize {
        self.user_items.iter().map(Vec::len).sum()
    }

    pub fn items_of(&self, u: usize) -> &[usize] {
        &self.user_items[u]
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.user_items[u].binary_search(&i).is_ok()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }

    pub fn item_users(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_items];
        for (u, i) in self.pairs() {
            out[i].push(u);
        }
        out
    }

    /// Undirected graph on `n_users + n_items` nodes; item `i` becomes node `n_users + i`.
    pub fn to_graph(&self) -> Graph {
        let n = self.n_users + self.n_items;
        let mut rows: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for (u, i) in self.pairs() {
            rows[u].push((self.n_users + i, 1.0));
            rows[self.n_users + i].push((u, 1.0));
        }
        for row in &mut rows {
            row.sort_by_key(|&(t, _)| t);
        }
        Graph::from_sorted_rows(n, false, &rows)
    }

    /// Reads user→item arcs back out of a graph laid out as in [`Self::to_graph`].
    /// User-user and item-item arcs are ignored.
    pub fn from_graph(g: &Graph, n_users: usize) -> Result<Self> {
        if g.n_nodes() < n_users {
            return Err(Error::Shape(format!(
                "graph has {} nodes, fewer than {n_users} users",
                g.n_nodes()
            )));
        }
        let n_items = g.n_nodes() - n_users;
        let user_items = (0..n_users)
            .map(|u| {
                g.neighbors(u)
                    .iter()
                    .filter(|&&t| t >= n_users)
                    .map(|&t| t - n_users)
                    .collect()
            })
            .collect();
        Ok(BipartiteGraph {
            n_users,
            n_items,
            user_items,
        })
    }
}
