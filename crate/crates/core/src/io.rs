//! Text formats: edge lists, label and feature CSVs, interaction lists.
//!
//! Every writer emits a canonical form that the matching reader parses back to
//! an identical value.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, FeatureMatrix, Graph, NodeLabels};

const NODES_HEADER: &str = "%nodes";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(path: &Path, line: usize, token: &str, what: &str) -> Result<T> {
    token
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} {token:?}")))
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn looks_like_header(line: &str) -> bool {
    line.split(',')
        .next()
        .is_some_and(|t| t.trim().parse::<f64>().is_err())
}

pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<Graph> {
    let path = path.as_ref();
    parse_edge_list(&fs::read_to_string(path)?, directed, path)
}

/// Parses `src dst [weight]` lines; an optional `%nodes N` line fixes the node count.
pub fn parse_edge_list(text: &str, directed: bool, path: &Path) -> Result<Graph> {
    let mut header: Option<usize> = None;
    let mut edges = Vec::new();
    let mut lines_of = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix(NODES_HEADER) {
            if header.is_some() {
                return Err(parse_err(path, lineno, "repeated %nodes header"));
            }
            header = Some(field(path, lineno, rest, "node count")?);
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(parse_err(path, lineno, "expected `src dst [weight]`"));
        }
        let s: usize = field(path, lineno, tokens[0], "source id")?;
        let t: usize = field(path, lineno, tokens[1], "target id")?;
        let w: f64 = match tokens.get(2) {
            Some(tok) => field(path, lineno, tok, "weight")?,
            None => 1.0,
        };
        if !(w > 0.0) || !w.is_finite() {
            return Err(parse_err(path, lineno, format!("non-positive weight {w}")));
        }
        let key = if directed { (s, t) } else { (s.min(t), s.max(t)) };
        if !seen.insert(key) {
            return Err(parse_err(path, lineno, format!("duplicate edge ({s}, {t})")));
        }
        edges.push((s, t, w));
        lines_of.push(lineno);
    }
    let inferred = edges.iter().map(|&(s, t, _)| s.max(t) + 1).max().unwrap_or(0);
    let n_nodes = match header {
        Some(n) => {
            if let Some(k) = edges.iter().position(|&(s, t, _)| s.max(t) >= n) {
                let (s, t, _) = edges[k];
                return Err(parse_err(
                    path,
                    lines_of[k],
                    format!("node {} out of range for %nodes {n}", s.max(t)),
                ));
            }
            n
        }
        None => inferred,
    };
    Graph::from_edges(n_nodes, directed, edges)
}

/// Canonical text: header, then edges in row order; unit weights are omitted.
pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("{NODES_HEADER} {}\n", g.n_nodes());
    for (s, t, w) in g.edges() {
        if w == 1.0 {
            let _ = writeln!(out, "{s} {t}");
        } else {
            let _ = writeln!(out, "{s} {t} {w}");
        }
    }
    out
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_edge_list(g))?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>, n_nodes: usize) -> Result<NodeLabels> {
    let path = path.as_ref();
    parse_labels(&fs::read_to_string(path)?, n_nodes, path)
}

/// `node,label` rows, optional header line. Nodes not listed are unlabeled.
pub fn parse_labels(text: &str, n_nodes: usize, path: &Path) -> Result<NodeLabels> {
    let mut labels = vec![None; n_nodes];
    for (k, (lineno, line)) in content_lines(text).enumerate() {
        if k == 0 && looks_like_header(line) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(parse_err(path, lineno, "expected `node,label`"));
        }
        let v: usize = field(path, lineno, parts[0], "node id")?;
        let c: usize = field(path, lineno, parts[1], "label")?;
        if v >= n_nodes {
            return Err(parse_err(path, lineno, format!("node {v} out of range ({n_nodes} nodes)")));
        }
        if labels[v].replace(c).is_some() {
            return Err(parse_err(path, lineno, format!("node {v} labeled twice")));
        }
    }
    let n_classes = labels.iter().flatten().max().map_or(0, |m| m + 1);
    NodeLabels::new(labels, n_classes)
}

pub fn write_labels(labels: &NodeLabels) -> String {
    let mut out = String::from("node,label\n");
    for (v, c) in labels.as_slice().iter().enumerate() {
        if let Some(c) = c {
            let _ = writeln!(out, "{v},{c}");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    /// Row `i` of the file is node `i`.
    Dense,
    /// `node,feature_index,value`.
    Triplets,
}

pub fn load_features(path: impl AsRef<Path>, format: FeatureFormat, n_nodes: usize) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    parse_features(&fs::read_to_string(path)?, format, n_nodes, path)
}

pub fn parse_features(text: &str, format: FeatureFormat, n_nodes: usize, path: &Path) -> Result<FeatureMatrix> {
    match format {
        FeatureFormat::Dense => {
            let mut rows = Vec::new();
            for (lineno, line) in content_lines(text) {
                let row = line
                    .split(',')
                    .map(|t| field::<f64>(path, lineno, t, "feature value"))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(first) = rows.first().map(Vec::len) {
                    if row.len() != first {
                        return Err(parse_err(path, lineno, format!("expected {first} columns")));
                    }
                }
                rows.push(row);
            }
            if rows.len() != n_nodes {
                return Err(Error::Shape(format!(
                    "{} feature rows for {n_nodes} nodes",
                    rows.len()
                )));
            }
            FeatureMatrix::from_dense_rows(&rows)
        }
        FeatureFormat::Triplets => {
            let mut triplets = Vec::new();
            for (k, (lineno, line)) in content_lines(text).enumerate() {
                if k == 0 && looks_like_header(line) {
                    continue;
                }
                let parts: Vec<&str> = line.split(',').collect();
                if parts.len() != 3 {
                    return Err(parse_err(path, lineno, "expected `node,feature_index,value`"));
                }
                let v: usize = field(path, lineno, parts[0], "node id")?;
                let j: usize = field(path, lineno, parts[1], "feature index")?;
                let x: f64 = field(path, lineno, parts[2], "feature value")?;
                if v >= n_nodes {
                    return Err(parse_err(path, lineno, format!("node {v} out of range ({n_nodes} nodes)")));
                }
                triplets.push((v, j, x));
            }
            let n_cols = triplets.iter().map(|&(_, j, _)| j + 1).max().unwrap_or(0);
            FeatureMatrix::from_triplets(n_nodes, n_cols, triplets)
        }
    }
}

pub fn write_features_triplets(x: &FeatureMatrix) -> String {
    let mut out = String::from("node,feature_index,value\n");
    for (i, j, v) in x.triplets() {
        let _ = writeln!(out, "{i},{j},{v}");
    }
    out
}

pub fn load_interactions(path: impl AsRef<Path>) -> Result<BipartiteGraph> {
    let path = path.as_ref();
    parse_interactions(&fs::read_to_string(path)?, path)
}

/// `user<TAB>item` lines; extra columns (ratings, timestamps) are ignored.
pub fn parse_interactions(text: &str, path: &Path) -> Result<BipartiteGraph> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in content_lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(parse_err(path, lineno, "expected `user<TAB>item`"));
        }
        let u: usize = field(path, lineno, tokens[0], "user id")?;
        let i: usize = field(path, lineno, tokens[1], "item id")?;
        if !seen.insert((u, i)) {
            return Err(parse_err(path, lineno, format!("duplicate interaction ({u}, {i})")));
        }
        pairs.push((u, i));
    }
    let n_users = pairs.iter().map(|&(u, _)| u + 1).max().unwrap_or(0);
    let n_items = pairs.iter().map(|&(_, i)| i + 1).max().unwrap_or(0);
    BipartiteGraph::new(n_users, n_items, pairs)
}

pub fn write_interactions(bg: &BipartiteGraph) -> String {
    let mut out = String::new();
    for (u, i) in bg.pairs() {
        let _ = writeln!(out, "{u}\t{i}");
    }
    out
}

pub(crate) fn read_csv_rows(path: &Path, n_fields: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (k, (lineno, line)) in content_lines(&text).enumerate() {
        if k == 0 && looks_like_header(line) {
            continue;
        }
        let parts: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if parts.len() != n_fields {
            return Err(parse_err(path, lineno, format!("expected {n_fields} fields")));
        }
        rows.push((lineno, parts));
    }
    Ok(rows)
}

pub(crate) fn parse_field<T: FromStr>(path: &Path, line: usize, token: &str, what: &str) -> Result<T> {
    field(path, line, token, what)
}
