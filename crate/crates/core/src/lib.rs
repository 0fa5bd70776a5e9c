//! Node-copying random graphs and their uses: Bayesian GCN ensembles, error
//! correction after adversarial edits, and graph-ensembled BPR ranking.

pub mod adversarial;
pub mod bgcn;
pub mod calibration;
pub mod copying;
pub mod embedding;
pub mod error;
pub mod expected;
pub mod gcn;
pub mod graph;
pub mod io;
pub mod operator;
pub mod recsys;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod theory;
pub mod view;

pub use copying::{
    apply_copy, apply_copy_undirected, sample_graph, sample_zeta, CopyingDistribution, DistributionKind,
    ReplacementVector,
};
pub use error::{Error, Result};
pub use expected::{estimate_expected_adjacency, ExpectedAdjacency};
pub use graph::{BipartiteGraph, DegreeMode, FeatureMatrix, Graph, NodeId, NodeLabels};
pub use view::{copy_single_node, AdjacencyView, SingleCopyView};
