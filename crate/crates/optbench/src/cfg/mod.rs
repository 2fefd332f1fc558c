//! Lightweight intraprocedural control-flow graphs extracted from C-like
//! source at the token level, and graph edit distance between them.
//!
//! The extraction is deliberately not a full C++ parser: blocks are split at
//! control keywords and calls to functions defined in the same translation
//! unit, preprocessor directives are stripped, and anything unparsable
//! collapses into plain statement blocks. That is enough fidelity for GED as
//! a structural disparity statistic.

mod build;
mod ged;

pub use build::build_cfg;
pub use ged::{
    annotate_pairs, ged, ged_histogram, AnnotateReport, CostModel, GedResult, HistRow,
    DEFAULT_GED_BUDGET,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CfgError {
    #[error("unbalanced braces in source")]
    UnbalancedBraces,
    #[error("empty source")]
    EmptySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Entry,
    Exit,
    Straight,
    Branch,
    LoopHead,
    Call,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Fallthrough,
    True,
    False,
    Back,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub id: usize,
    pub kind: NodeKind,
    pub stmt_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cfg {
    pub nodes: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
}

impl Cfg {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|e| e.from == id).count()
    }

    pub fn kind_of(&self, id: usize) -> NodeKind {
        self.nodes[id].kind
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}
