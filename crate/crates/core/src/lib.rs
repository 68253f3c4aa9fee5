//! Pronoun resolution for Winograd-style problems by matching a knowledge
//! graph into a sentence graph.

pub mod diag;
pub mod facts;
pub mod graph;
pub mod harness;
pub mod matcher;
pub mod oracle;
pub mod resolver;

pub use diag::{Diagnostic, Diagnostics, Issue, Location, Severity};
pub use facts::{
    load_problem_bundle, parse_fact_file, serialize_fact_file, Fact, Predicate, ProblemBundle,
};
pub use graph::{Edge, EdgeLabel, KnowledgeGraph, LabeledGraph, NodeId, SentenceGraph, WscProblem};
pub use matcher::{CompatibilityPolicy, Mapping, PolicyMode, SearchBudget};
pub use resolver::{solve, Outcome, Reason, SolveConfig, Verdict};
