//! Diagnostics shared by the graph validators, the fact reader and the bundle loader.

use std::fmt;

use serde::Serialize;

/// 1-based line and column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Everything that can be wrong with an input, from a stray character to a
/// pronoun that names no node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Issue {
    // fact syntax
    SyntaxError {
        message: String,
    },
    UnknownPredicate {
        name: String,
    },
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    BadIdentifier {
        text: String,
    },
    InvalidUtf8,

    // graph structure
    DanglingEdge {
        source: String,
        label: String,
        target: String,
    },
    OrphanNode {
        node: String,
    },
    MultipleClassMembership {
        node: String,
        classes: Vec<String>,
    },
    MissingClass {
        node: String,
    },
    InstanceOfTargetNotClass {
        source: String,
        target: String,
    },
    RelationOnClassNode {
        source: String,
        label: String,
        target: String,
    },
    CycleDetected {
        nodes: Vec<String>,
    },
    ReservedLabelMisuse {
        source: String,
        target: String,
    },
    AsymmetricSameAs {
        source: String,
        target: String,
    },
    SameAsOnClassNode {
        node: String,
    },
    SelfSameAs {
        node: String,
    },
    MissingSameAs,
    UnknownNode {
        node: String,
    },
    NotAnInstanceNode {
        node: String,
    },

    // bundle assembly
    MissingPronoun,
    DuplicatePronoun {
        nodes: Vec<String>,
    },
    MissingAnswerChoice {
        which: u8,
    },
    DuplicateAnswerChoice {
        which: u8,
        nodes: Vec<String>,
    },
    PronounNotInGraph {
        node: String,
    },
    AnswerChoiceNotInGraph {
        which: u8,
        node: String,
    },
    RolesNotDistinct {
        node: String,
    },
    AuxPairNotInGraph {
        predicate: String,
        sentence: String,
        knowledge: String,
    },
    MultipleKnowledge {
        files: Vec<String>,
    },
    DuplicateExpected {
        nodes: Vec<String>,
    },
    Io {
        message: String,
    },

    // warnings
    ClassOutsideVocabulary {
        node: String,
        class: String,
    },
    UnsharedKnowledgeClass {
        class: String,
    },
}

impl Issue {
    pub fn severity(&self) -> Severity {
        match self {
            Issue::ClassOutsideVocabulary { .. } | Issue::UnsharedKnowledgeClass { .. } => {
                Severity::Warning
            }
            _ => Severity::Error,
        }
    }

    /// Short machine-friendly name of the issue kind.
    pub fn code(&self) -> &'static str {
        match self {
            Issue::SyntaxError { .. } => "SyntaxError",
            Issue::UnknownPredicate { .. } => "UnknownPredicate",
            Issue::ArityMismatch { .. } => "ArityMismatch",
            Issue::BadIdentifier { .. } => "BadIdentifier",
            Issue::InvalidUtf8 => "InvalidUtf8",
            Issue::DanglingEdge { .. } => "DanglingEdge",
            Issue::OrphanNode { .. } => "OrphanNode",
            Issue::MultipleClassMembership { .. } => "MultipleClassMembership",
            Issue::MissingClass { .. } => "MissingClass",
            Issue::InstanceOfTargetNotClass { .. } => "InstanceOfTargetNotClass",
            Issue::RelationOnClassNode { .. } => "RelationOnClassNode",
            Issue::CycleDetected { .. } => "CycleDetected",
            Issue::ReservedLabelMisuse { .. } => "ReservedLabelMisuse",
            Issue::AsymmetricSameAs { .. } => "AsymmetricSameAs",
            Issue::SameAsOnClassNode { .. } => "SameAsOnClassNode",
            Issue::SelfSameAs { .. } => "SelfSameAs",
            Issue::MissingSameAs => "MissingSameAs",
            Issue::UnknownNode { .. } => "UnknownNode",
            Issue::NotAnInstanceNode { .. } => "NotAnInstanceNode",
            Issue::MissingPronoun => "MissingPronoun",
            Issue::DuplicatePronoun { .. } => "DuplicatePronoun",
            Issue::MissingAnswerChoice { .. } => "MissingAnswerChoice",
            Issue::DuplicateAnswerChoice { .. } => "DuplicateAnswerChoice",
            Issue::PronounNotInGraph { .. } => "PronounNotInGraph",
            Issue::AnswerChoiceNotInGraph { .. } => "AnswerChoiceNotInGraph",
            Issue::RolesNotDistinct { .. } => "RolesNotDistinct",
            Issue::AuxPairNotInGraph { .. } => "AuxPairNotInGraph",
            Issue::MultipleKnowledge { .. } => "MultipleKnowledge",
            Issue::DuplicateExpected { .. } => "DuplicateExpected",
            Issue::Io { .. } => "Io",
            Issue::ClassOutsideVocabulary { .. } => "ClassOutsideVocabulary",
            Issue::UnsharedKnowledgeClass { .. } => "UnsharedKnowledgeClass",
        }
    }

    /// The node (or edge source) the issue is about, used to point back into
    /// the fact file.
    pub fn subject(&self) -> Option<&str> {
        match self {
            Issue::DanglingEdge { source, .. }
            | Issue::InstanceOfTargetNotClass { source, .. }
            | Issue::RelationOnClassNode { source, .. }
            | Issue::ReservedLabelMisuse { source, .. }
            | Issue::AsymmetricSameAs { source, .. } => Some(source),
            Issue::OrphanNode { node }
            | Issue::MultipleClassMembership { node, .. }
            | Issue::MissingClass { node }
            | Issue::SameAsOnClassNode { node }
            | Issue::SelfSameAs { node }
            | Issue::UnknownNode { node }
            | Issue::NotAnInstanceNode { node }
            | Issue::PronounNotInGraph { node }
            | Issue::AnswerChoiceNotInGraph { node, .. }
            | Issue::RolesNotDistinct { node }
            | Issue::ClassOutsideVocabulary { node, .. } => Some(node),
            Issue::CycleDetected { nodes } => nodes.first().map(String::as_str),
            Issue::AuxPairNotInGraph { sentence, .. } => Some(sentence),
            Issue::UnsharedKnowledgeClass { class } => Some(class),
            _ => None,
        }
    }
}

impl Issue {
    /// Endpoints of the edge the issue is about, if it is about one edge.
    pub fn edge(&self) -> Option<(&str, &str)> {
        match self {
            Issue::DanglingEdge { source, target, .. }
            | Issue::InstanceOfTargetNotClass { source, target }
            | Issue::RelationOnClassNode { source, target, .. }
            | Issue::ReservedLabelMisuse { source, target }
            | Issue::AsymmetricSameAs { source, target } => Some((source, target)),
            _ => None,
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::SyntaxError { message } => write!(f, "syntax error: {message}"),
            Issue::UnknownPredicate { name } => write!(f, "unknown predicate `{name}`"),
            Issue::ArityMismatch { predicate, expected, found } => write!(
                f,
                "`{predicate}` takes {expected} argument(s), found {found}"
            ),
            Issue::BadIdentifier { text } => write!(f, "bad identifier {text:?}"),
            Issue::InvalidUtf8 => f.write_str("input is not valid UTF-8"),
            Issue::DanglingEdge { source, label, target } => write!(
                f,
                "edge ({source}, {label}, {target}) has an endpoint outside the node set"
            ),
            Issue::OrphanNode { node } => write!(f, "node `{node}` has no incident edge"),
            Issue::MultipleClassMembership { node, classes } => write!(
                f,
                "node `{node}` is an instance of several classes: {}",
                classes.join(", ")
            ),
            Issue::MissingClass { node } => write!(
                f,
                "node `{node}` takes part in relations but has no instance_of edge"
            ),
            Issue::InstanceOfTargetNotClass { source, target } => write!(
                f,
                "instance_of edge from `{source}` points at instance node `{target}`"
            ),
            Issue::RelationOnClassNode { source, label, target } => write!(
                f,
                "relation ({source}, {label}, {target}) touches a class node"
            ),
            Issue::CycleDetected { nodes } => {
                write!(f, "cycle through nodes: {}", nodes.join(", "))
            }
            Issue::ReservedLabelMisuse { source, target } => write!(
                f,
                "is_same_as edge ({source}, {target}) is not allowed in a sentence graph"
            ),
            Issue::AsymmetricSameAs { source, target } => write!(
                f,
                "is_same_as edge ({source}, {target}) has no reverse edge"
            ),
            Issue::SameAsOnClassNode { node } => {
                write!(f, "is_same_as edge touches class node `{node}`")
            }
            Issue::SelfSameAs { node } => write!(f, "`{node}` is declared the same as itself"),
            Issue::MissingSameAs => f.write_str("knowledge graph has no is_same_as pair"),
            Issue::UnknownNode { node } => write!(f, "unknown node `{node}`"),
            Issue::NotAnInstanceNode { node } => write!(f, "`{node}` is not an instance node"),
            Issue::MissingPronoun => f.write_str("no pronoun fact"),
            Issue::DuplicatePronoun { nodes } => {
                write!(f, "several pronoun facts: {}", nodes.join(", "))
            }
            Issue::MissingAnswerChoice { which } => write!(f, "no ans_ch{which} fact"),
            Issue::DuplicateAnswerChoice { which, nodes } => {
                write!(f, "several ans_ch{which} facts: {}", nodes.join(", "))
            }
            Issue::PronounNotInGraph { node } => {
                write!(f, "pronoun `{node}` is not an instance node of the sentence graph")
            }
            Issue::AnswerChoiceNotInGraph { which, node } => write!(
                f,
                "answer choice {which} `{node}` is not an instance node of the sentence graph"
            ),
            Issue::RolesNotDistinct { node } => write!(
                f,
                "`{node}` is used for more than one of pronoun, ans_ch1, ans_ch2"
            ),
            Issue::AuxPairNotInGraph { predicate, sentence, knowledge } => write!(
                f,
                "{predicate}({sentence}, {knowledge}) must pair a sentence instance node with a knowledge instance node"
            ),
            Issue::MultipleKnowledge { files } => write!(
                f,
                "more than one piece of knowledge supplied ({}); only one is supported",
                files.join(", ")
            ),
            Issue::DuplicateExpected { nodes } => {
                write!(f, "several expected facts: {}", nodes.join(", "))
            }
            Issue::Io { message } => f.write_str(message),
            Issue::ClassOutsideVocabulary { node, class } => write!(
                f,
                "class `{class}` of `{node}` is not one of the 20 entity classes"
            ),
            Issue::UnsharedKnowledgeClass { class } => write!(
                f,
                "knowledge class `{class}` never occurs in the sentence graph"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub issue: Issue,
    pub location: Option<Location>,
    pub file: Option<String>,
}

impl Diagnostic {
    pub fn new(issue: Issue) -> Self {
        Diagnostic {
            issue,
            location: None,
            file: None,
        }
    }

    pub fn at(issue: Issue, line: usize, column: usize) -> Self {
        Diagnostic {
            issue,
            location: Some(Location { line, column }),
            file: None,
        }
    }

    pub fn severity(&self) -> Severity {
        self.issue.severity()
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        if let Some(loc) = &self.location {
            write!(f, "{loc}:")?;
        }
        if self.file.is_some() || self.location.is_some() {
            f.write_str(" ")?;
        }
        write!(
            f,
            "{}[{}]: {}",
            self.severity(),
            self.issue.code(),
            self.issue
        )
    }
}

impl From<Issue> for Diagnostic {
    fn from(issue: Issue) -> Self {
        Diagnostic::new(issue)
    }
}

/// A non-empty batch of diagnostics returned in place of a value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn iter(&self) -> std::slice::Iter<'_, Diagnostic> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn has_errors(&self) -> bool {
        self.0.iter().any(|d| d.severity() == Severity::Error)
    }

    pub fn contains(&self, pred: impl Fn(&Issue) -> bool) -> bool {
        self.0.iter().any(|d| pred(&d.issue))
    }

    pub fn push(&mut self, d: impl Into<Diagnostic>) {
        self.0.push(d.into());
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.0.extend(other.0);
    }

    pub fn in_file(self, file: &str) -> Self {
        Diagnostics(
            self.0
                .into_iter()
                .map(|d| if d.file.is_none() { d.in_file(file) } else { d })
                .collect(),
        )
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

impl From<Issue> for Diagnostics {
    fn from(issue: Issue) -> Self {
        Diagnostics(vec![Diagnostic::new(issue)])
    }
}

impl IntoIterator for Diagnostics {
    type Item = Diagnostic;
    type IntoIter = std::vec::IntoIter<Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}
