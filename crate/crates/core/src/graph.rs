//! Labeled graphs for sentences and pieces of knowledge.
//!
//! A sentence graph has two kinds of nodes. Instance nodes stand for token
//! occurrences (`man_2`) and class nodes name their type (`person`, `lift`).
//! Every instance node points at exactly one class node through an
//! `instance_of` edge; all other edges relate two instance nodes. A knowledge
//! graph is a sentence graph plus one or more symmetric `is_same_as` pairs.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::diag::{Diagnostic, Diagnostics, Issue};

pub const INSTANCE_OF: &str = "instance_of";
pub const IS_SAME_AS: &str = "is_same_as";

/// The twenty entity classes used for nouns and pronouns. Any other class
/// node is a lemma class.
pub const ENTITY_CLASSES: [&str; 20] = [
    "object",
    "person",
    "group",
    "location",
    "quantity",
    "shape",
    "animal",
    "plant",
    "cognition",
    "communication",
    "event",
    "feeling",
    "act",
    "motive",
    "phenomenon",
    "possession",
    "process",
    "relation",
    "state",
    "time",
];

pub fn is_entity_class(name: &str) -> bool {
    ENTITY_CLASSES.contains(&name)
}

fn valid_identifier(text: &str) -> bool {
    !text.is_empty() && text.chars().all(|c| c.is_alphanumeric() || c == '_')
}

macro_rules! identifier_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(text: impl Into<String>) -> Result<Self, Issue> {
                let text = text.into();
                if valid_identifier(&text) {
                    Ok($name(text))
                } else {
                    Err(Issue::BadIdentifier { text })
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<&str> for $name {
            type Error = Issue;

            fn try_from(text: &str) -> Result<Self, Issue> {
                $name::new(text)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }
    };
}

identifier_type!(
    /// Node identifier: letters, digits and underscores, compared exactly.
    NodeId
);
identifier_type!(
    /// Edge label. `instance_of` and `is_same_as` are reserved.
    EdgeLabel
);

impl EdgeLabel {
    pub fn instance_of() -> Self {
        EdgeLabel(INSTANCE_OF.to_owned())
    }

    pub fn is_same_as() -> Self {
        EdgeLabel(IS_SAME_AS.to_owned())
    }

    pub fn is_instance_of(&self) -> bool {
        self.0 == INSTANCE_OF
    }

    pub fn is_same_as_label(&self) -> bool {
        self.0 == IS_SAME_AS
    }
}

/// Shorthand for building ids in tests and generators; panics on bad input.
pub fn node(text: &str) -> NodeId {
    NodeId::new(text).unwrap_or_else(|e| panic!("{e}"))
}

pub fn label(text: &str) -> EdgeLabel {
    EdgeLabel::new(text).unwrap_or_else(|e| panic!("{e}"))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub source: NodeId,
    pub label: EdgeLabel,
    pub target: NodeId,
}

impl Edge {
    pub fn new(source: NodeId, label: EdgeLabel, target: NodeId) -> Self {
        Edge {
            source,
            label,
            target,
        }
    }

    /// Builds an edge from string parts; panics on bad identifiers.
    pub fn of(source: &str, label_text: &str, target: &str) -> Self {
        Edge::new(node(source), label(label_text), node(target))
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.source, self.label, self.target)
    }
}

/// A set of nodes and a set of labeled directed edges over them. Nothing is
/// checked here; the validators below do that.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledGraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeSet<Edge>,
}

impl LabeledGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(nodes: BTreeSet<NodeId>, edges: BTreeSet<Edge>) -> Self {
        LabeledGraph { nodes, edges }
    }

    /// Graph whose node set is exactly the edge endpoints.
    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut g = LabeledGraph::new();
        for e in edges {
            g.add_edge(e);
        }
        g
    }

    pub fn add_node(&mut self, n: NodeId) {
        self.nodes.insert(n);
    }

    /// Inserts the edge and both endpoints.
    pub fn add_edge(&mut self, e: Edge) {
        self.nodes.insert(e.source.clone());
        self.nodes.insert(e.target.clone());
        self.edges.insert(e);
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn contains_node(&self, n: &str) -> bool {
        self.nodes.contains(n)
    }

    pub fn contains_edge(&self, source: &str, label: &str, target: &str) -> bool {
        self.edges.iter().any(|e| {
            e.source.as_str() == source && e.label.as_str() == label && e.target.as_str() == target
        })
    }
}

/// Node order that respects every edge not labeled `is_same_as`, or `None`
/// when those edges contain a cycle.
pub fn topological_order(g: &LabeledGraph) -> Option<Vec<NodeId>> {
    let (order, _) = kahn(
        g.nodes(),
        g.edges().iter().filter(|e| !e.label.is_same_as_label()),
    );
    (order.len() == g.nodes().len()).then_some(order)
}

fn kahn<'a>(
    nodes: &BTreeSet<NodeId>,
    edges: impl Iterator<Item = &'a Edge>,
) -> (Vec<NodeId>, Vec<NodeId>) {
    let mut indegree: BTreeMap<&NodeId, usize> = nodes.iter().map(|n| (n, 0)).collect();
    let mut succ: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in edges {
        if let Some(d) = indegree.get_mut(&e.target) {
            *d += 1;
        }
        succ.entry(&e.source).or_default().push(&e.target);
    }
    let mut queue: VecDeque<&NodeId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(n) = queue.pop_front() {
        order.push(n.clone());
        for t in succ.get(n).into_iter().flatten() {
            if let Some(d) = indegree.get_mut(*t) {
                *d -= 1;
                if *d == 0 {
                    queue.push_back(t);
                }
            }
        }
    }
    let stuck = indegree
        .into_iter()
        .filter(|(_, d)| *d > 0)
        .map(|(n, _)| n.clone())
        .collect();
    (order, stuck)
}

/// Read access shared by sentence and knowledge graphs.
pub trait InstanceGraph {
    fn labeled(&self) -> &LabeledGraph;
    fn instance_nodes(&self) -> &BTreeSet<NodeId>;
    fn class_nodes(&self) -> &BTreeSet<NodeId>;
    fn class_map(&self) -> &BTreeMap<NodeId, NodeId>;

    fn is_instance(&self, n: &str) -> bool {
        self.instance_nodes().contains(n)
    }
}

/// The unique class node `c` with an edge `(n, instance_of, c)`.
pub fn class_of<'g, G: InstanceGraph + ?Sized>(g: &'g G, n: &str) -> Result<&'g NodeId, Issue> {
    match g.class_map().get(n) {
        Some(c) => Ok(c),
        None if g.labeled().contains_node(n) => {
            Err(Issue::NotAnInstanceNode { node: n.to_owned() })
        }
        None => Err(Issue::UnknownNode { node: n.to_owned() }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceGraph {
    graph: LabeledGraph,
    instance_nodes: BTreeSet<NodeId>,
    class_nodes: BTreeSet<NodeId>,
    classes: BTreeMap<NodeId, NodeId>,
}

impl SentenceGraph {
    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    /// Edges between instance nodes.
    pub fn relation_edges(&self) -> impl Iterator<Item = &Edge> {
        self.graph
            .edges()
            .iter()
            .filter(|e| !e.label.is_instance_of())
    }
}

impl InstanceGraph for SentenceGraph {
    fn labeled(&self) -> &LabeledGraph {
        &self.graph
    }
    fn instance_nodes(&self) -> &BTreeSet<NodeId> {
        &self.instance_nodes
    }
    fn class_nodes(&self) -> &BTreeSet<NodeId> {
        &self.class_nodes
    }
    fn class_map(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.classes
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeGraph {
    graph: LabeledGraph,
    instance_nodes: BTreeSet<NodeId>,
    class_nodes: BTreeSet<NodeId>,
    classes: BTreeMap<NodeId, NodeId>,
    // each pair stored with the smaller id first
    same_as_pairs: BTreeSet<(NodeId, NodeId)>,
}

impl KnowledgeGraph {
    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn same_as_pairs(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.same_as_pairs
    }

    /// Nodes linked to `n` by an `is_same_as` edge in either direction.
    pub fn same_as_partners(&self, n: &str) -> BTreeSet<&NodeId> {
        self.same_as_pairs
            .iter()
            .filter_map(|(a, b)| {
                if a.as_str() == n {
                    Some(b)
                } else if b.as_str() == n {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_same_as(&self, a: &str, b: &str) -> bool {
        self.same_as_partners(a).iter().any(|p| p.as_str() == b)
    }

    /// Adds the pair `{x, y}` to this knowledge graph.
    pub fn add_same_as_pair(&self, x: &str, y: &str) -> Result<KnowledgeGraph, Diagnostics> {
        with_same_as_pair(self.graph.clone(), self, x, y)
    }
}

impl InstanceGraph for KnowledgeGraph {
    fn labeled(&self) -> &LabeledGraph {
        &self.graph
    }
    fn instance_nodes(&self) -> &BTreeSet<NodeId> {
        &self.instance_nodes
    }
    fn class_nodes(&self) -> &BTreeSet<NodeId> {
        &self.class_nodes
    }
    fn class_map(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.classes
    }
}

/// Turns a sentence graph into a knowledge graph by adding both directed
/// `is_same_as` edges between `x` and `y`.
pub fn add_same_as_pair(
    g: &SentenceGraph,
    x: &str,
    y: &str,
) -> Result<KnowledgeGraph, Diagnostics> {
    with_same_as_pair(g.graph.clone(), g, x, y)
}

fn with_same_as_pair<G: InstanceGraph>(
    mut graph: LabeledGraph,
    shape: &G,
    x: &str,
    y: &str,
) -> Result<KnowledgeGraph, Diagnostics> {
    for n in [x, y] {
        match class_of(shape, n) {
            Ok(_) => {}
            Err(Issue::NotAnInstanceNode { node }) => {
                return Err(Issue::SameAsOnClassNode { node }.into())
            }
            Err(issue) => return Err(issue.into()),
        }
    }
    if x == y {
        return Err(Issue::SelfSameAs { node: x.to_owned() }.into());
    }
    graph.add_edge(Edge::new(node(x), EdgeLabel::is_same_as(), node(y)));
    graph.add_edge(Edge::new(node(y), EdgeLabel::is_same_as(), node(x)));
    validate_knowledge_graph(&graph)
}

struct Classified {
    instance_nodes: BTreeSet<NodeId>,
    class_nodes: BTreeSet<NodeId>,
    classes: BTreeMap<NodeId, NodeId>,
}

/// Checks everything a sentence graph requires of the edges that are not
/// `is_same_as`. `all_edges` is only used for the orphan check.
fn classify(
    g: &LabeledGraph,
    structural: &[&Edge],
    all_edges: &[&Edge],
    diags: &mut Diagnostics,
) -> Classified {
    let mut class_edges: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in structural.iter().filter(|e| e.label.is_instance_of()) {
        class_edges.entry(&e.source).or_default().push(&e.target);
    }
    let is_instance = |n: &NodeId| class_edges.contains_key(n);
    let class_targets: BTreeSet<&NodeId> = class_edges.values().flatten().copied().collect();

    for (n, cs) in &class_edges {
        if cs.len() > 1 {
            diags.push(Issue::MultipleClassMembership {
                node: n.to_string(),
                classes: cs.iter().map(|c| c.to_string()).collect(),
            });
        }
    }

    let mut missing_class = BTreeSet::new();
    for e in structural {
        if e.label.is_instance_of() {
            if is_instance(&e.target) {
                diags.push(Issue::InstanceOfTargetNotClass {
                    source: e.source.to_string(),
                    target: e.target.to_string(),
                });
            }
            continue;
        }
        for end in [&e.source, &e.target] {
            if is_instance(end) {
                continue;
            }
            if class_targets.contains(end) {
                diags.push(Issue::RelationOnClassNode {
                    source: e.source.to_string(),
                    label: e.label.to_string(),
                    target: e.target.to_string(),
                });
                break;
            } else if missing_class.insert(end) {
                diags.push(Issue::MissingClass {
                    node: end.to_string(),
                });
            }
        }
    }

    let touched: BTreeSet<&NodeId> = all_edges
        .iter()
        .flat_map(|e| [&e.source, &e.target])
        .collect();
    for n in g.nodes() {
        if !touched.contains(n) {
            diags.push(Issue::OrphanNode {
                node: n.to_string(),
            });
        }
    }

    let (_, mut stuck) = kahn(g.nodes(), structural.iter().copied());
    // drop nodes that are only downstream of a cycle
    loop {
        let on_path: BTreeSet<&NodeId> = structural
            .iter()
            .filter(|e| stuck.contains(&e.source) && stuck.contains(&e.target))
            .map(|e| &e.source)
            .collect();
        let before = stuck.len();
        stuck.retain(|n| on_path.contains(n));
        if stuck.len() == before {
            break;
        }
    }
    if !stuck.is_empty() {
        diags.push(Issue::CycleDetected {
            nodes: stuck.iter().map(|n| n.to_string()).collect(),
        });
    }

    let classes: BTreeMap<NodeId, NodeId> = class_edges
        .iter()
        .map(|(n, cs)| ((*n).clone(), cs[0].clone()))
        .collect();
    let instance_nodes: BTreeSet<NodeId> = classes.keys().cloned().collect();
    let class_nodes = g
        .nodes()
        .iter()
        .filter(|n| !instance_nodes.contains(*n))
        .cloned()
        .collect();
    Classified {
        instance_nodes,
        class_nodes,
        classes,
    }
}

fn dangling<'g>(g: &'g LabeledGraph, diags: &mut Diagnostics) -> Vec<&'g Edge> {
    let mut ok = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        if g.contains_node(e.source.as_str()) && g.contains_node(e.target.as_str()) {
            ok.push(e);
        } else {
            diags.push(Issue::DanglingEdge {
                source: e.source.to_string(),
                label: e.label.to_string(),
                target: e.target.to_string(),
            });
        }
    }
    ok
}

/// Classifies the nodes of `g` and checks every sentence-graph invariant.
pub fn validate_sentence_graph(g: &LabeledGraph) -> Result<SentenceGraph, Diagnostics> {
    let mut diags = Diagnostics::default();
    let edges = dangling(g, &mut diags);
    let mut structural = Vec::with_capacity(edges.len());
    for e in &edges {
        if e.label.is_same_as_label() {
            diags.push(Issue::ReservedLabelMisuse {
                source: e.source.to_string(),
                target: e.target.to_string(),
            });
        } else {
            structural.push(*e);
        }
    }
    let c = classify(g, &structural, &edges, &mut diags);
    if diags.has_errors() {
        return Err(diags);
    }
    Ok(SentenceGraph {
        graph: g.clone(),
        instance_nodes: c.instance_nodes,
        class_nodes: c.class_nodes,
        classes: c.classes,
    })
}

/// As [`validate_sentence_graph`], plus collection and checking of the
/// `is_same_as` pairs.
pub fn validate_knowledge_graph(g: &LabeledGraph) -> Result<KnowledgeGraph, Diagnostics> {
    let mut diags = Diagnostics::default();
    let edges = dangling(g, &mut diags);
    let (same_as, structural): (Vec<&Edge>, Vec<&Edge>) = edges
        .iter()
        .copied()
        .partition(|e| e.label.is_same_as_label());
    let c = classify(g, &structural, &edges, &mut diags);

    let mut pairs = BTreeSet::new();
    let mut on_class = BTreeSet::new();
    for e in &same_as {
        if e.source == e.target {
            diags.push(Issue::SelfSameAs {
                node: e.source.to_string(),
            });
            continue;
        }
        let mut endpoints_ok = true;
        for end in [&e.source, &e.target] {
            if !c.instance_nodes.contains(end) {
                endpoints_ok = false;
                if on_class.insert(end) {
                    diags.push(Issue::SameAsOnClassNode {
                        node: end.to_string(),
                    });
                }
            }
        }
        let reverse = g.edges().contains(&Edge::new(
            e.target.clone(),
            EdgeLabel::is_same_as(),
            e.source.clone(),
        ));
        if !reverse {
            diags.push(Issue::AsymmetricSameAs {
                source: e.source.to_string(),
                target: e.target.to_string(),
            });
        } else if endpoints_ok {
            let pair = if e.source < e.target {
                (e.source.clone(), e.target.clone())
            } else {
                (e.target.clone(), e.source.clone())
            };
            pairs.insert(pair);
        }
    }
    if same_as.is_empty() {
        diags.push(Issue::MissingSameAs);
    }
    if diags.has_errors() {
        return Err(diags);
    }
    Ok(KnowledgeGraph {
        graph: g.clone(),
        instance_nodes: c.instance_nodes,
        class_nodes: c.class_nodes,
        classes: c.classes,
        same_as_pairs: pairs,
    })
}

/// Warns when a noun-like node (pronoun, answer choice, `is_same_as`
/// endpoint) has a class outside [`ENTITY_CLASSES`].
pub fn vocabulary_warnings<'a, G: InstanceGraph>(
    g: &G,
    noun_nodes: impl IntoIterator<Item = &'a str>,
) -> Vec<Diagnostic> {
    let mut seen = BTreeSet::new();
    noun_nodes
        .into_iter()
        .filter(|n| seen.insert(*n))
        .filter_map(|n| {
            let class = g.class_map().get(n)?;
            (!is_entity_class(class.as_str())).then(|| {
                Diagnostic::new(Issue::ClassOutsideVocabulary {
                    node: n.to_owned(),
                    class: class.to_string(),
                })
            })
        })
        .collect()
}

/// A pronoun-resolution problem: the sentence graph, the pronoun and the two
/// answer choices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WscProblem {
    pub label: String,
    sentence: SentenceGraph,
    pronoun: NodeId,
    choices: [NodeId; 2],
}

impl WscProblem {
    pub fn new(
        label: impl Into<String>,
        sentence: SentenceGraph,
        pronoun: NodeId,
        choice_1: NodeId,
        choice_2: NodeId,
    ) -> Result<Self, Diagnostics> {
        let mut diags = Diagnostics::default();
        if !sentence.is_instance(pronoun.as_str()) {
            diags.push(Issue::PronounNotInGraph {
                node: pronoun.to_string(),
            });
        }
        for (which, c) in [(1u8, &choice_1), (2, &choice_2)] {
            if !sentence.is_instance(c.as_str()) {
                diags.push(Issue::AnswerChoiceNotInGraph {
                    which,
                    node: c.to_string(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for n in [&pronoun, &choice_1, &choice_2] {
            if !seen.insert(n) {
                diags.push(Issue::RolesNotDistinct {
                    node: n.to_string(),
                });
            }
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        Ok(WscProblem {
            label: label.into(),
            sentence,
            pronoun,
            choices: [choice_1, choice_2],
        })
    }

    pub fn sentence(&self) -> &SentenceGraph {
        &self.sentence
    }

    pub fn pronoun(&self) -> &NodeId {
        &self.pronoun
    }

    pub fn answer_choice_1(&self) -> &NodeId {
        &self.choices[0]
    }

    pub fn answer_choice_2(&self) -> &NodeId {
        &self.choices[1]
    }

    /// The same problem with the two answer choices declared the other way round.
    pub fn with_choices_swapped(&self) -> WscProblem {
        let mut p = self.clone();
        p.choices.swap(0, 1);
        p
    }
}
