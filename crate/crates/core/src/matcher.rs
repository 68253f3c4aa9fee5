//! Core-graph extraction and enumeration of class-compatible
//! graph-subgraph isomorphisms between a sentence and a piece of knowledge.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Edge, InstanceGraph, KnowledgeGraph, NodeId, SentenceGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Sentence,
    Knowledge,
}

/// Instance nodes and the relations between them, with `instance_of` and
/// `is_same_as` edges removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreGraph {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<Edge>,
    pub origin: Origin,
}

impl CoreGraph {
    pub fn degree(&self, n: &NodeId) -> usize {
        self.edges
            .iter()
            .filter(|e| &e.source == n || &e.target == n)
            .count()
    }
}

/// Nodes are the endpoints of non-`instance_of` edges; edges are those edges.
pub fn extract_sentence_core(s: &SentenceGraph) -> CoreGraph {
    let edges: BTreeSet<Edge> = s.relation_edges().cloned().collect();
    let nodes = edges
        .iter()
        .flat_map(|e| [e.source.clone(), e.target.clone()])
        .collect();
    CoreGraph {
        nodes,
        edges,
        origin: Origin::Sentence,
    }
}

/// Nodes are the endpoints of every non-`instance_of` edge, `is_same_as`
/// included; edges exclude `is_same_as`.
pub fn extract_knowledge_core(k: &KnowledgeGraph) -> CoreGraph {
    let relations: Vec<&Edge> = k
        .graph()
        .edges()
        .iter()
        .filter(|e| !e.label.is_instance_of())
        .collect();
    let nodes = relations
        .iter()
        .flat_map(|e| [e.source.clone(), e.target.clone()])
        .collect();
    let edges = relations
        .into_iter()
        .filter(|e| !e.label.is_same_as_label())
        .cloned()
        .collect();
    CoreGraph {
        nodes,
        edges,
        origin: Origin::Knowledge,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    ClassOnly,
    ClassOrSynonym,
    ClassOrSynonymOrSimilar,
}

impl PolicyMode {
    pub fn name(self) -> &'static str {
        match self {
            PolicyMode::ClassOnly => "class_only",
            PolicyMode::ClassOrSynonym => "class_or_synonym",
            PolicyMode::ClassOrSynonymOrSimilar => "class_or_synonym_or_similar",
        }
    }

    pub fn uses_synonyms(self) -> bool {
        self != PolicyMode::ClassOnly
    }

    pub fn uses_similar(self) -> bool {
        self == PolicyMode::ClassOrSynonymOrSimilar
    }
}

impl std::str::FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            PolicyMode::ClassOnly,
            PolicyMode::ClassOrSynonym,
            PolicyMode::ClassOrSynonymOrSimilar,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which (sentence node, knowledge node) pairs may be matched. Pairs are
/// ordered; nothing is symmetric.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompatibilityPolicy {
    pub mode: PolicyMode,
    pub synonyms: BTreeSet<(NodeId, NodeId)>,
    pub similar: BTreeSet<(NodeId, NodeId)>,
}

impl CompatibilityPolicy {
    pub fn class_only() -> Self {
        Self::default()
    }

    pub fn with_mode(mode: PolicyMode) -> Self {
        CompatibilityPolicy {
            mode,
            ..Self::default()
        }
    }
}

fn pair_in(set: &BTreeSet<(NodeId, NodeId)>, x: &NodeId, y: &NodeId) -> bool {
    set.contains(&(x.clone(), y.clone()))
}

/// Same class, or a listed synonym / similar pair when the mode allows it.
pub fn node_compatible(
    policy: &CompatibilityPolicy,
    s: &SentenceGraph,
    k: &KnowledgeGraph,
    x: &NodeId,
    y: &NodeId,
) -> bool {
    let same_class = matches!(
        (s.class_map().get(x), k.class_map().get(y)),
        (Some(a), Some(b)) if a == b
    );
    same_class
        || (policy.mode.uses_synonyms() && pair_in(&policy.synonyms, x, y))
        || (policy.mode.uses_similar() && pair_in(&policy.similar, x, y))
}

/// Bounds on one enumeration. All strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    max_mappings: usize,
    time_limit: Duration,
    node_cap: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("search budget values must be positive")]
pub struct InvalidBudget;

impl SearchBudget {
    pub fn new(
        max_mappings: usize,
        time_limit: Duration,
        node_cap: usize,
    ) -> Result<Self, InvalidBudget> {
        if max_mappings == 0 || time_limit.is_zero() || node_cap == 0 {
            return Err(InvalidBudget);
        }
        Ok(SearchBudget {
            max_mappings,
            time_limit,
            node_cap,
        })
    }

    pub fn max_mappings(&self) -> usize {
        self.max_mappings
    }

    pub fn time_limit(&self) -> Duration {
        self.time_limit
    }

    pub fn node_cap(&self) -> usize {
        self.node_cap
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_mappings: 10_000,
            time_limit: Duration::from_secs(10),
            node_cap: 64,
        }
    }
}

/// One isomorphism: sentence node to knowledge node, injective, total on the
/// knowledge core. Ordered by its sorted pair list.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mapping(BTreeMap<NodeId, NodeId>);

impl Mapping {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        Mapping(pairs.into_iter().collect())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Knowledge node paired with sentence node `s`.
    pub fn image(&self, s: &str) -> Option<&NodeId> {
        self.0.get(s)
    }

    /// Sentence node paired with knowledge node `k`.
    pub fn preimage(&self, k: &str) -> Option<&NodeId> {
        self.0.iter().find(|(_, v)| v.as_str() == k).map(|(s, _)| s)
    }

    pub fn to_pair_strings(&self) -> Vec<(String, String)> {
        self.0
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    MaxMappings,
    TimeLimit,
    NodeCap,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::MaxMappings => "max_mappings",
            Bound::TimeLimit => "time_limit",
            Bound::NodeCap => "node_cap",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exhaustiveness {
    Complete,
    Truncated(Bound),
}

impl Exhaustiveness {
    pub fn is_complete(self) -> bool {
        self == Exhaustiveness::Complete
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    pub mappings: Vec<Mapping>,
    pub exhaustiveness: Exhaustiveness,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("knowledge core graph is empty")]
    NoKnowledgeCore,
}

struct Search<'a> {
    sentence: &'a [&'a NodeId],
    knowledge: &'a [&'a NodeId],
    // knowledge nodes in the order they are assigned
    order: Vec<usize>,
    // candidate sentence indices per knowledge index
    domains: Vec<Vec<usize>>,
    // (neighbour knowledge index, label id, outgoing?) per knowledge index
    k_adj: Vec<Vec<(usize, usize, bool)>>,
    s_edges: HashSet<(usize, usize, usize)>,
    assigned: Vec<Option<usize>>,
    used: Vec<bool>,
    found: Vec<Mapping>,
    max_mappings: usize,
    deadline: Instant,
    steps: u64,
    stop: Option<Bound>,
}

impl Search<'_> {
    fn consistent(&self, k: usize, s: usize) -> bool {
        self.k_adj[k].iter().all(|&(other, lab, outgoing)| {
            let Some(t) = (if other == k {
                Some(s)
            } else {
                self.assigned[other]
            }) else {
                return true;
            };
            if outgoing {
                self.s_edges.contains(&(s, lab, t))
            } else {
                self.s_edges.contains(&(t, lab, s))
            }
        })
    }

    // every unassigned neighbour of `k` must keep at least one live candidate
    fn forward_check(&self, k: usize) -> bool {
        self.k_adj[k].iter().all(|&(other, _, _)| {
            self.assigned[other].is_some()
                || self.domains[other]
                    .iter()
                    .any(|&c| !self.used[c] && self.consistent(other, c))
        })
    }

    fn run(&mut self, depth: usize) {
        if self.stop.is_some() {
            return;
        }
        self.steps += 1;
        if self.steps.is_multiple_of(256) && Instant::now() >= self.deadline {
            self.stop = Some(Bound::TimeLimit);
            return;
        }
        if depth == self.order.len() {
            if self.found.len() == self.max_mappings {
                self.stop = Some(Bound::MaxMappings);
                return;
            }
            let m = Mapping::from_pairs(self.assigned.iter().enumerate().map(|(k, s)| {
                let s = s.expect("complete assignment");
                (self.sentence[s].clone(), self.knowledge[k].clone())
            }));
            self.found.push(m);
            return;
        }
        let k = self.order[depth];
        for i in 0..self.domains[k].len() {
            let s = self.domains[k][i];
            if self.used[s] || !self.consistent(k, s) {
                continue;
            }
            self.assigned[k] = Some(s);
            self.used[s] = true;
            if self.forward_check(k) {
                self.run(depth + 1);
            }
            self.assigned[k] = None;
            self.used[s] = false;
            if self.stop.is_some() {
                return;
            }
        }
    }
}

/// Every mapping from sentence-core nodes onto the knowledge core that is
/// injective, total on the knowledge side, pairwise compatible, and carries
/// each knowledge edge onto a sentence edge with the same label. Extra
/// sentence edges are allowed.
///
/// Knowledge nodes are assigned in order of descending degree; candidates
/// are filtered by compatibility and by per-label degree, then checked
/// against already-assigned neighbours with one step of forward checking.
/// Output is sorted.
pub fn enumerate_isomorphisms<F>(
    s_core: &CoreGraph,
    k_core: &CoreGraph,
    compat: F,
    budget: &SearchBudget,
) -> Result<Enumeration, MatchError>
where
    F: Fn(&NodeId, &NodeId) -> bool,
{
    if k_core.nodes.is_empty() {
        return Err(MatchError::NoKnowledgeCore);
    }
    if s_core.nodes.len() > budget.node_cap || k_core.nodes.len() > budget.node_cap {
        return Ok(Enumeration {
            mappings: Vec::new(),
            exhaustiveness: Exhaustiveness::Truncated(Bound::NodeCap),
        });
    }
    let started = Instant::now();

    let sentence: Vec<&NodeId> = s_core.nodes.iter().collect();
    let knowledge: Vec<&NodeId> = k_core.nodes.iter().collect();
    let s_index: HashMap<&NodeId, usize> =
        sentence.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let k_index: HashMap<&NodeId, usize> =
        knowledge.iter().enumerate().map(|(i, n)| (*n, i)).collect();

    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut label_id = |l: &str| -> usize {
        let next = labels.len();
        *labels.entry(l.to_owned()).or_insert(next)
    };
    let mut k_edges = Vec::with_capacity(k_core.edges.len());
    for e in &k_core.edges {
        k_edges.push((
            k_index[&e.source],
            label_id(e.label.as_str()),
            k_index[&e.target],
        ));
    }
    let mut s_edges = HashSet::with_capacity(s_core.edges.len());
    for e in &s_core.edges {
        s_edges.insert((
            s_index[&e.source],
            label_id(e.label.as_str()),
            s_index[&e.target],
        ));
    }

    let mut k_adj = vec![Vec::new(); knowledge.len()];
    for &(a, l, b) in &k_edges {
        k_adj[a].push((b, l, true));
        if a != b {
            k_adj[b].push((a, l, false));
        }
    }

    // distinct neighbours per (label, direction); an image needs at least as many
    let profile = |edges: &mut dyn Iterator<Item = (usize, usize, usize)>, n: usize| {
        let mut out: Vec<HashMap<(usize, bool), HashSet<usize>>> = vec![HashMap::new(); n];
        for (a, l, b) in edges {
            out[a].entry((l, true)).or_default().insert(b);
            out[b].entry((l, false)).or_default().insert(a);
        }
        out
    };
    let k_profile = profile(&mut k_edges.iter().copied(), knowledge.len());
    let s_profile = profile(&mut s_edges.iter().copied(), sentence.len());

    let domains: Vec<Vec<usize>> = (0..knowledge.len())
        .map(|k| {
            (0..sentence.len())
                .filter(|&s| compat(sentence[s], knowledge[k]))
                .filter(|&s| {
                    k_profile[k].iter().all(|(key, need)| {
                        s_profile[s].get(key).map_or(0, HashSet::len) >= need.len()
                    })
                })
                .collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..knowledge.len()).collect();
    order.sort_by(|&a, &b| {
        k_adj[b]
            .len()
            .cmp(&k_adj[a].len())
            .then_with(|| knowledge[a].cmp(knowledge[b]))
    });

    let mut search = Search {
        sentence: &sentence,
        knowledge: &knowledge,
        order,
        domains,
        k_adj,
        s_edges,
        assigned: vec![None; knowledge.len()],
        used: vec![false; sentence.len()],
        found: Vec::new(),
        max_mappings: budget.max_mappings,
        deadline: started + budget.time_limit,
        steps: 0,
        stop: None,
    };
    if search.domains.iter().all(|d| !d.is_empty()) {
        search.run(0);
    }
    let mut mappings = search.found;
    mappings.sort();
    Ok(Enumeration {
        mappings,
        exhaustiveness: search
            .stop
            .map_or(Exhaustiveness::Complete, Exhaustiveness::Truncated),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{node, validate_sentence_graph, LabeledGraph};

    fn core(origin: Origin, edges: &[(&str, &str, &str)]) -> CoreGraph {
        let edges: BTreeSet<Edge> = edges.iter().map(|(a, l, b)| Edge::of(a, l, b)).collect();
        let nodes = edges
            .iter()
            .flat_map(|e| [e.source.clone(), e.target.clone()])
            .collect();
        CoreGraph {
            nodes,
            edges,
            origin,
        }
    }

    fn any(_: &NodeId, _: &NodeId) -> bool {
        true
    }

    #[test]
    fn sentence_core_drops_class_nodes_and_isolated_instances() {
        let g = LabeledGraph::from_edges(
            [
                ("a_1", "instance_of", "x"),
                ("b_2", "instance_of", "y"),
                ("c_3", "instance_of", "z"),
                ("d_4", "instance_of", "z"),
                ("a_1", "r1", "b_2"),
                ("b_2", "r2", "c_3"),
            ]
            .iter()
            .map(|(a, l, b)| Edge::of(a, l, b)),
        );
        let s = validate_sentence_graph(&g).unwrap();
        let c = extract_sentence_core(&s);
        assert_eq!(
            c.nodes.iter().map(NodeId::as_str).collect::<Vec<_>>(),
            ["a_1", "b_2", "c_3"]
        );
        assert_eq!(c.edges.len(), 2);
        assert!(c.edges.contains(&Edge::of("b_2", "r2", "c_3")));
    }

    #[test]
    fn only_class_edges_gives_empty_core() {
        let g = LabeledGraph::from_edges([Edge::of("a_1", "instance_of", "x")]);
        let c = extract_sentence_core(&validate_sentence_graph(&g).unwrap());
        assert!(c.nodes.is_empty() && c.edges.is_empty());
    }

    #[test]
    fn empty_knowledge_core_is_an_error() {
        let s = core(Origin::Sentence, &[("a_1", "r", "b_2")]);
        let k = CoreGraph {
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            origin: Origin::Knowledge,
        };
        assert_eq!(
            enumerate_isomorphisms(&s, &k, any, &SearchBudget::default()),
            Err(MatchError::NoKnowledgeCore)
        );
    }

    #[test]
    fn empty_sentence_core_yields_nothing() {
        let s = CoreGraph {
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            origin: Origin::Sentence,
        };
        let k = core(Origin::Knowledge, &[("x_1", "r", "y_2")]);
        let e = enumerate_isomorphisms(&s, &k, any, &SearchBudget::default()).unwrap();
        assert!(e.mappings.is_empty());
        assert_eq!(e.exhaustiveness, Exhaustiveness::Complete);
    }

    #[test]
    fn non_induced_and_label_sensitive() {
        let s = core(
            Origin::Sentence,
            &[
                ("a_1", "r", "b_2"),
                ("b_2", "r", "c_3"),
                ("a_1", "q", "c_3"),
            ],
        );
        let k = core(Origin::Knowledge, &[("x_1", "r", "y_2")]);
        let e = enumerate_isomorphisms(&s, &k, any, &SearchBudget::default()).unwrap();
        let got: Vec<Vec<(String, String)>> =
            e.mappings.iter().map(Mapping::to_pair_strings).collect();
        let p = |a: &str, b: &str| (a.to_owned(), b.to_owned());
        assert_eq!(
            got,
            vec![
                vec![p("a_1", "x_1"), p("b_2", "y_2")],
                vec![p("b_2", "x_1"), p("c_3", "y_2")]
            ]
        );
    }

    #[test]
    fn budget_truncation() {
        let s = core(
            Origin::Sentence,
            &[
                ("a_1", "r", "b_2"),
                ("b_2", "r", "c_3"),
                ("c_3", "r", "d_4"),
            ],
        );
        let k = core(Origin::Knowledge, &[("x_1", "r", "y_2")]);
        let tight = SearchBudget::new(2, Duration::from_secs(5), 64).unwrap();
        let e = enumerate_isomorphisms(&s, &k, any, &tight).unwrap();
        assert_eq!(e.mappings.len(), 2);
        assert_eq!(
            e.exhaustiveness,
            Exhaustiveness::Truncated(Bound::MaxMappings)
        );

        let exact = SearchBudget::new(3, Duration::from_secs(5), 64).unwrap();
        let e = enumerate_isomorphisms(&s, &k, any, &exact).unwrap();
        assert_eq!(e.exhaustiveness, Exhaustiveness::Complete);

        let capped = SearchBudget::new(10, Duration::from_secs(5), 3).unwrap();
        let e = enumerate_isomorphisms(&s, &k, any, &capped).unwrap();
        assert_eq!(e.exhaustiveness, Exhaustiveness::Truncated(Bound::NodeCap));
        assert!(SearchBudget::new(0, Duration::from_secs(1), 1).is_err());
    }

    #[test]
    fn compatibility_filters() {
        let s = core(Origin::Sentence, &[("a_1", "r", "b_2")]);
        let k = core(Origin::Knowledge, &[("x_1", "r", "y_2")]);
        let e = enumerate_isomorphisms(
            &s,
            &k,
            |a, b| !(a == &node("a_1") && b == &node("x_1")),
            &SearchBudget::default(),
        )
        .unwrap();
        assert!(e.mappings.is_empty());
    }

    #[test]
    fn policy_modes_parse() {
        for m in [
            PolicyMode::ClassOnly,
            PolicyMode::ClassOrSynonym,
            PolicyMode::ClassOrSynonymOrSimilar,
        ] {
            assert_eq!(m.name().parse::<PolicyMode>(), Ok(m));
        }
        assert!("fuzzy".parse::<PolicyMode>().is_err());
    }
}
