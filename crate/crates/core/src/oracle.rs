//! Reference implementations used to cross-check the reasoner.
//!
//! Nothing here shares code with [`crate::matcher`] or [`crate::resolver`]
//! beyond the plain data types: each function recomputes its inputs from the
//! raw graphs and searches by exhaustive enumeration.
//!
//! * [`brute_force_enumerate`] tries every injective placement of the
//!   knowledge core into the sentence core.
//! * [`evaluate_definition7`] quantifies directly over node-replaced graphs
//!   and `is_same_as` links.
//! * [`evaluate_rules`] evaluates the answer-set rules over ground atoms. The
//!   choice rule is enumerated as injective partial functions (every other
//!   subset of `matches` breaks one of the two injectivity constraints), and
//!   a partial model is abandoned as soon as it violates one of the
//!   constraints that can only stay violated as `matches` grows.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::facts::{load_problem_bundle, Fact, Predicate, ProblemBundle};
use crate::graph::{
    node, Edge, InstanceGraph, KnowledgeGraph, LabeledGraph, NodeId, WscProblem, INSTANCE_OF,
    IS_SAME_AS,
};
use crate::matcher::{CompatibilityPolicy, CoreGraph, Mapping, PolicyMode};
use crate::resolver::{CandidateAnswer, Choice, Outcome, Reason, Verdict};

pub const MAX_KNOWLEDGE_NODES: usize = 8;
pub const MAX_SENTENCE_NODES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive evaluation ({knowledge} knowledge / {sentence} sentence core nodes)")]
    InstanceTooLarge { knowledge: usize, sentence: usize },
}

fn check_size(knowledge: usize, sentence: usize) -> Result<(), OracleError> {
    if knowledge > MAX_KNOWLEDGE_NODES || sentence > MAX_SENTENCE_NODES {
        Err(OracleError::InstanceTooLarge {
            knowledge,
            sentence,
        })
    } else {
        Ok(())
    }
}

/// Re-checks the four isomorphism conditions for one mapping.
pub fn check_mapping<F>(s_core: &CoreGraph, k_core: &CoreGraph, compat: F, m: &Mapping) -> bool
where
    F: Fn(&NodeId, &NodeId) -> bool,
{
    let mut seen_k = BTreeSet::new();
    let mut inverse = BTreeMap::new();
    for (s, k) in m.pairs() {
        if !s_core.nodes.contains(s) || !k_core.nodes.contains(k) || !seen_k.insert(k) {
            return false;
        }
        if !compat(s, k) {
            return false;
        }
        inverse.insert(k, s);
    }
    if seen_k.len() != k_core.nodes.len() {
        return false;
    }
    k_core.edges.iter().all(|e| {
        let (Some(x), Some(y)) = (inverse.get(&e.source), inverse.get(&e.target)) else {
            return false;
        };
        s_core
            .edges
            .contains(&Edge::new((*x).clone(), e.label.clone(), (*y).clone()))
    })
}

fn injections(k: usize, s: usize, visit: &mut dyn FnMut(&[usize])) {
    fn go(
        k: usize,
        s: usize,
        cur: &mut Vec<usize>,
        used: &mut [bool],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if cur.len() == k {
            visit(cur);
            return;
        }
        for i in 0..s {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(k, s, cur, used, visit);
                cur.pop();
                used[i] = false;
            }
        }
    }
    go(k, s, &mut Vec::with_capacity(k), &mut vec![false; s], visit);
}

/// Every injective total assignment of knowledge-core nodes to sentence-core
/// nodes that passes [`check_mapping`], sorted.
pub fn brute_force_enumerate<F>(
    s_core: &CoreGraph,
    k_core: &CoreGraph,
    compat: F,
) -> Result<Vec<Mapping>, OracleError>
where
    F: Fn(&NodeId, &NodeId) -> bool,
{
    check_size(k_core.nodes.len(), s_core.nodes.len())?;
    let s: Vec<&NodeId> = s_core.nodes.iter().collect();
    let k: Vec<&NodeId> = k_core.nodes.iter().collect();
    let mut out = Vec::new();
    injections(k.len(), s.len(), &mut |placement| {
        let m = Mapping::from_pairs(
            placement
                .iter()
                .enumerate()
                .map(|(ki, &si)| (s[si].clone(), k[ki].clone())),
        );
        if check_mapping(s_core, k_core, &compat, &m) {
            out.push(m);
        }
    });
    out.sort();
    Ok(out)
}

fn pair_listed(set: &BTreeSet<(NodeId, NodeId)>, a: &NodeId, b: &NodeId) -> bool {
    set.iter().any(|(x, y)| x == a && y == b)
}

/// Node of a node-replaced sentence graph: either a knowledge node that took
/// a sentence node's place, or an untouched sentence node.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Replaced<'a> {
    Knowledge(&'a NodeId),
    Sentence(&'a NodeId),
}

fn verdict_from(candidates: Vec<CandidateAnswer>, mapping_count: usize) -> Verdict {
    let distinct: BTreeSet<&NodeId> = candidates.iter().map(|c| &c.node).collect();
    let (outcome, reason) = if mapping_count == 0 {
        (Outcome::NoAnswer, Reason::NoMappings)
    } else if distinct.is_empty() {
        (Outcome::NoAnswer, Reason::NoCandidates)
    } else if distinct.len() == 1 {
        (
            Outcome::Answer((*distinct.iter().next().unwrap()).clone()),
            Reason::Unanimous,
        )
    } else {
        (Outcome::NoAnswer, Reason::ConflictingCandidates)
    };
    Verdict {
        outcome,
        reason,
        candidates,
    }
}

/// Decides the answer by quantifying over every node pairing set that makes
/// the knowledge graph (minus class and `is_same_as` edges) a subgraph of the
/// node-replaced sentence graph (minus class edges).
///
/// A choice resolves the pronoun under a pairing set when it alone is paired
/// with an `is_same_as` neighbour of the pronoun's partner. The answer is the
/// choice that does so under some pairing set while the other choice never
/// does.
///
/// The node sets here are all instance nodes, as written in the definition.
/// The rules only see instance nodes with at least one relation edge; the two
/// agree whenever no instance node is isolated.
pub fn evaluate_definition7(
    problem: &WscProblem,
    knowledge: &KnowledgeGraph,
    policy: &CompatibilityPolicy,
) -> Result<Verdict, OracleError> {
    let sg = problem.sentence().graph();
    let kg = knowledge.graph();
    let class_edges_s: BTreeSet<(&NodeId, &NodeId)> = sg
        .edges()
        .iter()
        .filter(|e| e.label.as_str() == INSTANCE_OF)
        .map(|e| (&e.source, &e.target))
        .collect();
    let class_edges_k: BTreeSet<(&NodeId, &NodeId)> = kg
        .edges()
        .iter()
        .filter(|e| e.label.as_str() == INSTANCE_OF)
        .map(|e| (&e.source, &e.target))
        .collect();
    let class_nodes_s: BTreeSet<&NodeId> = class_edges_s.iter().map(|(_, c)| *c).collect();
    let class_nodes_k: BTreeSet<&NodeId> = class_edges_k.iter().map(|(_, c)| *c).collect();
    let v_s: Vec<&NodeId> = sg
        .nodes()
        .iter()
        .filter(|n| !class_nodes_s.contains(n))
        .collect();
    let v_k: Vec<&NodeId> = kg
        .nodes()
        .iter()
        .filter(|n| !class_nodes_k.contains(n))
        .collect();
    check_size(v_k.len(), v_s.len())?;
    let e_s: Vec<&Edge> = sg
        .edges()
        .iter()
        .filter(|e| e.label.as_str() != INSTANCE_OF)
        .collect();
    let e_k: Vec<&Edge> = kg
        .edges()
        .iter()
        .filter(|e| e.label.as_str() != INSTANCE_OF && e.label.as_str() != IS_SAME_AS)
        .collect();
    let same_as = |a: &NodeId, b: &NodeId| {
        kg.edges()
            .iter()
            .any(|e| e.label.as_str() == IS_SAME_AS && e.source == *a && e.target == *b)
    };

    let compatible = |a: &NodeId, b: &NodeId| {
        let shared_class = class_edges_s
            .iter()
            .filter(|(x, _)| *x == a)
            .any(|(_, i)| class_edges_k.contains(&(b, *i)));
        shared_class
            || (policy.mode.uses_synonyms() && pair_listed(&policy.synonyms, a, b))
            || (policy.mode.uses_similar() && pair_listed(&policy.similar, a, b))
    };

    let mut pairings: Vec<Mapping> = Vec::new();
    injections(v_k.len(), v_s.len(), &mut |placement| {
        let pairs: Vec<(&NodeId, &NodeId)> = placement
            .iter()
            .enumerate()
            .map(|(ki, &si)| (v_s[si], v_k[ki]))
            .collect();
        if !pairs.iter().all(|(a, b)| compatible(a, b)) {
            return;
        }
        fn replace_in<'a>(pairs: &[(&'a NodeId, &'a NodeId)], n: &'a NodeId) -> Replaced<'a> {
            match pairs.iter().find(|(a, _)| *a == n) {
                Some((_, b)) => Replaced::Knowledge(b),
                None => Replaced::Sentence(n),
            }
        }
        let replace = |n| replace_in(&pairs, n);
        let replaced_nodes: BTreeSet<Replaced> = v_s.iter().map(|n| replace(n)).collect();
        let replaced_edges: BTreeSet<(Replaced, &str, Replaced)> = e_s
            .iter()
            .map(|e| (replace(&e.source), e.label.as_str(), replace(&e.target)))
            .collect();
        let nodes_ok = v_k
            .iter()
            .all(|b| replaced_nodes.contains(&Replaced::Knowledge(b)));
        let edges_ok = e_k.iter().all(|e| {
            replaced_edges.contains(&(
                Replaced::Knowledge(&e.source),
                e.label.as_str(),
                Replaced::Knowledge(&e.target),
            ))
        });
        if nodes_ok && edges_ok {
            pairings.push(Mapping::from_pairs(
                pairs.iter().map(|(a, b)| ((*a).clone(), (*b).clone())),
            ));
        }
    });
    pairings.sort();

    let p = problem.pronoun();
    let choices = [
        (Choice::A1, problem.answer_choice_1()),
        (Choice::A2, problem.answer_choice_2()),
    ];
    let mut candidates = Vec::new();
    for (i, m) in pairings.iter().enumerate() {
        let Some(n_p) = m.image(p.as_str()) else {
            continue;
        };
        let resolvers: Vec<(&NodeId, &NodeId)> = m
            .pairs()
            .filter(|(_, n)| same_as(n_p, n) || same_as(n, n_p))
            .collect();
        if let [(x, n_x)] = resolvers[..] {
            if let Some((choice, node)) = choices.iter().find(|(_, c)| *c == x) {
                candidates.push(CandidateAnswer {
                    mapping_index: i,
                    choice: *choice,
                    node: (*node).clone(),
                    witness: (n_p.clone(), n_x.clone()),
                });
            }
        }
    }
    Ok(verdict_from(candidates, pairings.len()))
}

type Triple = (String, String, String);

/// Ground facts of the program, as plain strings.
struct Program {
    has_s: BTreeSet<Triple>,
    has_k: BTreeSet<Triple>,
    pronoun: String,
    ans_ch1: String,
    ans_ch2: String,
    synonyms: BTreeSet<(String, String)>,
    similar: BTreeSet<(String, String)>,
    mode: PolicyMode,
}

impl Program {
    fn from_bundle(bundle: &ProblemBundle, mode: PolicyMode) -> Program {
        let (problem_facts, knowledge_facts, aux_facts) = bundle.to_facts();
        let all: Vec<Fact> = problem_facts
            .into_iter()
            .chain(knowledge_facts)
            .chain(aux_facts)
            .collect();
        let triples = |pred: Predicate| -> BTreeSet<Triple> {
            all.iter()
                .filter(|f| f.predicate() == pred)
                .map(|f| {
                    (
                        f.args()[0].clone(),
                        f.args()[1].clone(),
                        f.args()[2].clone(),
                    )
                })
                .collect()
        };
        let pairs = |pred: Predicate| -> BTreeSet<(String, String)> {
            all.iter()
                .filter(|f| f.predicate() == pred)
                .map(|f| (f.args()[0].clone(), f.args()[1].clone()))
                .collect()
        };
        let unary = |pred: Predicate| -> String {
            all.iter()
                .find(|f| f.predicate() == pred)
                .map(|f| f.args()[0].clone())
                .unwrap_or_default()
        };
        Program {
            has_s: triples(Predicate::HasS),
            has_k: triples(Predicate::HasK),
            pronoun: unary(Predicate::Pronoun),
            ans_ch1: unary(Predicate::AnsCh1),
            ans_ch2: unary(Predicate::AnsCh2),
            synonyms: pairs(Predicate::Synonyms),
            similar: pairs(Predicate::Similar),
            mode,
        }
    }

    fn has_k(&self, x: &str, r: &str, y: &str) -> bool {
        self.has_k
            .contains(&(x.to_owned(), r.to_owned(), y.to_owned()))
    }

    // endpoints of non-class sentence edges
    fn node_g_s(&self) -> BTreeSet<&str> {
        self.has_s
            .iter()
            .filter(|(_, r, _)| r != INSTANCE_OF)
            .flat_map(|(x, _, y)| [x.as_str(), y.as_str()])
            .collect()
    }

    // non-class sentence edges
    fn edge_g_s(&self) -> BTreeSet<(&str, &str, &str)> {
        self.has_s
            .iter()
            .filter(|(_, r, _)| r != INSTANCE_OF)
            .map(|(x, r, y)| (x.as_str(), r.as_str(), y.as_str()))
            .collect()
    }

    // endpoints of non-class knowledge edges, same-as included
    fn node_g_k(&self) -> BTreeSet<&str> {
        self.has_k
            .iter()
            .filter(|(_, r, _)| r != INSTANCE_OF)
            .flat_map(|(x, _, y)| [x.as_str(), y.as_str()])
            .collect()
    }

    // non-class, non-same-as knowledge edges
    fn edge_g_k(&self) -> BTreeSet<(&str, &str, &str)> {
        self.has_k
            .iter()
            .filter(|(_, r, _)| r != INSTANCE_OF && r != IS_SAME_AS)
            .map(|(x, r, y)| (x.as_str(), r.as_str(), y.as_str()))
            .collect()
    }

    fn classes_s(&self, x: &str) -> impl Iterator<Item = &str> {
        let x = x.to_owned();
        self.has_s
            .iter()
            .filter(move |(a, r, _)| *a == x && r == INSTANCE_OF)
            .map(|(_, _, c)| c.as_str())
    }

    fn valid_pair(&self, x: &str, y: &str) -> bool {
        self.classes_s(x).any(|c| self.has_k(y, INSTANCE_OF, c))
            || (self.mode.uses_synonyms() && self.synonyms.contains(&(x.to_owned(), y.to_owned())))
            || (self.mode.uses_similar() && self.similar.contains(&(x.to_owned(), y.to_owned())))
    }

    /// The class (or valid-pair) constraint and the edge-preservation
    /// constraint. Both only gain violations as atoms are added.
    fn violates_monotone(
        &self,
        matches: &[(&str, &str)],
        edge_g_k: &BTreeSet<(&str, &str, &str)>,
        edge_g_s: &BTreeSet<(&str, &str, &str)>,
    ) -> bool {
        let class_violation = matches.iter().any(|(x, y)| match self.mode {
            PolicyMode::ClassOnly => self.classes_s(x).any(|c| !self.has_k(y, INSTANCE_OF, c)),
            _ => !self.valid_pair(x, y),
        });
        if class_violation {
            return true;
        }
        edge_g_k.iter().any(|(x1, r, y1)| {
            matches.iter().any(|(x, mx)| {
                mx == x1
                    && matches
                        .iter()
                        .any(|(y, my)| my == y1 && !edge_g_s.contains(&(*x, *r, *y)))
            })
        })
    }

    /// The `ans` atoms of one model, with the grounding (N1, N2) of each.
    fn ans_atoms<'a>(&'a self, matches: &[(&'a str, &'a str)]) -> Vec<(&'a str, &'a str, &'a str)> {
        let mut out = Vec::new();
        for a in [self.ans_ch1.as_str(), self.ans_ch2.as_str()] {
            let invalid = matches.iter().any(|(p, n1)| {
                *p == self.pronoun
                    && matches
                        .iter()
                        .any(|(x, n2)| a != *x && n1 != n2 && self.has_k(n1, IS_SAME_AS, n2))
            });
            if invalid {
                continue;
            }
            for (p, n1) in matches {
                if *p != self.pronoun {
                    continue;
                }
                for (aa, n2) in matches {
                    if *aa == a && self.has_k(n1, IS_SAME_AS, n2) {
                        out.push((a, *n1, *n2));
                    }
                }
            }
        }
        out
    }
}

/// Literal evaluation of the rule program over the bundle's facts, followed
/// by the all-agree aggregation of `ans` atoms across answer sets.
pub fn evaluate_rules(bundle: &ProblemBundle, mode: PolicyMode) -> Result<Verdict, OracleError> {
    let prog = Program::from_bundle(bundle, mode);
    let node_g_s: Vec<&str> = prog.node_g_s().into_iter().collect();
    let node_g_k: Vec<&str> = prog.node_g_k().into_iter().collect();
    check_size(node_g_k.len(), node_g_s.len())?;
    let edge_g_s = prog.edge_g_s();
    let edge_g_k = prog.edge_g_k();

    struct Walk<'p> {
        prog: &'p Program,
        node_g_s: Vec<&'p str>,
        node_g_k: Vec<&'p str>,
        edge_g_s: BTreeSet<(&'p str, &'p str, &'p str)>,
        edge_g_k: BTreeSet<(&'p str, &'p str, &'p str)>,
        matches: Vec<(&'p str, &'p str)>,
        used: Vec<bool>,
        models: Vec<Vec<(&'p str, &'p str)>>,
    }

    impl<'p> Walk<'p> {
        fn go(&mut self, i: usize) {
            if self
                .prog
                .violates_monotone(&self.matches, &self.edge_g_k, &self.edge_g_s)
            {
                return;
            }
            let uncovered = self.used.iter().filter(|u| !**u).count();
            if uncovered > self.node_g_s.len() - i {
                return; // no completion can cover every knowledge node
            }
            if i == self.node_g_s.len() {
                // every knowledge node must be matched
                let covered: BTreeSet<&str> = self.matches.iter().map(|(_, y)| *y).collect();
                if self.node_g_k.iter().all(|y| covered.contains(y)) {
                    self.models.push(self.matches.clone());
                }
                return;
            }
            self.go(i + 1);
            for k in 0..self.node_g_k.len() {
                if self.used[k] {
                    continue;
                }
                self.used[k] = true;
                self.matches.push((self.node_g_s[i], self.node_g_k[k]));
                self.go(i + 1);
                self.matches.pop();
                self.used[k] = false;
            }
        }
    }

    let mut walk = Walk {
        prog: &prog,
        used: vec![false; node_g_k.len()],
        node_g_s,
        node_g_k,
        edge_g_s,
        edge_g_k,
        matches: Vec::new(),
        models: Vec::new(),
    };
    walk.go(0);

    let mut models: Vec<Mapping> = walk
        .models
        .iter()
        .map(|ms| Mapping::from_pairs(ms.iter().map(|(x, y)| (node(x), node(y)))))
        .collect();
    models.sort();

    let mut candidates = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let pairs: Vec<(String, String)> = m.to_pair_strings();
        let matches: Vec<(&str, &str)> = pairs
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let atoms = prog.ans_atoms(&matches);
        let answers: BTreeSet<&str> = atoms.iter().map(|(a, _, _)| *a).collect();
        if answers.len() > 1 {
            continue; // two different answers kill the answer set
        }
        if let Some((a, n1, n2)) = atoms.first() {
            let choice = if *a == prog.ans_ch1 {
                Choice::A1
            } else {
                Choice::A2
            };
            candidates.push(CandidateAnswer {
                mapping_index: i,
                choice,
                node: node(a),
                witness: (node(n1), node(n2)),
            });
        }
    }
    Ok(verdict_from(candidates, models.len()))
}

/// Parameters for [`generate_instance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomInstanceSpec {
    pub sentence_nodes: usize,
    pub knowledge_nodes: usize,
    pub edge_density: f64,
    pub label_alphabet_size: usize,
    pub class_alphabet_size: usize,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("sentence_nodes must be in 3..=10, got {0}")]
    SentenceNodes(usize),
    #[error("knowledge_nodes must be in 2..=6 and at most sentence_nodes, got {0}")]
    KnowledgeNodes(usize),
    #[error("edge_density must be within [0, 1], got {0}")]
    Density(f64),
    #[error("alphabet sizes must be at least 1")]
    Alphabet,
}

impl RandomInstanceSpec {
    pub fn new(sentence_nodes: usize, knowledge_nodes: usize, seed: u64) -> Self {
        RandomInstanceSpec {
            sentence_nodes,
            knowledge_nodes,
            edge_density: 0.35,
            label_alphabet_size: 2,
            class_alphabet_size: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(3..=10).contains(&self.sentence_nodes) {
            return Err(SpecError::SentenceNodes(self.sentence_nodes));
        }
        if !(2..=6).contains(&self.knowledge_nodes) || self.knowledge_nodes > self.sentence_nodes {
            return Err(SpecError::KnowledgeNodes(self.knowledge_nodes));
        }
        self.validate_shape()
    }

    fn validate_shape(&self) -> Result<(), SpecError> {
        if !(0.0..=1.0).contains(&self.edge_density) {
            return Err(SpecError::Density(self.edge_density));
        }
        if self.label_alphabet_size == 0 || self.class_alphabet_size == 0 {
            return Err(SpecError::Alphabet);
        }
        if self.sentence_nodes < 3 {
            return Err(SpecError::SentenceNodes(self.sentence_nodes));
        }
        if self.knowledge_nodes < 2 || self.knowledge_nodes > self.sentence_nodes {
            return Err(SpecError::KnowledgeNodes(self.knowledge_nodes));
        }
        Ok(())
    }
}

/// A seeded random bundle small enough for every oracle.
pub fn generate_instance(spec: &RandomInstanceSpec) -> Result<ProblemBundle, SpecError> {
    spec.validate()?;
    Ok(generate(spec))
}

/// Same generator without the oracle size bounds, for benchmarking.
pub fn generate_instance_unbounded(spec: &RandomInstanceSpec) -> Result<ProblemBundle, SpecError> {
    spec.validate_shape()?;
    Ok(generate(spec))
}

fn generate(spec: &RandomInstanceSpec) -> ProblemBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.sentence_nodes;
    let label = |i: usize| format!("r{i}");
    let class = |i: usize| format!("c{i}");

    // edges always run from lower to higher rank, which keeps the graph acyclic
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut rng);
    let orient = |a: usize, b: usize| if rank[a] < rank[b] { (a, b) } else { (b, a) };

    let s_class: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(0..spec.class_alphabet_size))
        .collect();
    let mut s_edges: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(spec.edge_density) {
                let (x, y) = orient(a, b);
                s_edges.insert((x, rng.gen_range(0..spec.label_alphabet_size), y));
            }
        }
    }
    for a in 0..n {
        if !s_edges.iter().any(|&(x, _, y)| x == a || y == a) {
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let (x, y) = orient(a, b);
            s_edges.insert((x, rng.gen_range(0..spec.label_alphabet_size), y));
        }
    }

    let mut picked: Vec<usize> = (0..n).collect();
    picked.shuffle(&mut rng);
    picked.truncate(spec.knowledge_nodes);
    let m = picked.len();
    let kpos = |s: usize| picked.iter().position(|&p| p == s);

    let mut k_class: Vec<usize> = picked.iter().map(|&s| s_class[s]).collect();
    let mut k_edges: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for &(x, l, y) in &s_edges {
        if let (Some(a), Some(b)) = (kpos(x), kpos(y)) {
            if rng.gen_bool(0.85) {
                k_edges.insert((a, l, b));
            }
        }
    }
    // occasional perturbations so that some knowledge does not embed
    if rng.gen_bool(0.15) {
        let i = rng.gen_range(0..m);
        k_class[i] = rng.gen_range(0..spec.class_alphabet_size);
    }
    if rng.gen_bool(0.15) {
        let a = rng.gen_range(0..m);
        let b = rng.gen_range(0..m);
        if a != b {
            let (x, y) = if rank[picked[a]] < rank[picked[b]] {
                (a, b)
            } else {
                (b, a)
            };
            k_edges.insert((x, rng.gen_range(0..spec.label_alphabet_size), y));
        }
    }

    let first = rng.gen_range(0..m);
    let mut second = rng.gen_range(0..m - 1);
    if second >= first {
        second += 1;
    }
    for a in 0..m {
        let touched =
            a == first || a == second || k_edges.iter().any(|&(x, _, y)| x == a || y == a);
        if !touched {
            let mut b = rng.gen_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            let (x, y) = if rank[picked[a]] < rank[picked[b]] {
                (a, b)
            } else {
                (b, a)
            };
            k_edges.insert((x, rng.gen_range(0..spec.label_alphabet_size), y));
        }
    }

    let (pronoun, choice_1, choice_2) = if rng.gen_bool(0.7) {
        let p = picked[first];
        let right = picked[second];
        let mut wrong = rng.gen_range(0..n);
        while wrong == p || wrong == right {
            wrong = rng.gen_range(0..n);
        }
        if rng.gen_bool(0.5) {
            (p, right, wrong)
        } else {
            (p, wrong, right)
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        (all[0], all[1], all[2])
    };

    let s_name = |i: usize| format!("s{i}_{}", i + 1);
    let k_name = |i: usize| format!("k{i}_{}", i + 1);
    let fact = |p: Predicate, args: &[String]| {
        Fact::new(p, args).expect("generated identifiers are valid")
    };
    let mut problem = Vec::new();
    for (i, &c) in s_class.iter().enumerate() {
        problem.push(fact(
            Predicate::HasS,
            &[s_name(i), INSTANCE_OF.into(), class(c)],
        ));
    }
    for &(x, l, y) in &s_edges {
        problem.push(fact(Predicate::HasS, &[s_name(x), label(l), s_name(y)]));
    }
    problem.push(fact(Predicate::Pronoun, &[s_name(pronoun)]));
    problem.push(fact(Predicate::AnsCh1, &[s_name(choice_1)]));
    problem.push(fact(Predicate::AnsCh2, &[s_name(choice_2)]));

    let mut knowledge = Vec::new();
    for (i, &c) in k_class.iter().enumerate() {
        knowledge.push(fact(
            Predicate::HasK,
            &[k_name(i), INSTANCE_OF.into(), class(c)],
        ));
    }
    for &(x, l, y) in &k_edges {
        knowledge.push(fact(Predicate::HasK, &[k_name(x), label(l), k_name(y)]));
    }
    knowledge.push(fact(
        Predicate::HasK,
        &[k_name(first), IS_SAME_AS.into(), k_name(second)],
    ));
    knowledge.push(fact(
        Predicate::HasK,
        &[k_name(second), IS_SAME_AS.into(), k_name(first)],
    ));

    let label = format!(
        "random_{}_{}_{}",
        spec.sentence_nodes, spec.knowledge_nodes, spec.seed
    );
    load_problem_bundle(&label, &problem, &knowledge, &[])
        .unwrap_or_else(|d| panic!("generator produced an invalid bundle for {spec:?}:\n{d}"))
}

/// Applies `rename` to every knowledge instance node (class nodes keep
/// their names) and to the knowledge side of synonym/similar pairs.
pub fn rename_knowledge_nodes(
    bundle: &ProblemBundle,
    rename: impl Fn(&NodeId) -> NodeId,
) -> ProblemBundle {
    let k = &bundle.knowledge;
    let map = |n: &NodeId| {
        if k.is_instance(n.as_str()) {
            rename(n)
        } else {
            n.clone()
        }
    };
    let graph = LabeledGraph::from_edges(
        k.graph()
            .edges()
            .iter()
            .map(|e| Edge::new(map(&e.source), e.label.clone(), map(&e.target))),
    );
    let mut out = bundle.clone();
    out.knowledge = crate::graph::validate_knowledge_graph(&graph)
        .expect("an injective renaming preserves validity");
    out.synonyms = bundle
        .synonyms
        .iter()
        .map(|(a, b)| (a.clone(), map(b)))
        .collect();
    out.similar = bundle
        .similar
        .iter()
        .map(|(a, b)| (a.clone(), map(b)))
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::serialize_fact_file;
    use crate::matcher::Origin;

    fn core(origin: Origin, nodes: &[&str], edges: &[(&str, &str, &str)]) -> CoreGraph {
        CoreGraph {
            nodes: nodes.iter().map(|n| node(n)).collect(),
            edges: edges.iter().map(|(a, l, b)| Edge::of(a, l, b)).collect(),
            origin,
        }
    }

    #[test]
    fn counts_injections() {
        let s = core(Origin::Sentence, &["a_1", "b_2", "c_3"], &[]);
        let k = core(Origin::Knowledge, &["x_1"], &[]);
        assert_eq!(brute_force_enumerate(&s, &k, |_, _| true).unwrap().len(), 3);
    }

    #[test]
    fn refuses_large_instances() {
        let names: Vec<String> = (0..13).map(|i| format!("n_{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let s = core(Origin::Sentence, &refs, &[]);
        let k = core(Origin::Knowledge, &refs[..2], &[]);
        assert!(matches!(
            brute_force_enumerate(&s, &k, |_, _| true),
            Err(OracleError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn checker_rejects_broken_mappings() {
        let s = core(Origin::Sentence, &["a_1", "b_2"], &[("a_1", "r", "b_2")]);
        let k = core(Origin::Knowledge, &["x_1", "y_2"], &[("x_1", "r", "y_2")]);
        let ok = Mapping::from_pairs([(node("a_1"), node("x_1")), (node("b_2"), node("y_2"))]);
        let flipped = Mapping::from_pairs([(node("a_1"), node("y_2")), (node("b_2"), node("x_1"))]);
        let partial = Mapping::from_pairs([(node("a_1"), node("x_1"))]);
        assert!(check_mapping(&s, &k, |_, _| true, &ok));
        assert!(!check_mapping(&s, &k, |_, _| true, &flipped));
        assert!(!check_mapping(&s, &k, |_, _| true, &partial));
        assert!(!check_mapping(&s, &k, |_, _| false, &ok));
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = RandomInstanceSpec::new(7, 4, 42);
        assert_eq!(
            generate_instance(&spec).unwrap(),
            generate_instance(&spec).unwrap()
        );
        assert!(generate_instance(&RandomInstanceSpec::new(11, 4, 0)).is_err());
        assert!(generate_instance(&RandomInstanceSpec::new(5, 7, 0)).is_err());
    }

    #[test]
    fn generator_snapshot_seed_0() {
        let b = generate_instance(&RandomInstanceSpec::new(4, 3, 0)).unwrap();
        let (p, k, _) = b.to_facts();
        let text = format!(
            "{}---\n{}",
            serialize_fact_file(&p),
            serialize_fact_file(&k)
        );
        assert_eq!(text, SEED_0_SNAPSHOT);
    }

    const SEED_0_SNAPSHOT: &str = r#"ans_ch1("s0_1").
ans_ch2("s2_3").
has_s("s0_1","instance_of","c0").
has_s("s0_1","r1","s2_3").
has_s("s1_2","instance_of","c1").
has_s("s1_2","r1","s2_3").
has_s("s2_3","instance_of","c1").
has_s("s3_4","instance_of","c0").
has_s("s3_4","r0","s2_3").
pronoun("s3_4").
---
has_k("k0_1","instance_of","c0").
has_k("k0_1","is_same_as","k1_2").
has_k("k0_1","r1","k2_3").
has_k("k1_2","instance_of","c0").
has_k("k1_2","is_same_as","k0_1").
has_k("k2_3","instance_of","c1").
"#;
}
