//! Answer derivation per mapping and the final all-agree aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::diag::Issue;
use crate::facts::ProblemBundle;
use crate::graph::{InstanceGraph, KnowledgeGraph, NodeId, WscProblem};
use crate::matcher::{
    enumerate_isomorphisms, extract_knowledge_core, extract_sentence_core, node_compatible,
    CompatibilityPolicy, Enumeration, Exhaustiveness, Mapping, SearchBudget,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Choice {
    A1,
    A2,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::A1 => "A1",
            Choice::A2 => "A2",
        })
    }
}

/// One answer choice licensed by one mapping. The witness is the pronoun's
/// knowledge image and the `is_same_as` partner the choice was mapped onto.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateAnswer {
    pub mapping_index: usize,
    pub choice: Choice,
    pub node: NodeId,
    pub witness: (NodeId, NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Answer(NodeId),
    NoAnswer,
}

impl Outcome {
    pub fn answer(&self) -> Option<&NodeId> {
        match self {
            Outcome::Answer(n) => Some(n),
            Outcome::NoAnswer => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Unanimous,
    NoMappings,
    NoCandidates,
    ConflictingCandidates,
    TruncatedSearch,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::Unanimous => "unanimous",
            Reason::NoMappings => "no_mappings",
            Reason::NoCandidates => "no_candidates",
            Reason::ConflictingCandidates => "conflicting_candidates",
            Reason::TruncatedSearch => "truncated_search",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub reason: Reason,
    pub candidates: Vec<CandidateAnswer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveConfig {
    pub policy: CompatibilityPolicy,
    pub budget: SearchBudget,
    pub treat_truncated_as_no_answer: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            policy: CompatibilityPolicy::default(),
            budget: SearchBudget::default(),
            treat_truncated_as_no_answer: true,
        }
    }
}

/// The answer a single mapping licenses, if any.
///
/// With `n1` the image of the pronoun, choice `a` qualifies when `a` maps
/// onto an `is_same_as` partner of `n1` and no other sentence node maps onto
/// any partner of `n1`. A mapping for which both choices qualify yields
/// nothing.
pub fn derive_candidate(
    problem: &WscProblem,
    knowledge: &KnowledgeGraph,
    m: &Mapping,
    mapping_index: usize,
) -> Option<CandidateAnswer> {
    let n1 = m.image(problem.pronoun().as_str())?;
    let partners = knowledge.same_as_partners(n1.as_str());

    let qualifies = |choice: &NodeId| -> Option<NodeId> {
        let n2 = m
            .image(choice.as_str())
            .filter(|n2| partners.contains(n2))?;
        let blocked = m.pairs().any(|(x, n)| x != choice && partners.contains(n));
        (!blocked).then(|| n2.clone())
    };

    let a1 =
        qualifies(problem.answer_choice_1()).map(|w| (Choice::A1, problem.answer_choice_1(), w));
    let a2 =
        qualifies(problem.answer_choice_2()).map(|w| (Choice::A2, problem.answer_choice_2(), w));
    let (choice, node, n2) = match (a1, a2) {
        (Some(c), None) | (None, Some(c)) => c,
        _ => return None,
    };
    Some(CandidateAnswer {
        mapping_index,
        choice,
        node: node.clone(),
        witness: (n1.clone(), n2),
    })
}

/// An answer only when there is at least one candidate and all candidates
/// name the same node. Mappings without a candidate do not count against it.
pub fn aggregate(
    candidates: Vec<CandidateAnswer>,
    exhaustiveness: Exhaustiveness,
    cfg: &SolveConfig,
) -> Verdict {
    let no_answer = |reason, candidates| Verdict {
        outcome: Outcome::NoAnswer,
        reason,
        candidates,
    };
    if !exhaustiveness.is_complete() && cfg.treat_truncated_as_no_answer {
        return no_answer(Reason::TruncatedSearch, candidates);
    }
    let nodes: BTreeSet<&NodeId> = candidates.iter().map(|c| &c.node).collect();
    match nodes.len() {
        0 => no_answer(Reason::NoCandidates, candidates),
        1 => {
            let n = (*nodes.iter().next().expect("one node")).clone();
            Verdict {
                outcome: Outcome::Answer(n),
                reason: Reason::Unanimous,
                candidates,
            }
        }
        _ => no_answer(Reason::ConflictingCandidates, candidates),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoreSizes {
    pub sentence_nodes: usize,
    pub sentence_edges: usize,
    pub knowledge_nodes: usize,
    pub knowledge_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

/// Serializable summary of one solve. Field order is the JSON key order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnswerReport {
    pub problem_label: String,
    pub outcome: &'static str,
    pub reason: Reason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_node: Option<NodeId>,
    pub policy: &'static str,
    pub mappings: usize,
    pub candidates: Vec<CandidateAnswer>,
    pub core_sizes: CoreSizes,
    pub exhaustive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_by: Option<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl AnswerReport {
    /// Drops the timing block so two runs compare byte for byte.
    pub fn stable(mut self) -> Self {
        self.timing = None;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub verdict: Verdict,
    pub enumeration: Enumeration,
    pub report: AnswerReport,
}

/// Policy from `cfg` with the bundle's synonym and similar pairs added.
pub fn effective_policy(bundle: &ProblemBundle, cfg: &SolveConfig) -> CompatibilityPolicy {
    let mut policy = cfg.policy.clone();
    policy.synonyms.extend(bundle.synonyms.iter().cloned());
    policy.similar.extend(bundle.similar.iter().cloned());
    policy
}

/// Extract both cores, enumerate mappings, derive one candidate per mapping
/// and aggregate.
pub fn solve(bundle: &ProblemBundle, cfg: &SolveConfig) -> Solution {
    let started = Instant::now();
    let problem = &bundle.problem;
    let sentence = problem.sentence();
    let knowledge = &bundle.knowledge;
    let policy = effective_policy(bundle, cfg);

    let s_core = extract_sentence_core(sentence);
    let k_core = extract_knowledge_core(knowledge);
    let enumeration = enumerate_isomorphisms(
        &s_core,
        &k_core,
        |x, y| node_compatible(&policy, sentence, knowledge, x, y),
        &cfg.budget,
    )
    // a validated knowledge graph always has its same-as endpoints in the core
    .unwrap_or(Enumeration {
        mappings: Vec::new(),
        exhaustiveness: Exhaustiveness::Complete,
    });

    let candidates: Vec<CandidateAnswer> = enumeration
        .mappings
        .iter()
        .enumerate()
        .filter_map(|(i, m)| derive_candidate(problem, knowledge, m, i))
        .collect();
    let mut verdict = aggregate(candidates, enumeration.exhaustiveness, cfg);
    if enumeration.mappings.is_empty() && enumeration.exhaustiveness.is_complete() {
        verdict.reason = Reason::NoMappings;
    }

    let sentence_classes: BTreeSet<&NodeId> = sentence.class_map().values().collect();
    let knowledge_classes: BTreeSet<&NodeId> = knowledge.class_map().values().collect();
    let mut warnings: Vec<String> = bundle
        .warnings()
        .iter()
        .map(|d| d.issue.to_string())
        .collect();
    warnings.extend(knowledge_classes.difference(&sentence_classes).map(|c| {
        Issue::UnsharedKnowledgeClass {
            class: c.to_string(),
        }
        .to_string()
    }));

    let report = AnswerReport {
        problem_label: problem.label.clone(),
        outcome: if verdict.outcome.answer().is_some() {
            "answer"
        } else {
            "no_answer"
        },
        reason: verdict.reason,
        answer_node: verdict.outcome.answer().cloned(),
        policy: policy.mode.name(),
        mappings: enumeration.mappings.len(),
        candidates: verdict.candidates.clone(),
        core_sizes: CoreSizes {
            sentence_nodes: s_core.nodes.len(),
            sentence_edges: s_core.edges.len(),
            knowledge_nodes: k_core.nodes.len(),
            knowledge_edges: k_core.edges.len(),
        },
        exhaustive: enumeration.exhaustiveness.is_complete(),
        truncated_by: match enumeration.exhaustiveness {
            Exhaustiveness::Complete => None,
            Exhaustiveness::Truncated(b) => Some(b.to_string()),
        },
        warnings,
        timing: Some(Timing {
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }),
    };
    Solution {
        verdict,
        enumeration,
        report,
    }
}
