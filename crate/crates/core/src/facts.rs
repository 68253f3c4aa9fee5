//! Reader and writer for `.facts` files and assembly of problem bundles.
//!
//! One fact per line:
//!
//! ```text
//! % comment
//! has_s("lift_5","agent","man_2").
//! pronoun("he_9").
//! ```
//!
//! Arguments are double-quoted identifiers (letters, digits, underscore).
//! Whitespace around tokens is ignored, `%` starts a comment, CRLF line
//! endings are accepted. Output is always sorted, deduplicated, LF-terminated.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::diag::{Diagnostic, Diagnostics, Issue};
use crate::graph::{
    validate_knowledge_graph, validate_sentence_graph, vocabulary_warnings, Edge, EdgeLabel,
    InstanceGraph, KnowledgeGraph, LabeledGraph, NodeId, WscProblem,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    HasS,
    HasK,
    Pronoun,
    AnsCh1,
    AnsCh2,
    Synonyms,
    Similar,
    /// Expected answer, only meaningful in `meta.facts`.
    Expected,
}

impl Predicate {
    pub const ALL: [Predicate; 8] = [
        Predicate::HasS,
        Predicate::HasK,
        Predicate::Pronoun,
        Predicate::AnsCh1,
        Predicate::AnsCh2,
        Predicate::Synonyms,
        Predicate::Similar,
        Predicate::Expected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::HasS => "has_s",
            Predicate::HasK => "has_k",
            Predicate::Pronoun => "pronoun",
            Predicate::AnsCh1 => "ans_ch1",
            Predicate::AnsCh2 => "ans_ch2",
            Predicate::Synonyms => "synonyms",
            Predicate::Similar => "similar",
            Predicate::Expected => "expected",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Predicate::HasS | Predicate::HasK => 3,
            Predicate::Synonyms | Predicate::Similar => 2,
            Predicate::Pronoun | Predicate::AnsCh1 | Predicate::AnsCh2 | Predicate::Expected => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Predicate> {
        Predicate::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A ground fact. Ordered by predicate name, then arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fact {
    predicate: Predicate,
    args: Vec<String>,
}

impl Fact {
    pub fn new<S: AsRef<str>>(predicate: Predicate, args: &[S]) -> Result<Fact, Issue> {
        if args.len() != predicate.arity() {
            return Err(Issue::ArityMismatch {
                predicate: predicate.name().to_owned(),
                expected: predicate.arity(),
                found: args.len(),
            });
        }
        let args = args
            .iter()
            .map(|a| NodeId::new(a.as_ref()).map(|n| n.as_str().to_owned()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Fact { predicate, args })
    }

    pub fn has_s(e: &Edge) -> Fact {
        Fact::edge(Predicate::HasS, e)
    }

    pub fn has_k(e: &Edge) -> Fact {
        Fact::edge(Predicate::HasK, e)
    }

    fn edge(predicate: Predicate, e: &Edge) -> Fact {
        Fact {
            predicate,
            args: vec![
                e.source.to_string(),
                e.label.to_string(),
                e.target.to_string(),
            ],
        }
    }

    pub fn unary(predicate: Predicate, n: &NodeId) -> Fact {
        debug_assert_eq!(predicate.arity(), 1);
        Fact {
            predicate,
            args: vec![n.to_string()],
        }
    }

    pub fn binary(predicate: Predicate, a: &NodeId, b: &NodeId) -> Fact {
        debug_assert_eq!(predicate.arity(), 2);
        Fact {
            predicate,
            args: vec![a.to_string(), b.to_string()],
        }
    }

    pub fn predicate(&self) -> Predicate {
        self.predicate
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    /// The fact as a graph edge; meaningful for `has_s` and `has_k`.
    pub fn as_edge(&self) -> Edge {
        // args were validated on construction
        Edge::new(
            NodeId::new(self.args[0].as_str()).expect("validated"),
            EdgeLabel::new(self.args[1].as_str()).expect("validated"),
            NodeId::new(self.args[2].as_str()).expect("validated"),
        )
    }

    pub fn node_arg(&self, i: usize) -> NodeId {
        NodeId::new(self.args[i].as_str()).expect("validated")
    }
}

impl Ord for Fact {
    fn cmp(&self, other: &Self) -> Ordering {
        self.predicate
            .name()
            .cmp(other.predicate.name())
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Fact {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "\"{a}\"")?;
        }
        f.write_str(").")
    }
}

/// A fact together with where it was read from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocatedFact {
    pub line: usize,
    pub fact: Fact,
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        Cursor {
            chars: text.char_indices().collect(),
            pos: 0,
            line,
            text,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> Diagnostic {
        Diagnostic::at(
            Issue::SyntaxError {
                message: message.into(),
            },
            self.line,
            self.column(),
        )
    }

    fn expect(&mut self, want: char) -> Result<(), Diagnostic> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.error(format!("expected `{want}`, found `{c}`"))),
            None => Err(self.error(format!("expected `{want}`, found end of line"))),
        }
    }

    fn predicate_name(&mut self) -> Result<(String, usize), Diagnostic> {
        self.skip_ws();
        let col = self.column();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a predicate name"));
        }
        Ok((self.slice(start, self.pos).to_owned(), col))
    }

    fn quoted(&mut self) -> Result<(String, usize), Diagnostic> {
        self.skip_ws();
        let col = self.column();
        if self.peek() != Some('"') {
            return Err(self.error("expected a double-quoted argument"));
        }
        self.pos += 1;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '"' {
                let s = self.slice(start, self.pos).to_owned();
                self.pos += 1;
                return Ok((s, col));
            }
            self.pos += 1;
        }
        Err(Diagnostic::at(
            Issue::SyntaxError {
                message: "unterminated string".into(),
            },
            self.line,
            col,
        ))
    }

    fn slice(&self, from: usize, to: usize) -> &'a str {
        let a = self.chars.get(from).map_or(self.text.len(), |(i, _)| *i);
        let b = self.chars.get(to).map_or(self.text.len(), |(i, _)| *i);
        &self.text[a..b]
    }
}

fn parse_line(line_no: usize, raw: &str) -> Result<Option<Fact>, Vec<Diagnostic>> {
    let body = raw.strip_suffix('\r').unwrap_or(raw);
    let mut cur = Cursor::new(line_no, body);
    cur.skip_ws();
    if matches!(cur.peek(), None | Some('%')) {
        return Ok(None);
    }
    let (name, name_col) = cur.predicate_name().map_err(|d| vec![d])?;
    cur.expect('(').map_err(|d| vec![d])?;
    let mut args = Vec::new();
    loop {
        args.push(cur.quoted().map_err(|d| vec![d])?);
        cur.skip_ws();
        match cur.peek() {
            Some(',') => cur.pos += 1,
            Some(')') => {
                cur.pos += 1;
                break;
            }
            Some(c) => return Err(vec![cur.error(format!("expected `,` or `)`, found `{c}`"))]),
            None => return Err(vec![cur.error("expected `,` or `)`, found end of line")]),
        }
    }
    cur.expect('.').map_err(|d| vec![d])?;
    cur.skip_ws();
    if !matches!(cur.peek(), None | Some('%')) {
        return Err(vec![cur.error("unexpected text after fact")]);
    }

    let Some(predicate) = Predicate::from_name(&name) else {
        return Err(vec![Diagnostic::at(
            Issue::UnknownPredicate { name },
            line_no,
            name_col,
        )]);
    };
    let mut diags = Vec::new();
    if args.len() != predicate.arity() {
        diags.push(Diagnostic::at(
            Issue::ArityMismatch {
                predicate: name.clone(),
                expected: predicate.arity(),
                found: args.len(),
            },
            line_no,
            name_col,
        ));
    }
    for (text, col) in &args {
        if NodeId::new(text.as_str()).is_err() {
            diags.push(Diagnostic::at(
                Issue::BadIdentifier { text: text.clone() },
                line_no,
                *col,
            ));
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(Some(Fact {
        predicate,
        args: args.into_iter().map(|(a, _)| a).collect(),
    }))
}

/// Parses a whole file, keeping line numbers. Every line is checked, so an
/// error never hides diagnostics for other lines.
pub fn parse_fact_file_located(text: &str) -> Result<Vec<LocatedFact>, Diagnostics> {
    let mut facts = Vec::new();
    let mut diags = Diagnostics::default();
    for (i, raw) in text.split('\n').enumerate() {
        match parse_line(i + 1, raw) {
            Ok(Some(fact)) => facts.push(LocatedFact { line: i + 1, fact }),
            Ok(None) => {}
            Err(ds) => ds.into_iter().for_each(|d| diags.push(d)),
        }
    }
    if diags.is_empty() {
        Ok(facts)
    } else {
        Err(diags)
    }
}

/// Parses a fact file into facts in file order.
pub fn parse_fact_file(text: &str) -> Result<Vec<Fact>, Diagnostics> {
    parse_fact_file_located(text).map(|fs| fs.into_iter().map(|lf| lf.fact).collect())
}

/// Byte-level entry point; invalid UTF-8 is reported at the offending byte.
pub fn parse_fact_bytes(bytes: &[u8]) -> Result<Vec<Fact>, Diagnostics> {
    parse_fact_text(bytes).and_then(parse_fact_file)
}

pub fn parse_fact_text(bytes: &[u8]) -> Result<&str, Diagnostics> {
    std::str::from_utf8(bytes).map_err(|e| {
        let good = &bytes[..e.valid_up_to()];
        let line = good.iter().filter(|b| **b == b'\n').count() + 1;
        let line_start = good.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
        let column = String::from_utf8_lossy(&good[line_start..]).chars().count() + 1;
        Diagnostic::at(Issue::InvalidUtf8, line, column).into()
    })
}

/// Canonical text: sorted, deduplicated, one fact per line, trailing newline.
pub fn serialize_fact_file<'a>(facts: impl IntoIterator<Item = &'a Fact>) -> String {
    let sorted: BTreeSet<&Fact> = facts.into_iter().collect();
    let mut out = String::new();
    for f in sorted {
        out.push_str(&f.to_string());
        out.push('\n');
    }
    out
}

/// Value of the first `% key: value` comment line, if any. Used to carry the
/// English statement of a piece of knowledge alongside its graph.
pub fn comment_metadata(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| {
        let rest = l.trim_start().strip_prefix('%')?.trim_start();
        let value = rest.strip_prefix(key)?.trim_start().strip_prefix(':')?;
        Some(value.trim().to_owned())
    })
}

/// Facts for a sentence graph (`has_s`) or knowledge graph (`has_k`).
pub fn graph_facts(g: &LabeledGraph, predicate: Predicate) -> Vec<Fact> {
    g.edges().iter().map(|e| Fact::edge(predicate, e)).collect()
}

/// Everything the reasoner needs for one problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemBundle {
    pub problem: WscProblem,
    pub knowledge: KnowledgeGraph,
    /// (sentence node, knowledge node)
    pub synonyms: BTreeSet<(NodeId, NodeId)>,
    pub similar: BTreeSet<(NodeId, NodeId)>,
    /// English form of the knowledge, when supplied. Never used in reasoning.
    pub statement: Option<String>,
    pub source_paths: Vec<String>,
}

impl ProblemBundle {
    /// All facts of this bundle, suitable for writing back to disk.
    pub fn to_facts(&self) -> (Vec<Fact>, Vec<Fact>, Vec<Fact>) {
        let p = &self.problem;
        let mut problem = graph_facts(p.sentence().graph(), Predicate::HasS);
        problem.push(Fact::unary(Predicate::Pronoun, p.pronoun()));
        problem.push(Fact::unary(Predicate::AnsCh1, p.answer_choice_1()));
        problem.push(Fact::unary(Predicate::AnsCh2, p.answer_choice_2()));
        let knowledge = graph_facts(self.knowledge.graph(), Predicate::HasK);
        let aux = self
            .synonyms
            .iter()
            .map(|(a, b)| Fact::binary(Predicate::Synonyms, a, b))
            .chain(
                self.similar
                    .iter()
                    .map(|(a, b)| Fact::binary(Predicate::Similar, a, b)),
            )
            .collect();
        (problem, knowledge, aux)
    }

    /// Warnings for noun-like nodes whose class is not an entity class.
    pub fn warnings(&self) -> Vec<Diagnostic> {
        let p = &self.problem;
        let mut w = vocabulary_warnings(
            p.sentence(),
            [p.pronoun(), p.answer_choice_1(), p.answer_choice_2()].map(NodeId::as_str),
        );
        w.extend(vocabulary_warnings(
            &self.knowledge,
            self.knowledge
                .same_as_pairs()
                .iter()
                .flat_map(|(a, b)| [a.as_str(), b.as_str()]),
        ));
        w
    }
}

fn single(
    facts: &[&Fact],
    predicate: Predicate,
    missing: Issue,
    dup: impl FnOnce(Vec<String>) -> Issue,
    diags: &mut Diagnostics,
) -> Option<NodeId> {
    let values: BTreeSet<&str> = facts
        .iter()
        .filter(|f| f.predicate == predicate)
        .map(|f| f.args[0].as_str())
        .collect();
    match values.len() {
        0 => {
            diags.push(missing);
            None
        }
        1 => values
            .into_iter()
            .next()
            .map(|v| NodeId::new(v).expect("validated")),
        _ => {
            diags.push(dup(values.into_iter().map(str::to_owned).collect()));
            None
        }
    }
}

/// Builds and validates a bundle. The three lists are simply merged: facts
/// are routed by predicate, so one file may hold everything.
pub fn load_problem_bundle(
    label: &str,
    problem_facts: &[Fact],
    knowledge_facts: &[Fact],
    aux_facts: &[Fact],
) -> Result<ProblemBundle, Diagnostics> {
    let all: Vec<&Fact> = problem_facts
        .iter()
        .chain(knowledge_facts)
        .chain(aux_facts)
        .collect();
    let mut diags = Diagnostics::default();

    let sentence_graph = LabeledGraph::from_edges(
        all.iter()
            .filter(|f| f.predicate == Predicate::HasS)
            .map(|f| f.as_edge()),
    );
    let knowledge_graph = LabeledGraph::from_edges(
        all.iter()
            .filter(|f| f.predicate == Predicate::HasK)
            .map(|f| f.as_edge()),
    );
    let sentence = validate_sentence_graph(&sentence_graph)
        .map_err(|d| diags.extend(d))
        .ok();
    let knowledge = validate_knowledge_graph(&knowledge_graph)
        .map_err(|d| diags.extend(d))
        .ok();

    let pronoun = single(
        &all,
        Predicate::Pronoun,
        Issue::MissingPronoun,
        |nodes| Issue::DuplicatePronoun { nodes },
        &mut diags,
    );
    let a1 = single(
        &all,
        Predicate::AnsCh1,
        Issue::MissingAnswerChoice { which: 1 },
        |nodes| Issue::DuplicateAnswerChoice { which: 1, nodes },
        &mut diags,
    );
    let a2 = single(
        &all,
        Predicate::AnsCh2,
        Issue::MissingAnswerChoice { which: 2 },
        |nodes| Issue::DuplicateAnswerChoice { which: 2, nodes },
        &mut diags,
    );

    let mut synonyms = BTreeSet::new();
    let mut similar = BTreeSet::new();
    for f in all
        .iter()
        .filter(|f| matches!(f.predicate, Predicate::Synonyms | Predicate::Similar))
    {
        let (x, y) = (f.node_arg(0), f.node_arg(1));
        if let (Some(s), Some(k)) = (&sentence, &knowledge) {
            if !s.is_instance(x.as_str()) || !k.is_instance(y.as_str()) {
                diags.push(Issue::AuxPairNotInGraph {
                    predicate: f.predicate.name().to_owned(),
                    sentence: x.to_string(),
                    knowledge: y.to_string(),
                });
                continue;
            }
        }
        if f.predicate == Predicate::Synonyms {
            synonyms.insert((x, y));
        } else {
            similar.insert((x, y));
        }
    }

    let problem = match (sentence, pronoun, a1, a2) {
        (Some(s), Some(p), Some(a1), Some(a2)) => WscProblem::new(label, s, p, a1, a2)
            .map_err(|d| diags.extend(d))
            .ok(),
        _ => None,
    };
    match (problem, knowledge) {
        (Some(problem), Some(knowledge)) if !diags.has_errors() => Ok(ProblemBundle {
            problem,
            knowledge,
            synonyms,
            similar,
            statement: None,
            source_paths: Vec::new(),
        }),
        _ => Err(diags),
    }
}
