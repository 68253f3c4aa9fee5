//! Batch plumbing behind the command-line tool: bundle directories, corpus
//! scoring, file validation and matcher benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::diag::{Diagnostic, Diagnostics, Issue, Location};
use crate::facts::{
    comment_metadata, load_problem_bundle, parse_fact_file_located, parse_fact_text, Fact,
    LocatedFact, Predicate, ProblemBundle,
};
use crate::graph::{
    validate_knowledge_graph, validate_sentence_graph, vocabulary_warnings, LabeledGraph, NodeId,
    WscProblem,
};
use crate::matcher::{
    enumerate_isomorphisms, extract_knowledge_core, extract_sentence_core, node_compatible,
    CompatibilityPolicy, PolicyMode, SearchBudget,
};
use crate::oracle::{evaluate_rules, generate_instance_unbounded, OracleError, RandomInstanceSpec};
use crate::resolver::{solve, Outcome, Reason, SolveConfig, Timing};

pub const PROBLEM_FILE: &str = "problem.facts";
pub const KNOWLEDGE_FILE: &str = "knowledge.facts";
pub const AUX_FILE: &str = "aux.facts";
pub const META_FILE: &str = "meta.facts";

/// A parsed fact file that remembers where each fact came from.
#[derive(Clone, Debug)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    pub facts: Vec<LocatedFact>,
}

impl SourceFile {
    pub fn read(path: &Path) -> Result<SourceFile, Diagnostics> {
        let shown = path.display().to_string();
        let bytes = fs::read(path).map_err(|e| {
            Diagnostics::from(
                Diagnostic::new(Issue::Io {
                    message: e.to_string(),
                })
                .in_file(&shown),
            )
        })?;
        let text = parse_fact_text(&bytes)
            .map_err(|d| d.in_file(&shown))?
            .to_owned();
        let facts = parse_fact_file_located(&text).map_err(|d| d.in_file(&shown))?;
        Ok(SourceFile {
            path: shown,
            text,
            facts,
        })
    }

    pub fn plain(&self) -> Vec<Fact> {
        self.facts.iter().map(|f| f.fact.clone()).collect()
    }

    /// Line of the fact an issue is about: the edge itself for edge issues,
    /// otherwise the first fact mentioning the issue's subject.
    fn line_of(&self, issue: &Issue) -> Option<usize> {
        let hit = match issue.edge() {
            Some((source, target)) => self.facts.iter().find(|f| {
                let a = f.fact.args();
                a.len() == 3 && a[0] == source && a[2] == target
            }),
            None => {
                let subject = issue.subject()?;
                self.facts
                    .iter()
                    .find(|f| f.fact.args().iter().any(|a| a == subject))
            }
        };
        hit.map(|f| f.line)
    }
}

/// Gives located diagnostics to issues that arose after parsing, by pointing
/// at the first fact that mentions the issue's subject.
pub fn locate(diags: Diagnostics, files: &[&SourceFile]) -> Diagnostics {
    Diagnostics(
        diags
            .0
            .into_iter()
            .map(|mut d| {
                if d.location.is_some() || d.file.is_some() {
                    return d;
                }
                let hit = files
                    .iter()
                    .find_map(|f| f.line_of(&d.issue).map(|line| (f.path.clone(), line)));
                if let Some((path, line)) = hit {
                    d.file = Some(path);
                    d.location = Some(Location { line, column: 1 });
                }
                d
            })
            .collect(),
    )
}

/// One bundle directory, loaded.
#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub bundle: ProblemBundle,
    pub expected: Option<NodeId>,
    /// Free-text note from the meta file, e.g. how an alternate was authored.
    pub note: Option<String>,
}

fn read_optional(path: PathBuf) -> Result<Option<SourceFile>, Diagnostics> {
    if path.exists() {
        SourceFile::read(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Loads `<dir>/{problem,knowledge,aux?,meta?}.facts` as one bundle.
pub fn load_bundle_dir(dir: &Path) -> Result<LoadedBundle, Diagnostics> {
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut knowledge_files: Vec<String> = fs::read_dir(dir)
        .map_err(|e| {
            Diagnostics::from(
                Diagnostic::new(Issue::Io {
                    message: e.to_string(),
                })
                .in_file(dir.display().to_string()),
            )
        })?
        .filter_map(Result::ok)
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("knowledge") && n.ends_with(".facts"))
        .collect();
    knowledge_files.sort();
    if knowledge_files.len() > 1 {
        return Err(Issue::MultipleKnowledge {
            files: knowledge_files,
        }
        .into());
    }

    let mut diags = Diagnostics::default();
    let mut read = |name: &str, required: bool| -> Option<SourceFile> {
        let path = dir.join(name);
        let got = if required {
            SourceFile::read(&path).map(Some)
        } else {
            read_optional(path)
        };
        got.unwrap_or_else(|d| {
            diags.extend(d);
            None
        })
    };
    let problem = read(PROBLEM_FILE, true);
    let knowledge = read(KNOWLEDGE_FILE, true);
    let aux = read(AUX_FILE, false);
    let meta = read(META_FILE, false);
    let (Some(problem), Some(knowledge)) = (problem, knowledge) else {
        return Err(diags);
    };
    if diags.has_errors() {
        return Err(diags);
    }

    let aux_facts = aux.as_ref().map(SourceFile::plain).unwrap_or_default();
    let mut bundle = load_problem_bundle(&label, &problem.plain(), &knowledge.plain(), &aux_facts)
        .map_err(|d| {
            let files: Vec<&SourceFile> = [Some(&problem), Some(&knowledge), aux.as_ref()]
                .into_iter()
                .flatten()
                .collect();
            locate(d, &files)
        })?;
    bundle.statement = comment_metadata(&knowledge.text, "knowledge");
    bundle.source_paths = [Some(&problem), Some(&knowledge), aux.as_ref()]
        .into_iter()
        .flatten()
        .map(|f| f.path.clone())
        .collect();

    let mut expected = None;
    let mut note = None;
    if let Some(meta) = &meta {
        let values: Vec<&str> = meta
            .facts
            .iter()
            .filter(|f| f.fact.predicate() == Predicate::Expected)
            .map(|f| f.fact.args()[0].as_str())
            .collect();
        match values[..] {
            [] => {}
            [one] => expected = NodeId::new(one).ok(),
            _ => {
                return Err(Diagnostic::new(Issue::DuplicateExpected {
                    nodes: values.iter().map(|v| v.to_string()).collect(),
                })
                .in_file(&meta.path)
                .into())
            }
        }
        note = comment_metadata(&meta.text, "note");
    }
    Ok(LoadedBundle {
        bundle,
        expected,
        note,
    })
}

/// Reads a bundle from explicit file paths, as the `solve` command does.
pub fn load_bundle_files(
    label: &str,
    problem: &Path,
    knowledge: &Path,
    aux: Option<&Path>,
) -> Result<ProblemBundle, Diagnostics> {
    let problem = SourceFile::read(problem)?;
    let knowledge = SourceFile::read(knowledge)?;
    let aux = aux.map(SourceFile::read).transpose()?;
    let aux_facts = aux.as_ref().map(SourceFile::plain).unwrap_or_default();
    let mut bundle = load_problem_bundle(label, &problem.plain(), &knowledge.plain(), &aux_facts)
        .map_err(|d| {
        let files: Vec<&SourceFile> = [Some(&problem), Some(&knowledge), aux.as_ref()]
            .into_iter()
            .flatten()
            .collect();
        locate(d, &files)
    })?;
    bundle.statement = comment_metadata(&knowledge.text, "knowledge");
    bundle.source_paths = [Some(&problem), Some(&knowledge), aux.as_ref()]
        .into_iter()
        .flatten()
        .map(|f| f.path.clone())
        .collect();
    Ok(bundle)
}

/// The policy to use when none is requested: class matching alone, widened
/// to the full table lookup as soon as the bundle ships synonym or similar
/// pairs.
pub fn default_mode(bundle: &ProblemBundle) -> PolicyMode {
    if bundle.synonyms.is_empty() && bundle.similar.is_empty() {
        PolicyMode::ClassOnly
    } else {
        PolicyMode::ClassOrSynonymOrSimilar
    }
}

#[derive(Clone, Debug, Default)]
pub struct CorpusOptions {
    /// `None` picks [`default_mode`] per bundle.
    pub mode: Option<PolicyMode>,
    pub budget: SearchBudget,
    pub check_oracle: bool,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusRow {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Reason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_agrees: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusTotals {
    pub total: usize,
    pub answered: usize,
    pub with_expected: usize,
    pub correct: usize,
    pub errors: usize,
    pub oracle_disagreements: usize,
    /// correct / answered problems that have an expected answer
    pub accuracy: f64,
    /// answered / total
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusResult {
    pub rows: Vec<CorpusRow>,
    pub totals: CorpusTotals,
}

impl CorpusResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus result serializes")
    }

    pub fn to_table(&self) -> String {
        let dash = |o: &Option<String>| o.clone().unwrap_or_else(|| "-".into());
        let mut out = format!(
            "{:<24} {:<16} {:<16} {:<8} {}\n",
            "problem", "answer", "expected", "correct", "note"
        );
        for r in &self.rows {
            let correct = match r.correct {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "-",
            };
            let note = match (&r.error, r.reason, r.oracle_agrees) {
                (Some(e), _, _) => format!("error: {}", e.lines().next().unwrap_or_default()),
                (None, _, Some(false)) => "oracle disagrees".into(),
                (None, Some(reason), _) => reason.to_string(),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{:<24} {:<16} {:<16} {:<8} {}\n",
                r.label,
                dash(&r.answer),
                dash(&r.expected),
                correct,
                note
            ));
        }
        let t = &self.totals;
        out.push_str(&format!(
            "\n{} problems, {} answered, {} correct of {} scored, {} errors\naccuracy {:.4}  coverage {:.4}\n",
            t.total, t.answered, t.correct, t.with_expected, t.errors, t.accuracy, t.coverage
        ));
        if t.oracle_disagreements > 0 {
            out.push_str(&format!(
                "{} oracle disagreements\n",
                t.oracle_disagreements
            ));
        }
        out
    }

    pub fn passed_oracle(&self) -> bool {
        self.totals.oracle_disagreements == 0
    }
}

fn error_row(label: String, diags: &Diagnostics) -> CorpusRow {
    CorpusRow {
        label,
        answer: None,
        reason: None,
        expected: None,
        correct: None,
        oracle_agrees: None,
        error: Some(diags.to_string()),
        timing: None,
    }
}

/// Solves one loaded bundle and scores it.
pub fn score_bundle(loaded: &LoadedBundle, opts: &CorpusOptions) -> CorpusRow {
    let bundle = &loaded.bundle;
    let mode = opts.mode.unwrap_or_else(|| default_mode(bundle));
    let cfg = SolveConfig {
        policy: CompatibilityPolicy::with_mode(mode),
        budget: opts.budget,
        treat_truncated_as_no_answer: true,
    };
    let started = Instant::now();
    let solution = solve(bundle, &cfg);
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let answer = solution.verdict.outcome.answer().map(|n| n.to_string());
    let expected = loaded.expected.as_ref().map(|n| n.to_string());
    let correct = match (&answer, &expected) {
        (Some(a), Some(e)) => Some(a == e),
        (None, Some(_)) => Some(false),
        _ => None,
    };
    let oracle_agrees = opts
        .check_oracle
        .then(|| match evaluate_rules(bundle, mode) {
            Ok(v) => v == solution.verdict,
            // out of the oracle's range: nothing to compare against
            Err(OracleError::InstanceTooLarge { .. }) => true,
        });
    CorpusRow {
        label: bundle.problem.label.clone(),
        answer,
        reason: Some(solution.verdict.reason),
        expected,
        correct,
        oracle_agrees,
        error: None,
        timing: (!opts.stable).then_some(Timing { elapsed_ms }),
    }
}

/// Solves and scores every bundle directory under `dir`. A bundle that fails
/// to load becomes an error row; the run carries on.
pub fn run_corpus(dir: &Path, opts: &CorpusOptions) -> Result<CorpusResult, Diagnostics> {
    let entries = fs::read_dir(dir).map_err(|e| {
        Diagnostics::from(
            Diagnostic::new(Issue::Io {
                message: e.to_string(),
            })
            .in_file(dir.display().to_string()),
        )
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut rows: Vec<CorpusRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = dirs
            .iter()
            .map(|d| {
                scope.spawn(move || {
                    let label = d
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    match load_bundle_dir(d) {
                        Ok(loaded) => score_bundle(&loaded, opts),
                        Err(diags) => error_row(label, &diags),
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(CorpusResult {
        totals: totals(&rows),
        rows,
    })
}

fn totals(rows: &[CorpusRow]) -> CorpusTotals {
    let total = rows.len();
    let answered = rows.iter().filter(|r| r.answer.is_some()).count();
    let scored = rows
        .iter()
        .filter(|r| r.answer.is_some() && r.expected.is_some())
        .count();
    let correct = rows.iter().filter(|r| r.correct == Some(true)).count();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    CorpusTotals {
        total,
        answered,
        with_expected: rows.iter().filter(|r| r.expected.is_some()).count(),
        correct,
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        oracle_disagreements: rows
            .iter()
            .filter(|r| r.oracle_agrees == Some(false))
            .count(),
        accuracy: ratio(correct, scored),
        coverage: ratio(answered, total),
    }
}

/// Parses one file and checks whatever it contains: sentence facts, knowledge
/// facts and problem roles are each validated when present. Returns every
/// diagnostic, warnings included.
pub fn validate_file(path: &Path) -> Diagnostics {
    let source = match SourceFile::read(path) {
        Ok(s) => s,
        Err(d) => return d,
    };
    let facts = source.plain();
    let has = |p: Predicate| facts.iter().any(|f| f.predicate() == p);
    let mut diags = Diagnostics::default();
    let edges = |p: Predicate| {
        LabeledGraph::from_edges(
            facts
                .iter()
                .filter(|f| f.predicate() == p)
                .map(|f| f.as_edge()),
        )
    };

    let roles = [Predicate::Pronoun, Predicate::AnsCh1, Predicate::AnsCh2];
    if has(Predicate::HasS) && has(Predicate::HasK) && roles.iter().any(|p| has(*p)) {
        // a whole bundle in one file
        if let Err(d) = load_problem_bundle("", &facts, &[], &[]) {
            diags.extend(d);
        }
    } else {
        if has(Predicate::HasS) {
            match validate_sentence_graph(&edges(Predicate::HasS)) {
                Ok(sentence) => {
                    let role = |p: Predicate| {
                        facts
                            .iter()
                            .find(|f| f.predicate() == p)
                            .map(|f| f.node_arg(0))
                    };
                    let nouns: Vec<&str> = facts
                        .iter()
                        .filter(|f| roles.contains(&f.predicate()))
                        .map(|f| f.args()[0].as_str())
                        .collect();
                    diags.0.extend(vocabulary_warnings(&sentence, nouns));
                    if let (Some(p), Some(a1), Some(a2)) = (
                        role(Predicate::Pronoun),
                        role(Predicate::AnsCh1),
                        role(Predicate::AnsCh2),
                    ) {
                        if let Err(d) = WscProblem::new("", sentence, p, a1, a2) {
                            diags.extend(d);
                        }
                    }
                }
                Err(d) => diags.extend(d),
            }
        }
        if has(Predicate::HasK) {
            match validate_knowledge_graph(&edges(Predicate::HasK)) {
                Ok(k) => {
                    let nouns: Vec<&str> = k
                        .same_as_pairs()
                        .iter()
                        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
                        .collect();
                    diags.0.extend(vocabulary_warnings(&k, nouns));
                }
                Err(d) => diags.extend(d),
            }
        }
    }
    locate(diags, &[&source])
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    /// Knowledge-core sizes to try; each sentence gets `sentence_ratio` times
    /// as many nodes.
    pub knowledge_sizes: Vec<usize>,
    pub sentence_ratio: usize,
    pub edge_density: f64,
    pub seeds: u64,
    pub first_seed: u64,
    pub repetitions: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            knowledge_sizes: (4..=10).collect(),
            sentence_ratio: 2,
            edge_density: 0.3,
            seeds: 20,
            first_seed: 0,
            repetitions: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub knowledge_nodes: usize,
    pub sentence_nodes: usize,
    pub instances: u64,
    pub mappings: usize,
    pub min_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serializes")
    }
}

/// The instances a benchmark run would time, in order.
pub fn bench_instances(spec: &BenchSpec, knowledge_nodes: usize) -> Vec<ProblemBundle> {
    (spec.first_seed..spec.first_seed + spec.seeds)
        .filter_map(|seed| {
            let mut s = RandomInstanceSpec::new(
                knowledge_nodes * spec.sentence_ratio.max(1),
                knowledge_nodes,
                seed,
            );
            s.edge_density = spec.edge_density;
            generate_instance_unbounded(&s).ok()
        })
        .collect()
}

/// Times the matcher on seeded instances. Zero repetitions gives an empty
/// report.
pub fn run_bench(spec: &BenchSpec) -> BenchReport {
    if spec.repetitions == 0 {
        return BenchReport { rows: Vec::new() };
    }
    let budget = SearchBudget::new(usize::MAX, std::time::Duration::from_secs(60), usize::MAX)
        .expect("valid budget");
    let mut rows = Vec::new();
    for &k in &spec.knowledge_sizes {
        let instances = bench_instances(spec, k);
        if instances.is_empty() {
            continue;
        }
        let mut times = Vec::new();
        let mut mappings = 0;
        for b in &instances {
            let s = extract_sentence_core(b.problem.sentence());
            let kc = extract_knowledge_core(&b.knowledge);
            let policy = CompatibilityPolicy::class_only();
            for _ in 0..spec.repetitions {
                let started = Instant::now();
                let e = enumerate_isomorphisms(
                    &s,
                    &kc,
                    |x, y| node_compatible(&policy, b.problem.sentence(), &b.knowledge, x, y),
                    &budget,
                );
                times.push(started.elapsed().as_secs_f64() * 1e3);
                mappings += e.map(|e| e.mappings.len()).unwrap_or(0);
            }
        }
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            knowledge_nodes: k,
            sentence_nodes: k * spec.sentence_ratio.max(1),
            instances: instances.len() as u64,
            mappings: mappings / spec.repetitions,
            min_ms: times[0],
            median_ms: times[times.len() / 2],
            max_ms: times[times.len() - 1],
        });
    }
    BenchReport { rows }
}

/// Text rendering of a single solve, for `--format text`.
pub fn render_report_text(report: &crate::resolver::AnswerReport) -> String {
    let mut out = String::new();
    let headline = match &report.answer_node {
        Some(n) => format!("answer: {n}"),
        None => "no answer".to_owned(),
    };
    out.push_str(&format!(
        "{}: {} ({})\n",
        report.problem_label, headline, report.reason
    ));
    out.push_str(&format!(
        "policy {}, {} mapping(s), {} candidate(s){}\n",
        report.policy,
        report.mappings,
        report.candidates.len(),
        if report.exhaustive {
            String::new()
        } else {
            format!(
                ", search truncated by {}",
                report.truncated_by.as_deref().unwrap_or("?")
            )
        }
    ));
    for c in &report.candidates {
        out.push_str(&format!(
            "  mapping {}: {} = {} via {} is_same_as {}\n",
            c.mapping_index, c.choice, c.node, c.witness.0, c.witness.1
        ));
    }
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

pub fn outcome_exit_code(outcome: &Outcome) -> i32 {
    match outcome {
        Outcome::Answer(_) => 0,
        Outcome::NoAnswer => 2,
    }
}
