use std::path::PathBuf;
use std::time::Instant;

use wsc_core::graph::node;
use wsc_core::harness::{default_mode, load_bundle_dir, run_corpus, CorpusOptions};
use wsc_core::matcher::{CompatibilityPolicy, Mapping, PolicyMode};
use wsc_core::oracle::evaluate_rules;
use wsc_core::resolver::{solve, Choice, Outcome, Reason, SolveConfig};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn config(mode: PolicyMode) -> SolveConfig {
    SolveConfig {
        policy: CompatibilityPolicy::with_mode(mode),
        ..SolveConfig::default()
    }
}

#[test]
fn lift_weak_has_the_single_expected_mapping() {
    let loaded = load_bundle_dir(&corpus().join("lift_weak")).unwrap();
    let started = Instant::now();
    let solution = solve(&loaded.bundle, &config(PolicyMode::ClassOnly));
    assert!(started.elapsed().as_secs_f64() < 1.0);

    let expected = Mapping::from_pairs(
        [
            ("weak_12", "weak_9"),
            ("lift_5", "lifts_4"),
            ("he_9", "person2_7"),
            ("man_2", "person1_1"),
            ("son_7", "someone_5"),
            ("was_10", "is_8"),
            ("not_4", "not_3"),
            ("could_3", "can_2"),
        ]
        .map(|(s, k)| (node(s), node(k))),
    );
    assert_eq!(solution.enumeration.mappings, vec![expected]);
    assert_eq!(solution.verdict.outcome, Outcome::Answer(node("man_2")));
    assert_eq!(solution.verdict.reason, Reason::Unanimous);
    let c = &solution.verdict.candidates[0];
    assert_eq!(c.choice, Choice::A1);
    assert_eq!(c.witness, (node("person2_7"), node("person1_1")));
    assert_eq!(loaded.expected, Some(node("man_2")));
    assert!(loaded
        .bundle
        .statement
        .as_deref()
        .unwrap()
        .starts_with("IF person1 could not lift"));
}

#[test]
fn frail_needs_the_synonym_pair() {
    let loaded = load_bundle_dir(&corpus().join("lift_frail")).unwrap();
    let strict = solve(&loaded.bundle, &config(PolicyMode::ClassOnly)).verdict;
    assert_eq!(strict.outcome, Outcome::NoAnswer);
    assert_eq!(strict.reason, Reason::NoMappings);
    let loose = solve(&loaded.bundle, &config(PolicyMode::ClassOrSynonym)).verdict;
    assert_eq!(loose.outcome, Outcome::Answer(node("man_2")));
    assert_eq!(
        default_mode(&loaded.bundle),
        PolicyMode::ClassOrSynonymOrSimilar
    );
}

#[test]
fn special_and_alternate_words_flip_the_answer() {
    for (label, answer) in [
        ("fish_tasty", "worm_5"),
        ("fish_hungry", "fish_2"),
        ("lift_weak", "man_2"),
        ("lift_heavy", "son_7"),
    ] {
        let loaded = load_bundle_dir(&corpus().join(label)).unwrap();
        let v = solve(&loaded.bundle, &config(PolicyMode::ClassOnly)).verdict;
        assert_eq!(v.outcome, Outcome::Answer(node(answer)), "{label}");
    }
}

#[test]
fn corpus_scores_perfectly_and_matches_the_rules() {
    let opts = CorpusOptions {
        check_oracle: true,
        stable: true,
        ..CorpusOptions::default()
    };
    let result = run_corpus(&corpus(), &opts).unwrap();
    assert!(result.totals.total >= 12);
    assert_eq!(result.totals.errors, 0);
    assert_eq!(result.totals.coverage, 1.0);
    assert_eq!(result.totals.accuracy, 1.0);
    assert!(result.passed_oracle());

    for row in &result.rows {
        let loaded = load_bundle_dir(&corpus().join(&row.label)).unwrap();
        let mode = default_mode(&loaded.bundle);
        assert_eq!(
            solve(&loaded.bundle, &config(mode)).verdict,
            evaluate_rules(&loaded.bundle, mode).unwrap()
        );
    }
}

#[test]
fn corpus_isolates_a_broken_bundle() {
    let dir = tempfile::tempdir().unwrap();
    for label in ["lift_weak", "fish_tasty"] {
        let to = dir.path().join(label);
        std::fs::create_dir(&to).unwrap();
        for entry in std::fs::read_dir(corpus().join(label)).unwrap() {
            let entry = entry.unwrap();
            std::fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
        }
    }
    std::fs::write(
        dir.path().join("fish_tasty/knowledge.facts"),
        "has_k(\"a_1\" \"b\").\n",
    )
    .unwrap();
    let result = run_corpus(dir.path(), &CorpusOptions::default()).unwrap();
    assert_eq!(result.rows.len(), 2);
    assert!(result.rows[0]
        .error
        .as_deref()
        .unwrap()
        .contains("knowledge.facts:1:"));
    assert_eq!(result.rows[1].answer.as_deref(), Some("man_2"));
    assert_eq!(result.totals.errors, 1);
    assert_eq!(result.totals.coverage, 0.5);
    assert_eq!(result.totals.accuracy, 1.0);
}

#[test]
fn empty_corpus_reports_zero_totals() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_corpus(dir.path(), &CorpusOptions::default()).unwrap();
    assert_eq!(result.totals.total, 0);
    assert_eq!((result.totals.accuracy, result.totals.coverage), (0.0, 0.0));
}

#[test]
fn second_knowledge_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["problem.facts", "knowledge.facts"] {
        std::fs::copy(corpus().join("lift_weak").join(f), dir.path().join(f)).unwrap();
    }
    std::fs::copy(
        corpus().join("lift_weak/knowledge.facts"),
        dir.path().join("knowledge_2.facts"),
    )
    .unwrap();
    let err = load_bundle_dir(dir.path()).unwrap_err();
    assert!(err.contains(|i| matches!(i, wsc_core::Issue::MultipleKnowledge { .. })));
}
