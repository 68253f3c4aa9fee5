//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p wsc-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use wsc_core::graph::{node, InstanceGraph, NodeId};
use wsc_core::harness::{default_mode, load_bundle_dir, run_corpus, CorpusOptions};
use wsc_core::matcher::{
    enumerate_isomorphisms, extract_knowledge_core, extract_sentence_core, node_compatible,
    CompatibilityPolicy, Mapping, PolicyMode, SearchBudget,
};
use wsc_core::oracle::{
    brute_force_enumerate, evaluate_definition7, evaluate_rules, generate_instance,
    rename_knowledge_nodes, RandomInstanceSpec,
};
use wsc_core::resolver::{solve, Outcome, SolveConfig};
use wsc_core::ProblemBundle;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn spec(i: u64) -> RandomInstanceSpec {
    let s = 3 + (i % 8) as usize;
    RandomInstanceSpec {
        sentence_nodes: s,
        knowledge_nodes: (2 + (i % 5) as usize).min(s),
        edge_density: [0.2, 0.35, 0.5][(i % 3) as usize],
        label_alphabet_size: 1 + (i % 2) as usize,
        class_alphabet_size: 1 + (i % 3) as usize,
        seed: 1_000 + i,
    }
}

fn budget() -> SearchBudget {
    SearchBudget::new(usize::MAX, Duration::from_secs(60), 64).unwrap()
}

fn config(mode: PolicyMode) -> SolveConfig {
    SolveConfig {
        policy: CompatibilityPolicy::with_mode(mode),
        budget: budget(),
        treat_truncated_as_no_answer: true,
    }
}

fn answer(b: &ProblemBundle, mode: PolicyMode) -> Option<NodeId> {
    solve(b, &config(mode)).verdict.outcome.answer().cloned()
}

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn golden() -> Check {
    let b = load_bundle_dir(&corpus().join("lift_weak"))
        .map_err(|d| d.to_string())?
        .bundle;
    let started = Instant::now();
    let s = solve(&b, &config(PolicyMode::ClassOnly));
    let secs = started.elapsed().as_secs_f64();
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
        .map(|(a, b)| (node(a), node(b))),
    );
    let ok = s.enumeration.mappings == vec![expected]
        && s.verdict.outcome == Outcome::Answer(node("man_2"))
        && secs < 1.0;
    let detail = format!(
        "{} mapping(s), outcome {:?}, {:.3} s",
        s.enumeration.mappings.len(),
        s.verdict.outcome,
        secs
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synonym_extension() -> Check {
    let b = load_bundle_dir(&corpus().join("lift_frail"))
        .map_err(|d| d.to_string())?
        .bundle;
    let strict = answer(&b, PolicyMode::ClassOnly);
    let loose = answer(&b, PolicyMode::ClassOrSynonym);
    let detail = format!("class_only {strict:?}, class_or_synonym {loose:?}");
    if strict.is_none() && loose == Some(node("man_2")) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_completeness() -> Check {
    let started = Instant::now();
    let mut bad = Vec::new();
    let mut total_mappings = 0;
    for i in 0..500 {
        let b = generate_instance(&spec(i)).map_err(|e| e.to_string())?;
        let policy = CompatibilityPolicy::class_only();
        let compat =
            |x: &_, y: &_| node_compatible(&policy, b.problem.sentence(), &b.knowledge, x, y);
        let s = extract_sentence_core(b.problem.sentence());
        let k = extract_knowledge_core(&b.knowledge);
        if k.nodes.len() > 6 || s.nodes.len() > 10 {
            return Err(format!("instance {i} out of bounds"));
        }
        let fast = enumerate_isomorphisms(&s, &k, compat, &budget()).map_err(|e| e.to_string())?;
        let slow = brute_force_enumerate(&s, &k, compat).map_err(|e| e.to_string())?;
        total_mappings += slow.len();
        if fast.mappings != slow {
            bad.push(i);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let detail = format!(
        "500 instances, {total_mappings} mappings, {} mismatches, {secs:.1} s",
        bad.len()
    );
    if bad.is_empty() && secs < 60.0 {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; first mismatches {:?}",
            &bad[..bad.len().min(5)]
        ))
    }
}

fn definition_agreement() -> Check {
    let mut bad = Vec::new();
    let mut answered = 0;
    for i in 0..500 {
        let b = generate_instance(&spec(i)).map_err(|e| e.to_string())?;
        let got = solve(&b, &config(PolicyMode::ClassOnly)).verdict;
        let want =
            evaluate_definition7(&b.problem, &b.knowledge, &CompatibilityPolicy::class_only())
                .map_err(|e| e.to_string())?;
        answered += usize::from(got.outcome.answer().is_some());
        if got != want {
            bad.push(i);
        }
    }
    let detail = format!(
        "500 instances ({answered} answered), {} disagreements",
        bad.len()
    );
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; first {:?}", &bad[..bad.len().min(5)]))
    }
}

fn rule_agreement() -> Check {
    let mut bad = Vec::new();
    for i in 0..200 {
        let b = generate_instance(&spec(i)).map_err(|e| e.to_string())?;
        let got = solve(&b, &config(PolicyMode::ClassOnly)).verdict;
        if got != evaluate_rules(&b, PolicyMode::ClassOnly).map_err(|e| e.to_string())? {
            bad.push(format!("random {i}"));
        }
    }
    let mut corpus_count = 0;
    for dir in corpus_dirs()? {
        let b = load_bundle_dir(&dir).map_err(|d| d.to_string())?.bundle;
        let mode = default_mode(&b);
        corpus_count += 1;
        if solve(&b, &config(mode)).verdict
            != evaluate_rules(&b, mode).map_err(|e| e.to_string())?
        {
            bad.push(b.problem.label.clone());
        }
    }
    let detail = format!(
        "200 random + {corpus_count} corpus problems, {} disagreements",
        bad.len()
    );
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {bad:?}"))
    }
}

fn corpus_dirs() -> Result<Vec<PathBuf>, String> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(corpus())
        .map_err(|e| e.to_string())?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn corpus_score() -> Check {
    let r = run_corpus(&corpus(), &CorpusOptions::default()).map_err(|d| d.to_string())?;
    let t = &r.totals;
    let detail = format!(
        "{} problems, {} answered, {} correct, coverage {:.4}, accuracy {:.4}",
        t.total, t.answered, t.correct, t.coverage, t.accuracy
    );
    if t.total >= 12 && t.coverage == 1.0 && t.accuracy == 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn metamorphic() -> Check {
    let mut failures = Vec::new();
    let mut answered = 0;
    for i in 0..200 {
        let b = generate_instance(&spec(i)).map_err(|e| e.to_string())?;
        let base = answer(&b, PolicyMode::ClassOnly);
        answered += usize::from(base.is_some());

        let renamed = rename_knowledge_nodes(&b, |n| {
            node(&format!("z{}_{}", n.as_str().len(), n.as_str()))
        });
        if answer(&renamed, PolicyMode::ClassOnly) != base {
            failures.push(format!("(a) {i}"));
        }

        let mut swapped = b.clone();
        swapped.problem = b.problem.with_choices_swapped();
        if answer(&swapped, PolicyMode::ClassOnly) != base {
            failures.push(format!("(b) {i}"));
        }

        let mut widened = b.clone();
        let s_nodes: Vec<_> = b.problem.sentence().class_map().keys().cloned().collect();
        let k_nodes: Vec<_> = b.knowledge.class_map().keys().cloned().collect();
        let before = answer(&widened, PolicyMode::ClassOrSynonym);
        for step in 0..3u64 {
            let x = &s_nodes[((i * 7 + step * 3) as usize) % s_nodes.len()];
            let y = &k_nodes[((i * 5 + step) as usize) % k_nodes.len()];
            widened.synonyms.insert((x.clone(), y.clone()));
            let after = answer(&widened, PolicyMode::ClassOrSynonym);
            if let (Some(old), Some(new)) = (&before, &after) {
                if old != new {
                    failures.push(format!("(c) {i}"));
                }
            }
        }
    }
    let detail = format!(
        "200 instances ({answered} answered), {} violations",
        failures.len()
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}: {:?}",
            &failures[..failures.len().min(5)]
        ))
    }
}

fn run_corpus_binary(dir: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wsc"))
        .args(["corpus", "--stable", "--format", "json"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(out.stdout)
}

fn determinism() -> Check {
    let one = run_corpus_binary(&corpus())?;
    let two = run_corpus_binary(&corpus())?;
    let detail = format!("{} bytes per report", one.len());
    if one == two && !one.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; reports differ"))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden lift/weak mapping and answer", golden),
        ("synonym extension (frail)", synonym_extension),
        ("enumeration equals brute force", oracle_completeness),
        (
            "solver agrees with the definition-level oracle",
            definition_agreement,
        ),
        ("solver agrees with rule evaluation", rule_agreement),
        ("sample corpus coverage and accuracy", corpus_score),
        (
            "metamorphic renaming / choice swap / synonym growth",
            metamorphic,
        ),
        ("stable corpus report is byte-identical", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
