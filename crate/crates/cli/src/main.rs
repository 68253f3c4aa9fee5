use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wsc_core::diag::Severity;
use wsc_core::harness::{
    default_mode, load_bundle_files, outcome_exit_code, render_report_text, run_bench, run_corpus,
    validate_file, BenchSpec, CorpusOptions,
};
use wsc_core::matcher::{CompatibilityPolicy, PolicyMode, SearchBudget};
use wsc_core::oracle::evaluate_rules;
use wsc_core::resolver::{solve, SolveConfig};

#[derive(Parser)]
#[command(
    name = "wsc",
    version,
    about = "Resolve Winograd-style pronouns against knowledge graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem against one knowledge graph.
    Solve(SolveArgs),
    /// Solve and score every bundle directory under a corpus directory.
    Corpus(CorpusArgs),
    /// Time the matcher on seeded random instances.
    Bench(BenchArgs),
    /// Parse and validate a fact file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
#[allow(clippy::enum_variant_names)]
enum PolicyArg {
    ClassOnly,
    ClassOrSynonym,
    ClassOrSynonymOrSimilar,
}

impl From<PolicyArg> for PolicyMode {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::ClassOnly => PolicyMode::ClassOnly,
            PolicyArg::ClassOrSynonym => PolicyMode::ClassOrSynonym,
            PolicyArg::ClassOrSynonymOrSimilar => PolicyMode::ClassOrSynonymOrSimilar,
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Node compatibility policy [default: class_only, or the full lookup
    /// when synonym/similar pairs are loaded]
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Stop after this many mappings (the answer is then withheld)
    #[arg(long, default_value_t = 10_000)]
    max_mappings: usize,
    /// Wall-clock limit for the search, in seconds
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
}

impl SearchArgs {
    fn budget(&self) -> Result<SearchBudget, String> {
        let limit = Duration::try_from_secs_f64(self.time_limit)
            .map_err(|e| format!("--time-limit: {e}"))?;
        SearchBudget::new(self.max_mappings, limit, SearchBudget::default().node_cap())
            .map_err(|e| e.to_string())
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Fact file with has_s, pronoun, ans_ch1 and ans_ch2 facts
    problem: PathBuf,
    /// Fact file with has_k facts
    knowledge: PathBuf,
    /// Fact file with synonyms/similar pairs
    #[arg(long)]
    aux: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Omit timing from the report
    #[arg(long)]
    stable: bool,
    /// Also evaluate the rule program directly and fail on disagreement
    #[arg(long)]
    check_oracle: bool,
}

#[derive(Args)]
struct CorpusArgs {
    dir: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    stable: bool,
    #[arg(long)]
    check_oracle: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Smallest knowledge-core size
    #[arg(long, default_value_t = 4)]
    min_nodes: usize,
    /// Largest knowledge-core size
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
    /// Sentence nodes per knowledge node
    #[arg(long, default_value_t = 2)]
    ratio: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    /// Instances per size
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// First seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
}

#[derive(Args)]
struct ValidateArgs {
    path: PathBuf,
    /// Exit successfully when only warnings are found
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    allow_warnings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Corpus(a) => cmd_corpus(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    };
    ExitCode::from(code)
}

fn cmd_solve(a: SolveArgs) -> u8 {
    let budget = match a.search.budget() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let label = a
        .problem
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into());
    let bundle = match load_bundle_files(&label, &a.problem, &a.knowledge, a.aux.as_deref()) {
        Ok(b) => b,
        Err(d) => {
            eprintln!("{d}");
            return 1;
        }
    };
    let mode = a
        .search
        .policy
        .map(PolicyMode::from)
        .unwrap_or_else(|| default_mode(&bundle));
    let cfg = SolveConfig {
        policy: CompatibilityPolicy::with_mode(mode),
        budget,
        treat_truncated_as_no_answer: true,
    };
    let solution = solve(&bundle, &cfg);
    let report = if a.stable {
        solution.report.clone().stable()
    } else {
        solution.report.clone()
    };
    match a.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", render_report_text(&report)),
    }
    if a.check_oracle {
        match evaluate_rules(&bundle, mode) {
            Ok(v) if v == solution.verdict => {}
            Ok(v) => {
                eprintln!(
                    "error: rule evaluation disagrees: {:?} / {}",
                    v.outcome, v.reason
                );
                return 1;
            }
            Err(e) => eprintln!("note: {e}; oracle check skipped"),
        }
    }
    outcome_exit_code(&solution.verdict.outcome) as u8
}

fn cmd_corpus(a: CorpusArgs) -> u8 {
    let budget = match a.search.budget() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let opts = CorpusOptions {
        mode: a.search.policy.map(PolicyMode::from),
        budget,
        check_oracle: a.check_oracle,
        stable: a.stable,
    };
    let result = match run_corpus(&a.dir, &opts) {
        Ok(r) => r,
        Err(d) => {
            eprintln!("{d}");
            return 1;
        }
    };
    match a.format {
        Format::Json => println!("{}", result.to_json()),
        Format::Text => print!("{}", result.to_table()),
    }
    if result.passed_oracle() {
        0
    } else {
        1
    }
}

fn cmd_bench(a: BenchArgs) -> u8 {
    let spec = BenchSpec {
        knowledge_sizes: (a.min_nodes.max(2)..=a.max_nodes).collect(),
        sentence_ratio: a.ratio,
        edge_density: a.density,
        seeds: a.seeds,
        first_seed: a.seed,
        repetitions: a.repetitions,
    };
    println!("{}", run_bench(&spec).to_json());
    0
}

fn cmd_validate(a: ValidateArgs) -> u8 {
    let diags = validate_file(&a.path);
    for d in diags.iter() {
        eprintln!("{d}");
    }
    let warnings = diags.iter().any(|d| d.severity() == Severity::Warning);
    if diags.has_errors() || (warnings && !a.allow_warnings) {
        1
    } else {
        println!("OK");
        0
    }
}
