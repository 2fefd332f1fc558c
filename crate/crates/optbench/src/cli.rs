//! Single-binary front end. Every subcommand logs a resolved config
//! snapshot next to its outputs, writes a manifest of produced artifacts,
//! and keeps timestamps out of data files (they live in run_info.json).
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage/config error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::anchor::{self, AnchorContext, JobRecord, Method, VerificationJob};
use crate::cfg::{annotate_pairs, ged_histogram, CostModel};
use crate::config::{parse_pair_mode, Config};
use crate::corpus::{self, ArchiveFormat, Corpus, TestCase};
use crate::llm::{LlmClient, MockScript, TemplateSet};
use crate::metrics::{
    best_of_k, summarize, CandidateOutcome, EvalRecord, FailureMode, JudgePolicy, MetricsSummary,
};
use crate::pairing::{
    self, build_problem_oriented, build_user_oriented, count_formulas, select_top_speedup,
    subset_ged_stratified, subset_percent, subset_random_matched, GedStratum,
};
use crate::report;
use crate::sandbox::{self, Toolchain};

#[derive(Parser, Debug)]
#[command(
    name = "optbench",
    version,
    about = "Optimization-pair construction, sandboxed benchmarking, and anchored candidate repair"
)]
pub struct Cli {
    /// TOML config file; flags override config values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a submission archive into an indexed corpus.
    Ingest(IngestArgs),
    /// Build, subset, or count optimization pairs.
    #[command(subcommand)]
    Pairs(PairsCmd),
    /// Annotate pairs with CFG graph edit distance.
    Analyze(AnalyzeArgs),
    /// Measure candidates against pairs and tests; print %Opt / Speedup / Correct.
    Eval(EvalArgs),
    /// Repair candidates with the anchor framework or a baseline method.
    Verify(VerifyArgs),
    /// Merge artifacts into plot-ready CSVs.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    /// Trusted test directory: tests/<problem_id>/<case>.in|.out
    #[arg(long)]
    pub tests: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum PairsCmd {
    Build(PairsBuildArgs),
    Count(PairsCountArgs),
    Subset(PairsSubsetArgs),
}

#[derive(Args, Debug)]
pub struct PairsBuildArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    /// user | problem
    #[arg(long)]
    pub perspective: String,
    /// consecutive | all-forward (defaults from config per perspective)
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub require_faster: Option<bool>,
    /// Match per-problem pair counts to this set, keeping top speedups.
    #[arg(long)]
    pub match_quota_from: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PairsCountArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct PairsSubsetArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// percent | random-matched | ged-high | ged-low | ged-random
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub percent: Option<f64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Reference pair set whose per-problem counts random-matched
    /// sampling reproduces.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Node budget for exact GED; larger graphs get bracketed estimates.
    #[arg(long, default_value_t = crate::cfg::DEFAULT_GED_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 2.0)]
    pub bucket_width: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Directory holding <pair_id>/<candidate>.cpp files.
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub tests: Option<PathBuf>,
    /// Use at most k candidates per pair (best@k).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Job batch JSONL: {"pair_id", "slow_src", "candidate_src"}.
    #[arg(long)]
    pub jobs: PathBuf,
    /// anchor | self-debug | direct-test | comparison
    #[arg(long, default_value = "anchor")]
    pub method: String,
    #[arg(long, default_value_t = 1)]
    pub max_iterations: u32,
    #[arg(long, default_value_t = 3)]
    pub n_inputs: usize,
    /// Trusted tests for the before/after delta (problem id = pair_id prefix
    /// up to "__").
    #[arg(long)]
    pub tests: Option<PathBuf>,
    /// JSONL mock script; overrides the configured LLM backend.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// label=summary.json, repeatable (percentage curves, best@k scaling).
    #[arg(long = "summary")]
    pub summaries: Vec<String>,
    #[arg(long)]
    pub timings_a: Option<PathBuf>,
    #[arg(long)]
    pub timings_b: Option<PathBuf>,
    /// failure_modes.csv files to merge, repeatable.
    #[arg(long = "failures")]
    pub failures: Vec<PathBuf>,
}

/// Errors carrying their process exit code.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub msg: String,
}

impl CmdError {
    fn usage(msg: impl Into<String>) -> Self {
        CmdError {
            code: 2,
            msg: msg.into(),
        }
    }

    fn domain(msg: impl Into<String>) -> Self {
        CmdError {
            code: 1,
            msg: msg.into(),
        }
    }
}

type CmdResult = Result<(), CmdError>;

fn io_err(e: std::io::Error) -> CmdError {
    CmdError::domain(format!("io error: {e}"))
}

/// Tracks artifacts written during a run and finalizes the manifest.
struct RunDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    fn create(dir: &Path, config: &Config, command_line: &str) -> Result<Self, CmdError> {
        fs::create_dir_all(dir).map_err(io_err)?;
        config.write_snapshot(dir).map_err(io_err)?;
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        // timestamps live here, never inside data artifacts
        fs::write(
            dir.join("run_info.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "started_unix_ms": now,
                "command": command_line,
            }))
            .unwrap(),
        )
        .map_err(io_err)?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            artifacts: vec!["config_snapshot.toml".into(), "run_info.json".into()],
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> CmdResult {
        let path = self.path(name);
        fs::write(path, serde_json::to_string_pretty(value).unwrap()).map_err(io_err)
    }

    fn write_jsonl<T: serde::Serialize>(&mut self, name: &str, rows: &[T]) -> CmdResult {
        let path = self.path(name);
        let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
        for row in rows {
            serde_json::to_writer(&mut w, row).map_err(|e| io_err(e.into()))?;
            w.write_all(b"\n").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    fn finalize(mut self, command: &str) -> CmdResult {
        self.artifacts.push("manifest.json".into());
        self.artifacts.sort();
        let manifest = serde_json::json!({
            "command": command,
            "artifacts": self.artifacts,
        });
        fs::write(
            self.dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).unwrap(),
        )
        .map_err(io_err)
    }
}

pub fn run(cli: Cli) -> i32 {
    let mut config = match Config::load_or_default(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Some(out) = &cli.out {
        config.paths.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let result = match &cli.command {
        Command::Ingest(args) => cmd_ingest(&config, args),
        Command::Pairs(PairsCmd::Build(args)) => cmd_pairs_build(&config, args),
        Command::Pairs(PairsCmd::Count(args)) => cmd_pairs_count(&config, args),
        Command::Pairs(PairsCmd::Subset(args)) => cmd_pairs_subset(&config, args),
        Command::Analyze(args) => cmd_analyze(&config, args),
        Command::Eval(args) => cmd_eval(&config, args),
        Command::Verify(args) => cmd_verify(&config, args),
        Command::Report(args) => cmd_report(&config, args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            e.code
        }
    }
}

fn load_corpus(
    config: &Config,
    archive: &Option<PathBuf>,
    format: &str,
) -> Result<(Corpus, Vec<corpus::Reject>), CmdError> {
    let archive = archive
        .clone()
        .or_else(|| config.paths.corpus.clone())
        .ok_or_else(|| {
            CmdError::usage("no corpus archive given (--corpus/--archive or [paths].corpus)")
        })?;
    let format = match format {
        "jsonl" => ArchiveFormat::Jsonl,
        "csv" => ArchiveFormat::Csv,
        other => return Err(CmdError::usage(format!("unknown archive format {other}"))),
    };
    let report = corpus::ingest(&archive, format).map_err(|e| CmdError::domain(e.to_string()))?;
    Ok((report.corpus, report.rejects))
}

fn cmd_ingest(config: &Config, args: &IngestArgs) -> CmdResult {
    let (mut corpus, rejects) = load_corpus(config, &args.archive, &args.format)?;
    let tests_dir = args.tests.clone().or_else(|| config.paths.tests.clone());
    let mut n_tests = 0;
    if let Some(dir) = tests_dir {
        if dir.exists() {
            n_tests = corpus::load_testsets(&mut corpus, &dir)
                .map_err(|e| CmdError::domain(e.to_string()))?;
        }
    }
    let mut run = RunDir::create(&config.paths.output, config, "ingest")?;
    #[derive(serde::Serialize)]
    struct IndexRow<'a> {
        problem_id: &'a str,
        n_submissions: usize,
        n_accepted: usize,
        n_users: usize,
        n_tests: usize,
    }
    let rows: Vec<IndexRow> = corpus
        .problems
        .iter()
        .map(|(pid, subs)| IndexRow {
            problem_id: pid,
            n_submissions: subs.len(),
            n_accepted: subs
                .iter()
                .filter(|s| s.status == corpus::Status::Accepted)
                .count(),
            n_users: corpus::users_of(&corpus, pid).len(),
            n_tests: corpus.tests_for(pid).map(|t| t.len()).unwrap_or(0),
        })
        .collect();
    run.write_jsonl("corpus_index.jsonl", &rows)?;
    run.write_jsonl("rejects.jsonl", &rejects)?;
    run.finalize("ingest")?;
    println!(
        "ingested {} submissions across {} problems ({} trusted tests)",
        corpus.submission_count(),
        corpus.problems.len(),
        n_tests
    );
    if !rejects.is_empty() {
        println!(
            "warning: {} records rejected (see rejects.jsonl)",
            rejects.len()
        );
    }
    Ok(())
}

fn cmd_pairs_build(config: &Config, args: &PairsBuildArgs) -> CmdResult {
    let (corpus, _) = load_corpus(config, &args.corpus, &args.format)?;
    let require_faster = args.require_faster.unwrap_or(config.pairing.require_faster);
    let set = match args.perspective.as_str() {
        "user" => {
            let mode = args
                .mode
                .clone()
                .unwrap_or_else(|| config.pairing.user_mode.clone());
            let mode = parse_pair_mode(&mode).map_err(|e| CmdError::usage(e.to_string()))?;
            build_user_oriented(&corpus, mode, require_faster)
        }
        "problem" => {
            let mode = args
                .mode
                .clone()
                .unwrap_or_else(|| config.pairing.problem_mode.clone());
            let mode = parse_pair_mode(&mode).map_err(|e| CmdError::usage(e.to_string()))?;
            build_problem_oriented(&corpus, mode)
        }
        other => return Err(CmdError::usage(format!("unknown perspective {other}"))),
    };
    let (set, selection) = match &args.match_quota_from {
        Some(ref_path) => {
            let reference =
                pairing::read_jsonl(ref_path).map_err(|e| CmdError::domain(e.to_string()))?;
            let quota = reference.per_problem_counts();
            let (selected, report) = select_top_speedup(&set, &quota);
            (selected, Some(report))
        }
        None => (set, None),
    };
    let mut run = RunDir::create(&config.paths.output, config, "pairs build")?;
    let path = run.path("pairs.jsonl");
    pairing::write_jsonl(&set, &path).map_err(io_err)?;
    run.artifacts.push("pairs.jsonl.provenance.json".into());
    run.finalize("pairs build")?;
    println!("built {} {} pairs", set.len(), args.perspective);
    if let Some(report) = selection {
        for p in &report.unknown_problems {
            println!("warning: quota names unknown problem {p}");
        }
        for (p, (want, got)) in &report.shortfalls {
            println!("warning: problem {p} wanted {want} pairs, pool had {got}");
        }
    }
    Ok(())
}

fn cmd_pairs_count(config: &Config, args: &PairsCountArgs) -> CmdResult {
    let (corpus, _) = load_corpus(config, &args.corpus, &args.format)?;
    let counts = count_formulas(&corpus);
    let ratio = if counts.user_oriented_allforward > 0 {
        counts.problem_oriented_allforward as f64 / counts.user_oriented_allforward as f64
    } else {
        f64::NAN
    };
    let mut run = RunDir::create(&config.paths.output, config, "pairs count")?;
    run.write_json(
        "pair_counts.json",
        &serde_json::json!({
            "user_oriented_allforward": counts.user_oriented_allforward,
            "problem_oriented_allforward": counts.problem_oriented_allforward,
            "ratio": if ratio.is_nan() { None } else { Some(ratio) },
        }),
    )?;
    run.finalize("pairs count")?;
    println!(
        "user-oriented pairs (sum C(n_u,2)):      {}",
        counts.user_oriented_allforward
    );
    println!(
        "problem-oriented pairs (sum C(N_p,2)):   {}",
        counts.problem_oriented_allforward
    );
    if ratio.is_finite() {
        println!("scale ratio:                             {ratio:.2}x");
    }
    Ok(())
}

fn cmd_pairs_subset(config: &Config, args: &PairsSubsetArgs) -> CmdResult {
    let set = pairing::read_jsonl(&args.pairs).map_err(|e| CmdError::domain(e.to_string()))?;
    let seed = config.seed;
    let (subset, notes) = match args.strategy.as_str() {
        "percent" => {
            let percent = args
                .percent
                .ok_or_else(|| CmdError::usage("--percent required for strategy percent"))?;
            let s =
                subset_percent(&set, percent, seed).map_err(|e| CmdError::domain(e.to_string()))?;
            (s, Vec::new())
        }
        "random-matched" => {
            let ref_path = args.reference.as_ref().ok_or_else(|| {
                CmdError::usage("--reference required for strategy random-matched")
            })?;
            let reference =
                pairing::read_jsonl(ref_path).map_err(|e| CmdError::domain(e.to_string()))?;
            let (s, report) = subset_random_matched(&set, &reference, seed);
            let notes = report
                .deficits
                .iter()
                .map(|(p, (want, got))| format!("problem {p}: wanted {want}, pool had {got}"))
                .collect();
            (s, notes)
        }
        "ged-high" | "ged-low" | "ged-random" => {
            let fraction = args
                .fraction
                .ok_or_else(|| CmdError::usage("--fraction required for GED strategies"))?;
            let stratum = match args.strategy.as_str() {
                "ged-high" => GedStratum::HighGed,
                "ged-low" => GedStratum::LowGed,
                _ => GedStratum::Random,
            };
            let s = subset_ged_stratified(&set, stratum, fraction, seed)
                .map_err(|e| CmdError::domain(e.to_string()))?;
            (s, Vec::new())
        }
        other => return Err(CmdError::usage(format!("unknown subset strategy {other}"))),
    };
    let mut run = RunDir::create(&config.paths.output, config, "pairs subset")?;
    let path = run.path("subset.jsonl");
    pairing::write_jsonl(&subset, &path).map_err(io_err)?;
    run.artifacts.push("subset.jsonl.provenance.json".into());
    run.finalize("pairs subset")?;
    println!("subset kept {} of {} pairs", subset.len(), set.len());
    for n in notes {
        println!("warning: {n}");
    }
    Ok(())
}

fn cmd_analyze(config: &Config, args: &AnalyzeArgs) -> CmdResult {
    let mut set = pairing::read_jsonl(&args.pairs).map_err(|e| CmdError::domain(e.to_string()))?;
    let report = annotate_pairs(&mut set, args.budget, &CostModel::default());
    let mut run = RunDir::create(&config.paths.output, config, "analyze")?;
    let path = run.path("pairs_annotated.jsonl");
    pairing::write_jsonl(&set, &path).map_err(io_err)?;
    run.artifacts
        .push("pairs_annotated.jsonl.provenance.json".into());
    let rows = ged_histogram(&[&set], args.bucket_width);
    let hist_path = run.path("ged_histogram.csv");
    report::write_ged_histogram(&rows, &hist_path).map_err(io_err)?;
    run.write_json(
        "analyze_summary.json",
        &serde_json::json!({
            "annotated": report.annotated,
            "approximate": report.approximate,
            "budget": args.budget,
            "failures": report.failures,
        }),
    )?;
    run.finalize("analyze")?;
    println!(
        "annotated {} pairs ({} beyond the exact budget, {} unparsable)",
        report.annotated,
        report.approximate,
        report.failures.len()
    );
    Ok(())
}

/// Compile-and-run one program over a test set, summing median wall times.
struct ProgramMeasure {
    total_ms: f64,
    ran: bool,
    correct: bool,
    failure: Option<FailureMode>,
}

fn measure_program(
    src: &str,
    tests: &[TestCase],
    toolchain: &Toolchain,
    repetitions: usize,
    policy: JudgePolicy,
    workdir: &Path,
) -> ProgramMeasure {
    let prog = match sandbox::compile(src, toolchain, workdir) {
        Ok(p) => p,
        Err(_) => {
            return ProgramMeasure {
                total_ms: 0.0,
                ran: false,
                correct: false,
                failure: Some(FailureMode::CompileFail),
            }
        }
    };
    let mut total = 0.0;
    let mut correct = true;
    let mut failure = None;
    for t in tests {
        let res = sandbox::run(&prog, &t.input, &t.id, toolchain, repetitions);
        if let Some(m) = res.median_ms() {
            total += m;
        }
        if !res.passed(&t.expected, policy) {
            correct = false;
            if failure.is_none() {
                failure = crate::metrics::classify_failure(&res, &t.expected);
            }
        }
    }
    ProgramMeasure {
        total_ms: total,
        ran: true,
        correct,
        failure,
    }
}

fn candidate_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn cmd_eval(config: &Config, args: &EvalArgs) -> CmdResult {
    let set = pairing::read_jsonl(&args.pairs).map_err(|e| CmdError::domain(e.to_string()))?;
    let tests_dir = args
        .tests
        .clone()
        .or_else(|| config.paths.tests.clone())
        .ok_or_else(|| CmdError::usage("no tests directory (--tests or [paths].tests)"))?;
    let mut testsets = Corpus::default();
    corpus::load_testsets(&mut testsets, &tests_dir)
        .map_err(|e| CmdError::domain(e.to_string()))?;
    let toolchain = config
        .toolchain
        .resolve()
        .map_err(|e| CmdError::usage(e.to_string()))?;
    let policy = config
        .metrics
        .judge_policy()
        .map_err(|e| CmdError::usage(e.to_string()))?;
    let repetitions = args.repetitions.unwrap_or(config.metrics.repetitions);
    fs::create_dir_all(&config.paths.workdir).map_err(io_err)?;

    struct Judged {
        record: Option<EvalRecord>,
        unjudgeable: Option<(String, String)>,
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.limits.effective_jobs())
        .build()
        .map_err(|e| CmdError::domain(e.to_string()))?;
    let judged: Vec<Judged> = pool.install(|| {
        set.pairs
            .par_iter()
            .map(|pair| {
                let pair_id = pair.pair_id();
                let tests = match testsets.tests_for(&pair.problem_id) {
                    Some(t) if !t.is_empty() => t,
                    _ => {
                        return Judged {
                            record: None,
                            unjudgeable: Some((pair_id, "no trusted tests for problem".into())),
                        }
                    }
                };
                let cand_dir = args.candidates.join(&pair_id);
                let mut files = candidate_files(&cand_dir);
                if let Some(k) = args.k {
                    files.truncate(k);
                }
                if files.is_empty() {
                    return Judged {
                        record: None,
                        unjudgeable: Some((pair_id, "no candidate files".into())),
                    };
                }
                let slow = measure_program(
                    &pair.slow_src,
                    tests,
                    &toolchain,
                    repetitions,
                    policy,
                    &config.paths.workdir,
                );
                if !slow.ran || !slow.correct {
                    return Judged {
                        record: None,
                        unjudgeable: Some((
                            pair_id,
                            "slow program failed on trusted tests (anchor premise violated)".into(),
                        )),
                    };
                }
                let mut candidates = Vec::new();
                for file in files {
                    let src = fs::read_to_string(&file).unwrap_or_default();
                    let m = measure_program(
                        &src,
                        tests,
                        &toolchain,
                        repetitions,
                        policy,
                        &config.paths.workdir,
                    );
                    candidates.push(CandidateOutcome {
                        correct: m.ran && m.correct,
                        old_ms: slow.total_ms,
                        new_ms: m.total_ms,
                        failure_mode: m.failure,
                    });
                }
                let mut record = EvalRecord::new(pair_id, candidates);
                best_of_k(&mut record);
                Judged {
                    record: Some(record),
                    unjudgeable: None,
                }
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut unjudgeable = Vec::new();
    for j in judged {
        if let Some(r) = j.record {
            records.push(r);
        }
        if let Some(u) = j.unjudgeable {
            unjudgeable.push(u);
        }
    }
    for (pair, reason) in &unjudgeable {
        println!("warning: {pair} unjudgeable: {reason}");
    }
    let summary =
        summarize(&records).map_err(|e| CmdError::domain(format!("nothing to summarize: {e}")))?;
    let mut run = RunDir::create(&config.paths.output, config, "eval")?;
    run.write_jsonl("records.jsonl", &records)?;
    run.write_json("summary.json", &summary)?;
    let shares = report::failure_shares(&records);
    let fail_path = run.path("failure_modes.csv");
    report::write_failure_shares(&shares, &fail_path).map_err(io_err)?;
    run.write_json(
        "unjudgeable.json",
        &unjudgeable
            .iter()
            .map(|(p, r)| serde_json::json!({"pair_id": p, "reason": r}))
            .collect::<Vec<_>>(),
    )?;
    run.finalize("eval")?;
    print_summary("eval", &summary);
    Ok(())
}

fn print_summary(tag: &str, s: &MetricsSummary) {
    println!(
        "{tag}: %Opt {:.2}%  Speedup {:.2}x  Correct {:.2}%  (n={})",
        s.pct_opt * 100.0,
        s.speedup_mean,
        s.pct_correct * 100.0,
        s.n_records
    );
}

fn parse_method(s: &str) -> Result<Method, CmdError> {
    match s {
        "anchor" => Ok(Method::AnchorVerification),
        "self-debug" => Ok(Method::SelfDebugging),
        "direct-test" => Ok(Method::DirectTestGeneration),
        "comparison" => Ok(Method::ComparisonGroup),
        other => Err(CmdError::usage(format!("unknown method {other}"))),
    }
}

fn build_llm_client(config: &Config, mock_flag: &Option<PathBuf>) -> Result<LlmClient, CmdError> {
    let mock_path = mock_flag.clone().or_else(|| config.llm.mock_script.clone());
    if let Some(path) = mock_path {
        let script = MockScript::from_jsonl(&path).map_err(|e| CmdError::domain(e.to_string()))?;
        return Ok(LlmClient::mock(script)
            .with_rate_limit(config.llm.rpm, std::time::Duration::from_secs(60))
            .with_concurrency(config.llm.concurrency));
    }
    if config.llm.endpoint.is_empty() {
        return Err(CmdError::usage(
            "no LLM backend: set [llm].endpoint or provide --mock-script",
        ));
    }
    if std::env::var(&config.llm.key_env).is_err() {
        return Err(CmdError::usage(format!(
            "auth error: environment variable {} not set",
            config.llm.key_env
        )));
    }
    Ok(
        LlmClient::http(&config.llm.endpoint, &config.llm.model, &config.llm.key_env)
            .with_rate_limit(config.llm.rpm, std::time::Duration::from_secs(60))
            .with_concurrency(config.llm.concurrency),
    )
}

fn problem_of_pair_id(pair_id: &str) -> &str {
    pair_id.split("__").next().unwrap_or(pair_id)
}

fn cmd_verify(config: &Config, args: &VerifyArgs) -> CmdResult {
    let method = parse_method(&args.method)?;
    let toolchain = config
        .toolchain
        .resolve()
        .map_err(|e| CmdError::usage(e.to_string()))?;
    let policy = config
        .metrics
        .judge_policy()
        .map_err(|e| CmdError::usage(e.to_string()))?;
    let client = build_llm_client(config, &args.mock_script)?;
    let mut templates = TemplateSet::default();
    if let Some(dir) = &config.llm.templates_dir {
        templates.load_overrides(dir).map_err(io_err)?;
    }

    let file = fs::File::open(&args.jobs).map_err(io_err)?;
    let mut jobs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JobRecord = serde_json::from_str(&line)
            .map_err(|e| CmdError::domain(format!("jobs line {}: {e}", i + 1)))?;
        let mut job = VerificationJob::new(rec.pair_id, rec.slow_src, rec.candidate_src);
        job.toolchain = toolchain.clone();
        job.method = method;
        job.max_iterations = args.max_iterations;
        job.n_inputs = args.n_inputs;
        jobs.push(job);
    }
    if jobs.is_empty() {
        return Err(CmdError::domain("job batch is empty"));
    }

    let mut testsets = Corpus::default();
    if let Some(dir) = args.tests.clone().or_else(|| config.paths.tests.clone()) {
        if dir.exists() {
            corpus::load_testsets(&mut testsets, &dir)
                .map_err(|e| CmdError::domain(e.to_string()))?;
        }
    }
    fs::create_dir_all(&config.paths.workdir).map_err(io_err)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.limits.effective_jobs())
        .build()
        .map_err(|e| CmdError::domain(e.to_string()))?;
    let outcomes: Vec<anchor::VerificationOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let trusted = testsets.tests_for(problem_of_pair_id(&job.pair_id));
                let ctx = AnchorContext {
                    llm: &client,
                    templates: &templates,
                    workdir: &config.paths.workdir,
                    policy,
                    trusted,
                };
                anchor::run_job(&ctx, job)
            })
            .collect()
    });

    let mut run = RunDir::create(&config.paths.output, config, "verify")?;
    run.write_jsonl("verify_outcomes.jsonl", &outcomes)?;
    let costs_path = run.path("stage_costs.csv");
    report::write_stage_costs(&outcomes, &costs_path).map_err(io_err)?;

    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!(
        "{}: {passed}/{} jobs pass their method's test set",
        method.as_str(),
        outcomes.len()
    );

    // before/after delta against trusted tests, where available
    let repetitions = args.repetitions.unwrap_or(config.metrics.repetitions);
    let mut before = Vec::new();
    let mut after = Vec::new();
    for (job, outcome) in jobs.iter().zip(&outcomes) {
        let Some(tests) = testsets.tests_for(problem_of_pair_id(&job.pair_id)) else {
            continue;
        };
        if tests.is_empty() {
            continue;
        }
        let slow = measure_program(
            &job.slow_src,
            tests,
            &toolchain,
            repetitions,
            policy,
            &config.paths.workdir,
        );
        if !slow.ran || !slow.correct {
            println!(
                "warning: {} slow program fails trusted tests; excluded from delta",
                job.pair_id
            );
            continue;
        }
        for (srcs, records) in [
            (&job.candidate_src, &mut before),
            (&outcome.final_src, &mut after),
        ] {
            let m = measure_program(
                srcs,
                tests,
                &toolchain,
                repetitions,
                policy,
                &config.paths.workdir,
            );
            let mut record = EvalRecord::new(
                job.pair_id.clone(),
                vec![CandidateOutcome {
                    correct: m.ran && m.correct,
                    old_ms: slow.total_ms,
                    new_ms: m.total_ms,
                    failure_mode: m.failure,
                }],
            );
            best_of_k(&mut record);
            records.push(record);
        }
    }
    if !before.is_empty() {
        let sb = summarize(&before).map_err(|e| CmdError::domain(e.to_string()))?;
        let sa = summarize(&after).map_err(|e| CmdError::domain(e.to_string()))?;
        print_summary("before", &sb);
        print_summary("after ", &sa);
        println!(
            "delta: %Opt {:+.2}  Speedup {:+.2}x  Correct {:+.2}",
            (sa.pct_opt - sb.pct_opt) * 100.0,
            sa.speedup_mean - sb.speedup_mean,
            (sa.pct_correct - sb.pct_correct) * 100.0
        );
        run.write_json(
            "delta.json",
            &serde_json::json!({"before": sb, "after": sa, "method": method.as_str()}),
        )?;
    } else {
        println!("note: no trusted tests matched any job; skipping before/after delta");
    }
    run.finalize("verify")?;
    Ok(())
}

fn cmd_report(config: &Config, args: &ReportArgs) -> CmdResult {
    if args.summaries.is_empty() && args.timings_a.is_none() && args.failures.is_empty() {
        return Err(CmdError::domain("report has no inputs"));
    }
    let mut run = RunDir::create(&config.paths.output, config, "report")?;
    if !args.summaries.is_empty() {
        let mut rows = Vec::new();
        for spec in &args.summaries {
            let (label, path) = spec.split_once('=').ok_or_else(|| {
                CmdError::usage(format!("--summary wants label=path, got {spec}"))
            })?;
            let text = fs::read_to_string(path).map_err(io_err)?;
            let summary: MetricsSummary = serde_json::from_str(&text)
                .map_err(|e| CmdError::domain(format!("{path}: {e}")))?;
            rows.push((label.to_string(), summary));
        }
        let path = run.path("curve.csv");
        report::write_summary_curve(&rows, &path).map_err(io_err)?;
        println!("wrote curve.csv with {} points", rows.len());
    }
    match (&args.timings_a, &args.timings_b) {
        (Some(a), Some(b)) => {
            let xs = report::read_series(a).map_err(CmdError::domain)?;
            let ys = report::read_series(b).map_err(CmdError::domain)?;
            let path = run.path("pearson.csv");
            let r = report::write_pearson(&xs, &ys, &path)
                .map_err(|e| CmdError::domain(e.to_string()))?;
            println!("pearson r between timing backends: {r:.4}");
        }
        (None, None) => {}
        _ => return Err(CmdError::usage("--timings-a and --timings-b go together")),
    }
    if !args.failures.is_empty() {
        let mut merged: BTreeMap<String, usize> = BTreeMap::new();
        for path in &args.failures {
            let text = fs::read_to_string(path).map_err(io_err)?;
            for line in text.lines().skip(1) {
                let mut parts = line.split(',');
                let (Some(mode), Some(count)) = (parts.next(), parts.next()) else {
                    continue;
                };
                let count: usize = count
                    .parse()
                    .map_err(|e| CmdError::domain(format!("{}: {e}", path.display())))?;
                *merged.entry(mode.to_string()).or_insert(0) += count;
            }
        }
        let path = run.path("failure_shares.csv");
        report::write_failure_shares(&merged, &path).map_err(io_err)?;
        println!("merged {} failure tables", args.failures.len());
    }
    run.finalize("report")?;
    Ok(())
}
