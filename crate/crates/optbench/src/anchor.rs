//! The anchor verification framework: generate test inputs for the slow
//! program, execute the slow program to anchor their outputs, then
//! iteratively refine the optimized candidate against the verified set.
//! The compared baselines (self-debugging, direct test generation, and the
//! LLM-predicted-output comparison group) share the refinement loop.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TestCase, TestStatus};
use crate::llm::{
    bindings, extract_code, extract_test_cases, extract_test_inputs, parse_sections, LlmClient,
    LlmError, SectionLabel, TemplateName, TemplateSet,
};
use crate::metrics::JudgePolicy;
use crate::sandbox::{self, truncate_text, CompiledProgram, RunStatus, SandboxError, Toolchain};

#[derive(Debug, Error)]
pub enum AnchorError {
    #[error("llm failure: {0}")]
    Llm(#[from] LlmError),
    #[error("both attempts yielded zero test inputs")]
    ZeroInputs,
    #[error("slow code failed to compile (anchor premise violated):\n{0}")]
    SlowCodeCompileError(String),
    #[error("every generated input was dropped by the format filter")]
    AllInputsDropped,
    #[error("refinement needs a non-empty test set")]
    EmptyTestSet,
    #[error("sandbox failure: {0}")]
    Sandbox(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AnchorVerification,
    SelfDebugging,
    DirectTestGeneration,
    ComparisonGroup,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AnchorVerification => "anchor_verification",
            Method::SelfDebugging => "self_debugging",
            Method::DirectTestGeneration => "direct_test_generation",
            Method::ComparisonGroup => "comparison_group",
        }
    }
}

/// One candidate-repair job.
#[derive(Debug, Clone)]
pub struct VerificationJob {
    pub pair_id: String,
    pub slow_src: String,
    pub candidate_src: String,
    pub toolchain: Toolchain,
    pub method: Method,
    /// 0 = validate only, no refinement.
    pub max_iterations: u32,
    pub n_inputs: usize,
}

impl VerificationJob {
    pub fn new(
        pair_id: impl Into<String>,
        slow_src: impl Into<String>,
        candidate_src: impl Into<String>,
    ) -> Self {
        VerificationJob {
            pair_id: pair_id.into(),
            slow_src: slow_src.into(),
            candidate_src: candidate_src.into(),
            toolchain: Toolchain::cpp_o3(),
            method: Method::AnchorVerification,
            max_iterations: 1,
            n_inputs: 3,
        }
    }
}

/// Job batch record: `{"pair_id", "slow_src", "candidate_src"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRecord {
    pub pair_id: String,
    pub slow_src: String,
    pub candidate_src: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DroppedInput {
    pub input: String,
    pub reason: String,
}

/// Test cases whose expected outputs came from actually executing the slow
/// program, plus the inputs the format filter rejected.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifiedTestSet {
    pub cases: Vec<TestCase>,
    pub dropped_inputs: Vec<DroppedInput>,
}

pub const STAGE_QUERY: &str = "query";
pub const STAGE_EXEC_OUTPUT: &str = "execution_testcase_output";
pub const STAGE_EXEC_TEST: &str = "execution_testcase";
pub const STAGE_REFINEMENT: &str = "refinement";

pub const ALL_STAGES: [&str; 4] = [
    STAGE_QUERY,
    STAGE_EXEC_OUTPUT,
    STAGE_EXEC_TEST,
    STAGE_REFINEMENT,
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub llm_calls: u32,
    pub llm_seconds: f64,
    pub exec_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: String,
    pub prompt: String,
    pub reply: String,
    pub exec_feedback: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationOutcome {
    pub pair_id: String,
    pub method: Method,
    pub final_src: String,
    pub iterations_used: u32,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// The test set the method refined against (anchored or synthetic).
    pub tests_used: Vec<TestCase>,
    pub dropped_inputs: Vec<DroppedInput>,
    pub transcript: Vec<TranscriptEntry>,
    pub stage_costs: BTreeMap<String, StageCost>,
    /// Total wall time of the job, seconds.
    pub wall_seconds: f64,
}

/// Shared environment for a batch of jobs.
pub struct AnchorContext<'a> {
    pub llm: &'a LlmClient,
    pub templates: &'a TemplateSet,
    pub workdir: &'a Path,
    pub policy: JudgePolicy,
    /// Trusted tests per problem, used only to validate self-debugging
    /// outputs (that baseline has no executable oracle of its own).
    pub trusted: Option<&'a [TestCase]>,
}

/// Accumulates transcript entries and per-stage costs for one job.
#[derive(Default)]
pub struct Trace {
    transcript: Vec<TranscriptEntry>,
    costs: BTreeMap<String, StageCost>,
}

impl Trace {
    pub fn new() -> Self {
        let mut costs = BTreeMap::new();
        for stage in ALL_STAGES {
            costs.insert(stage.to_string(), StageCost::default());
        }
        Trace {
            transcript: Vec::new(),
            costs,
        }
    }

    fn llm_call(&mut self, stage: &str, prompt: &str, reply: &str, seconds: f64) {
        let c = self.costs.get_mut(stage).expect("known stage");
        c.llm_calls += 1;
        c.llm_seconds += seconds;
        self.transcript.push(TranscriptEntry {
            stage: stage.to_string(),
            prompt: prompt.to_string(),
            reply: reply.to_string(),
            exec_feedback: String::new(),
        });
    }

    fn exec(&mut self, stage: &str, seconds: f64) {
        self.costs.get_mut(stage).expect("known stage").exec_seconds += seconds;
    }

    fn feedback(&mut self, note: &str) {
        self.transcript.push(TranscriptEntry {
            stage: STAGE_EXEC_TEST.into(),
            prompt: String::new(),
            reply: String::new(),
            exec_feedback: note.to_string(),
        });
    }
}

fn ask_logged(
    ctx: &AnchorContext,
    trace: &mut Trace,
    stage: &str,
    name: TemplateName,
    b: &BTreeMap<String, String>,
    temperature: f64,
) -> Result<String, LlmError> {
    let prompt_text = crate::llm::render(ctx.templates, name, b)?.text;
    match ctx.llm.ask(ctx.templates, name, b, temperature) {
        Ok((reply, stats)) => {
            trace.llm_call(stage, &prompt_text, &reply, stats.elapsed.as_secs_f64());
            Ok(reply)
        }
        Err(e) => {
            trace.llm_call(stage, &prompt_text, &format!("<error: {e}>"), 0.0);
            Err(e)
        }
    }
}

/// Stage 1: prompt the LLM to explain the slow program and produce test
/// inputs. Retries once on a shortfall; returns whatever was obtained
/// (possibly fewer than requested) plus the model's explanation.
pub fn stage1_generate_inputs(
    ctx: &AnchorContext,
    slow_src: &str,
    n_inputs: usize,
    trace: &mut Trace,
) -> Result<(Vec<String>, String), AnchorError> {
    let b = bindings(&[("slow_code", slow_src)]);
    let mut best: (Vec<String>, String) = (Vec::new(), String::new());
    for attempt in 0..2 {
        let reply = ask_logged(ctx, trace, STAGE_QUERY, TemplateName::AnchorStage1, &b, 0.7)?;
        let parsed = match parse_sections(&reply, &[SectionLabel::TestInputs]) {
            Ok(p) => p,
            Err(_) => {
                // prose with no input blocks; count as zero and maybe retry
                continue;
            }
        };
        let inputs = extract_test_inputs(&parsed);
        let explanation = parsed
            .first(&SectionLabel::Explanation)
            .unwrap_or_default()
            .to_string();
        if inputs.len() > best.0.len() {
            best = (inputs, explanation);
        }
        if best.0.len() >= n_inputs {
            break;
        }
        if attempt == 0 {
            log::warn!(
                "stage 1 produced {} of {} inputs, retrying once",
                best.0.len(),
                n_inputs
            );
        }
    }
    if best.0.is_empty() {
        return Err(AnchorError::ZeroInputs);
    }
    if best.0.len() < n_inputs {
        log::warn!(
            "proceeding with {} of {} requested inputs",
            best.0.len(),
            n_inputs
        );
    }
    Ok(best)
}

/// Stage 2: execute the slow program on each input; inputs that do not
/// match its expected format (runtime error, timeout, output overflow, or
/// empty stdout) are dropped with a reason; the rest become anchored cases.
pub fn stage2_anchor_outputs(
    ctx: &AnchorContext,
    slow_src: &str,
    inputs: &[String],
    toolchain: &Toolchain,
    trace: &mut Trace,
) -> Result<VerifiedTestSet, AnchorError> {
    let started = Instant::now();
    let slow = compile_for(ctx, slow_src, toolchain).map_err(|e| match e {
        SandboxError::CompileError(diag) => AnchorError::SlowCodeCompileError(diag),
        SandboxError::CompileTimeout(t) => {
            AnchorError::SlowCodeCompileError(format!("compile timed out after {t:.1}s"))
        }
        other => AnchorError::Sandbox(other.to_string()),
    });
    let slow = match slow {
        Ok(p) => p,
        Err(e) => {
            trace.exec(STAGE_EXEC_OUTPUT, started.elapsed().as_secs_f64());
            return Err(e);
        }
    };

    let mut set = VerifiedTestSet::default();
    // the framework tolerates slow code: triple the usual run budget
    let tolerant_timeout = toolchain.run_timeout_s * 3.0;
    for (i, input) in inputs.iter().enumerate() {
        let id = format!("anchor-{i}");
        let res = sandbox::run_with_timeout(&slow, input, &id, toolchain, 1, tolerant_timeout);
        match &res.run {
            RunStatus::Ok if res.stdout.trim().is_empty() => {
                set.dropped_inputs.push(DroppedInput {
                    input: input.clone(),
                    reason: "empty stdout (input format mismatch)".into(),
                });
            }
            RunStatus::Ok => {
                set.cases.push(TestCase {
                    id,
                    input: input.clone(),
                    expected: res.stdout.clone(),
                    status: TestStatus::Anchored,
                });
            }
            RunStatus::Timeout => set.dropped_inputs.push(DroppedInput {
                input: input.clone(),
                reason: format!("timed out after {tolerant_timeout:.1}s"),
            }),
            RunStatus::OutputLimit => set.dropped_inputs.push(DroppedInput {
                input: input.clone(),
                reason: "output limit exceeded".into(),
            }),
            RunStatus::RuntimeError(msg) => set.dropped_inputs.push(DroppedInput {
                input: input.clone(),
                reason: format!("runtime error: {}", truncate_text(msg, 300)),
            }),
            RunStatus::NotRun => unreachable!("compile succeeded"),
        }
    }
    trace.exec(STAGE_EXEC_OUTPUT, started.elapsed().as_secs_f64());
    if set.cases.is_empty() {
        return Err(AnchorError::AllInputsDropped);
    }
    Ok(set)
}

enum Validation {
    Pass,
    CompileFail { diag: String },
    TestFail { case: TestCase, feedback: String },
}

fn compile_for(
    ctx: &AnchorContext,
    src: &str,
    toolchain: &Toolchain,
) -> Result<CompiledProgram, SandboxError> {
    sandbox::compile(src, toolchain, ctx.workdir)
}

fn validate_candidate(
    ctx: &AnchorContext,
    src: &str,
    tests: &[TestCase],
    toolchain: &Toolchain,
    trace: &mut Trace,
) -> Validation {
    let started = Instant::now();
    let prog = match compile_for(ctx, src, toolchain) {
        Ok(p) => p,
        Err(SandboxError::CompileError(diag)) => {
            trace.exec(STAGE_EXEC_TEST, started.elapsed().as_secs_f64());
            return Validation::CompileFail { diag };
        }
        Err(e) => {
            trace.exec(STAGE_EXEC_TEST, started.elapsed().as_secs_f64());
            return Validation::CompileFail {
                diag: e.to_string(),
            };
        }
    };
    for case in tests {
        let res = sandbox::run(&prog, &case.input, &case.id, toolchain, 1);
        let feedback = match &res.run {
            RunStatus::Ok => {
                if res.passed(&case.expected, ctx.policy) {
                    continue;
                }
                format!(
                    "wrong output\ngot:\n{}",
                    truncate_text(res.stdout.trim_end(), 1000)
                )
            }
            RunStatus::Timeout => {
                format!("execution timed out after {:.1}s", toolchain.run_timeout_s)
            }
            RunStatus::OutputLimit => "output limit exceeded".to_string(),
            RunStatus::RuntimeError(msg) => {
                format!("runtime error: {}", truncate_text(msg, 500))
            }
            RunStatus::NotRun => unreachable!("compile succeeded"),
        };
        trace.exec(STAGE_EXEC_TEST, started.elapsed().as_secs_f64());
        return Validation::TestFail {
            case: case.clone(),
            feedback,
        };
    }
    trace.exec(STAGE_EXEC_TEST, started.elapsed().as_secs_f64());
    Validation::Pass
}

pub struct RefineResult {
    pub final_src: String,
    pub iterations_used: u32,
    pub passed: bool,
    pub failure: Option<String>,
}

/// Stage 3: run the candidate on the test set; on failure, feed the first
/// failing test and its diagnostic back to the LLM for a revision, up to
/// `max_iterations` times. The returned source is the last all-passing
/// revision, or the original candidate when nothing ever passed.
pub fn stage3_refine(
    ctx: &AnchorContext,
    candidate_src: &str,
    tests: &VerifiedTestSet,
    toolchain: &Toolchain,
    max_iterations: u32,
    explanation: &str,
    trace: &mut Trace,
) -> Result<RefineResult, AnchorError> {
    if tests.cases.is_empty() {
        return Err(AnchorError::EmptyTestSet);
    }
    let mut current = candidate_src.to_string();
    let mut iterations_used = 0u32;
    loop {
        let verdict = validate_candidate(ctx, &current, &tests.cases, toolchain, trace);
        let (case, feedback) = match verdict {
            Validation::Pass => {
                return Ok(RefineResult {
                    final_src: current,
                    iterations_used,
                    passed: true,
                    failure: None,
                });
            }
            Validation::CompileFail { diag } => (
                tests.cases[0].clone(),
                format!("compilation failed:\n{}", truncate_text(&diag, 2000)),
            ),
            Validation::TestFail { case, feedback } => (case, feedback),
        };
        trace.feedback(&feedback);
        if iterations_used >= max_iterations {
            return Ok(RefineResult {
                final_src: candidate_src.to_string(),
                iterations_used,
                passed: false,
                failure: Some(format!("iterations exhausted; last failure: {feedback}")),
            });
        }
        let testcase_text = format!(
            "input:\n{}\nexpected output:\n{}",
            case.input,
            case.expected.trim_end()
        );
        let b = bindings(&[
            ("code", current.as_str()),
            ("explanation", explanation),
            ("Testcase", testcase_text.as_str()),
            ("Feedback", feedback.as_str()),
        ]);
        iterations_used += 1;
        let reply = match ask_logged(
            ctx,
            trace,
            STAGE_REFINEMENT,
            TemplateName::AnchorStage3Refine,
            &b,
            0.0,
        ) {
            Ok(r) => r,
            Err(e) => {
                return Ok(RefineResult {
                    final_src: candidate_src.to_string(),
                    iterations_used,
                    passed: false,
                    failure: Some(format!("llm failure mid-loop: {e}")),
                });
            }
        };
        match parse_sections(&reply, &[SectionLabel::Code])
            .ok()
            .and_then(|p| extract_code(&p))
        {
            Some(code) => current = code,
            None => {
                return Ok(RefineResult {
                    final_src: candidate_src.to_string(),
                    iterations_used,
                    passed: false,
                    failure: Some("refinement reply had no extractable code".into()),
                });
            }
        }
    }
}

fn outcome_shell(job: &VerificationJob, trace: Trace, started: Instant) -> VerificationOutcome {
    VerificationOutcome {
        pair_id: job.pair_id.clone(),
        method: job.method,
        final_src: job.candidate_src.clone(),
        iterations_used: 0,
        passed: false,
        failure: None,
        tests_used: Vec::new(),
        dropped_inputs: Vec::new(),
        transcript: trace.transcript,
        stage_costs: trace.costs,
        wall_seconds: started.elapsed().as_secs_f64(),
    }
}

fn finish(
    job: &VerificationJob,
    trace: Trace,
    started: Instant,
    tests: VerifiedTestSet,
    refine: RefineResult,
) -> VerificationOutcome {
    let mut out = outcome_shell(job, trace, started);
    out.final_src = refine.final_src;
    out.iterations_used = refine.iterations_used;
    out.passed = refine.passed;
    out.failure = refine.failure;
    out.tests_used = tests.cases;
    out.dropped_inputs = tests.dropped_inputs;
    out.wall_seconds = started.elapsed().as_secs_f64();
    out
}

fn failed_outcome(
    job: &VerificationJob,
    trace: Trace,
    started: Instant,
    err: AnchorError,
) -> VerificationOutcome {
    let mut out = outcome_shell(job, trace, started);
    out.failure = Some(err.to_string());
    out
}

/// The three-stage anchor verification framework.
pub fn run_anchor_verification(ctx: &AnchorContext, job: &VerificationJob) -> VerificationOutcome {
    let started = Instant::now();
    let mut trace = Trace::new();
    let (inputs, explanation) =
        match stage1_generate_inputs(ctx, &job.slow_src, job.n_inputs, &mut trace) {
            Ok(r) => r,
            Err(e) => return failed_outcome(job, trace, started, e),
        };
    let tests = match stage2_anchor_outputs(ctx, &job.slow_src, &inputs, &job.toolchain, &mut trace)
    {
        Ok(t) => t,
        Err(e) => return failed_outcome(job, trace, started, e),
    };
    match stage3_refine(
        ctx,
        &job.candidate_src,
        &tests,
        &job.toolchain,
        job.max_iterations,
        &explanation,
        &mut trace,
    ) {
        Ok(refine) => finish(job, trace, started, tests, refine),
        Err(e) => failed_outcome(job, trace, started, e),
    }
}

/// Self-debugging baseline: explanation-driven revision with no execution
/// feedback in the loop. When trusted tests exist the final program is
/// validated against them for reporting, but that verdict never feeds the
/// prompt.
pub fn run_self_debugging(ctx: &AnchorContext, job: &VerificationJob) -> VerificationOutcome {
    let started = Instant::now();
    let mut trace = Trace::new();
    let mut current = job.candidate_src.clone();
    let mut iterations_used = 0;
    let mut failure = None;
    for _ in 0..job.max_iterations {
        let b = bindings(&[("program", current.as_str())]);
        iterations_used += 1;
        let reply = match ask_logged(
            ctx,
            &mut trace,
            STAGE_QUERY,
            TemplateName::SelfDebugging,
            &b,
            0.0,
        ) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(format!("llm failure mid-loop: {e}"));
                break;
            }
        };
        match parse_sections(&reply, &[SectionLabel::Code])
            .ok()
            .and_then(|p| extract_code(&p))
        {
            Some(code) => current = code,
            None => {
                failure = Some("self-debugging reply had no extractable code".into());
                break;
            }
        }
    }
    let mut out = outcome_shell(job, trace, started);
    out.final_src = current.clone();
    out.iterations_used = iterations_used;
    out.failure = failure;
    if let Some(trusted) = ctx.trusted {
        if !trusted.is_empty() {
            let mut tail = Trace::new();
            let verdict = validate_candidate(ctx, &current, trusted, &job.toolchain, &mut tail);
            out.passed = matches!(verdict, Validation::Pass);
            let cost = tail.costs[STAGE_EXEC_TEST];
            let slot = out
                .stage_costs
                .get_mut(STAGE_EXEC_TEST)
                .expect("known stage");
            slot.exec_seconds += cost.exec_seconds;
        }
    }
    out.wall_seconds = started.elapsed().as_secs_f64();
    out
}

/// Direct test generation baseline: one LLM call invents complete test
/// cases (inputs and outputs, unverified), then the refinement loop runs
/// against them.
pub fn run_direct_test_generation(
    ctx: &AnchorContext,
    job: &VerificationJob,
) -> VerificationOutcome {
    let started = Instant::now();
    let mut trace = Trace::new();
    let b = bindings(&[("slow_code", job.slow_src.as_str())]);
    let reply = match ask_logged(
        ctx,
        &mut trace,
        STAGE_QUERY,
        TemplateName::DirectTestGeneration,
        &b,
        0.7,
    ) {
        Ok(r) => r,
        Err(e) => return failed_outcome(job, trace, started, e.into()),
    };
    let parsed = match parse_sections(&reply, &[SectionLabel::TestInputs]) {
        Ok(p) => p,
        Err(_) => return failed_outcome(job, trace, started, AnchorError::EmptyTestSet),
    };
    let explanation = parsed
        .first(&SectionLabel::Explanation)
        .unwrap_or_default()
        .to_string();
    let cases: Vec<TestCase> = extract_test_cases(&parsed)
        .into_iter()
        .enumerate()
        .map(|(i, (input, expected))| TestCase {
            id: format!("synthetic-{i}"),
            input,
            expected,
            status: TestStatus::Synthetic,
        })
        .collect();
    if cases.is_empty() {
        return failed_outcome(job, trace, started, AnchorError::EmptyTestSet);
    }
    let tests = VerifiedTestSet {
        cases,
        dropped_inputs: Vec::new(),
    };
    match stage3_refine(
        ctx,
        &job.candidate_src,
        &tests,
        &job.toolchain,
        job.max_iterations,
        &explanation,
        &mut trace,
    ) {
        Ok(refine) => finish(job, trace, started, tests, refine),
        Err(e) => failed_outcome(job, trace, started, e),
    }
}

/// Comparison group: inputs as in stage 1, but expected outputs are
/// *predicted* by the LLM instead of anchored by execution. Demonstrates
/// the cost of unverified oracles; stage-2 execution time is zero by
/// construction.
pub fn run_comparison_group(ctx: &AnchorContext, job: &VerificationJob) -> VerificationOutcome {
    let started = Instant::now();
    let mut trace = Trace::new();
    let (inputs, explanation) =
        match stage1_generate_inputs(ctx, &job.slow_src, job.n_inputs, &mut trace) {
            Ok(r) => r,
            Err(e) => return failed_outcome(job, trace, started, e),
        };
    let mut cases = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        let b = bindings(&[
            ("slow_code", job.slow_src.as_str()),
            ("test_input", input.as_str()),
        ]);
        let reply = match ask_logged(
            ctx,
            &mut trace,
            STAGE_EXEC_OUTPUT,
            TemplateName::ComparisonGroupOutputs,
            &b,
            0.0,
        ) {
            Ok(r) => r,
            Err(e) => return failed_outcome(job, trace, started, e.into()),
        };
        let predicted = parse_sections(&reply, &[])
            .ok()
            .and_then(|p| p.first(&SectionLabel::Output).map(|s| s.to_string()))
            .unwrap_or_else(|| reply.trim().to_string());
        if predicted.is_empty() {
            continue;
        }
        cases.push(TestCase {
            id: format!("predicted-{i}"),
            input: input.clone(),
            expected: predicted,
            status: TestStatus::Synthetic,
        });
    }
    if cases.is_empty() {
        return failed_outcome(job, trace, started, AnchorError::AllInputsDropped);
    }
    let tests = VerifiedTestSet {
        cases,
        dropped_inputs: Vec::new(),
    };
    match stage3_refine(
        ctx,
        &job.candidate_src,
        &tests,
        &job.toolchain,
        job.max_iterations,
        &explanation,
        &mut trace,
    ) {
        Ok(refine) => finish(job, trace, started, tests, refine),
        Err(e) => failed_outcome(job, trace, started, e),
    }
}

/// Dispatch one job to its method.
pub fn run_job(ctx: &AnchorContext, job: &VerificationJob) -> VerificationOutcome {
    match job.method {
        Method::AnchorVerification => run_anchor_verification(ctx, job),
        Method::SelfDebugging => run_self_debugging(ctx, job),
        Method::DirectTestGeneration => run_direct_test_generation(ctx, job),
        Method::ComparisonGroup => run_comparison_group(ctx, job),
    }
}

/// Run a batch of independent jobs in parallel. Outcome order matches job
/// order.
pub fn run_batch(
    ctx: &AnchorContext,
    jobs: &[VerificationJob],
    parallelism: usize,
) -> Vec<VerificationOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| jobs.par_iter().map(|job| run_job(ctx, job)).collect())
}
