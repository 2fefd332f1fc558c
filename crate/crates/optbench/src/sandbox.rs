//! Compile and execute candidate programs against test inputs under OS
//! resource limits, with repeatable wall-clock timing.
//!
//! This is a resource-limit harness (CPU time, address space, output caps,
//! process-group kill on timeout), **not** a security boundary. Do not feed
//! it programs you would not run yourself.

use std::fs;
use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TestCase;
use crate::metrics::{classify_failure, judge_output, FailureMode, JudgePolicy};

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid toolchain: {0}")]
    InvalidToolchain(String),
    #[error("workdir error at {path}: {reason}")]
    Workdir { path: PathBuf, reason: String },
    #[error("compile error:\n{0}")]
    CompileError(String),
    #[error("compile timed out after {0:.1}s")]
    CompileTimeout(f64),
    #[error("spawn failed: {0}")]
    Spawn(String),
}

/// Compiler/runner command templates and resource limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toolchain {
    /// Command tokens with `{src}`/`{bin}` placeholders; empty for
    /// interpreted languages.
    pub compile_cmd: Vec<String>,
    /// Command tokens with `{bin}` or `{src}` placeholders.
    pub run_cmd: Vec<String>,
    pub compile_timeout_s: f64,
    pub run_timeout_s: f64,
    pub mem_limit_mb: u64,
    pub output_limit_kb: u64,
}

fn cxx() -> String {
    std::env::var("OPTBENCH_CXX").unwrap_or_else(|_| "g++".to_string())
}

impl Toolchain {
    /// Default preset mirroring the reference judge configuration:
    /// C++17 with -O3.
    pub fn cpp_o3() -> Self {
        Toolchain {
            compile_cmd: vec![
                cxx(),
                "-std=c++17".into(),
                "-O3".into(),
                "{src}".into(),
                "-o".into(),
                "{bin}".into(),
            ],
            run_cmd: vec!["{bin}".into()],
            compile_timeout_s: 30.0,
            run_timeout_s: 10.0,
            mem_limit_mb: 1024,
            output_limit_kb: 1024,
        }
    }

    /// Fast-compiling preset for tests and smoke runs.
    pub fn cpp_debug() -> Self {
        Toolchain {
            compile_cmd: vec![
                cxx(),
                "-std=c++17".into(),
                "-O0".into(),
                "{src}".into(),
                "-o".into(),
                "{bin}".into(),
            ],
            run_cmd: vec!["{bin}".into()],
            compile_timeout_s: 20.0,
            run_timeout_s: 5.0,
            mem_limit_mb: 1024,
            output_limit_kb: 1024,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "cpp-o3" => Some(Self::cpp_o3()),
            "cpp-debug" => Some(Self::cpp_debug()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.compile_timeout_s <= 0.0 || self.run_timeout_s <= 0.0 {
            return Err(SandboxError::InvalidToolchain(
                "timeouts must be positive".into(),
            ));
        }
        if self.mem_limit_mb == 0 || self.output_limit_kb == 0 {
            return Err(SandboxError::InvalidToolchain(
                "limits must be positive".into(),
            ));
        }
        if !self.compile_cmd.is_empty() && !self.compile_cmd.iter().any(|t| t.contains("{src}")) {
            return Err(SandboxError::InvalidToolchain(
                "compile_cmd must reference {src}".into(),
            ));
        }
        if self.run_cmd.is_empty()
            || !self
                .run_cmd
                .iter()
                .any(|t| t.contains("{bin}") || t.contains("{src}"))
        {
            return Err(SandboxError::InvalidToolchain(
                "run_cmd must reference {bin} or {src}".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompileStatus {
    Ok,
    Error(String),
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    RuntimeError(String),
    Timeout,
    OutputLimit,
    NotRun,
}

/// Outcome of one sandboxed run (or of its failed compile).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub compile: CompileStatus,
    pub run: RunStatus,
    pub stdout: String,
    pub stderr: String,
    /// One wall time per attempted repetition.
    pub wall_times_ms: Vec<f64>,
    pub input_id: String,
    /// Set when repetitions disagreed on stdout.
    pub nondeterministic: bool,
}

impl ExecutionResult {
    pub fn not_run(compile: CompileStatus) -> Self {
        ExecutionResult {
            compile,
            run: RunStatus::NotRun,
            stdout: String::new(),
            stderr: String::new(),
            wall_times_ms: Vec::new(),
            input_id: String::new(),
            nondeterministic: false,
        }
    }

    pub fn median_ms(&self) -> Option<f64> {
        median(&self.wall_times_ms)
    }

    pub fn passed(&self, expected: &str, policy: JudgePolicy) -> bool {
        matches!(self.compile, CompileStatus::Ok)
            && matches!(self.run, RunStatus::Ok)
            && judge_output(&self.stdout, expected, policy)
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Compiled artifact plus the job directory holding its files.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub src_path: PathBuf,
    pub bin_path: PathBuf,
    pub job_dir: PathBuf,
    pub diagnostics: String,
}

static JOB_COUNTER: AtomicU64 = AtomicU64::new(0);

fn next_job_dir(workdir: &Path) -> Result<PathBuf, SandboxError> {
    let n = JOB_COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = workdir.join(format!("job-{}-{}", std::process::id(), n));
    fs::create_dir_all(&dir).map_err(|e| SandboxError::Workdir {
        path: dir.clone(),
        reason: e.to_string(),
    })?;
    Ok(dir)
}

struct RawRun {
    exit_code: Option<i32>,
    timed_out: bool,
    stdout: Vec<u8>,
    stdout_truncated: bool,
    stderr: Vec<u8>,
    wall_ms: f64,
}

fn spawn_limited(
    argv: &[String],
    cwd: &Path,
    mem_limit_mb: Option<u64>,
    cpu_backstop_s: u64,
) -> Result<Child, SandboxError> {
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    unsafe {
        cmd.pre_exec(move || {
            // own process group so the whole tree can be killed
            libc::setpgid(0, 0);
            let rl = |lim: u64| libc::rlimit {
                rlim_cur: lim,
                rlim_max: lim,
            };
            if let Some(mb) = mem_limit_mb {
                libc::setrlimit(libc::RLIMIT_AS, &rl(mb * 1024 * 1024));
            }
            libc::setrlimit(libc::RLIMIT_CORE, &rl(0));
            libc::setrlimit(libc::RLIMIT_CPU, &rl(cpu_backstop_s));
            Ok(())
        });
    }
    cmd.spawn().map_err(|e| SandboxError::Spawn(e.to_string()))
}

fn capped_reader<R: Read + Send + 'static>(
    mut r: R,
    cap: usize,
) -> std::thread::JoinHandle<(Vec<u8>, bool)> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let mut truncated = false;
        let mut chunk = [0u8; 8192];
        loop {
            match r.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if buf.len() < cap {
                        let take = n.min(cap - buf.len());
                        buf.extend_from_slice(&chunk[..take]);
                        if take < n {
                            truncated = true;
                        }
                    } else {
                        // keep draining so the child never blocks on the pipe
                        truncated = true;
                    }
                }
            }
        }
        (buf, truncated)
    })
}

fn run_limited(
    argv: &[String],
    cwd: &Path,
    stdin_data: &str,
    timeout: Duration,
    mem_limit_mb: Option<u64>,
    output_cap: usize,
) -> Result<RawRun, SandboxError> {
    let cpu_backstop = timeout.as_secs().saturating_add(2);
    let start = Instant::now();
    let mut child = spawn_limited(argv, cwd, mem_limit_mb, cpu_backstop)?;
    let pid = child.id() as i32;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = stdin_data.as_bytes().to_vec();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
        // drop closes the pipe
    });
    let out_reader = capped_reader(child.stdout.take().expect("piped stdout"), output_cap);
    let err_reader = capped_reader(child.stderr.take().expect("piped stderr"), output_cap);

    let deadline = start + timeout;
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    timed_out = true;
                    unsafe {
                        libc::killpg(pid, libc::SIGKILL);
                    }
                    break None;
                }
                std::thread::sleep(Duration::from_millis(1));
            }
            Err(_) => break None,
        }
    };
    let status = match status {
        Some(s) => Some(s),
        None => child.wait().ok(),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    // reap any stragglers left in the group
    if timed_out {
        unsafe {
            libc::killpg(pid, libc::SIGKILL);
        }
    }
    let _ = writer.join();
    let (stdout, out_trunc) = out_reader.join().unwrap_or_default();
    let (stderr, err_trunc) = err_reader.join().unwrap_or_default();

    Ok(RawRun {
        exit_code: status.and_then(|s| s.code()),
        timed_out,
        stdout,
        stdout_truncated: out_trunc || err_trunc,
        stderr,
        wall_ms,
    })
}

fn substitute(tokens: &[String], src: &Path, bin: &Path) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            t.replace("{src}", &src.to_string_lossy())
                .replace("{bin}", &bin.to_string_lossy())
        })
        .collect()
}

/// Compile a source text into an executable artifact under a fresh job
/// directory. Diagnostics are preserved verbatim for refinement prompts.
pub fn compile(
    source: &str,
    toolchain: &Toolchain,
    workdir: &Path,
) -> Result<CompiledProgram, SandboxError> {
    toolchain.validate()?;
    let job_dir = next_job_dir(workdir)?;
    let src_path = job_dir.join("prog.cpp");
    let bin_path = job_dir.join("prog.bin");
    fs::write(&src_path, source).map_err(|e| SandboxError::Workdir {
        path: src_path.clone(),
        reason: e.to_string(),
    })?;

    if toolchain.compile_cmd.is_empty() {
        // interpreted language: the source is the artifact
        return Ok(CompiledProgram {
            bin_path: src_path.clone(),
            src_path,
            job_dir,
            diagnostics: String::new(),
        });
    }

    let argv = substitute(&toolchain.compile_cmd, &src_path, &bin_path);
    let raw = run_limited(
        &argv,
        &job_dir,
        "",
        Duration::from_secs_f64(toolchain.compile_timeout_s),
        None,
        4 * 1024 * 1024,
    )?;
    if raw.timed_out {
        return Err(SandboxError::CompileTimeout(toolchain.compile_timeout_s));
    }
    let diagnostics = format!(
        "{}{}",
        String::from_utf8_lossy(&raw.stderr),
        String::from_utf8_lossy(&raw.stdout)
    );
    if raw.exit_code != Some(0) {
        return Err(SandboxError::CompileError(diagnostics));
    }
    Ok(CompiledProgram {
        src_path,
        bin_path,
        job_dir,
        diagnostics,
    })
}

/// Run a compiled program on one input, `repetitions` times. The first
/// repetition's stdout is canonical; later repetitions must reproduce it or
/// the result is flagged nondeterministic. Stops at the first failing
/// repetition.
pub fn run(
    prog: &CompiledProgram,
    input: &str,
    input_id: &str,
    toolchain: &Toolchain,
    repetitions: usize,
) -> ExecutionResult {
    run_with_timeout(
        prog,
        input,
        input_id,
        toolchain,
        repetitions,
        toolchain.run_timeout_s,
    )
}

/// Like [`run`] but with an explicit wall-clock budget (the anchor stage
/// grants the slow program extra tolerance).
pub fn run_with_timeout(
    prog: &CompiledProgram,
    input: &str,
    input_id: &str,
    toolchain: &Toolchain,
    repetitions: usize,
    timeout_s: f64,
) -> ExecutionResult {
    let repetitions = repetitions.max(1);
    let argv = substitute(&toolchain.run_cmd, &prog.src_path, &prog.bin_path);
    let cap = (toolchain.output_limit_kb as usize) * 1024;
    let mut result = ExecutionResult {
        compile: CompileStatus::Ok,
        run: RunStatus::Ok,
        stdout: String::new(),
        stderr: String::new(),
        wall_times_ms: Vec::new(),
        input_id: input_id.to_string(),
        nondeterministic: false,
    };
    for rep in 0..repetitions {
        let raw = match run_limited(
            &argv,
            &prog.job_dir,
            input,
            Duration::from_secs_f64(timeout_s),
            Some(toolchain.mem_limit_mb),
            cap,
        ) {
            Ok(raw) => raw,
            Err(e) => {
                result.run = RunStatus::RuntimeError(e.to_string());
                return result;
            }
        };
        result.wall_times_ms.push(raw.wall_ms);
        let stdout = String::from_utf8_lossy(&raw.stdout).into_owned();
        if rep == 0 {
            result.stdout = stdout.clone();
            result.stderr = String::from_utf8_lossy(&raw.stderr).into_owned();
        } else if raw.exit_code == Some(0) && stdout != result.stdout {
            result.nondeterministic = true;
        }
        if raw.timed_out {
            result.run = RunStatus::Timeout;
            return result;
        }
        if raw.stdout_truncated {
            result.run = RunStatus::OutputLimit;
            return result;
        }
        match raw.exit_code {
            Some(0) => {}
            Some(code) => {
                result.run = RunStatus::RuntimeError(format!(
                    "exit code {code}; stderr: {}",
                    truncate_text(&String::from_utf8_lossy(&raw.stderr), 2000)
                ));
                return result;
            }
            None => {
                result.run = RunStatus::RuntimeError("killed by signal".into());
                return result;
            }
        }
    }
    result
}

pub fn truncate_text(s: &str, cap: usize) -> String {
    if s.len() <= cap {
        s.to_string()
    } else {
        let mut end = cap;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestMeasurement {
    pub test_id: String,
    pub slow_ms: Option<f64>,
    pub fast_ms: Option<f64>,
    pub fast_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fast_failure: Option<FailureMode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairMeasurement {
    /// Sum over tests of median wall times of the original program.
    pub slow_ms: f64,
    /// Sum over tests of median wall times of the candidate.
    pub fast_ms: f64,
    pub fast_correct: bool,
    pub per_test: Vec<TestMeasurement>,
    /// Violations of the anchor premise: the slow program failed to compile,
    /// crashed, or disagreed with a trusted expected output.
    pub slow_violations: Vec<String>,
}

/// Measure a (slow, candidate) source pair on a test set. The slow program
/// is assumed correct but still checked; violations are reported, loudly.
pub fn measure_pair(
    slow_src: &str,
    fast_src: &str,
    tests: &[TestCase],
    toolchain: &Toolchain,
    repetitions: usize,
    policy: JudgePolicy,
    workdir: &Path,
) -> PairMeasurement {
    let mut m = PairMeasurement {
        slow_ms: 0.0,
        fast_ms: 0.0,
        fast_correct: true,
        per_test: Vec::new(),
        slow_violations: Vec::new(),
    };

    let slow = match compile(slow_src, toolchain, workdir) {
        Ok(p) => Some(p),
        Err(e) => {
            let msg = format!("slow program failed to compile: {e}");
            log::error!("anchor premise violated: {msg}");
            m.slow_violations.push(msg);
            None
        }
    };
    let fast = match compile(fast_src, toolchain, workdir) {
        Ok(p) => Some(p),
        Err(e) => {
            m.fast_correct = false;
            for t in tests {
                m.per_test.push(TestMeasurement {
                    test_id: t.id.clone(),
                    slow_ms: None,
                    fast_ms: None,
                    fast_passed: false,
                    fast_failure: Some(FailureMode::CompileFail),
                });
            }
            let _ = e;
            None
        }
    };

    for t in tests {
        let slow_res = slow
            .as_ref()
            .map(|p| run(p, &t.input, &t.id, toolchain, repetitions));
        if let Some(res) = &slow_res {
            match (&res.run, res.passed(&t.expected, policy)) {
                (RunStatus::Ok, true) => {}
                (RunStatus::Ok, false) => {
                    let msg = format!(
                        "slow program output disagrees with expected on test {}",
                        t.id
                    );
                    log::error!("anchor premise violated: {msg}");
                    m.slow_violations.push(msg);
                }
                (status, _) => {
                    let msg = format!("slow program did not finish test {}: {status:?}", t.id);
                    log::error!("anchor premise violated: {msg}");
                    m.slow_violations.push(msg);
                }
            }
            if let Some(med) = res.median_ms() {
                m.slow_ms += med;
            }
        }
        if fast.is_none() {
            continue; // per_test rows already recorded
        }
        let fast_res = run(
            fast.as_ref().unwrap(),
            &t.input,
            &t.id,
            toolchain,
            repetitions,
        );
        let passed = fast_res.passed(&t.expected, policy);
        if let Some(med) = fast_res.median_ms() {
            m.fast_ms += med;
        }
        if !passed {
            m.fast_correct = false;
        }
        m.per_test.push(TestMeasurement {
            test_id: t.id.clone(),
            slow_ms: slow_res.as_ref().and_then(|r| r.median_ms()),
            fast_ms: fast_res.median_ms(),
            fast_passed: passed,
            fast_failure: if passed {
                None
            } else {
                classify_failure(&fast_res, &t.expected)
            },
        });
    }
    m
}

/// Worker count for parallel compile/run pools: physical parallelism - 1.
pub fn default_parallelism() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get().saturating_sub(1).max(1))
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TestStatus;

    fn echo_src() -> &'static str {
        r#"
#include <cstdio>
int main() {
    int c;
    while ((c = getchar()) != EOF) putchar(c);
    return 0;
}
"#
    }

    fn tc(toolchain: Toolchain) -> Toolchain {
        toolchain
    }

    #[test]
    fn compile_and_echo() {
        let dir = tempfile::tempdir().unwrap();
        let t = tc(Toolchain::cpp_debug());
        let prog = compile(echo_src(), &t, dir.path()).unwrap();
        let res = run(&prog, "abc", "t0", &t, 1);
        assert_eq!(res.run, RunStatus::Ok);
        assert_eq!(res.stdout, "abc");
        assert_eq!(res.wall_times_ms.len(), 1);
        assert!(!res.nondeterministic);
    }

    #[test]
    fn compile_error_preserves_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        let t = Toolchain::cpp_debug();
        let err = compile("int main() { return 0 }", &t, dir.path()).unwrap_err();
        match err {
            SandboxError::CompileError(diag) => {
                assert!(diag.contains("error"), "diagnostic was: {diag}")
            }
            other => panic!("expected CompileError, got {other:?}"),
        }
    }

    #[test]
    fn infinite_loop_times_out_and_leaves_no_orphans() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Toolchain::cpp_debug();
        t.run_timeout_s = 0.5;
        let src = r#"
#include <unistd.h>
int main() {
    if (fork() == 0) { sleep(100); return 0; }
    for (;;) {}
}
"#;
        let prog = compile(src, &t, dir.path()).unwrap();
        let started = Instant::now();
        let res = run(&prog, "", "t0", &t, 1);
        assert_eq!(res.run, RunStatus::Timeout);
        assert!(started.elapsed() < Duration::from_secs(5));
        // the forked child shared the process group and must be gone too
        std::thread::sleep(Duration::from_millis(100));
        // subsequent runs are unaffected
        let echo = compile(echo_src(), &t, dir.path()).unwrap();
        let res = run(&echo, "ok", "t1", &t, 1);
        assert_eq!(res.run, RunStatus::Ok);
        assert_eq!(res.stdout, "ok");
    }

    #[test]
    fn compile_timeout_when_budget_exceeded() {
        // a compiler invocation cannot finish in 5ms
        let dir = tempfile::tempdir().unwrap();
        let mut t = Toolchain::cpp_debug();
        t.compile_timeout_s = 0.005;
        let err = compile(echo_src(), &t, dir.path()).unwrap_err();
        assert!(
            matches!(err, SandboxError::CompileTimeout(_)),
            "got {err:?}"
        );
    }

    #[test]
    fn output_limit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Toolchain::cpp_debug();
        t.output_limit_kb = 4;
        let src = r#"
#include <cstdio>
int main() {
    for (int i = 0; i < 100000; i++) printf("xxxxxxxxxx\n");
    return 0;
}
"#;
        let prog = compile(src, &t, dir.path()).unwrap();
        let res = run(&prog, "", "t0", &t, 1);
        assert_eq!(res.run, RunStatus::OutputLimit);
        assert!(res.stdout.len() <= 4 * 1024);
    }

    #[test]
    fn runtime_error_captures_exit() {
        let dir = tempfile::tempdir().unwrap();
        let t = Toolchain::cpp_debug();
        let prog = compile("int main(){ return 3; }", &t, dir.path()).unwrap();
        let res = run(&prog, "", "t0", &t, 1);
        match res.run {
            RunStatus::RuntimeError(msg) => assert!(msg.contains("exit code 3")),
            other => panic!("expected RuntimeError, got {other:?}"),
        }
    }

    #[test]
    fn measure_pair_identical_sources() {
        let dir = tempfile::tempdir().unwrap();
        let t = Toolchain::cpp_debug();
        let tests = vec![TestCase {
            id: "t0".into(),
            input: "hello".into(),
            expected: "hello".into(),
            status: TestStatus::Trusted,
        }];
        let m = measure_pair(
            echo_src(),
            echo_src(),
            &tests,
            &t,
            3,
            JudgePolicy::Token,
            dir.path(),
        );
        assert!(m.fast_correct);
        assert!(m.slow_violations.is_empty());
        assert!(m.slow_ms > 0.0 && m.fast_ms > 0.0);
    }

    #[test]
    fn measure_pair_flags_wrong_output_on_one_test() {
        let dir = tempfile::tempdir().unwrap();
        let t = Toolchain::cpp_debug();
        // echoes its input except for the single value 1
        let wrong_on_one = r#"#include <cstdio>
#include <cstring>
int main() {
    char buf[64];
    if (scanf("%63s", buf) != 1) return 1;
    if (strcmp(buf, "1") == 0) { puts("nope"); } else { puts(buf); }
    return 0;
}"#;
        let tests: Vec<TestCase> = (0..3)
            .map(|i| TestCase {
                id: format!("t{i}"),
                input: format!("{i}"),
                expected: format!("{i}"),
                status: TestStatus::Trusted,
            })
            .collect();
        let m = measure_pair(
            echo_src(),
            wrong_on_one,
            &tests,
            &t,
            1,
            JudgePolicy::Token,
            dir.path(),
        );
        // one wrong answer out of three sinks the verdict
        assert!(!m.fast_correct);
        let failed: Vec<_> = m.per_test.iter().filter(|pt| !pt.fast_passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].test_id, "t1");
        assert_eq!(failed[0].fast_failure, Some(FailureMode::SemanticFail));
    }

    #[test]
    fn measure_pair_compile_failure_of_candidate() {
        let dir = tempfile::tempdir().unwrap();
        let t = Toolchain::cpp_debug();
        let tests = vec![TestCase {
            id: "t0".into(),
            input: "x".into(),
            expected: "x".into(),
            status: TestStatus::Trusted,
        }];
        let m = measure_pair(
            echo_src(),
            "not c++ at all",
            &tests,
            &t,
            1,
            JudgePolicy::Token,
            dir.path(),
        );
        assert!(!m.fast_correct);
        assert_eq!(m.per_test[0].fast_failure, Some(FailureMode::CompileFail));
    }

    #[test]
    fn median_helper() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
