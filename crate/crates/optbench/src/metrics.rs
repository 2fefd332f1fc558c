//! Evaluation metrics: %Opt, Speedup, Correct, best@k selection, the
//! failure taxonomy, and the Pearson correlation used to compare timing
//! backends.
//!
//! Conventions: a candidate contributes a speedup of 1.0 when it is
//! incorrect or slower than the original, and "optimized" means correct
//! and at least 10% faster (`new <= old / 1.10`, boundary inclusive).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sandbox::{CompileStatus, ExecutionResult};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("non-positive time: old={old} new={new}")]
    NonPositiveTime { old: f64, new: f64 },
    #[error("cannot summarize an empty record set")]
    EmptyRecords,
    #[error("pearson needs two equal-length series of at least 2 points, got {0} and {1}")]
    BadSeries(usize, usize),
    #[error("pearson undefined: zero variance in input series")]
    ZeroVariance,
}

/// Outcome of measuring one candidate program against the original.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub correct: bool,
    /// Runtime of the original (old) program, milliseconds.
    pub old_ms: f64,
    /// Runtime of the candidate (new) program, milliseconds.
    pub new_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_mode: Option<FailureMode>,
}

/// Per-test-program judgment: all sampled candidates plus the best@k choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub pair_id: String,
    pub candidates: Vec<CandidateOutcome>,
    /// Index of the fastest correct candidate, set by [`best_of_k`].
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chosen: Option<usize>,
}

impl EvalRecord {
    pub fn new(pair_id: impl Into<String>, candidates: Vec<CandidateOutcome>) -> Self {
        EvalRecord {
            pair_id: pair_id.into(),
            candidates,
            chosen: None,
        }
    }

    /// Speedup this record contributes to the aggregate: the chosen
    /// candidate's floored speedup, or 1.0 when nothing correct was found.
    pub fn contributed_speedup(&self) -> f64 {
        match self.chosen.and_then(|i| self.candidates.get(i)) {
            Some(c) => speedup(c.old_ms, c.new_ms, c.correct).unwrap_or(1.0),
            None => 1.0,
        }
    }

    /// Whether the chosen candidate counts as optimized.
    pub fn is_optimized(&self) -> bool {
        match self.chosen.and_then(|i| self.candidates.get(i)) {
            Some(c) => is_optimized(c.old_ms, c.new_ms, c.correct),
            None => false,
        }
    }

    pub fn is_correct(&self) -> bool {
        match self.chosen.and_then(|i| self.candidates.get(i)) {
            Some(c) => c.correct,
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub pct_opt: f64,
    pub speedup_mean: f64,
    pub pct_correct: f64,
    #[serde(rename = "n")]
    pub n_records: usize,
}

/// Failure taxonomy for non-passing optimized programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    /// Did not compile (syntax/type errors).
    CompileFail,
    /// Compiled, semantics right but input/output format differs.
    FormatFail,
    /// Compiled, semantically wrong output.
    SemanticFail,
}

impl std::fmt::Display for FailureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureMode::CompileFail => write!(f, "compile_fail"),
            FailureMode::FormatFail => write!(f, "format_fail"),
            FailureMode::SemanticFail => write!(f, "semantic_fail"),
        }
    }
}

/// Output comparison policy used when judging a run against an expected output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgePolicy {
    /// Byte equality after stripping one trailing newline.
    Exact,
    /// Whitespace-token sequence equality.
    Token,
    /// Token equality with numeric tolerance for parseable numbers.
    Numeric(f64),
}

/// speedup(o, n) = o / n, floored at 1.0 for incorrect or slower outputs.
pub fn speedup(old_ms: f64, new_ms: f64, correct: bool) -> Result<f64, MetricsError> {
    if !old_ms.is_finite() || old_ms <= 0.0 || !new_ms.is_finite() || new_ms <= 0.0 {
        return Err(MetricsError::NonPositiveTime {
            old: old_ms,
            new: new_ms,
        });
    }
    if !correct {
        return Ok(1.0);
    }
    let ratio = old_ms / new_ms;
    Ok(if ratio < 1.0 { 1.0 } else { ratio })
}

/// At least 10% faster and correct: `new <= old / 1.10`, boundary inclusive.
pub fn is_optimized(old_ms: f64, new_ms: f64, correct: bool) -> bool {
    correct && old_ms > 0.0 && new_ms > 0.0 && new_ms <= old_ms / 1.10
}

/// Select the fastest candidate that passes all test cases. Leaves `chosen`
/// unset when no candidate is correct.
pub fn best_of_k(record: &mut EvalRecord) {
    record.chosen = record
        .candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.correct)
        .min_by(|(_, a), (_, b)| a.new_ms.total_cmp(&b.new_ms))
        .map(|(i, _)| i);
}

/// Aggregate a record set into %Opt / Speedup / Correct.
pub fn summarize(records: &[EvalRecord]) -> Result<MetricsSummary, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let n = records.len() as f64;
    let mut opt = 0usize;
    let mut correct = 0usize;
    let mut speedup_sum = 0.0;
    for r in records {
        if r.is_optimized() {
            opt += 1;
        }
        if r.is_correct() {
            correct += 1;
        }
        speedup_sum += r.contributed_speedup();
    }
    Ok(MetricsSummary {
        pct_opt: opt as f64 / n,
        speedup_mean: speedup_sum / n,
        pct_correct: correct as f64 / n,
        n_records: records.len(),
    })
}

/// Classify a non-passing execution into the failure taxonomy.
/// Returns `None` when the output passes exactly.
pub fn classify_failure(result: &ExecutionResult, expected: &str) -> Option<FailureMode> {
    if !matches!(result.compile, CompileStatus::Ok) {
        return Some(FailureMode::CompileFail);
    }
    if judge_output(&result.stdout, expected, JudgePolicy::Exact) {
        return None;
    }
    if judge_output(&result.stdout, expected, JudgePolicy::Token) {
        Some(FailureMode::FormatFail)
    } else {
        Some(FailureMode::SemanticFail)
    }
}

/// Compare a program's output against the expected text under a policy.
pub fn judge_output(actual: &str, expected: &str, policy: JudgePolicy) -> bool {
    match policy {
        JudgePolicy::Exact => strip_trailing_newline(actual) == strip_trailing_newline(expected),
        JudgePolicy::Token => {
            let a: Vec<&str> = actual.split_whitespace().collect();
            let b: Vec<&str> = expected.split_whitespace().collect();
            a == b
        }
        JudgePolicy::Numeric(eps) => {
            let a: Vec<&str> = actual.split_whitespace().collect();
            let b: Vec<&str> = expected.split_whitespace().collect();
            a.len() == b.len()
                && a.iter()
                    .zip(b.iter())
                    .all(|(x, y)| match (x.parse::<f64>(), y.parse::<f64>()) {
                        (Ok(xa), Ok(yb)) => (xa - yb).abs() <= eps * f64::max(1.0, yb.abs()),
                        _ => x == y,
                    })
        }
    }
}

fn strip_trailing_newline(s: &str) -> &str {
    s.strip_suffix("\r\n")
        .or_else(|| s.strip_suffix('\n'))
        .unwrap_or(s)
}

/// Standard Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(MetricsError::BadSeries(xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}
