//! Report assembly: merge per-run JSONL artifacts into CSVs for plotting
//! (data-percentage curves, best@k scaling, failure-mode shares, stage
//! costs, cross-backend Pearson correlation).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::anchor::{VerificationOutcome, ALL_STAGES};
use crate::cfg::HistRow;
use crate::metrics::{pearson, EvalRecord, FailureMode, MetricsError, MetricsSummary};

/// Labeled summaries (percentage points, best@k points, ...) into a curve
/// CSV. Labels sort numerically when they parse as numbers.
pub fn write_summary_curve(rows: &[(String, MetricsSummary)], path: &Path) -> std::io::Result<()> {
    let mut rows: Vec<_> = rows.to_vec();
    rows.sort_by(
        |(a, _), (b, _)| match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => x.total_cmp(&y),
            _ => a.cmp(b),
        },
    );
    let mut f = fs::File::create(path)?;
    writeln!(f, "label,pct_opt,speedup_mean,pct_correct,n_records")?;
    for (label, s) in rows {
        writeln!(
            f,
            "{label},{:.6},{:.6},{:.6},{}",
            s.pct_opt, s.speedup_mean, s.pct_correct, s.n_records
        )?;
    }
    Ok(())
}

/// GED histogram rows into `bucket_lo,bucket_hi,count_user,count_problem`.
/// The trailing null bucket (unannotated pairs) carries empty bounds.
pub fn write_ged_histogram(rows: &[HistRow], path: &Path) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "bucket_lo,bucket_hi,count_user,count_problem")?;
    for r in rows {
        let lo = r.bucket_lo.map(|v| format!("{v}")).unwrap_or_default();
        let hi = r.bucket_hi.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(f, "{lo},{hi},{},{}", r.count_user, r.count_problem)?;
    }
    Ok(())
}

/// Failure-mode counts across all candidates of a record set.
pub fn failure_shares(records: &[EvalRecord]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        for c in &r.candidates {
            if let Some(mode) = c.failure_mode {
                *counts.entry(mode.to_string()).or_insert(0) += 1;
            }
        }
    }
    counts
}

pub fn write_failure_shares(counts: &BTreeMap<String, usize>, path: &Path) -> std::io::Result<()> {
    let total: usize = counts.values().sum();
    let mut f = fs::File::create(path)?;
    writeln!(f, "failure_mode,count,share")?;
    for mode in [
        FailureMode::CompileFail,
        FailureMode::FormatFail,
        FailureMode::SemanticFail,
    ] {
        let count = counts.get(&mode.to_string()).copied().unwrap_or(0);
        let share = if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        };
        writeln!(f, "{mode},{count},{share:.6}")?;
    }
    Ok(())
}

/// Average per-stage time cost for each method, mirroring the runtime
/// overhead table columns (query / execution(testcase output) /
/// execution(testcase) / refinement).
pub fn write_stage_costs(outcomes: &[VerificationOutcome], path: &Path) -> std::io::Result<()> {
    let mut grouped: BTreeMap<&'static str, (usize, BTreeMap<String, f64>)> = BTreeMap::new();
    for o in outcomes {
        let entry = grouped.entry(o.method.as_str()).or_default();
        entry.0 += 1;
        for (stage, cost) in &o.stage_costs {
            *entry.1.entry(stage.clone()).or_insert(0.0) += cost.llm_seconds + cost.exec_seconds;
        }
    }
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "method,n_jobs,query_s,execution_testcase_output_s,execution_testcase_s,refinement_s"
    )?;
    for (method, (n, sums)) in grouped {
        let avg = |stage: &str| sums.get(stage).copied().unwrap_or(0.0) / n as f64;
        writeln!(
            f,
            "{method},{n},{:.4},{:.4},{:.4},{:.4}",
            avg(ALL_STAGES[0]),
            avg(ALL_STAGES[1]),
            avg(ALL_STAGES[2]),
            avg(ALL_STAGES[3]),
        )?;
    }
    Ok(())
}

/// One float per line.
pub fn read_series(path: &Path) -> Result<Vec<f64>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(
            line.parse::<f64>()
                .map_err(|e| format!("{} line {}: {e}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// Pearson r between two timing backends, written as a tiny CSV.
pub fn write_pearson(xs: &[f64], ys: &[f64], path: &Path) -> Result<f64, MetricsError> {
    let r = pearson(xs, ys)?;
    let mut f = fs::File::create(path).map_err(|_| MetricsError::BadSeries(xs.len(), ys.len()))?;
    let _ = writeln!(f, "metric,value");
    let _ = writeln!(f, "pearson_r,{r:.6}");
    Ok(r)
}
