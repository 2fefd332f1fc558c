//! Construction of optimization pairs from a submission corpus, under the
//! user-oriented perspective (pairs within one user's trajectory) and the
//! problem-oriented perspective (pairs across all users of one problem,
//! ordered by judge-marked runtime), plus the subset strategies used for
//! controlled comparisons.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{users_of, valid_trajectory, Corpus, Status, Submission};

#[derive(Debug, Error)]
pub enum PairingError {
    #[error("percent must be in (0, 100], got {0}")]
    InvalidPercent(f64),
    #[error("pair {0} has no GED annotation; run analyze first")]
    MissingGed(String),
    #[error("unknown problem in corpus: {0}")]
    UnknownProblem(String),
    #[error("unreadable pair file {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("bad pair record at line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perspective {
    UserOriented,
    ProblemOriented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Adjacent elements of the trajectory: (s_i, s_{i+1}).
    Consecutive,
    /// Every ordered pair (s_i, s_j) with i < j and a strictly faster s_j.
    AllForward,
}

/// A (slow program, fast program) tuple for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationPair {
    pub problem_id: String,
    pub slow_id: String,
    pub fast_id: String,
    pub slow_src: String,
    pub fast_src: String,
    pub perspective: Perspective,
    /// slow.runtime_ms / fast.runtime_ms from the judge-marked runtimes.
    pub label_speedup: f64,
    pub ged: Option<f64>,
}

impl OptimizationPair {
    pub fn pair_id(&self) -> String {
        format!("{}__{}__{}", self.problem_id, self.slow_id, self.fast_id)
    }
}

/// Construction recipe; given the same corpus it fully determines the pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    pub params: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl Provenance {
    fn new(strategy: &str) -> Self {
        Provenance {
            strategy: strategy.to_string(),
            params: BTreeMap::new(),
            seed: None,
        }
    }

    fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<OptimizationPair>,
    pub provenance: Provenance,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pair counts keyed by problem.
    pub fn per_problem_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.pairs {
            *counts.entry(p.problem_id.clone()).or_insert(0) += 1;
        }
        counts
    }
}

fn normalized_source(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Build a pair if it carries a usable optimization direction. Pairs with a
/// non-positive fast runtime are unusable (no finite positive ratio) and
/// identical sources after whitespace normalization convey no edit.
fn make_pair(
    slow: &Submission,
    fast: &Submission,
    perspective: Perspective,
    require_faster: bool,
) -> Option<OptimizationPair> {
    debug_assert_eq!(slow.problem_id, fast.problem_id);
    if fast.runtime_ms <= 0.0 {
        return None;
    }
    if require_faster && slow.runtime_ms <= fast.runtime_ms {
        return None;
    }
    if normalized_source(&slow.source) == normalized_source(&fast.source) {
        return None;
    }
    Some(OptimizationPair {
        problem_id: slow.problem_id.clone(),
        slow_id: slow.submission_id.clone(),
        fast_id: fast.submission_id.clone(),
        slow_src: slow.source.clone(),
        fast_src: fast.source.clone(),
        perspective,
        label_speedup: slow.runtime_ms / fast.runtime_ms,
        ged: None,
    })
}

fn pairs_from_trajectory(
    traj: &[&Submission],
    mode: PairMode,
    perspective: Perspective,
    require_faster: bool,
    out: &mut Vec<OptimizationPair>,
) {
    match mode {
        PairMode::Consecutive => {
            for w in traj.windows(2) {
                if let Some(p) = make_pair(w[0], w[1], perspective, require_faster) {
                    out.push(p);
                }
            }
        }
        PairMode::AllForward => {
            for i in 0..traj.len() {
                for j in (i + 1)..traj.len() {
                    // all_forward always requires a strictly faster counterpart
                    if let Some(p) = make_pair(traj[i], traj[j], perspective, true) {
                        out.push(p);
                    }
                }
            }
        }
    }
}

/// User-oriented pairs, drawn from each user's chronological submission
/// trajectory.
pub fn build_user_oriented(corpus: &Corpus, mode: PairMode, require_faster: bool) -> PairSet {
    let mut pairs = Vec::new();
    for problem_id in corpus.problems.keys() {
        for user in users_of(corpus, problem_id) {
            let traj = valid_trajectory(corpus, problem_id, &user).unwrap_or_default();
            pairs_from_trajectory(
                &traj,
                mode,
                Perspective::UserOriented,
                require_faster,
                &mut pairs,
            );
        }
    }
    PairSet {
        pairs,
        provenance: Provenance::new("user_oriented")
            .with("mode", format!("{mode:?}"))
            .with("require_faster", require_faster),
    }
}

/// Problem-oriented pairs: all users' accepted submissions for one problem merged
/// and sorted slowest-first by judge-marked runtime. Runtime ties are broken
/// by submission_id and tied-runtime pairs are excluded.
pub fn build_problem_oriented(corpus: &Corpus, mode: PairMode) -> PairSet {
    let mut pairs = Vec::new();
    for (problem_id, subs) in &corpus.problems {
        let mut merged: Vec<&Submission> = subs
            .iter()
            .filter(|s| s.status == Status::Accepted)
            .collect();
        merged.sort_by(|a, b| {
            b.runtime_ms
                .total_cmp(&a.runtime_ms)
                .then_with(|| a.submission_id.cmp(&b.submission_id))
        });
        let _ = problem_id;
        pairs_from_trajectory(
            &merged,
            mode,
            Perspective::ProblemOriented,
            true,
            &mut pairs,
        );
    }
    PairSet {
        pairs,
        provenance: Provenance::new("problem_oriented").with("mode", format!("{mode:?}")),
    }
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct SelectionReport {
    /// Quota entries naming problems absent from the pair set.
    pub unknown_problems: Vec<String>,
    /// problem -> (quota wanted, pairs available) where quota exceeded supply.
    pub shortfalls: BTreeMap<String, (usize, usize)>,
}

/// Keep, per problem, the quota-many pairs with the largest label speedup.
/// Ties break deterministically on (slow_id, fast_id).
pub fn select_top_speedup(
    set: &PairSet,
    quota: &BTreeMap<String, usize>,
) -> (PairSet, SelectionReport) {
    let mut report = SelectionReport::default();
    let mut by_problem: BTreeMap<&str, Vec<&OptimizationPair>> = BTreeMap::new();
    for p in &set.pairs {
        by_problem.entry(&p.problem_id).or_default().push(p);
    }
    for problem in quota.keys() {
        if !by_problem.contains_key(problem.as_str()) {
            report.unknown_problems.push(problem.clone());
        }
    }
    let mut pairs = Vec::new();
    for (problem, mut group) in by_problem {
        let want = match quota.get(problem) {
            Some(q) => *q,
            None => continue,
        };
        group.sort_by(|a, b| {
            b.label_speedup
                .total_cmp(&a.label_speedup)
                .then_with(|| a.slow_id.cmp(&b.slow_id))
                .then_with(|| a.fast_id.cmp(&b.fast_id))
        });
        if want > group.len() {
            report
                .shortfalls
                .insert(problem.to_string(), (want, group.len()));
        }
        pairs.extend(group.into_iter().take(want).cloned());
    }
    let out = PairSet {
        pairs,
        provenance: Provenance::new("top_speedup").with("base", &set.provenance.strategy),
    };
    (out, report)
}

/// Uniformly sample ceil(percent/100 * N) pairs without replacement.
pub fn subset_percent(set: &PairSet, percent: f64, seed: u64) -> Result<PairSet, PairingError> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(PairingError::InvalidPercent(percent));
    }
    let n = set.pairs.len();
    let k = ((percent / 100.0) * n as f64).ceil() as usize;
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index_sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    let mut provenance = Provenance::new("percent").with("percent", percent);
    provenance.seed = Some(seed);
    Ok(PairSet {
        pairs: idx.into_iter().map(|i| set.pairs[i].clone()).collect(),
        provenance,
    })
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct MatchReport {
    /// problem -> (wanted, available) where the pool ran short of the
    /// reference set's count.
    pub deficits: BTreeMap<String, (usize, usize)>,
}

/// Per problem, sample from the pool exactly as many pairs as the
/// reference set holds for that problem. When a pool runs short,
/// everything available is kept and the deficit reported.
pub fn subset_random_matched(
    pool: &PairSet,
    reference: &PairSet,
    seed: u64,
) -> (PairSet, MatchReport) {
    let targets = reference.per_problem_counts();
    let mut by_problem: BTreeMap<&str, Vec<&OptimizationPair>> = BTreeMap::new();
    for p in &pool.pairs {
        by_problem.entry(&p.problem_id).or_default().push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MatchReport::default();
    let mut pairs = Vec::new();
    for (problem, want) in &targets {
        let pool = by_problem.remove(problem.as_str()).unwrap_or_default();
        if pool.len() < *want {
            report.deficits.insert(problem.clone(), (*want, pool.len()));
            pairs.extend(pool.into_iter().cloned());
        } else {
            let mut idx = index_sample(&mut rng, pool.len(), *want).into_vec();
            idx.sort_unstable();
            pairs.extend(idx.into_iter().map(|i| pool[i].clone()));
        }
    }
    let mut provenance = Provenance::new("random_matched");
    provenance.seed = Some(seed);
    (PairSet { pairs, provenance }, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GedStratum {
    HighGed,
    LowGed,
    Random,
}

/// Per problem, keep the top/bottom `fraction` of pairs by GED, or a random
/// fraction. Every pair must already carry a GED annotation.
pub fn subset_ged_stratified(
    set: &PairSet,
    stratum: GedStratum,
    fraction: f64,
    seed: u64,
) -> Result<PairSet, PairingError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PairingError::InvalidPercent(fraction * 100.0));
    }
    for p in &set.pairs {
        if p.ged.is_none() {
            return Err(PairingError::MissingGed(p.pair_id()));
        }
    }
    let mut by_problem: BTreeMap<&str, Vec<&OptimizationPair>> = BTreeMap::new();
    for p in &set.pairs {
        by_problem.entry(&p.problem_id).or_default().push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for (_, mut group) in by_problem {
        let k = ((group.len() as f64) * fraction).ceil() as usize;
        let k = k.min(group.len());
        match stratum {
            GedStratum::HighGed | GedStratum::LowGed => {
                group.sort_by(|a, b| {
                    let ord = a.ged.unwrap().total_cmp(&b.ged.unwrap());
                    let ord = if stratum == GedStratum::HighGed {
                        ord.reverse()
                    } else {
                        ord
                    };
                    ord.then_with(|| a.slow_id.cmp(&b.slow_id))
                        .then_with(|| a.fast_id.cmp(&b.fast_id))
                });
                pairs.extend(group.into_iter().take(k).cloned());
            }
            GedStratum::Random => {
                let mut idx = index_sample(&mut rng, group.len(), k).into_vec();
                idx.sort_unstable();
                pairs.extend(idx.into_iter().map(|i| group[i].clone()));
            }
        }
    }
    let mut provenance = Provenance::new("ged_stratified")
        .with("stratum", format!("{stratum:?}"))
        .with("fraction", fraction);
    provenance.seed = Some(seed);
    Ok(PairSet { pairs, provenance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountFormulas {
    /// Sum over problems and users of C(n_u, 2).
    pub user_oriented_allforward: u64,
    /// Sum over problems of C(sum_u n_u, 2).
    pub problem_oriented_allforward: u64,
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pair-count scaling expressions computed from accepted-submission counts.
pub fn count_formulas(corpus: &Corpus) -> CountFormulas {
    let mut user_total = 0u64;
    let mut problem_total = 0u64;
    for problem_id in corpus.problems.keys() {
        let mut sum_n = 0u64;
        for user in users_of(corpus, problem_id) {
            let n_u = valid_trajectory(corpus, problem_id, &user)
                .map(|t| t.len() as u64)
                .unwrap_or(0);
            user_total += choose2(n_u);
            sum_n += n_u;
        }
        problem_total += choose2(sum_n);
    }
    CountFormulas {
        user_oriented_allforward: user_total,
        problem_oriented_allforward: problem_total,
    }
}

// ---------------------------------------------------------------------------
// External interface: PairSet JSONL + provenance sidecar
// ---------------------------------------------------------------------------

pub fn provenance_sidecar_path(pairs_path: &Path) -> PathBuf {
    let mut p = pairs_path.as_os_str().to_owned();
    p.push(".provenance.json");
    PathBuf::from(p)
}

pub fn write_jsonl(set: &PairSet, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for pair in &set.pairs {
        serde_json::to_writer(&mut w, pair)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    fs::write(
        provenance_sidecar_path(path),
        serde_json::to_string_pretty(&set.provenance)?,
    )?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<PairSet, PairingError> {
    let file = fs::File::open(path).map_err(|e| PairingError::Unreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PairingError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: OptimizationPair =
            serde_json::from_str(&line).map_err(|e| PairingError::BadRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        pairs.push(pair);
    }
    let provenance = fs::read_to_string(provenance_sidecar_path(path))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or_else(|| Provenance::new("loaded"));
    Ok(PairSet { pairs, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::corpus_from;
    use crate::corpus::Status::{Accepted, Rejected};
    use proptest::prelude::*;

    fn speeds(set: &PairSet) -> Vec<f64> {
        set.pairs.iter().map(|p| p.label_speedup).collect()
    }

    #[test]
    fn consecutive_user_pairs_follow_trajectory() {
        let corpus = corpus_from(&[
            ("p1", "alice", "a1", Accepted, 900.0, "src a1"),
            ("p1", "alice", "a2", Accepted, 400.0, "src a2"),
            ("p1", "alice", "a3", Accepted, 250.0, "src a3"),
        ]);
        let set = build_user_oriented(&corpus, PairMode::Consecutive, true);
        assert_eq!(set.len(), 2);
        assert_eq!(set.pairs[0].slow_id, "a1");
        assert_eq!(set.pairs[0].fast_id, "a2");
        assert_eq!(set.pairs[1].slow_id, "a2");
        assert_eq!(set.pairs[1].fast_id, "a3");
        assert!((set.pairs[0].label_speedup - 900.0 / 400.0).abs() < 1e-12);
    }

    #[test]
    fn single_submission_yields_no_pairs() {
        let corpus = corpus_from(&[("p1", "alice", "a1", Accepted, 900.0, "x")]);
        assert_eq!(
            build_user_oriented(&corpus, PairMode::Consecutive, true).len(),
            0
        );
        assert_eq!(
            build_problem_oriented(&corpus, PairMode::Consecutive).len(),
            0
        );
    }

    #[test]
    fn all_forward_user_counts() {
        // 2 users with 3 and 2 strictly improving submissions: C(3,2)+C(2,2)=3+1
        let corpus = corpus_from(&[
            ("p1", "a", "a1", Accepted, 900.0, "1"),
            ("p1", "a", "a2", Accepted, 400.0, "2"),
            ("p1", "a", "a3", Accepted, 250.0, "3"),
            ("p1", "b", "b1", Accepted, 700.0, "4"),
            ("p1", "b", "b2", Accepted, 100.0, "5"),
        ]);
        assert_eq!(
            build_user_oriented(&corpus, PairMode::AllForward, true).len(),
            4
        );
        // same corpus, problem-oriented all_forward: C(5,2)=10
        assert_eq!(
            build_problem_oriented(&corpus, PairMode::AllForward).len(),
            10
        );
    }

    #[test]
    fn problem_oriented_consecutive_merges_users() {
        let corpus = corpus_from(&[
            ("p1", "a", "A1", Accepted, 900.0, "1"),
            ("p1", "a", "A2", Accepted, 500.0, "2"),
            ("p1", "c", "C1", Accepted, 700.0, "3"),
            ("p1", "b", "B1", Accepted, 650.0, "4"),
        ]);
        let set = build_problem_oriented(&corpus, PairMode::Consecutive);
        let got: Vec<(String, String)> = set
            .pairs
            .iter()
            .map(|p| (p.slow_id.clone(), p.fast_id.clone()))
            .collect();
        assert_eq!(
            got,
            vec![
                ("A1".into(), "C1".into()),
                ("C1".into(), "B1".into()),
                ("B1".into(), "A2".into()),
            ]
        );
    }

    #[test]
    fn rejected_submissions_never_pair() {
        let corpus = corpus_from(&[
            ("p1", "a", "a1", Accepted, 900.0, "1"),
            ("p1", "a", "a2", Rejected, 400.0, "2"),
            ("p1", "a", "a3", Accepted, 250.0, "3"),
        ]);
        let set = build_user_oriented(&corpus, PairMode::Consecutive, true);
        assert_eq!(set.len(), 1);
        assert_eq!(set.pairs[0].fast_id, "a3");
    }

    #[test]
    fn ties_and_identical_sources_are_dropped() {
        let corpus = corpus_from(&[
            ("p1", "a", "a1", Accepted, 500.0, "same source"),
            ("p1", "b", "b1", Accepted, 500.0, "other source"),
            ("p1", "c", "c1", Accepted, 300.0, "same  source"),
        ]);
        let set = build_problem_oriented(&corpus, PairMode::AllForward);
        // (a1,b1) tied runtime -> excluded; (a1,c1) identical normalized source
        // -> excluded; only (b1,c1) remains
        assert_eq!(set.len(), 1);
        assert_eq!(set.pairs[0].slow_id, "b1");
        assert_eq!(set.pairs[0].fast_id, "c1");
    }

    #[test]
    fn zero_runtime_fast_member_is_unusable() {
        let corpus = corpus_from(&[
            ("p1", "a", "a1", Accepted, 500.0, "1"),
            ("p1", "a", "a2", Accepted, 0.0, "2"),
        ]);
        assert_eq!(
            build_user_oriented(&corpus, PairMode::Consecutive, true).len(),
            0
        );
    }

    #[test]
    fn consecutive_without_require_faster_keeps_regressions() {
        let corpus = corpus_from(&[
            ("p1", "a", "a1", Accepted, 400.0, "1"),
            ("p1", "a", "a2", Accepted, 900.0, "2"),
        ]);
        assert_eq!(
            build_user_oriented(&corpus, PairMode::Consecutive, true).len(),
            0
        );
        let relaxed = build_user_oriented(&corpus, PairMode::Consecutive, false);
        assert_eq!(relaxed.len(), 1);
        assert!(relaxed.pairs[0].label_speedup < 1.0);
    }

    #[test]
    fn top_speedup_selection() {
        let corpus = corpus_from(&[
            ("p1", "a", "s0", Accepted, 900.0, "0"),
            ("p1", "b", "s1", Accepted, 100.0, "1"),
            ("p1", "c", "s2", Accepted, 128.0, "2"),
            ("p1", "d", "s3", Accepted, 180.0, "3"),
            ("p1", "e", "s4", Accepted, 300.0, "4"),
            ("p1", "f", "s5", Accepted, 450.0, "5"),
        ]);
        let set = build_problem_oriented(&corpus, PairMode::Consecutive);
        assert_eq!(set.len(), 5);
        let mut sorted = speeds(&set);
        sorted.sort_by(|a, b| b.total_cmp(a));

        let mut quota = BTreeMap::new();
        quota.insert("p1".to_string(), 2usize);
        let (top, report) = select_top_speedup(&set, &quota);
        assert_eq!(top.len(), 2);
        let mut got = speeds(&top);
        got.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(got, sorted[..2].to_vec());
        assert!(report.unknown_problems.is_empty());
        assert!(report.shortfalls.is_empty());

        quota.insert("p1".to_string(), 0);
        assert_eq!(select_top_speedup(&set, &quota).0.len(), 0);

        quota.insert("p1".to_string(), 99);
        quota.insert("ghost".to_string(), 1);
        let (all, report) = select_top_speedup(&set, &quota);
        assert_eq!(all.len(), set.len());
        assert_eq!(report.shortfalls["p1"], (99, 5));
        assert_eq!(report.unknown_problems, vec!["ghost".to_string()]);
    }

    fn dummy_set(n: usize) -> PairSet {
        let pairs = (0..n)
            .map(|i| OptimizationPair {
                problem_id: "p1".into(),
                slow_id: format!("s{i}"),
                fast_id: format!("f{i}"),
                slow_src: format!("slow {i}"),
                fast_src: format!("fast {i}"),
                perspective: Perspective::ProblemOriented,
                label_speedup: 2.0 + i as f64,
                ged: Some(i as f64),
            })
            .collect();
        PairSet {
            pairs,
            provenance: Provenance::new("test"),
        }
    }

    #[test]
    fn percent_subsetting() {
        let set = dummy_set(10);
        let s30 = subset_percent(&set, 30.0, 7).unwrap();
        assert_eq!(s30.len(), 3);
        let again = subset_percent(&set, 30.0, 7).unwrap();
        assert_eq!(s30, again);
        let full = subset_percent(&set, 100.0, 7).unwrap();
        assert_eq!(full.pairs, set.pairs);
        assert!(subset_percent(&set, 0.0, 7).is_err());
        assert!(subset_percent(&set, 101.0, 7).is_err());
    }

    #[test]
    fn random_matched_subsetting() {
        let pool = dummy_set(10);
        let mut reference = dummy_set(4);
        for p in &mut reference.pairs {
            p.perspective = Perspective::UserOriented;
        }
        let (sampled, report) = subset_random_matched(&pool, &reference, 3);
        assert_eq!(sampled.len(), 4);
        assert!(report.deficits.is_empty());
        let (again, _) = subset_random_matched(&pool, &reference, 3);
        assert_eq!(sampled, again);

        let small_pool = dummy_set(2);
        let (sampled, report) = subset_random_matched(&small_pool, &reference, 3);
        assert_eq!(sampled.len(), 2);
        assert_eq!(report.deficits["p1"], (4, 2));
    }

    #[test]
    fn ged_stratified_subsetting() {
        let set = dummy_set(10); // ged = 0..9
        let high = subset_ged_stratified(&set, GedStratum::HighGed, 0.4, 1).unwrap();
        assert_eq!(high.len(), 4);
        let mut geds: Vec<f64> = high.pairs.iter().map(|p| p.ged.unwrap()).collect();
        geds.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(geds, vec![6.0, 7.0, 8.0, 9.0]);

        let low = subset_ged_stratified(&set, GedStratum::LowGed, 0.4, 1).unwrap();
        let low_ids: Vec<String> = low.pairs.iter().map(|p| p.pair_id()).collect();
        assert!(high.pairs.iter().all(|p| !low_ids.contains(&p.pair_id())));

        let r1 = subset_ged_stratified(&set, GedStratum::Random, 0.4, 9).unwrap();
        let r2 = subset_ged_stratified(&set, GedStratum::Random, 0.4, 9).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.len(), 4);

        let mut missing = set.clone();
        missing.pairs[3].ged = None;
        assert!(matches!(
            subset_ged_stratified(&missing, GedStratum::HighGed, 0.4, 1),
            Err(PairingError::MissingGed(_))
        ));
    }

    #[test]
    fn count_formula_examples() {
        let corpus = corpus_from(&[
            ("p1", "a", "a1", Accepted, 30.0, "1"),
            ("p1", "a", "a2", Accepted, 20.0, "2"),
            ("p1", "a", "a3", Accepted, 10.0, "3"),
            ("p1", "b", "b1", Accepted, 25.0, "4"),
            ("p1", "b", "b2", Accepted, 15.0, "5"),
        ]);
        let counts = count_formulas(&corpus);
        assert_eq!(counts.user_oriented_allforward, 4);
        assert_eq!(counts.problem_oriented_allforward, 10);

        let singles = corpus_from(&[
            ("p1", "a", "a1", Accepted, 30.0, "1"),
            ("p1", "b", "b1", Accepted, 20.0, "2"),
            ("p2", "c", "c1", Accepted, 10.0, "3"),
        ]);
        let counts = count_formulas(&singles);
        assert_eq!(counts.user_oriented_allforward, 0);
        // p1 has 2 accepted overall -> C(2,2)=1
        assert_eq!(counts.problem_oriented_allforward, 1);
    }

    #[test]
    fn order_of_magnitude_gap_at_ten_users() {
        let mut rows = Vec::new();
        let sources: Vec<String> = (0..30).map(|i| format!("src {i}")).collect();
        let ids: Vec<String> = (0..30).map(|i| format!("s{i}")).collect();
        let users: Vec<String> = (0..10).map(|i| format!("u{i}")).collect();
        for (u, user) in users.iter().enumerate() {
            for s in 0..3 {
                let k = u * 3 + s;
                rows.push((
                    "p1",
                    user.as_str(),
                    ids[k].as_str(),
                    Accepted,
                    1000.0 - k as f64,
                    sources[k].as_str(),
                ));
            }
        }
        let corpus = corpus_from(&rows);
        let counts = count_formulas(&corpus);
        assert_eq!(counts.user_oriented_allforward, 30);
        assert_eq!(counts.problem_oriented_allforward, 435);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = dummy_set(5);
        let path = dir.path().join("pairs.jsonl");
        write_jsonl(&set, &path).unwrap();
        let loaded = read_jsonl(&path).unwrap();
        assert_eq!(loaded.pairs, set.pairs);
        assert_eq!(loaded.provenance, set.provenance);
    }

    // Random corpora with globally distinct runtimes and per-user strictly
    // improving trajectories; pair counts must match the closed formulas.
    proptest! {
        #[test]
        fn all_forward_counts_match_formulas(user_sizes in prop::collection::vec(1usize..6, 1..6)) {
            let total: usize = user_sizes.iter().sum();
            let runtimes: Vec<f64> = (0..total).map(|i| 1000.0 - i as f64).collect();
            let mut rows = Vec::new();
            let mut k = 0;
            let users: Vec<String> = (0..user_sizes.len()).map(|u| format!("u{u}")).collect();
            let ids: Vec<String> = (0..total).map(|i| format!("s{i}")).collect();
            let sources: Vec<String> = (0..total).map(|i| format!("src {i}")).collect();
            for (u, n) in user_sizes.iter().enumerate() {
                for _ in 0..*n {
                    rows.push(("p1", users[u].as_str(), ids[k].as_str(), Accepted, runtimes[k], sources[k].as_str()));
                    k += 1;
                }
            }
            // deal runtimes so each user's trajectory strictly improves:
            // within a user the indices are increasing, so runtimes decrease
            let corpus = corpus_from(&rows);
            let counts = count_formulas(&corpus);
            let user_pairs = build_user_oriented(&corpus, PairMode::AllForward, true);
            let problem_pairs = build_problem_oriented(&corpus, PairMode::AllForward);
            prop_assert_eq!(user_pairs.len() as u64, counts.user_oriented_allforward);
            prop_assert_eq!(problem_pairs.len() as u64, counts.problem_oriented_allforward);
            // every emitted pair is strictly improving
            for p in user_pairs.pairs.iter().chain(problem_pairs.pairs.iter()) {
                prop_assert!(p.label_speedup > 1.0);
            }
        }
    }
}
