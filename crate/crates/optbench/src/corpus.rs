//! Ingest, validate, and index judge-style submission archives into a
//! problem-keyed store. Malformed records go to a rejects report instead of
//! being dropped silently.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unreadable archive {path}: {reason}")]
    UnreadableArchive { path: PathBuf, reason: String },
    #[error("unknown problem: {0}")]
    UnknownProblem(String),
    #[error("unreadable test set directory {path}: {reason}")]
    UnreadableTests { path: PathBuf, reason: String },
}

/// Judge verdict. Anything that is not an accepted solution is treated as
/// not part of a valid trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Accepted,
    Rejected,
    Other,
}

impl Status {
    fn parse(s: &str) -> Status {
        match s {
            "Accepted" => Status::Accepted,
            "Rejected" => Status::Rejected,
            _ => Status::Other,
        }
    }
}

/// One judge submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub problem_id: String,
    pub user_id: String,
    pub submission_id: String,
    /// Per-user chronological order, 0-based, contiguous after ingestion.
    pub seq_index: usize,
    pub status: Status,
    /// Judge-marked runtime in milliseconds. This is the *label* runtime
    /// used for pairing, distinct from sandbox-measured runtime.
    pub runtime_ms: f64,
    pub language: String,
    pub source: String,
}

/// Verification status of a test case's expected output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestStatus {
    /// Output produced by actually executing the slow program on the input.
    Anchored,
    /// Output invented by an LLM; unverified.
    Synthetic,
    /// Ground-truth test shipped with the problem.
    Trusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub input: String,
    pub expected: String,
    pub status: TestStatus,
}

/// Immutable problem-keyed store of submissions and trusted test sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub problems: BTreeMap<String, Vec<Submission>>,
    pub testsets: BTreeMap<String, Vec<TestCase>>,
}

impl Corpus {
    pub fn submission_count(&self) -> usize {
        self.problems.values().map(|v| v.len()).sum()
    }

    pub fn tests_for(&self, problem_id: &str) -> Option<&[TestCase]> {
        self.testsets.get(problem_id).map(|v| v.as_slice())
    }
}

/// A record that failed schema validation, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveFormat {
    Jsonl,
    Csv,
}

/// Raw archive record as it appears on disk. All fields optional so that
/// schema violations can be reported precisely.
#[derive(Debug, Deserialize)]
struct RawRecord {
    problem_id: Option<String>,
    user_id: Option<String>,
    submission_id: Option<String>,
    seq: Option<i64>,
    status: Option<String>,
    runtime_ms: Option<f64>,
    language: Option<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    source_path: Option<String>,
}

/// Parse an archive into a [`Corpus`]. Submissions are grouped per problem,
/// each user's submissions sorted by their `seq` field with `seq_index`
/// reassigned contiguously from 0. Malformed records are collected into the
/// rejects report.
pub fn ingest(archive_path: &Path, format: ArchiveFormat) -> Result<IngestReport, CorpusError> {
    let file = fs::File::open(archive_path).map_err(|e| CorpusError::UnreadableArchive {
        path: archive_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let base_dir = archive_path.parent().unwrap_or(Path::new("."));

    let mut rejects = Vec::new();
    // (problem, user) -> [(seq, submission)]
    let mut staged: BTreeMap<(String, String), Vec<(i64, Submission)>> = BTreeMap::new();
    let mut seen_ids: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();

    #[allow(clippy::too_many_arguments)]
    fn handle(
        line_no: usize,
        raw: RawRecord,
        raw_text: String,
        base_dir: &Path,
        staged: &mut BTreeMap<(String, String), Vec<(i64, Submission)>>,
        seen_ids: &mut BTreeMap<String, std::collections::BTreeSet<String>>,
        rejects: &mut Vec<Reject>,
    ) {
        match validate(raw, base_dir) {
            Ok((seq, sub)) => {
                let ids = seen_ids.entry(sub.problem_id.clone()).or_default();
                if !ids.insert(sub.submission_id.clone()) {
                    rejects.push(Reject {
                        line: line_no,
                        reason: format!(
                            "duplicate submission_id {} within problem {}",
                            sub.submission_id, sub.problem_id
                        ),
                        raw: raw_text,
                    });
                    return;
                }
                staged
                    .entry((sub.problem_id.clone(), sub.user_id.clone()))
                    .or_default()
                    .push((seq, sub));
            }
            Err(reason) => rejects.push(Reject {
                line: line_no,
                reason,
                raw: raw_text,
            }),
        }
    }

    match format {
        ArchiveFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| CorpusError::UnreadableArchive {
                    path: archive_path.to_path_buf(),
                    reason: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RawRecord>(&line) {
                    Ok(raw) => handle(
                        i + 1,
                        raw,
                        line,
                        base_dir,
                        &mut staged,
                        &mut seen_ids,
                        &mut rejects,
                    ),
                    Err(e) => rejects.push(Reject {
                        line: i + 1,
                        reason: format!("invalid JSON: {e}"),
                        raw: line,
                    }),
                }
            }
        }
        ArchiveFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(file);
            for (i, rec) in rdr.deserialize::<RawRecord>().enumerate() {
                match rec {
                    Ok(raw) => handle(
                        i + 2,
                        raw,
                        String::new(),
                        base_dir,
                        &mut staged,
                        &mut seen_ids,
                        &mut rejects,
                    ),
                    Err(e) => rejects.push(Reject {
                        line: i + 2,
                        reason: format!("invalid CSV row: {e}"),
                        raw: String::new(),
                    }),
                }
            }
        }
    }

    // Sort each user's submissions chronologically and reassign seq_index.
    let mut corpus = Corpus::default();
    for ((problem, _user), mut subs) in staged {
        subs.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| a.1.submission_id.cmp(&b.1.submission_id))
        });
        let entry = corpus.problems.entry(problem).or_default();
        for (idx, (_, mut sub)) in subs.into_iter().enumerate() {
            sub.seq_index = idx;
            entry.push(sub);
        }
    }

    Ok(IngestReport { corpus, rejects })
}

fn validate(raw: RawRecord, base_dir: &Path) -> Result<(i64, Submission), String> {
    let problem_id = raw.problem_id.ok_or("missing problem_id")?;
    let user_id = raw.user_id.ok_or("missing user_id")?;
    let submission_id = raw.submission_id.ok_or("missing submission_id")?;
    let seq = raw.seq.ok_or("missing seq")?;
    let status = Status::parse(&raw.status.ok_or("missing status")?);
    let runtime_ms = raw.runtime_ms.ok_or("missing runtime_ms")?;
    if !runtime_ms.is_finite() || runtime_ms < 0.0 {
        return Err(format!(
            "runtime_ms must be finite and >= 0, got {runtime_ms}"
        ));
    }
    let language = raw.language.unwrap_or_default();
    let source = match (raw.source, raw.source_path) {
        (Some(src), _) => src,
        (None, Some(rel)) => fs::read_to_string(base_dir.join(&rel))
            .map_err(|e| format!("unreadable source_path {rel}: {e}"))?,
        (None, None) => String::new(),
    };
    if status == Status::Accepted && source.is_empty() {
        return Err("accepted submission with empty source".into());
    }
    Ok((
        seq,
        Submission {
            problem_id,
            user_id,
            submission_id,
            seq_index: 0,
            status,
            runtime_ms,
            language,
            source,
        },
    ))
}

/// Load trusted test sets from the layout `dir/<problem_id>/<case>.in` +
/// `<case>.out`, attaching them to the corpus. Returns the number of cases
/// loaded.
pub fn load_testsets(corpus: &mut Corpus, dir: &Path) -> Result<usize, CorpusError> {
    let unreadable = |p: &Path, e: std::io::Error| CorpusError::UnreadableTests {
        path: p.to_path_buf(),
        reason: e.to_string(),
    };
    let mut loaded = 0;
    for prob_entry in fs::read_dir(dir).map_err(|e| unreadable(dir, e))? {
        let prob_entry = prob_entry.map_err(|e| unreadable(dir, e))?;
        if !prob_entry.path().is_dir() {
            continue;
        }
        let problem_id = prob_entry.file_name().to_string_lossy().to_string();
        let mut cases = Vec::new();
        let mut ins: Vec<PathBuf> = fs::read_dir(prob_entry.path())
            .map_err(|e| unreadable(&prob_entry.path(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "in").unwrap_or(false))
            .collect();
        ins.sort();
        for in_path in ins {
            let out_path = in_path.with_extension("out");
            if !out_path.exists() {
                continue;
            }
            let input = fs::read_to_string(&in_path).map_err(|e| unreadable(&in_path, e))?;
            let expected = fs::read_to_string(&out_path).map_err(|e| unreadable(&out_path, e))?;
            cases.push(TestCase {
                id: in_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_default(),
                input,
                expected,
                status: TestStatus::Trusted,
            });
            loaded += 1;
        }
        if !cases.is_empty() {
            corpus.testsets.insert(problem_id, cases);
        }
    }
    Ok(loaded)
}

/// The accepted submissions of one user for one problem, in submission order.
pub fn valid_trajectory<'a>(
    corpus: &'a Corpus,
    problem_id: &str,
    user_id: &str,
) -> Result<Vec<&'a Submission>, CorpusError> {
    let subs = corpus
        .problems
        .get(problem_id)
        .ok_or_else(|| CorpusError::UnknownProblem(problem_id.to_string()))?;
    let mut traj: Vec<&Submission> = subs
        .iter()
        .filter(|s| s.user_id == user_id && s.status == Status::Accepted)
        .collect();
    traj.sort_by_key(|s| s.seq_index);
    Ok(traj)
}

/// All users with at least one submission for the problem, sorted.
pub fn users_of(corpus: &Corpus, problem_id: &str) -> Vec<String> {
    let mut users: Vec<String> = corpus
        .problems
        .get(problem_id)
        .map(|subs| subs.iter().map(|s| s.user_id.clone()).collect())
        .unwrap_or_default();
    users.sort();
    users.dedup();
    users
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_jsonl(dir: &Path, lines: &[&str]) -> PathBuf {
        let path = dir.join("archive.jsonl");
        let mut f = fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn ingest_rejects_record_missing_runtime() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(
            dir.path(),
            &[
                r#"{"problem_id":"p1","user_id":"u1","submission_id":"s1","seq":0,"status":"Accepted","runtime_ms":900,"language":"cpp","source":"int main(){}"}"#,
                r#"{"problem_id":"p1","user_id":"u1","submission_id":"s2","seq":1,"status":"Accepted","language":"cpp","source":"int main(){}"}"#,
                r#"{"problem_id":"p1","user_id":"u2","submission_id":"s3","seq":0,"status":"Rejected","runtime_ms":100,"language":"cpp","source":"x"}"#,
            ],
        );
        let report = ingest(&path, ArchiveFormat::Jsonl).unwrap();
        assert_eq!(report.corpus.submission_count(), 2);
        assert_eq!(report.rejects.len(), 1);
        assert!(report.rejects[0].reason.contains("runtime_ms"));
    }

    #[test]
    fn ingest_empty_archive() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(dir.path(), &[]);
        let report = ingest(&path, ArchiveFormat::Jsonl).unwrap();
        assert!(report.corpus.problems.is_empty());
        assert!(report.rejects.is_empty());
    }

    #[test]
    fn ingest_missing_file_is_unreadable() {
        let err = ingest(
            Path::new("/nonexistent/archive.jsonl"),
            ArchiveFormat::Jsonl,
        );
        assert!(matches!(err, Err(CorpusError::UnreadableArchive { .. })));
    }

    #[test]
    fn ingest_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(
            dir.path(),
            &[
                r#"{"problem_id":"p1","user_id":"u1","submission_id":"s2","seq":5,"status":"Accepted","runtime_ms":400,"language":"cpp","source":"b"}"#,
                r#"{"problem_id":"p1","user_id":"u1","submission_id":"s1","seq":2,"status":"Accepted","runtime_ms":900,"language":"cpp","source":"a"}"#,
            ],
        );
        let a = ingest(&path, ArchiveFormat::Jsonl).unwrap();
        let b = ingest(&path, ArchiveFormat::Jsonl).unwrap();
        assert_eq!(a.corpus, b.corpus);
        // seq_index reassigned contiguously in seq order
        let subs = &a.corpus.problems["p1"];
        assert_eq!(subs[0].submission_id, "s1");
        assert_eq!(subs[0].seq_index, 0);
        assert_eq!(subs[1].seq_index, 1);
    }

    #[test]
    fn duplicate_submission_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(
            dir.path(),
            &[
                r#"{"problem_id":"p1","user_id":"u1","submission_id":"s1","seq":0,"status":"Accepted","runtime_ms":900,"language":"cpp","source":"a"}"#,
                r#"{"problem_id":"p1","user_id":"u2","submission_id":"s1","seq":0,"status":"Accepted","runtime_ms":400,"language":"cpp","source":"b"}"#,
            ],
        );
        let report = ingest(&path, ArchiveFormat::Jsonl).unwrap();
        assert_eq!(report.corpus.submission_count(), 1);
        assert_eq!(report.rejects.len(), 1);
    }

    #[test]
    fn source_path_resolves_relative_to_archive() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("code.cpp"), "int main(){return 0;}").unwrap();
        let path = write_jsonl(
            dir.path(),
            &[
                r#"{"problem_id":"p1","user_id":"u1","submission_id":"s1","seq":0,"status":"Accepted","runtime_ms":1,"language":"cpp","source":null,"source_path":"code.cpp"}"#,
            ],
        );
        let report = ingest(&path, ArchiveFormat::Jsonl).unwrap();
        assert_eq!(
            report.corpus.problems["p1"][0].source,
            "int main(){return 0;}"
        );
    }

    #[test]
    fn trajectory_filters_and_keeps_order() {
        let corpus = testutil::corpus_from(&[
            ("p1", "alice", "a1", Status::Accepted, 900.0, "s1"),
            ("p1", "alice", "a2", Status::Rejected, 0.0, "s2"),
            ("p1", "alice", "a3", Status::Accepted, 400.0, "s3"),
        ]);
        let traj = valid_trajectory(&corpus, "p1", "alice").unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj[0].submission_id, "a1");
        assert_eq!(traj[1].submission_id, "a3");

        assert!(valid_trajectory(&corpus, "p1", "nobody")
            .unwrap()
            .is_empty());
        assert!(matches!(
            valid_trajectory(&corpus, "p9", "alice"),
            Err(CorpusError::UnknownProblem(_))
        ));
    }

    proptest::proptest! {
        // trajectory length always equals the user's accepted-submission count
        #[test]
        fn trajectory_length_matches_accepted_count(
            statuses in proptest::collection::vec(0u8..3, 1..30),
            users in proptest::collection::vec(0u8..4, 1..30),
        ) {
            let n = statuses.len().min(users.len());
            let mut rows = Vec::new();
            let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let unames: Vec<String> = (0..n).map(|i| format!("u{}", users[i])).collect();
            for i in 0..n {
                let st = match statuses[i] {
                    0 => Status::Accepted,
                    1 => Status::Rejected,
                    _ => Status::Other,
                };
                rows.push(("p1", unames[i].as_str(), ids[i].as_str(), st, 10.0, "src"));
            }
            let corpus = testutil::corpus_from(&rows);
            for u in users_of(&corpus, "p1") {
                let expected = rows
                    .iter()
                    .filter(|(_, user, _, st, _, _)| *user == u && *st == Status::Accepted)
                    .count();
                let traj = valid_trajectory(&corpus, "p1", &u).unwrap();
                proptest::prop_assert_eq!(traj.len(), expected);
                // and it comes back in chronological order
                for w in traj.windows(2) {
                    proptest::prop_assert!(w[0].seq_index < w[1].seq_index);
                }
            }
        }
    }

    #[test]
    fn csv_ingest_matches_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("archive.csv");
        fs::write(
            &csv_path,
            "problem_id,user_id,submission_id,seq,status,runtime_ms,language,source,source_path\n\
             p1,u1,s1,0,Accepted,900,cpp,int main(){},\n\
             p1,u1,s2,1,Weird,400,cpp,x,\n",
        )
        .unwrap();
        let report = ingest(&csv_path, ArchiveFormat::Csv).unwrap();
        assert_eq!(report.corpus.submission_count(), 2);
        // unknown status strings map to Other
        assert_eq!(report.corpus.problems["p1"][1].status, Status::Other);
    }

    #[test]
    fn testset_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("p1");
        fs::create_dir_all(&p1).unwrap();
        fs::write(p1.join("t0.in"), "1 2\n").unwrap();
        fs::write(p1.join("t0.out"), "3\n").unwrap();
        fs::write(p1.join("orphan.in"), "9\n").unwrap(); // no .out -> skipped
        let mut corpus = Corpus::default();
        let n = load_testsets(&mut corpus, dir.path()).unwrap();
        assert_eq!(n, 1);
        let tests = corpus.tests_for("p1").unwrap();
        assert_eq!(tests[0].input, "1 2\n");
        assert_eq!(tests[0].status, TestStatus::Trusted);
    }
}
