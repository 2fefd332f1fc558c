//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeMap;

use optbench::corpus::{Corpus, Status, Submission};

/// The slow-but-correct program of the case-study fixture: counts array
/// elements >= k after a descending sort.
pub const CASE1_SLOW: &str = r#"#include <stdio.h>
#include <algorithm>
using namespace std;
int n, k, a[100005];
int main() {
    scanf("%d %d", &n, &k);
    for (int i = 0; i < n; i++) scanf("%d", &a[i]);
    sort(a, a + n, greater<int>());
    int count = 0;
    for (int i = 0; i < n; i++) if (a[i] >= k) count++;
    printf("%d\n", count);
    return 0;
}
"#;

/// Optimized but incorrect candidate: upper_bound counts strictly-greater
/// elements, so inputs containing k itself come out short.
pub const CASE1_CANDIDATE: &str = r#"#include <stdio.h>
#include <algorithm>
using namespace std;
int n, k, a[100005];
int main() {
    scanf("%d %d", &n, &k);
    for (int i = 0; i < n; i++) scanf("%d", &a[i]);
    sort(a, a + n);
    printf("%d\n", (int)(a + n - upper_bound(a, a + n, k)));
    return 0;
}
"#;

/// The corrected optimized version (lower_bound fixes the offset).
pub const CASE1_CORRECTED: &str = r#"#include <stdio.h>
#include <algorithm>
using namespace std;
int n, k, a[100005];
int main() {
    scanf("%d %d", &n, &k);
    for (int i = 0; i < n; i++) scanf("%d", &a[i]);
    sort(a, a + n);
    printf("%d\n", (int)(a + n - lower_bound(a, a + n, k)));
    return 0;
}
"#;

pub const CASE1_INPUTS: [&str; 3] = ["5 10\n15 8 12 10 20", "4 5\n1 2 3 4", "6 7\n7 7 7 7 7 7"];
pub const CASE1_OUTPUTS: [&str; 3] = ["4", "0", "6"];

/// Stage-1 reply shaped like the case-study transcript.
pub const CASE1_STAGE1_REPLY: &str = r#"**Explanation:**
This code counts how many elements in an array are greater than or equal to a given value k. Here's the breakdown:

Input: Reads n (array size) and k (threshold value), followed by an array h of size n.
Sorting: Sorts the array h in descending order.
Counting: Iterates through the sorted array and counts how many elements are greater than or equal to k.
Output: Prints the count.

**Test Inputs:**
Test case 1 input:
5 10
15 8 12 10 20

Test case 2 input:
4 5
1 2 3 4

Test case 3 input:
6 7
7 7 7 7 7 7
"#;

pub fn case1_refine_reply() -> String {
    format!(
        "### Your corrected code version:\n```cpp\n{}```\n",
        CASE1_CORRECTED
    )
}

/// Build a corpus in memory from (problem, user, submission_id, status,
/// runtime_ms, source) rows, assigning seq order per user.
pub fn corpus_from(rows: &[(&str, &str, &str, Status, f64, String)]) -> Corpus {
    let mut corpus = Corpus::default();
    let mut per_user: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (p, u, id, st, rt, src) in rows {
        let seq = per_user.entry((p.to_string(), u.to_string())).or_insert(0);
        corpus
            .problems
            .entry(p.to_string())
            .or_default()
            .push(Submission {
                problem_id: p.to_string(),
                user_id: u.to_string(),
                submission_id: id.to_string(),
                seq_index: *seq,
                status: *st,
                runtime_ms: *rt,
                language: "cpp".into(),
                source: src.clone(),
            });
        *seq += 1;
    }
    corpus
}

/// A sum program whose source embeds `marker` (used to key scripted mock
/// replies to one job).
pub fn sum_slow_with_marker(marker: &str) -> String {
    format!(
        r#"#include <cstdio>
int main() {{
    long long {marker} = 0;
    long long a, b;
    if (scanf("%lld %lld", &a, &b) != 2) return 1;
    long long s = {marker};
    for (long long i = 0; i < b; i++) s += 1;
    printf("%lld\n", a + s);
    return 0;
}}
"#
    )
}

/// A broken candidate for the sum problem, off by `offset`, embedding
/// `marker`.
pub fn sum_broken_with_marker(marker: &str, offset: i64) -> String {
    format!(
        r#"#include <cstdio>
int main() {{
    long long {marker} = {offset};
    long long a, b;
    if (scanf("%lld %lld", &a, &b) != 2) return 1;
    printf("%lld\n", a + b + {marker});
    return 0;
}}
"#
    )
}

pub const SUM_FIXED: &str = r#"#include <cstdio>
int main() {
    long long a, b;
    if (scanf("%lld %lld", &a, &b) != 2) return 1;
    printf("%lld\n", a + b);
    return 0;
}
"#;

pub fn fenced(code: &str) -> String {
    format!("```cpp\n{code}```\n")
}

/// Stage-1 style reply offering the three given inputs.
pub fn stage1_reply(inputs: &[&str]) -> String {
    let mut out = String::from(
        "**Explanation:**\nreads two integers and prints their sum\n\n**Test Inputs:**\n",
    );
    for (i, input) in inputs.iter().enumerate() {
        out.push_str(&format!("Test case {} input:\n{}\n\n", i + 1, input));
    }
    out
}

/// Direct-test-generation style reply with complete (input, output) cases.
pub fn direct_gen_reply(cases: &[(&str, &str)]) -> String {
    let mut out = String::from(
        "**Explanation:**\nreads two integers and prints their sum\n\n**Test case:**\n",
    );
    for (i, (input, output)) in cases.iter().enumerate() {
        out.push_str(&format!(
            "Test case {} input:\n{}\nTest case {} output:\n{}\n\n",
            i + 1,
            input,
            i + 1,
            output
        ));
    }
    out
}
