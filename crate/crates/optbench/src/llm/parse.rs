//! Heuristic parsing of LLM replies into labeled sections, test-input
//! blocks, and code. Unparsable replies surface as structured errors that
//! pipelines count as stage failures.

use std::collections::BTreeMap;

use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SectionLabel {
    Program,
    Explanation,
    TestInputs,
    Feedback,
    Code,
    Output,
    Strategy,
    Category,
    Other(String),
}

impl SectionLabel {
    pub fn name(&self) -> String {
        match self {
            SectionLabel::Program => "program".into(),
            SectionLabel::Explanation => "explanation".into(),
            SectionLabel::TestInputs => "test_inputs".into(),
            SectionLabel::Feedback => "feedback".into(),
            SectionLabel::Code => "code".into(),
            SectionLabel::Output => "output".into(),
            SectionLabel::Strategy => "strategy".into(),
            SectionLabel::Category => "category".into(),
            SectionLabel::Other(s) => s.clone(),
        }
    }
}

fn normalize(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Canonical label for a heading, tolerant to the synonyms seen across the
/// prompt set ("Test case Inputs" / "Testcase Inputs" / "Test Inputs", ...).
fn canonical(label: &str) -> SectionLabel {
    match normalize(label).as_str() {
        "program" | "slowerprogram" | "slowprogram" | "incorrectprogram" => SectionLabel::Program,
        "explanation" => SectionLabel::Explanation,
        "testcaseinputs" | "testcaseinput" | "testinputs" | "testinput" | "testcases"
        | "testcase" | "tests" | "verifiedtestcases" => SectionLabel::TestInputs,
        "feedback" | "feedbackfromexecution" | "executionfeedback" => SectionLabel::Feedback,
        "code"
        | "optimizedversion"
        | "optimizedcode"
        | "optimizedprogram"
        | "revisedprogram"
        | "revisedcode"
        | "correctedcode"
        | "correctedcodeversion"
        | "correctedversion"
        | "yourcorrectedcodeversion"
        | "fixedcode" => SectionLabel::Code,
        "output" | "predictedoutput" | "expectedoutput" => SectionLabel::Output,
        "strategy" => SectionLabel::Strategy,
        "category" => SectionLabel::Category,
        other => SectionLabel::Other(other.to_string()),
    }
}

/// A reply split into heading-delimited sections.
#[derive(Debug, Clone, Default)]
pub struct ParsedResponse {
    pub sections: BTreeMap<SectionLabel, Vec<String>>,
    pub raw: String,
}

impl ParsedResponse {
    pub fn first(&self, label: &SectionLabel) -> Option<&str> {
        self.sections
            .get(label)
            .and_then(|v| v.iter().find(|s| !s.trim().is_empty()))
            .map(|s| s.as_str())
    }

    pub fn found_labels(&self) -> Vec<String> {
        self.sections.keys().map(|l| l.name()).collect()
    }
}

/// Heading forms recognized: `### Label:`, `**Label:**`, and a bare
/// `Label:` line whose label is a known synonym. Numbered markers like
/// "Test case 1 input:" are content, not headings.
fn heading_of(line: &str) -> Option<SectionLabel> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return None;
    }
    let inner = if let Some(rest) = trimmed.strip_prefix('#') {
        let rest = rest.trim_start_matches('#').trim();
        Some(rest.trim_end_matches(':').trim())
    } else if trimmed.starts_with("**") {
        let rest = trimmed
            .trim_start_matches("**")
            .trim_end_matches(':')
            .trim();
        let rest = rest.trim_end_matches("**").trim_end_matches(':').trim();
        Some(rest)
    } else {
        // plain "Label:" only for known labels without digits
        trimmed.strip_suffix(':').filter(|stripped| {
            stripped
                .chars()
                .all(|c| c.is_ascii_alphabetic() || c == ' ')
                && !matches!(canonical(stripped), SectionLabel::Other(_))
        })
    };
    let inner = inner?;
    if inner.is_empty() {
        return None;
    }
    Some(canonical(inner))
}

fn trim_block(lines: &[String]) -> String {
    let mut start = 0;
    let mut end = lines.len();
    while start < end && lines[start].trim().is_empty() {
        start += 1;
    }
    while end > start && lines[end - 1].trim().is_empty() {
        end -= 1;
    }
    lines[start..end]
        .iter()
        .map(|l| l.trim_end())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Content of fenced code blocks, in order of appearance.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut cur: Option<Vec<String>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match cur.take() {
                Some(lines) => blocks.push(trim_block(&lines)),
                None => cur = Some(Vec::new()),
            }
            continue;
        }
        if let Some(lines) = &mut cur {
            lines.push(line.to_string());
        }
    }
    blocks
}

fn strip_fences(body: &str) -> String {
    let fences = fenced_blocks(body);
    if fences.is_empty() {
        body.trim().to_string()
    } else {
        fences.join("\n")
    }
}

/// Split a raw reply on headings and code fences, verifying that every
/// expected section is present.
pub fn parse_sections(raw: &str, expected: &[SectionLabel]) -> Result<ParsedResponse, LlmError> {
    if raw.trim().is_empty() {
        return Err(LlmError::EmptyReply);
    }
    let mut parsed = ParsedResponse {
        sections: BTreeMap::new(),
        raw: raw.to_string(),
    };

    let mut current: Option<(SectionLabel, Vec<String>)> = None;
    let mut preamble: Vec<String> = Vec::new();
    let mut in_fence = false;
    for line in raw.lines() {
        let is_fence_marker = line.trim_start().starts_with("```");
        if is_fence_marker {
            in_fence = !in_fence;
        } else if !in_fence {
            if let Some(label) = heading_of(line) {
                if let Some((prev, lines)) = current.take() {
                    parsed
                        .sections
                        .entry(prev)
                        .or_default()
                        .push(trim_block(&lines));
                }
                current = Some((label, Vec::new()));
                continue;
            }
        }
        match &mut current {
            Some((_, lines)) => lines.push(line.to_string()),
            None => preamble.push(line.to_string()),
        }
    }
    if let Some((prev, lines)) = current.take() {
        parsed
            .sections
            .entry(prev)
            .or_default()
            .push(trim_block(&lines));
    }

    // code sections keep only the fenced content when fences are present
    if let Some(bodies) = parsed.sections.get_mut(&SectionLabel::Code) {
        for body in bodies.iter_mut() {
            *body = strip_fences(body);
        }
    }

    // a fenced block before any heading (or a bare-code reply) serves as the
    // Code section when one is expected but missing
    if expected.contains(&SectionLabel::Code) && parsed.first(&SectionLabel::Code).is_none() {
        let pre = preamble.join("\n");
        let fences = fenced_blocks(&pre);
        let fallback = if !fences.is_empty() {
            Some(fences.join("\n"))
        } else if parsed.sections.is_empty() && !pre.trim().is_empty() {
            Some(pre.trim().to_string())
        } else {
            None
        };
        if let Some(code) = fallback {
            parsed
                .sections
                .entry(SectionLabel::Code)
                .or_default()
                .push(code);
        }
    }

    let missing: Vec<String> = expected
        .iter()
        .filter(|l| parsed.first(l).is_none())
        .map(|l| l.name())
        .collect();
    if !missing.is_empty() {
        return Err(LlmError::MissingSection {
            missing,
            found: parsed.found_labels(),
        });
    }
    Ok(parsed)
}

#[derive(PartialEq)]
enum Marker {
    Input,
    Output,
}

/// Input blocks plus (input index, output) pairs.
type MarkedBlocks = (Vec<String>, Vec<(usize, String)>);

/// "Test case 3 input:"-style marker lines.
fn marker_of(line: &str) -> Option<Marker> {
    let norm = normalize(line);
    if norm.is_empty() || !norm.starts_with("test") {
        return None;
    }
    let rest = norm
        .strip_prefix("testcase")
        .or_else(|| norm.strip_prefix("testinput"))
        .or_else(|| norm.strip_prefix("test"))?;
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit());
    match rest {
        "input" | "" => Some(Marker::Input),
        "output" | "expectedoutput" => Some(Marker::Output),
        _ => None,
    }
}

fn blocks_by_marker(body: &str) -> Option<MarkedBlocks> {
    // returns (input blocks, (input index, output) pairs) or None when the
    // body carries no marker lines
    let mut saw_marker = false;
    let mut inputs: Vec<Vec<String>> = Vec::new();
    let mut outputs: Vec<(usize, Vec<String>)> = Vec::new();
    let mut target: Option<Marker> = None;
    for line in body.lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        match marker_of(line) {
            Some(Marker::Input) => {
                saw_marker = true;
                inputs.push(Vec::new());
                target = Some(Marker::Input);
            }
            Some(Marker::Output) => {
                saw_marker = true;
                if !inputs.is_empty() {
                    outputs.push((inputs.len() - 1, Vec::new()));
                }
                target = Some(Marker::Output);
            }
            None => match target {
                Some(Marker::Input) => inputs.last_mut().unwrap().push(line.to_string()),
                Some(Marker::Output) => {
                    if let Some((_, lines)) = outputs.last_mut() {
                        lines.push(line.to_string());
                    }
                }
                None => {}
            },
        }
    }
    if !saw_marker {
        return None;
    }
    Some((
        inputs.iter().map(|b| trim_block(b)).collect(),
        outputs
            .into_iter()
            .map(|(i, b)| (i, trim_block(&b)))
            .collect(),
    ))
}

/// Test-input blocks from a parsed reply, verbatim with interior newlines
/// preserved. May return any count; the caller validates.
pub fn extract_test_inputs(parsed: &ParsedResponse) -> Vec<String> {
    let mut out = Vec::new();
    let Some(bodies) = parsed.sections.get(&SectionLabel::TestInputs) else {
        return out;
    };
    for body in bodies {
        match blocks_by_marker(body) {
            Some((inputs, _)) => out.extend(inputs.into_iter().filter(|b| !b.is_empty())),
            None => {
                let fences = fenced_blocks(body);
                if !fences.is_empty() {
                    out.extend(fences.into_iter().filter(|b| !b.is_empty()));
                } else if !body.trim().is_empty() {
                    out.push(trim_block(
                        &body.lines().map(|l| l.to_string()).collect::<Vec<_>>(),
                    ));
                }
            }
        }
    }
    out
}

/// Complete (input, expected output) cases from a direct-test-generation
/// reply. Inputs lacking an output are dropped.
pub fn extract_test_cases(parsed: &ParsedResponse) -> Vec<(String, String)> {
    let mut cases = Vec::new();
    let Some(bodies) = parsed.sections.get(&SectionLabel::TestInputs) else {
        return cases;
    };
    for body in bodies {
        if let Some((inputs, outputs)) = blocks_by_marker(body) {
            for (idx, output) in outputs {
                if let Some(input) = inputs.get(idx) {
                    if !input.is_empty() && !output.is_empty() {
                        cases.push((input.clone(), output.clone()));
                    }
                }
            }
        }
    }
    cases
}

/// The revised code from a refinement/self-debugging reply.
pub fn extract_code(parsed: &ParsedResponse) -> Option<String> {
    parsed.first(&SectionLabel::Code).map(|s| s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE_STUDY_REPLY: &str = r#"**Explanation:**
This code counts how many elements in an array are greater than or equal to a given value k.

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

    #[test]
    fn case_study_shaped_reply() {
        let parsed = parse_sections(
            CASE_STUDY_REPLY,
            &[SectionLabel::Explanation, SectionLabel::TestInputs],
        )
        .unwrap();
        let inputs = extract_test_inputs(&parsed);
        assert_eq!(
            inputs,
            vec!["5 10\n15 8 12 10 20", "4 5\n1 2 3 4", "6 7\n7 7 7 7 7 7",]
        );
    }

    #[test]
    fn blank_interior_lines_preserved() {
        let reply = "### Test case Inputs:\nTest case 1 input:\n3\n\na b\n";
        let parsed = parse_sections(reply, &[SectionLabel::TestInputs]).unwrap();
        let inputs = extract_test_inputs(&parsed);
        assert_eq!(inputs, vec!["3\n\na b"]);
    }

    #[test]
    fn bare_code_fence_when_code_expected() {
        let reply = "```cpp\nint main(){return 0;}\n```\n";
        let parsed = parse_sections(reply, &[SectionLabel::Code]).unwrap();
        assert_eq!(extract_code(&parsed).unwrap(), "int main(){return 0;}");
    }

    #[test]
    fn heading_with_fence_strips_fence() {
        let reply = "### Your corrected code version:\n```\nint x;\n```\n";
        let parsed = parse_sections(reply, &[SectionLabel::Code]).unwrap();
        assert_eq!(extract_code(&parsed).unwrap(), "int x;");
    }

    #[test]
    fn empty_reply_errors() {
        assert!(matches!(
            parse_sections("   \n", &[SectionLabel::Code]),
            Err(LlmError::EmptyReply)
        ));
    }

    #[test]
    fn missing_section_lists_found() {
        let err = parse_sections(
            "### Explanation:\nwords\n",
            &[SectionLabel::Explanation, SectionLabel::TestInputs],
        )
        .unwrap_err();
        match err {
            LlmError::MissingSection { missing, found } => {
                assert_eq!(missing, vec!["test_inputs".to_string()]);
                assert_eq!(found, vec!["explanation".to_string()]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn prose_without_blocks_extracts_nothing() {
        let parsed = parse_sections(
            "### Explanation:\nIt is fast.\n",
            &[SectionLabel::Explanation],
        )
        .unwrap();
        assert!(extract_test_inputs(&parsed).is_empty());
    }

    #[test]
    fn direct_test_cases_pair_inputs_with_outputs() {
        let reply = r#"**Explanation:**
sums two ints

**Test case:**
Test case 1 input:
1 2
Test case 1 output:
3

Test case 2 input:
5 5
Test case 2 output:
10

Test case 3 input:
0 0
"#;
        let parsed = parse_sections(
            reply,
            &[SectionLabel::Explanation, SectionLabel::TestInputs],
        )
        .unwrap();
        let cases = extract_test_cases(&parsed);
        // the third case has no output and is dropped
        assert_eq!(
            cases,
            vec![
                ("1 2".to_string(), "3".to_string()),
                ("5 5".to_string(), "10".to_string()),
            ]
        );
    }

    #[test]
    fn default_templates_round_trip_their_sections() {
        use super::super::prompts::{bindings, render, TemplateName, TemplateSet};
        let t = TemplateSet::default();
        let b = bindings(&[
            ("slow_code", "int main(){}"),
            ("fast_code", "int main(){}"),
            ("code", "int main(){}"),
            ("explanation", "does things"),
            ("Testcase", "input: 1"),
            ("Feedback", "wrong output"),
            ("program", "int main(){}"),
            ("test_input", "1 2"),
        ]);
        let expected: &[(TemplateName, &[SectionLabel])] = &[
            (
                TemplateName::Instruct,
                &[SectionLabel::Program, SectionLabel::Code],
            ),
            (
                TemplateName::ChainOfThought,
                &[SectionLabel::Program, SectionLabel::Strategy],
            ),
            (
                TemplateName::Inference,
                &[SectionLabel::Program, SectionLabel::Code],
            ),
            (
                TemplateName::AnchorStage1,
                &[
                    SectionLabel::Program,
                    SectionLabel::Explanation,
                    SectionLabel::TestInputs,
                ],
            ),
            (
                TemplateName::AnchorStage3Refine,
                &[
                    SectionLabel::Program,
                    SectionLabel::Explanation,
                    SectionLabel::TestInputs,
                    SectionLabel::Feedback,
                    SectionLabel::Code,
                ],
            ),
            (
                TemplateName::SelfDebugging,
                &[
                    SectionLabel::Program,
                    SectionLabel::Explanation,
                    SectionLabel::Code,
                ],
            ),
            (
                TemplateName::DirectTestGeneration,
                &[
                    SectionLabel::Program,
                    SectionLabel::Explanation,
                    SectionLabel::TestInputs,
                ],
            ),
            (
                TemplateName::ComparisonGroupOutputs,
                &[
                    SectionLabel::Program,
                    SectionLabel::TestInputs,
                    SectionLabel::Output,
                ],
            ),
            (
                TemplateName::OptTypeClassify,
                &[
                    SectionLabel::Program,
                    SectionLabel::Code,
                    SectionLabel::Category,
                ],
            ),
        ];
        for (name, labels) in expected {
            let rendered = render(&t, *name, &b).unwrap();
            let parsed = parse_sections(&rendered.text, &[]).unwrap();
            for label in *labels {
                assert!(
                    parsed.sections.contains_key(label),
                    "template {name}: section {} not found (found {:?})",
                    label.name(),
                    parsed.found_labels()
                );
            }
        }
    }
}
