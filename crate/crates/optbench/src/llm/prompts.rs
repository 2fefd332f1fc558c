//! Prompt templates. Bodies follow the reference prompt set; placeholders
//! are `{name}` where name is a bare identifier. Brace groups containing
//! spaces (e.g. `{Your explanation here}`) are literal text that shows the
//! model where to answer, not placeholders.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    Instruct,
    ChainOfThought,
    Inference,
    AnchorStage1,
    AnchorStage3Refine,
    SelfDebugging,
    DirectTestGeneration,
    ComparisonGroupOutputs,
    OptTypeClassify,
}

impl TemplateName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateName::Instruct => "instruct",
            TemplateName::ChainOfThought => "chain_of_thought",
            TemplateName::Inference => "inference",
            TemplateName::AnchorStage1 => "anchor_stage1",
            TemplateName::AnchorStage3Refine => "anchor_stage3_refine",
            TemplateName::SelfDebugging => "self_debugging",
            TemplateName::DirectTestGeneration => "direct_test_generation",
            TemplateName::ComparisonGroupOutputs => "comparison_group_outputs",
            TemplateName::OptTypeClassify => "opt_type_classify",
        }
    }

    pub fn all() -> [TemplateName; 9] {
        [
            TemplateName::Instruct,
            TemplateName::ChainOfThought,
            TemplateName::Inference,
            TemplateName::AnchorStage1,
            TemplateName::AnchorStage3Refine,
            TemplateName::SelfDebugging,
            TemplateName::DirectTestGeneration,
            TemplateName::ComparisonGroupOutputs,
            TemplateName::OptTypeClassify,
        ]
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const INSTRUCT: &str = "\
Given the program below, improve its performance:

### Program:
{slow_code}

### Optimized Version:
";

const CHAIN_OF_THOUGHT: &str = "\
Given the program, generate an efficiency improvement strategy to enhance its performance.

### slower program:
{slow_code}

### strategy:
";

const ANCHOR_STAGE1: &str = "\
Given the program below, please explain and analyze its functionality, and provide 3 testcase inputs that fully consider boundary conditions and code coverage. Note that only the testcase inputs are required.

### Program:
{slow_code}

### Explanation:
{Your explanation here}

### Test case Inputs:
{Your testcase inputs}
";

const ANCHOR_STAGE3: &str = "\
You are a code expert, and your task is to correct the functionally incorrect code based on test cases and execution feedback. Analyze the issues, apply the necessary fixes, and ensure the corrected code meets the expected functionality and pass the testcase.

### Incorrect Program:
{code}

### Explanation:
{explanation}

### Testcase:
{Testcase}

### Feedback from execution:
{Feedback}

### Your corrected code version:
";

const SELF_DEBUGGING: &str = "\
Below is a potentially problematic C++ program. Please provide a line-by-line explanation and correct any errors that may be present.

### Program:
{program}

### Explanation:
{Your explanation here}

### Revised Program:
{Your revised program here}
";

const DIRECT_TEST_GENERATION: &str = "\
Given the program below, please explain and analyze its functionality, and generate three comprehensive test cases that thoroughly cover boundary conditions and all code paths. Each testcase should include the input and the corresponding expected output.

### Program:
{slow_code}

### Explanation:
{Your explanation here}

### Test case:
{Your testcase}
";

const COMPARISON_GROUP_OUTPUTS: &str = "\
Given the program below and one test case input, predict the exact output the program would produce on that input. Provide only the predicted output.

### Program:
{slow_code}

### Test case Input:
{test_input}

### Predicted Output:
";

const OPT_TYPE_CLASSIFY: &str = "\
Given a slow program and its optimized version, classify the optimization as one of: global algorithmic optimization, local optimization, or other optimization. Reply with the category name only.

### Slow Program:
{slow_code}

### Optimized Program:
{fast_code}

### Category:
";

/// The template registry, seeded with the defaults and overridable from
/// files named `<template>.txt` in a directory.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    bodies: BTreeMap<TemplateName, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let mut bodies = BTreeMap::new();
        bodies.insert(TemplateName::Instruct, INSTRUCT.to_string());
        bodies.insert(TemplateName::ChainOfThought, CHAIN_OF_THOUGHT.to_string());
        bodies.insert(TemplateName::Inference, INSTRUCT.to_string());
        bodies.insert(TemplateName::AnchorStage1, ANCHOR_STAGE1.to_string());
        bodies.insert(TemplateName::AnchorStage3Refine, ANCHOR_STAGE3.to_string());
        bodies.insert(TemplateName::SelfDebugging, SELF_DEBUGGING.to_string());
        bodies.insert(
            TemplateName::DirectTestGeneration,
            DIRECT_TEST_GENERATION.to_string(),
        );
        bodies.insert(
            TemplateName::ComparisonGroupOutputs,
            COMPARISON_GROUP_OUTPUTS.to_string(),
        );
        bodies.insert(TemplateName::OptTypeClassify, OPT_TYPE_CLASSIFY.to_string());
        TemplateSet { bodies }
    }
}

impl TemplateSet {
    pub fn body(&self, name: TemplateName) -> &str {
        &self.bodies[&name]
    }

    pub fn set_body(&mut self, name: TemplateName, body: String) {
        self.bodies.insert(name, body);
    }

    /// Replace defaults with any `<template>.txt` files found in `dir`.
    pub fn load_overrides(&mut self, dir: &Path) -> std::io::Result<usize> {
        let mut loaded = 0;
        for name in TemplateName::all() {
            let path = dir.join(format!("{}.txt", name.as_str()));
            if path.exists() {
                self.bodies.insert(name, fs::read_to_string(&path)?);
                loaded += 1;
            }
        }
        Ok(loaded)
    }
}

/// A rendered prompt together with the fingerprint used for mock matching.
#[derive(Debug, Clone)]
pub struct RenderedPrompt {
    pub template: TemplateName,
    pub text: String,
    pub bindings_sha256: String,
}

fn is_placeholder_at(chars: &[char], i: usize) -> Option<(String, usize)> {
    // chars[i] == '{'; a placeholder is {ident} with no spaces
    let mut j = i + 1;
    let mut name = String::new();
    while j < chars.len() {
        let c = chars[j];
        if c == '}' {
            return if name.is_empty() {
                None
            } else {
                Some((name, j))
            };
        }
        if c.is_alphanumeric() || c == '_' {
            name.push(c);
            j += 1;
        } else {
            return None;
        }
    }
    None
}

/// Substitute `{name}` placeholders. Unbound placeholders are an error;
/// literal brace groups with spaces pass through untouched.
pub fn render(
    templates: &TemplateSet,
    name: TemplateName,
    bindings: &BTreeMap<String, String>,
) -> Result<RenderedPrompt, LlmError> {
    let body = templates.body(name);
    let chars: Vec<char> = body.chars().collect();
    let mut out = String::with_capacity(body.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '{' {
            if let Some((pname, close)) = is_placeholder_at(&chars, i) {
                match bindings.get(&pname) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(LlmError::UnboundPlaceholder {
                            template: name.as_str().to_string(),
                            placeholder: pname,
                        })
                    }
                }
                i = close + 1;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    Ok(RenderedPrompt {
        template: name,
        text: out,
        bindings_sha256: bindings_sha256(bindings),
    })
}

/// Canonical digest of a bindings map: sha256 over sorted `key=value`
/// lines.
pub fn bindings_sha256(bindings: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in bindings {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hex_digest(&hasher.finalize())
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn bindings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
