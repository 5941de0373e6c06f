//! Prompt templates and rendering.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{CategorySet, Example, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[default]
    Base,
    Cot,
    Fiveshot,
    Noguide,
    Noreason,
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptVariant::Base => "base",
            PromptVariant::Cot => "cot",
            PromptVariant::Fiveshot => "fiveshot",
            PromptVariant::Noguide => "noguide",
            PromptVariant::Noreason => "noreason",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("example {example_id:?} has no {field}, which the prompt needs")]
    MissingField { example_id: String, field: &'static str },
    #[error("unresolved placeholder {{{0}}} in prompt body")]
    UnresolvedPlaceholder(String),
    #[error("few-shot prompt needs {expected} examples, got {found}")]
    FewShotCount { expected: usize, found: usize },
}

/// One demonstration for the few-shot addendum. `annotations` is the
/// expected model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    #[serde(default)]
    pub data: Option<String>,
    pub text: String,
    pub annotations: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub variant: PromptVariant,
    /// Text with `{categories}`, `{guidelines}`, `{data}`, `{source}` and
    /// `{text}` placeholders. Other braces are kept literally.
    pub body: String,
    pub fewshot_examples: Vec<FewShotExample>,
    /// Number of demonstrations the `fiveshot` variant requires.
    pub fewshot_count: usize,
}

const PLACEHOLDERS: [&str; 5] = ["categories", "guidelines", "data", "source", "text"];

const INSTRUCTIONS: &str = r#"Output the errors as a JSON object with a single key "annotations". The value of "annotations" is a list in which each object contains fields "reason", "text", and "annotation_type". The value of "reason" is the short sentence justifying the annotation. The value of "text" is the literal value of the identified span (we will later identify the span using string matching). The value of "annotation_type" is an integer index of the error based on the following list:"#;

const INSTRUCTIONS_NOREASON: &str = r#"Output the errors as a JSON object with a single key "annotations". The value of "annotations" is a list in which each object contains fields "text" and "annotation_type". The value of "text" is the literal value of the identified span (we will later identify the span using string matching). The value of "annotation_type" is an integer index of the error based on the following list:"#;

const COT_ADDENDUM: &str = "Think about it step-by-step. You should enclose your chain of thoughts between the <think> and </think> tags. Once you are ready, output the JSON object in the required format.

Example:
```
<think> ... chain of thoughts ... </think> { ... JSON object ... }
```";

const FENCE: &str = "```";

fn fenced(label: &str, placeholder: &str) -> String {
    format!("{label}\n{FENCE}\n{placeholder}\n{FENCE}")
}

impl PromptTemplate {
    /// The prompt used for `task` and `variant`. The guideline block is
    /// left out for `noguide`.
    pub fn builtin(task: Task, variant: PromptVariant) -> Self {
        let instructions = match variant {
            PromptVariant::Noreason => INSTRUCTIONS_NOREASON,
            _ => INSTRUCTIONS,
        };
        let (intro, guided, tail) = match task {
            Task::D2t => (
                "Your task is to identify errors in the text and classify them.",
                true,
                format!(
                    "{}\n{}",
                    fenced("Given the data:", "{data}"),
                    fenced("annotate the errors in the corresponding text generated from the data:", "{text}")
                ),
            ),
            Task::Mt => (
                "Your task is to identify errors in the translation and classify them.",
                true,
                format!(
                    "{}\n{}",
                    fenced("Given the source:", "{source}"),
                    fenced("annotate its translation:", "{text}")
                ),
            ),
            Task::Propaganda => (
                "Your task is to identify spans of text that employ propaganda techniques.",
                false,
                fenced("Now annotate the following text:", "{text}"),
            ),
            Task::Generic => (
                "Your task is to identify spans in the text and classify them.",
                true,
                fenced("Now annotate the following text:", "{text}"),
            ),
        };
        let guidelines = if guided && variant != PromptVariant::Noguide {
            "\n\n{guidelines}"
        } else {
            ""
        };
        PromptTemplate {
            variant,
            body: format!("{intro}\n\n{instructions}\n\n{{categories}}{guidelines}\n\n{tail}"),
            fewshot_examples: Vec::new(),
            fewshot_count: 5,
        }
    }

    pub fn with_fewshot(mut self, examples: Vec<FewShotExample>, count: usize) -> Self {
        self.fewshot_examples = examples;
        self.fewshot_count = count;
        self
    }

    pub fn check(&self) -> Result<(), PromptError> {
        if self.variant == PromptVariant::Fiveshot && self.fewshot_examples.len() != self.fewshot_count {
            return Err(PromptError::FewShotCount {
                expected: self.fewshot_count,
                found: self.fewshot_examples.len(),
            });
        }
        for name in placeholders(&self.body) {
            if !PLACEHOLDERS.contains(&name) {
                return Err(PromptError::UnresolvedPlaceholder(name.to_owned()));
            }
        }
        Ok(())
    }
}

/// `{identifier}` occurrences in a body.
fn placeholders(body: &str) -> Vec<&str> {
    let mut found = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
            Some(len) if len > 0 && after[len..].starts_with('}') => {
                found.push(&after[..len]);
                rest = &after[len + 1..];
            }
            _ => rest = after,
        }
    }
    found
}

/// `index: name — description`, one per line, in index order.
pub fn render_categories(categories: &CategorySet) -> String {
    categories
        .iter()
        .map(|c| {
            if c.description.is_empty() {
                format!("{}: {}", c.index, c.name)
            } else {
                format!("{}: {} — {}", c.index, c.name, c.description)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn fewshot_addendum(examples: &[FewShotExample], task: Task) -> String {
    let count = NUMBER_WORDS
        .get(examples.len())
        .map(|w| w.to_string())
        .unwrap_or_else(|| examples.len().to_string());
    let data_label = if task == Task::Mt { "source:" } else { "data:" };
    let mut out = format!("In order to help you with the task, we provide you with {count} examples of inputs, outputs and annotations:");
    for (i, ex) in examples.iter().enumerate() {
        out.push_str(&format!("\n\nExample #{}:\n\n", i + 1));
        if let Some(data) = ex.data.as_deref().filter(|d| !d.is_empty()) {
            out.push_str(&fenced(data_label, data));
            out.push('\n');
        }
        let output = serde_json::to_string(&ex.annotations).expect("JSON values always serialize");
        out.push_str(&format!("{}\n{}", fenced("text:", &ex.text), fenced("output:", &output)));
    }
    out
}

/// Fill the template for one example. Substitution is a single pass, so
/// braces inside the inserted text are never expanded.
pub fn render_prompt(
    template: &PromptTemplate,
    example: &Example,
    categories: &CategorySet,
    guidelines: &str,
) -> Result<String, PromptError> {
    template.check()?;
    let mut body = template.body.clone();
    if guidelines.trim().is_empty() {
        body = body.replace("\n\n{guidelines}", "").replace("{guidelines}", "");
    }

    let mut out = String::with_capacity(body.len() + example.text.len() * 2);
    let mut rest = body.as_str();
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name = PLACEHOLDERS
            .iter()
            .find(|p| after.starts_with(*p) && after[p.len()..].starts_with('}'));
        let Some(name) = name else {
            out.push('{');
            rest = after;
            continue;
        };
        match *name {
            "categories" => out.push_str(&render_categories(categories)),
            "guidelines" => out.push_str(guidelines),
            "text" => out.push_str(&example.text),
            _ => out.push_str(example.source().ok_or_else(|| PromptError::MissingField {
                example_id: example.id.clone(),
                field: "source",
            })?),
        }
        rest = &after[name.len() + 1..];
    }
    out.push_str(rest);

    match template.variant {
        PromptVariant::Cot => {
            out.push_str("\n\n");
            out.push_str(COT_ADDENDUM);
        }
        PromptVariant::Fiveshot => {
            out.push_str("\n\n");
            out.push_str(&fewshot_addendum(&template.fewshot_examples, example.task));
        }
        _ => {}
    }
    Ok(out)
}

/// JSON schema for constrained decoding. Keys are listed in the order the
/// model should generate them, with the reason first.
pub fn output_schema(variant: PromptVariant) -> Value {
    let item = if variant == PromptVariant::Noreason {
        json!({
            "type": "object",
            "properties": {
                "text": {"type": "string"},
                "type": {"type": "integer"}
            },
            "required": ["text", "type"],
            "additionalProperties": false
        })
    } else {
        json!({
            "type": "object",
            "properties": {
                "reason": {"type": "string"},
                "text": {"type": "string"},
                "type": {"type": "integer"}
            },
            "required": ["reason", "text", "type"],
            "additionalProperties": false
        })
    };
    json!({
        "type": "object",
        "properties": {
            "annotations": {"type": "array", "items": item}
        },
        "required": ["annotations"],
        "additionalProperties": false
    })
}
