//! Turning raw model output into grounded spans.
//!
//! The pipeline is: strip `<think>` regions, pull out the last complete JSON
//! object, read its `annotations` list, then locate each emitted surface
//! string inside the annotated text.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::SpanAnnotation;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundingError {
    #[error("no complete JSON object found in model output")]
    NoJsonFound,
    #[error("payload has no \"annotations\" key")]
    MissingAnnotationsKey,
    #[error("\"annotations\" is not a list")]
    NotAList,
    #[error("payload is not a JSON object")]
    NotAnObject,
}

/// One annotation as emitted by the model, before grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnnotation {
    pub reason: String,
    pub text: String,
    #[serde(rename = "type")]
    pub category: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteCode {
    /// Element was not an object or lacked a usable `text`/`reason`.
    Malformed,
    /// `type` missing, not an integer, or outside `0..k`.
    BadCategory,
    /// Surface not found anywhere in the text.
    Unmatched,
    /// Surface only found before the cursor.
    WrapAround,
    /// Surface only found ignoring case.
    CaseInsensitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingNote {
    pub example_id: String,
    pub surface: String,
    pub code: NoteCode,
}

/// Counts for one parse/ground pass. `grounded` plus all `dropped_*`
/// equals the number of elements processed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub grounded: usize,
    pub dropped_unmatched: usize,
    pub dropped_bad_category: usize,
    pub dropped_malformed: usize,
    pub notes: Vec<GroundingNote>,
}

impl GroundingReport {
    pub fn processed(&self) -> usize {
        self.grounded + self.dropped()
    }

    pub fn dropped(&self) -> usize {
        self.dropped_unmatched + self.dropped_bad_category + self.dropped_malformed
    }

    /// Fold the counts of a later stage into this one.
    pub fn merge(&mut self, other: GroundingReport) {
        self.grounded += other.grounded;
        self.dropped_unmatched += other.dropped_unmatched;
        self.dropped_bad_category += other.dropped_bad_category;
        self.dropped_malformed += other.dropped_malformed;
        self.notes.extend(other.notes);
    }

    fn note(&mut self, example_id: &str, surface: &str, code: NoteCode) {
        self.notes.push(GroundingNote {
            example_id: example_id.to_owned(),
            surface: surface.to_owned(),
            code,
        });
    }
}

/// Remove every balanced `<think>…</think>` region, returning the remaining
/// text and the concatenated reasoning.
///
/// Removal repeats until nothing changes, so the operation is idempotent even
/// when a removal splices two tag fragments together.
pub fn split_reasoning(raw: &str) -> (String, String) {
    let mut current = raw.to_owned();
    let mut reasoning = Vec::new();
    loop {
        let (next, found) = strip_once(&current, &mut reasoning);
        if !found {
            return (current, reasoning.join("\n"));
        }
        current = next;
    }
}

pub fn strip_reasoning_markup(raw: &str) -> String {
    split_reasoning(raw).0
}

fn strip_once(text: &str, reasoning: &mut Vec<String>) -> (String, bool) {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut found = false;
    while let Some(open) = rest.find(THINK_OPEN) {
        let inner_start = open + THINK_OPEN.len();
        let Some(close) = rest[inner_start..].find(THINK_CLOSE) else {
            break;
        };
        let close = inner_start + close;
        out.push_str(&rest[..open]);
        let inner = rest[inner_start..close].trim();
        if !inner.is_empty() {
            reasoning.push(inner.to_owned());
        }
        rest = &rest[close + THINK_CLOSE.len()..];
        found = true;
    }
    out.push_str(rest);
    (out, found)
}

/// Byte index one past the `}` that closes the object opening at `start`,
/// honouring strings and escapes.
fn balanced_object_end(bytes: &[u8], start: usize) -> Option<usize> {
    debug_assert_eq!(bytes[start], b'{');
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// The last top-level substring of `text` that parses as a JSON object.
///
/// Candidates are scanned left to right. A candidate that parses is skipped
/// as a whole, so objects nested inside it are never returned on their own;
/// a candidate that does not balance or parse is abandoned one byte later.
pub fn extract_last_json_object(text: &str) -> Result<Value, GroundingError> {
    let bytes = text.as_bytes();
    let mut last = None;
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes[pos] != b'{' {
            pos += 1;
            continue;
        }
        match balanced_object_end(bytes, pos) {
            Some(end) => match serde_json::from_str::<Value>(&text[pos..end]) {
                Ok(value @ Value::Object(_)) => {
                    last = Some(value);
                    pos = end;
                }
                _ => pos += 1,
            },
            None => pos += 1,
        }
    }
    last.ok_or(GroundingError::NoJsonFound)
}

/// Read the `annotations` list of a payload, keeping elements with a string
/// `text`, an optional string `reason` and an integer `type` in `0..k`.
///
/// `annotation_type` is accepted as an alias for `type`, since that is the
/// key the prompt text asks for when decoding is unconstrained.
pub fn parse_annotation_payload(
    example_id: &str,
    payload: &Value,
    k: usize,
) -> Result<(Vec<RawAnnotation>, GroundingReport), GroundingError> {
    let obj = payload.as_object().ok_or(GroundingError::NotAnObject)?;
    let list = obj
        .get("annotations")
        .ok_or(GroundingError::MissingAnnotationsKey)?
        .as_array()
        .ok_or(GroundingError::NotAList)?;

    let mut raws = Vec::with_capacity(list.len());
    let mut report = GroundingReport::default();
    for item in list {
        let Some(item) = item.as_object() else {
            report.dropped_malformed += 1;
            report.note(example_id, "", NoteCode::Malformed);
            continue;
        };
        let text = item.get("text").and_then(Value::as_str);
        let reason = match item.get("reason") {
            None | Some(Value::Null) => Some(""),
            Some(v) => v.as_str(),
        };
        let (Some(text), Some(reason)) = (text, reason) else {
            report.dropped_malformed += 1;
            report.note(example_id, text.unwrap_or(""), NoteCode::Malformed);
            continue;
        };
        let category = item
            .get("type")
            .or_else(|| item.get("annotation_type"))
            .and_then(Value::as_u64)
            .and_then(|c| usize::try_from(c).ok())
            .filter(|&c| c < k);
        let Some(category) = category else {
            report.dropped_bad_category += 1;
            report.note(example_id, text, NoteCode::BadCategory);
            continue;
        };
        raws.push(RawAnnotation {
            reason: reason.to_owned(),
            text: text.to_owned(),
            category,
        });
    }
    Ok((raws, report))
}

fn find_exact(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

fn chars_eq_folded(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

fn find_folded(hay: &[char], needle: &[char]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).find(|&i| {
        hay[i..i + needle.len()]
            .iter()
            .zip(needle)
            .all(|(&h, &n)| chars_eq_folded(h, n))
    })
}

/// Locate each surface in `text`, in emission order.
///
/// A cursor starts at 0. Each surface is matched at its first exact
/// occurrence at or after the cursor, else its first exact occurrence
/// anywhere, else its first case-insensitive occurrence, else dropped. A
/// match moves the cursor to its start + 1. Offsets are in chars.
///
/// Grounded spans carry `Y[start..end)` as their surface; for a
/// case-insensitive hit the emitted string is kept in the report note.
pub fn ground_annotations(
    example_id: &str,
    raws: &[RawAnnotation],
    text: &str,
) -> (Vec<SpanAnnotation>, GroundingReport) {
    let hay: Vec<char> = text.chars().collect();
    let mut cursor = 0usize;
    let mut spans = Vec::with_capacity(raws.len());
    let mut report = GroundingReport::default();

    for raw in raws {
        let needle: Vec<char> = raw.text.chars().collect();
        let found = if let Some(i) = find_exact(&hay, &needle, cursor) {
            Some(i)
        } else if let Some(i) = find_exact(&hay, &needle, 0) {
            report.note(example_id, &raw.text, NoteCode::WrapAround);
            Some(i)
        } else if let Some(i) = find_folded(&hay, &needle) {
            report.note(example_id, &raw.text, NoteCode::CaseInsensitive);
            Some(i)
        } else {
            None
        };

        match found {
            Some(start) => {
                let end = start + needle.len();
                cursor = start + 1;
                report.grounded += 1;
                let mut span = SpanAnnotation::new(start, end, raw.category)
                    .with_surface(hay[start..end].iter().collect::<String>());
                if !raw.reason.is_empty() {
                    span = span.with_reason(raw.reason.clone());
                }
                spans.push(span);
            }
            None => {
                report.dropped_unmatched += 1;
                report.note(example_id, &raw.text, NoteCode::Unmatched);
            }
        }
    }
    (spans, report)
}
