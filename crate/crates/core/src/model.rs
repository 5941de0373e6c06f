//! Core annotation objects shared by every other module.
//!
//! Offsets are 0-based, half-open, and counted in Unicode scalar values
//! (`char`s), never bytes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("span {span} is out of bounds for text of length {text_len}")]
    OutOfBounds { span: SpanRef, text_len: usize },
    #[error("span {span} is empty (start must be < end)")]
    EmptySpan { span: SpanRef },
    #[error("span {span} surface {surface:?} does not match text {actual:?}")]
    SurfaceMismatch {
        span: SpanRef,
        surface: String,
        actual: String,
    },
    #[error("category {category} of span {span} is outside 0..{k}")]
    DanglingCategory { span: SpanRef, category: usize, k: usize },
    #[error("category indices must be dense 0..k-1; found {found} at position {position}")]
    NonDenseCategories { position: usize, found: usize },
    #[error("category {index} has an empty name")]
    EmptyCategoryName { index: usize },
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("example {0:?} has empty text")]
    EmptyText(String),
}

/// Offsets and category of a span, used to identify it in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanRef {
    pub start: usize,
    pub end: usize,
    pub category: usize,
}

impl fmt::Display for SpanRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, c{})", self.start, self.end, self.category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub index: usize,
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// Ordered category inventory with dense indices `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct CategorySet(Vec<Category>);

impl CategorySet {
    pub fn new(mut categories: Vec<Category>) -> Result<Self, ModelError> {
        categories.sort_by_key(|c| c.index);
        for (position, cat) in categories.iter().enumerate() {
            if cat.index != position {
                return Err(ModelError::NonDenseCategories {
                    position,
                    found: cat.index,
                });
            }
            if cat.name.trim().is_empty() {
                return Err(ModelError::EmptyCategoryName { index: cat.index });
            }
        }
        Ok(Self(categories))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Category> {
        self.0.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Category> {
        self.0.iter()
    }
}

/// One annotated span `[start, end)` of a text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub category: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Literal span text as emitted by the annotator.
    #[serde(rename = "text", default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
}

impl SpanAnnotation {
    pub fn new(start: usize, end: usize, category: usize) -> Self {
        Self {
            start,
            end,
            category,
            reason: None,
            surface: None,
        }
    }

    pub fn with_reason(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }

    pub fn with_surface(mut self, surface: impl Into<String>) -> Self {
        self.surface = Some(surface.into());
        self
    }

    /// Span length in characters.
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn key(&self) -> (usize, usize, usize) {
        (self.start, self.end, self.category)
    }

    pub fn span_ref(&self) -> SpanRef {
        SpanRef {
            start: self.start,
            end: self.end,
            category: self.category,
        }
    }

    pub fn overlaps(&self, other: &SpanAnnotation) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Annotations of one example, sorted by `(start, end, category)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub example_id: String,
    pub annotations: Vec<SpanAnnotation>,
    /// Set when the annotator gave up on this example; such sets carry no
    /// annotations and are kept out of every metric pool.
    #[serde(default)]
    pub failed: bool,
}

impl AnnotationSet {
    pub fn empty(example_id: impl Into<String>) -> Self {
        Self {
            example_id: example_id.into(),
            annotations: Vec::new(),
            failed: false,
        }
    }

    pub fn failed(example_id: impl Into<String>) -> Self {
        Self {
            failed: true,
            ..Self::empty(example_id)
        }
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    D2t,
    Mt,
    Propaganda,
    Generic,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Task::D2t => "d2t",
            Task::Mt => "mt",
            Task::Propaganda => "propaganda",
            Task::Generic => "generic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub task: Task,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Example {
    /// Text length in characters.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Source, treating an empty string as absent.
    pub fn source(&self) -> Option<&str> {
        self.source.as_deref().filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub task: Task,
    /// Sorted by id.
    pub examples: Vec<Example>,
    pub categories: CategorySet,
    pub guidelines: String,
    pub no_overlap: bool,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        task: Task,
        mut examples: Vec<Example>,
        categories: CategorySet,
        guidelines: impl Into<String>,
        no_overlap: bool,
    ) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(ModelError::DuplicateId(ex.id.clone()));
            }
            if ex.text.is_empty() {
                return Err(ModelError::EmptyText(ex.id.clone()));
            }
        }
        examples.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            name: name.into(),
            task,
            examples,
            categories,
            guidelines: guidelines.into(),
            no_overlap,
        })
    }

    pub fn example(&self, id: &str) -> Option<&Example> {
        self.examples
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.examples[i])
    }

    /// Check a set against this dataset: known categories, in-bounds spans,
    /// matching surfaces, and the overlap rule.
    pub fn validate_set(&self, set: &AnnotationSet, text: &str) -> Result<Normalized, ModelError> {
        let k = self.categories.len();
        for a in &set.annotations {
            if a.category >= k {
                return Err(ModelError::DanglingCategory {
                    span: a.span_ref(),
                    category: a.category,
                    k,
                });
            }
        }
        let mut normalized =
            normalize_annotation_set(&set.example_id, set.annotations.clone(), text, self.no_overlap)?;
        normalized.set.failed = set.failed;
        Ok(normalized)
    }
}

/// Raw output of an LLM call, kept alongside the grounded annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub example_id: String,
    pub model_id: String,
    pub variant: String,
    pub raw_output: String,
    pub reasoning: String,
    pub annotations: Vec<SpanAnnotation>,
    pub latency_s: f64,
    pub usage: TokenUsage,
    pub retries: u32,
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

/// One annotator's pass over a dataset.
///
/// An id missing from `sets` was not annotated; an id mapped to an empty set
/// was annotated and nothing was found.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Campaign {
    pub annotator_id: String,
    pub dataset_ref: String,
    pub sets: BTreeMap<String, AnnotationSet>,
    pub traces: BTreeMap<String, TraceRecord>,
}

impl Campaign {
    pub fn new(annotator_id: impl Into<String>, dataset_ref: impl Into<String>) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            dataset_ref: dataset_ref.into(),
            ..Self::default()
        }
    }

    pub fn insert(&mut self, set: AnnotationSet) {
        self.sets.insert(set.example_id.clone(), set);
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.sets
            .values()
            .filter(|s| s.failed)
            .map(|s| s.example_id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub set: AnnotationSet,
    /// Spans removed by the overlap rule.
    pub dropped: Vec<SpanAnnotation>,
}

/// Sort, deduplicate and (optionally) de-overlap a list of spans.
///
/// Duplicates are identical `(start, end, category)` triples; the first one
/// in input order survives. Under `no_overlap` a span sharing any position
/// with an earlier kept span (in sorted order) is dropped.
pub fn normalize_annotation_set(
    example_id: &str,
    raw: Vec<SpanAnnotation>,
    text: &str,
    no_overlap: bool,
) -> Result<Normalized, ModelError> {
    let chars: Vec<char> = text.chars().collect();
    for a in &raw {
        if a.start >= a.end {
            return Err(ModelError::EmptySpan { span: a.span_ref() });
        }
        if a.end > chars.len() {
            return Err(ModelError::OutOfBounds {
                span: a.span_ref(),
                text_len: chars.len(),
            });
        }
        if let Some(surface) = &a.surface {
            let actual: String = chars[a.start..a.end].iter().collect();
            if &actual != surface {
                return Err(ModelError::SurfaceMismatch {
                    span: a.span_ref(),
                    surface: surface.clone(),
                    actual,
                });
            }
        }
    }

    let mut sorted = raw;
    sorted.sort_by_key(SpanAnnotation::key);
    sorted.dedup_by_key(|a| a.key());

    let mut kept = Vec::with_capacity(sorted.len());
    let mut dropped = Vec::new();
    let mut reach = 0usize;
    for a in sorted {
        if no_overlap && !kept.is_empty() && a.start < reach {
            dropped.push(a);
            continue;
        }
        reach = reach.max(a.end);
        kept.push(a);
    }

    Ok(Normalized {
        set: AnnotationSet {
            example_id: example_id.to_owned(),
            annotations: kept,
            failed: false,
        },
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn keys(set: &AnnotationSet) -> Vec<(usize, usize, usize)> {
        set.annotations.iter().map(SpanAnnotation::key).collect()
    }

    const TEXT: &str = "abcdefghijklmnopqrst";

    #[test]
    fn sorts_spans() {
        let raw = vec![SpanAnnotation::new(5, 9, 0), SpanAnnotation::new(0, 4, 1)];
        let n = normalize_annotation_set("e", raw, TEXT, false).unwrap();
        assert_eq!(keys(&n.set), vec![(0, 4, 1), (5, 9, 0)]);
        assert!(n.dropped.is_empty());
    }

    #[test]
    fn removes_exact_duplicates_ignoring_reason() {
        let raw = vec![
            SpanAnnotation::new(0, 4, 0).with_reason("first"),
            SpanAnnotation::new(0, 4, 0).with_reason("second"),
        ];
        let n = normalize_annotation_set("e", raw, TEXT, false).unwrap();
        assert_eq!(keys(&n.set), vec![(0, 4, 0)]);
        assert_eq!(n.set.annotations[0].reason.as_deref(), Some("first"));
    }

    #[test]
    fn no_overlap_keeps_first_in_sort_order() {
        let raw = vec![SpanAnnotation::new(4, 8, 1), SpanAnnotation::new(0, 6, 0)];
        let n = normalize_annotation_set("e", raw, TEXT, true).unwrap();
        assert_eq!(keys(&n.set), vec![(0, 6, 0)]);
        assert_eq!(n.dropped.len(), 1);
        assert_eq!(n.dropped[0].key(), (4, 8, 1));
    }

    #[test]
    fn overlap_allowed_without_flag() {
        let raw = vec![SpanAnnotation::new(4, 8, 1), SpanAnnotation::new(0, 6, 0)];
        let n = normalize_annotation_set("e", raw, TEXT, false).unwrap();
        assert_eq!(n.set.len(), 2);
    }

    #[test]
    fn adjacent_spans_do_not_overlap() {
        let raw = vec![SpanAnnotation::new(0, 4, 0), SpanAnnotation::new(4, 8, 0)];
        let n = normalize_annotation_set("e", raw, TEXT, true).unwrap();
        assert_eq!(n.set.len(), 2);
    }

    #[test]
    fn rejects_out_of_bounds_and_empty() {
        let err = normalize_annotation_set("e", vec![SpanAnnotation::new(18, 21, 0)], TEXT, false)
            .unwrap_err();
        assert!(matches!(err, ModelError::OutOfBounds { text_len: 20, .. }));
        let err =
            normalize_annotation_set("e", vec![SpanAnnotation::new(3, 3, 0)], TEXT, false).unwrap_err();
        assert!(matches!(err, ModelError::EmptySpan { .. }));
    }

    #[test]
    fn single_character_spans_are_allowed() {
        let n = normalize_annotation_set("e", vec![SpanAnnotation::new(3, 4, 0)], TEXT, true).unwrap();
        assert_eq!(n.set.annotations[0].len(), 1);
    }

    #[test]
    fn offsets_count_chars_not_bytes() {
        let text = "数据错误";
        let a = SpanAnnotation::new(2, 4, 0).with_surface("错误");
        let n = normalize_annotation_set("e", vec![a], text, false).unwrap();
        assert_eq!(n.set.len(), 1);
    }

    #[test]
    fn rejects_surface_mismatch() {
        let a = SpanAnnotation::new(0, 3, 0).with_surface("xyz");
        let err = normalize_annotation_set("e", vec![a], TEXT, false).unwrap_err();
        assert!(matches!(err, ModelError::SurfaceMismatch { .. }));
    }

    #[test]
    fn category_set_requires_dense_indices() {
        let cat = |index: usize, name: &str| Category {
            index,
            name: name.into(),
            description: String::new(),
        };
        assert!(CategorySet::new(vec![cat(1, "b"), cat(0, "a")]).is_ok());
        assert!(matches!(
            CategorySet::new(vec![cat(0, "a"), cat(2, "c")]),
            Err(ModelError::NonDenseCategories { .. })
        ));
        assert!(matches!(
            CategorySet::new(vec![cat(0, " ")]),
            Err(ModelError::EmptyCategoryName { index: 0 })
        ));
    }

    fn arb_spans() -> impl Strategy<Value = Vec<SpanAnnotation>> {
        prop::collection::vec((0usize..19, 1usize..6, 0usize..3), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(s, len, c)| SpanAnnotation::new(s, (s + len).min(20), c))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in arb_spans(), no_overlap in any::<bool>()) {
            let once = normalize_annotation_set("e", raw, TEXT, no_overlap).unwrap();
            let twice =
                normalize_annotation_set("e", once.set.annotations.clone(), TEXT, no_overlap).unwrap();
            prop_assert_eq!(&once.set, &twice.set);
            prop_assert!(twice.dropped.is_empty());
        }

        #[test]
        fn normalize_only_filters_and_orders(raw in arb_spans(), no_overlap in any::<bool>()) {
            let n = normalize_annotation_set("e", raw.clone(), TEXT, no_overlap).unwrap();
            for a in &n.set.annotations {
                prop_assert!(raw.contains(a));
            }
            prop_assert!(n.set.annotations.windows(2).all(|w| w[0].key() < w[1].key()));
        }

        #[test]
        fn no_overlap_output_is_disjoint(raw in arb_spans()) {
            let n = normalize_annotation_set("e", raw, TEXT, true).unwrap();
            prop_assert!(n.set.annotations.windows(2).all(|w| w[0].end <= w[1].start));
        }
    }
}
