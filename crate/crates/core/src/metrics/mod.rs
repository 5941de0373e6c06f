//! Similarity measures between two annotation sets, and corpus aggregation.
//!
//! Precision gives each candidate span credit for the fraction of its
//! characters covered by compatible reference spans (capped at 1); recall is
//! the same with roles swapped. Under [`MatchMode::Hard`] only reference
//! spans of the same category are compatible.

mod aggregate;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamma::GammaError;
use crate::model::SpanAnnotation;

pub use aggregate::{aggregate, ExampleRoute, ExampleScores, PoolCounts, PrfScores, ScoreReport};
pub use stats::{annotation_stats, confusion_matrix, CampaignStats, ConfusionMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("candidate set is empty")]
    EmptyCandidate,
    #[error("reference set is empty")]
    EmptyReference,
    #[error("both sets are non-empty; S∅ does not apply")]
    NotApplicable,
    #[error("count vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two examples for a correlation, got {0}")]
    TooFewExamples(usize),
    #[error("count vector has zero variance")]
    DegenerateVariance,
    #[error("campaigns cover different examples (only in reference: {only_reference:?}; only in candidate: {only_candidate:?})")]
    ExampleIdMismatch {
        only_reference: Vec<String>,
        only_candidate: Vec<String>,
    },
    #[error("example {0:?} is not in the dataset")]
    UnknownExample(String),
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Hard,
    Soft,
}

impl MatchMode {
    fn compatible(self, a: &SpanAnnotation, b: &SpanAnnotation) -> bool {
        match self {
            MatchMode::Hard => a.category == b.category,
            MatchMode::Soft => true,
        }
    }
}

/// Number of characters shared by two spans.
pub fn char_overlap(a: &SpanAnnotation, b: &SpanAnnotation) -> usize {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

/// Credit of one span against a set: covered fraction, capped at 1.
fn span_credit(a: &SpanAnnotation, others: &[SpanAnnotation], mode: MatchMode) -> f64 {
    let covered: usize = others
        .iter()
        .filter(|g| mode.compatible(a, g))
        .map(|g| char_overlap(a, g))
        .sum();
    (covered as f64 / a.len() as f64).min(1.0)
}

pub fn example_precision(candidate: &[SpanAnnotation], reference: &[SpanAnnotation], mode: MatchMode) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    let total: f64 = candidate.iter().map(|a| span_credit(a, reference, mode)).sum();
    Ok(total / candidate.len() as f64)
}

pub fn example_recall(candidate: &[SpanAnnotation], reference: &[SpanAnnotation], mode: MatchMode) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    example_precision(reference, candidate, mode)
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn example_f1(candidate: &[SpanAnnotation], reference: &[SpanAnnotation], mode: MatchMode) -> Result<f64, MetricError> {
    let p = example_precision(candidate, reference, mode)?;
    let r = example_recall(candidate, reference, mode)?;
    Ok(f1_from(p, r))
}

/// Sample Pearson correlation of per-example annotation counts.
pub fn pearson_counts(first: &[usize], second: &[usize]) -> Result<f64, MetricError> {
    if first.len() != second.len() {
        return Err(MetricError::LengthMismatch(first.len(), second.len()));
    }
    let n = first.len();
    if n < 2 {
        return Err(MetricError::TooFewExamples(n));
    }
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / n as f64;
    let (mx, my) = (mean(first), mean(second));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in first.iter().zip(second) {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `1 / (1 + n)` where `n` is the size of whichever set is non-empty.
pub fn s_empty(candidate: &[SpanAnnotation], reference: &[SpanAnnotation]) -> Result<f64, MetricError> {
    let n = match (candidate.len(), reference.len()) {
        (c, 0) => c,
        (0, r) => r,
        _ => return Err(MetricError::NotApplicable),
    };
    Ok(1.0 / (1.0 + n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(start: usize, end: usize, c: usize) -> SpanAnnotation {
        SpanAnnotation::new(start, end, c)
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(char_overlap(&s(0, 10, 0), &s(0, 10, 0)), 10);
        assert_eq!(char_overlap(&s(0, 10, 0), &s(5, 15, 0)), 5);
        assert_eq!(char_overlap(&s(0, 5, 0), &s(10, 15, 0)), 0);
    }

    #[test]
    fn precision_examples() {
        assert_eq!(example_precision(&[s(0, 10, 0)], &[s(0, 10, 0)], MatchMode::Hard).unwrap(), 1.0);
        assert_eq!(example_precision(&[s(0, 10, 0)], &[s(5, 15, 0)], MatchMode::Hard).unwrap(), 0.5);
        assert_eq!(example_precision(&[s(0, 10, 0)], &[s(5, 15, 1)], MatchMode::Hard).unwrap(), 0.0);
        assert_eq!(example_precision(&[s(0, 10, 0)], &[s(5, 15, 1)], MatchMode::Soft).unwrap(), 0.5);
        assert_eq!(example_precision(&[], &[s(5, 15, 1)], MatchMode::Soft), Err(MetricError::EmptyCandidate));
    }

    #[test]
    fn overlapping_references_are_capped() {
        let refs = [s(0, 10, 0), s(0, 10, 1)];
        assert_eq!(example_precision(&[s(0, 10, 0)], &refs, MatchMode::Soft).unwrap(), 1.0);
    }

    #[test]
    fn recall_examples() {
        assert_eq!(example_recall(&[s(0, 10, 0)], &[s(0, 10, 0)], MatchMode::Hard).unwrap(), 1.0);
        assert_eq!(example_recall(&[s(0, 10, 0)], &[s(0, 20, 0)], MatchMode::Hard).unwrap(), 0.5);
        assert_eq!(example_recall(&[], &[s(0, 10, 0)], MatchMode::Hard), Err(MetricError::EmptyCandidate));
        assert_eq!(example_recall(&[s(0, 10, 0)], &[], MatchMode::Hard), Err(MetricError::EmptyReference));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_from(1.0, 1.0), 1.0);
        assert_eq!(f1_from(0.5, 0.5), 0.5);
        assert_eq!(f1_from(1.0, 0.0), 0.0);
        assert_eq!(f1_from(0.0, 0.0), 0.0);
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson_counts(&[1, 2, 3], &[1, 2, 3]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_counts(&[0, 1, 2, 3], &[3, 2, 1, 0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson_counts(&[1, 2, 3, 4], &[1, 3, 2, 4]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(pearson_counts(&[2, 2, 2], &[1, 2, 3]), Err(MetricError::DegenerateVariance));
        assert_eq!(pearson_counts(&[1], &[1]), Err(MetricError::TooFewExamples(1)));
        assert_eq!(pearson_counts(&[1, 2], &[1]), Err(MetricError::LengthMismatch(2, 1)));
    }

    #[test]
    fn s_empty_examples() {
        assert_eq!(s_empty(&[], &[]).unwrap(), 1.0);
        let three = [s(0, 1, 0), s(1, 2, 0), s(2, 3, 0)];
        assert_eq!(s_empty(&three, &[]).unwrap(), 0.25);
        assert_eq!(s_empty(&[], &[s(0, 1, 0)]).unwrap(), 0.5);
        assert_eq!(s_empty(&[s(0, 1, 0)], &[s(0, 1, 0)]), Err(MetricError::NotApplicable));
    }

    fn arb_set() -> impl Strategy<Value = Vec<SpanAnnotation>> {
        prop::collection::vec((0usize..40, 1usize..10, 0usize..3), 1..6)
            .prop_map(|v| v.into_iter().map(|(st, len, c)| s(st, st + len, c)).collect())
    }

    proptest! {
        #[test]
        fn precision_recall_duality(a in arb_set(), g in arb_set()) {
            for mode in [MatchMode::Hard, MatchMode::Soft] {
                prop_assert_eq!(example_precision(&a, &g, mode).unwrap(), example_recall(&g, &a, mode).unwrap());
            }
        }

        #[test]
        fn soft_dominates_hard(a in arb_set(), g in arb_set()) {
            let hard = example_f1(&a, &g, MatchMode::Hard).unwrap();
            let soft = example_f1(&a, &g, MatchMode::Soft).unwrap();
            prop_assert!(soft >= hard);
            prop_assert!((0.0..=1.0).contains(&hard) && (0.0..=1.0).contains(&soft));
        }

        #[test]
        fn soft_scores_ignore_relabelling(a in arb_set(), g in arb_set(), shift in 1usize..3) {
            let relabel = |v: &[SpanAnnotation]| -> Vec<SpanAnnotation> {
                v.iter().map(|x| s(x.start, x.end, (x.category + shift) % 3)).collect()
            };
            let before = example_f1(&a, &g, MatchMode::Soft).unwrap();
            let after = example_f1(&relabel(&a), &relabel(&g), MatchMode::Soft).unwrap();
            prop_assert_eq!(before, after);
        }
    }
}
