use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{example_precision, example_recall, f1_from, pearson_counts, s_empty, MatchMode, MetricError};
use crate::gamma::{gamma_score, GammaConfig, GammaOutcome, GammaSkip};
use crate::model::{AnnotationSet, Campaign, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleRoute {
    /// Both sets non-empty: P/R/F1 and γ.
    Overlap,
    /// At least one set empty: S∅ only.
    Empty,
    /// Either annotator failed on this example: excluded everywhere.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub example_id: String,
    pub reference_count: usize,
    pub candidate_count: usize,
    pub route: ExampleRoute,
    pub hard: Option<PrfScores>,
    pub soft: Option<PrfScores>,
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_skip: Option<GammaSkip>,
    pub s_empty: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolCounts {
    pub examples: usize,
    pub overlap_pool: usize,
    pub empty_pool: usize,
    pub gamma_scored: usize,
    pub gamma_skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub reference_id: String,
    pub candidate_id: String,
    pub pearson: Option<f64>,
    pub hard: Option<PrfScores>,
    pub soft: Option<PrfScores>,
    pub f1_delta: Option<f64>,
    pub gamma: Option<f64>,
    pub s_empty: Option<f64>,
    pub counts: PoolCounts,
    pub per_example: Vec<ExampleScores>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean_prf<'a>(scores: impl Iterator<Item = &'a PrfScores> + Clone) -> Option<PrfScores> {
    Some(PrfScores {
        precision: mean(scores.clone().map(|s| s.precision))?,
        recall: mean(scores.clone().map(|s| s.recall))?,
        f1: mean(scores.map(|s| s.f1))?,
    })
}

fn check_alignment(dataset: &Dataset, reference: &Campaign, candidate: &Campaign) -> Result<(), MetricError> {
    let only_reference: Vec<String> = reference
        .sets
        .keys()
        .filter(|id| !candidate.sets.contains_key(*id))
        .cloned()
        .collect();
    let only_candidate: Vec<String> = candidate
        .sets
        .keys()
        .filter(|id| !reference.sets.contains_key(*id))
        .cloned()
        .collect();
    if !only_reference.is_empty() || !only_candidate.is_empty() {
        return Err(MetricError::ExampleIdMismatch {
            only_reference,
            only_candidate,
        });
    }
    if let Some(id) = reference.sets.keys().find(|id| dataset.example(id).is_none()) {
        return Err(MetricError::UnknownExample(id.clone()));
    }
    Ok(())
}

fn score_example(
    reference: &AnnotationSet,
    candidate: &AnnotationSet,
    text_len: usize,
    gamma: &GammaConfig,
) -> Result<ExampleScores, MetricError> {
    let (r, c) = (&reference.annotations, &candidate.annotations);
    let mut scores = ExampleScores {
        example_id: reference.example_id.clone(),
        reference_count: r.len(),
        candidate_count: c.len(),
        route: ExampleRoute::Failed,
        hard: None,
        soft: None,
        gamma: None,
        gamma_skip: None,
        s_empty: None,
    };
    if reference.failed || candidate.failed {
        return Ok(scores);
    }
    if r.is_empty() || c.is_empty() {
        scores.route = ExampleRoute::Empty;
        scores.s_empty = Some(s_empty(c, r)?);
        scores.gamma_skip = Some(GammaSkip::EmptySide);
        return Ok(scores);
    }
    scores.route = ExampleRoute::Overlap;
    let prf = |mode| -> Result<PrfScores, MetricError> {
        let precision = example_precision(c, r, mode)?;
        let recall = example_recall(c, r, mode)?;
        Ok(PrfScores {
            precision,
            recall,
            f1: f1_from(precision, recall),
        })
    };
    scores.hard = Some(prf(MatchMode::Hard)?);
    scores.soft = Some(prf(MatchMode::Soft)?);
    match gamma_score(c, r, text_len, gamma, &reference.example_id)? {
        GammaOutcome::Score(g) => scores.gamma = Some(g),
        GammaOutcome::Skipped(skip) => scores.gamma_skip = Some(skip),
    }
    Ok(scores)
}

/// Score `candidate` against `reference` over their shared examples.
///
/// Examples where both sets are non-empty feed P/R/F1 (both modes) and γ;
/// examples with an empty side feed S∅; failed examples feed nothing.
/// Pearson uses every non-failed example. All means are unweighted over the
/// examples where the metric is defined, folded in example-id order.
pub fn aggregate(dataset: &Dataset, reference: &Campaign, candidate: &Campaign, gamma: &GammaConfig) -> Result<ScoreReport, MetricError> {
    check_alignment(dataset, reference, candidate)?;
    gamma.validate()?;

    let per_example = reference
        .sets
        .par_iter()
        .map(|(id, ref_set)| {
            let cand_set = &candidate.sets[id];
            let text_len = dataset.example(id).map(|e| e.char_len()).unwrap_or_default();
            score_example(ref_set, cand_set, text_len, gamma)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let live: Vec<&ExampleScores> = per_example
        .iter()
        .filter(|e| e.route != ExampleRoute::Failed)
        .collect();
    let ref_counts: Vec<usize> = live.iter().map(|e| e.reference_count).collect();
    let cand_counts: Vec<usize> = live.iter().map(|e| e.candidate_count).collect();
    let pearson = pearson_counts(&ref_counts, &cand_counts).ok();

    let overlap = || per_example.iter().filter(|e| e.route == ExampleRoute::Overlap);
    let hard = mean_prf(overlap().filter_map(|e| e.hard.as_ref()));
    let soft = mean_prf(overlap().filter_map(|e| e.soft.as_ref()));
    let f1_delta = match (soft, hard) {
        (Some(s), Some(h)) => Some(s.f1 - h.f1),
        _ => None,
    };
    let gamma_mean = mean(per_example.iter().filter_map(|e| e.gamma));
    let s_empty_mean = mean(per_example.iter().filter_map(|e| e.s_empty));

    let counts = PoolCounts {
        examples: per_example.len(),
        overlap_pool: overlap().count(),
        empty_pool: per_example.iter().filter(|e| e.route == ExampleRoute::Empty).count(),
        gamma_scored: per_example.iter().filter(|e| e.gamma.is_some()).count(),
        gamma_skipped: per_example.iter().filter(|e| e.gamma_skip.is_some()).count(),
        failed: per_example.len() - live.len(),
    };

    Ok(ScoreReport {
        reference_id: reference.annotator_id.clone(),
        candidate_id: candidate.annotator_id.clone(),
        pearson,
        hard,
        soft,
        f1_delta,
        gamma: gamma_mean,
        s_empty: s_empty_mean,
        counts,
        per_example,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Category, CategorySet, Example, SpanAnnotation, Task};

    fn dataset(ids: &[&str]) -> Dataset {
        let cats = CategorySet::new(
            (0..3)
                .map(|i| Category {
                    index: i,
                    name: format!("c{i}"),
                    description: String::new(),
                })
                .collect(),
        )
        .unwrap();
        let examples = ids
            .iter()
            .map(|id| Example {
                id: (*id).into(),
                text: "x".repeat(100),
                source: None,
                task: Task::Generic,
                metadata: Default::default(),
            })
            .collect();
        Dataset::new("t", Task::Generic, examples, cats, "", false).unwrap()
    }

    type Triple = (usize, usize, usize);

    fn campaign(name: &str, sets: Vec<(&str, Vec<Triple>)>) -> Campaign {
        let mut c = Campaign::new(name, "t");
        for (id, spans) in sets {
            c.insert(AnnotationSet {
                example_id: id.into(),
                annotations: spans.into_iter().map(|(s, e, k)| SpanAnnotation::new(s, e, k)).collect(),
                failed: false,
            });
        }
        c
    }

    #[test]
    fn self_comparison_is_perfect() {
        let ds = dataset(&["a", "b", "c"]);
        let c = campaign(
            "x",
            vec![("a", vec![(0, 10, 0)]), ("b", vec![(0, 5, 1), (20, 30, 2)]), ("c", vec![(3, 9, 0), (10, 12, 0), (40, 50, 1)])],
        );
        let r = aggregate(&ds, &c, &c, &GammaConfig::default()).unwrap();
        assert_eq!(r.hard.unwrap().f1, 1.0);
        assert_eq!(r.soft.unwrap().f1, 1.0);
        assert_eq!(r.gamma, Some(1.0));
        assert!((r.pearson.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.f1_delta, Some(0.0));
        assert_eq!(r.s_empty, None);
    }

    #[test]
    fn empty_candidates_route_to_s_empty() {
        let ds = dataset(&["a", "b"]);
        let reference = campaign("g", vec![("a", vec![(0, 10, 0)]), ("b", vec![(0, 5, 1), (20, 30, 2), (40, 45, 0)])]);
        let candidate = campaign("c", vec![("a", vec![]), ("b", vec![])]);
        let r = aggregate(&ds, &reference, &candidate, &GammaConfig::default()).unwrap();
        assert_eq!(r.hard, None);
        assert_eq!(r.gamma, None);
        assert_eq!(r.counts.empty_pool, 2);
        assert_eq!(r.counts.gamma_skipped, 2);
        // (1/2 + 1/4) / 2
        assert!((r.s_empty.unwrap() - 0.375).abs() < 1e-12);
        assert_eq!(r.pearson, None);
    }

    #[test]
    fn desk_fixture() {
        // a: cand (0,10,c0) vs ref (5,15,c0)  -> hard P=R=0.5, soft same
        // b: cand (0,10,c0) vs ref (5,15,c1)  -> hard 0, soft P=R=0.5
        // c: cand {} vs ref {(0,4,c0)}       -> S∅ = 0.5
        // d: cand {} vs ref {}               -> S∅ = 1
        let ds = dataset(&["a", "b", "c", "d"]);
        let reference = campaign(
            "g",
            vec![("a", vec![(5, 15, 0)]), ("b", vec![(5, 15, 1)]), ("c", vec![(0, 4, 0)]), ("d", vec![])],
        );
        let candidate = campaign(
            "c",
            vec![("a", vec![(0, 10, 0)]), ("b", vec![(0, 10, 0)]), ("c", vec![]), ("d", vec![])],
        );
        let r = aggregate(&ds, &reference, &candidate, &GammaConfig::default()).unwrap();
        let hard = r.hard.unwrap();
        let soft = r.soft.unwrap();
        assert!((hard.precision - 0.25).abs() < 1e-12);
        assert!((hard.recall - 0.25).abs() < 1e-12);
        assert!((hard.f1 - 0.25).abs() < 1e-12);
        assert!((soft.f1 - 0.5).abs() < 1e-12);
        assert!((r.f1_delta.unwrap() - 0.25).abs() < 1e-12);
        assert!((r.s_empty.unwrap() - 0.75).abs() < 1e-12);
        // counts ref [1,1,1,0] vs cand [1,1,0,0]: r = 1/sqrt(3)
        assert!((r.pearson.unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.counts.overlap_pool, 2);
        assert_eq!(r.counts.gamma_scored, 2);
    }

    #[test]
    fn failed_examples_are_excluded() {
        let ds = dataset(&["a", "b", "c"]);
        let reference = campaign("g", vec![("a", vec![(0, 10, 0)]), ("b", vec![(0, 5, 0)]), ("c", vec![])]);
        let mut candidate = campaign("c", vec![("a", vec![(0, 10, 0)]), ("c", vec![])]);
        candidate.insert(AnnotationSet::failed("b"));
        let r = aggregate(&ds, &reference, &candidate, &GammaConfig::default()).unwrap();
        assert_eq!(r.counts.failed, 1);
        assert_eq!(r.counts.overlap_pool, 1);
        assert_eq!(r.counts.empty_pool, 1);
        assert_eq!(r.s_empty, Some(1.0));
        assert_eq!(r.per_example[1].route, ExampleRoute::Failed);
    }

    #[test]
    fn mismatched_ids_are_rejected() {
        let ds = dataset(&["a", "b"]);
        let reference = campaign("g", vec![("a", vec![]), ("b", vec![])]);
        let candidate = campaign("c", vec![("a", vec![])]);
        let err = aggregate(&ds, &reference, &candidate, &GammaConfig::default()).unwrap_err();
        assert!(matches!(err, MetricError::ExampleIdMismatch { ref only_reference, .. } if only_reference == &["b".to_string()]));
    }

    #[test]
    fn deterministic_output() {
        let ds = dataset(&["a", "b"]);
        let reference = campaign("g", vec![("a", vec![(0, 10, 0), (30, 40, 1)]), ("b", vec![(5, 8, 2)])]);
        let candidate = campaign("c", vec![("a", vec![(2, 12, 0)]), ("b", vec![(5, 9, 1), (60, 70, 0)])]);
        let first = serde_json::to_string(&aggregate(&ds, &reference, &candidate, &GammaConfig::default()).unwrap()).unwrap();
        let second = serde_json::to_string(&aggregate(&ds, &reference, &candidate, &GammaConfig::default()).unwrap()).unwrap();
        assert_eq!(first, second);
    }
}
