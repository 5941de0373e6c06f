use serde::{Deserialize, Serialize};

use super::char_overlap;
use crate::model::{Campaign, CategorySet, SpanAnnotation};

/// Category confusion between paired reference and candidate spans.
/// Rows are reference categories, columns candidate categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Reference spans with no overlapping candidate span.
    pub unpaired_reference: u64,
}

impl ConfusionMatrix {
    /// Each row divided by its sum; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }
}

/// Candidate span with the largest overlap; ties go to the earliest span in
/// sorted order (lowest start first).
fn best_partner<'a>(span: &SpanAnnotation, candidates: &'a [SpanAnnotation]) -> Option<&'a SpanAnnotation> {
    let mut best: Option<(&SpanAnnotation, usize)> = None;
    for c in candidates {
        let overlap = char_overlap(span, c);
        if overlap > best.map_or(0, |(_, o)| o) {
            best = Some((c, overlap));
        }
    }
    best.map(|(c, _)| c)
}

/// Pair every reference span with its maximal-overlap candidate span and
/// count category combinations. Failed examples are skipped.
pub fn confusion_matrix(categories: &CategorySet, reference: &Campaign, candidate: &Campaign) -> ConfusionMatrix {
    let k = categories.len();
    let mut counts = vec![vec![0u64; k]; k];
    let mut unpaired_reference = 0;
    for (id, ref_set) in &reference.sets {
        let Some(cand_set) = candidate.sets.get(id) else {
            continue;
        };
        if ref_set.failed || cand_set.failed {
            continue;
        }
        let mut sorted = cand_set.annotations.clone();
        sorted.sort_by_key(SpanAnnotation::key);
        for r in &ref_set.annotations {
            match best_partner(r, &sorted) {
                Some(c) if r.category < k && c.category < k => counts[r.category][c.category] += 1,
                _ => unpaired_reference += 1,
            }
        }
    }
    ConfusionMatrix {
        categories: categories.iter().map(|c| c.name.clone()).collect(),
        counts,
        unpaired_reference,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub annotator_id: String,
    /// Examples with a non-failed set.
    pub examples: usize,
    pub failed: usize,
    pub annotations: usize,
    pub annotations_per_example: f64,
    pub empty_percent: f64,
    pub chars_per_annotation: Option<f64>,
}

/// Descriptive counts of a campaign; failed sets only add to `failed`.
pub fn annotation_stats(campaign: &Campaign) -> CampaignStats {
    let live: Vec<_> = campaign.sets.values().filter(|s| !s.failed).collect();
    let examples = live.len();
    let annotations: usize = live.iter().map(|s| s.len()).sum();
    let empty = live.iter().filter(|s| s.is_empty()).count();
    let chars: usize = live
        .iter()
        .flat_map(|s| s.annotations.iter())
        .map(SpanAnnotation::len)
        .sum();
    let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
    CampaignStats {
        annotator_id: campaign.annotator_id.clone(),
        examples,
        failed: campaign.sets.len() - examples,
        annotations,
        annotations_per_example: ratio(annotations as f64, examples),
        empty_percent: ratio(100.0 * empty as f64, examples),
        chars_per_annotation: (annotations > 0).then(|| chars as f64 / annotations as f64),
    }
}
