//! Report files. Tables print floats with three decimals; JSON keeps full
//! precision. Nothing here depends on wall-clock time or absolute paths.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use spanagree::gamma::{GammaConfig, GammaSkip};
use spanagree::metrics::{CampaignStats, ConfusionMatrix, ExampleRoute, MatchMode, PrfScores, ScoreReport};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipCounts {
    pub gamma_empty_side: usize,
    pub gamma_zero_expected: usize,
    pub failed_examples: usize,
}

impl SkipCounts {
    pub fn from_report(report: &ScoreReport) -> Self {
        let count = |kind: GammaSkip| report.per_example.iter().filter(|e| e.gamma_skip == Some(kind)).count();
        Self {
            gamma_empty_side: count(GammaSkip::EmptySide),
            gamma_zero_expected: count(GammaSkip::ZeroExpectedDisorder),
            failed_examples: report.counts.failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub row_normalized: Vec<Vec<f64>>,
    pub unpaired_reference: u64,
}

impl From<&ConfusionMatrix> for ConfusionReport {
    fn from(m: &ConfusionMatrix) -> Self {
        Self {
            categories: m.categories.clone(),
            counts: m.counts.clone(),
            row_normalized: m.row_normalized(),
            unpaired_reference: m.unpaired_reference,
        }
    }
}

/// Everything `report.json` records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub dataset: String,
    pub gamma: GammaConfig,
    pub match_modes: Vec<MatchMode>,
    pub skips: SkipCounts,
    pub scores: ScoreReport,
    pub confusion: ConfusionReport,
    pub reference_stats: CampaignStats,
    pub candidate_stats: CampaignStats,
}

pub fn fmt3(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.3}")).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.into_inner().map_err(|e| e.into_error().into())
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "candidate",
    "reference",
    "pearson",
    "precision_hard",
    "recall_hard",
    "f1_hard",
    "precision_soft",
    "recall_soft",
    "f1_soft",
    "f1_delta",
    "gamma",
    "s_empty",
];

pub fn summary_row(report: &EvaluationReport) -> Vec<String> {
    let s = &report.scores;
    let wants = |mode| report.match_modes.contains(&mode);
    let prf = |scores: Option<PrfScores>, mode| {
        let scores = scores.filter(|_| wants(mode));
        [
            fmt3(scores.map(|p| p.precision)),
            fmt3(scores.map(|p| p.recall)),
            fmt3(scores.map(|p| p.f1)),
        ]
    };
    let delta = s.f1_delta.filter(|_| wants(MatchMode::Hard) && wants(MatchMode::Soft));
    let mut row = vec![s.candidate_id.clone(), s.reference_id.clone(), fmt3(s.pearson)];
    row.extend(prf(s.hard, MatchMode::Hard));
    row.extend(prf(s.soft, MatchMode::Soft));
    row.extend([fmt3(delta), fmt3(s.gamma), fmt3(s.s_empty)]);
    row
}

pub fn summary_csv(report: &EvaluationReport) -> io::Result<Vec<u8>> {
    csv_bytes(&SUMMARY_HEADER, &[summary_row(report)]).map_err(csv_io)
}

pub fn confusion_csv(confusion: &ConfusionReport) -> io::Result<Vec<u8>> {
    let mut header = vec!["reference\\candidate"];
    header.extend(confusion.categories.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = confusion
        .categories
        .iter()
        .zip(&confusion.counts)
        .map(|(name, counts)| {
            let mut row = vec![name.clone()];
            row.extend(counts.iter().map(u64::to_string));
            row
        })
        .collect();
    csv_bytes(&header, &rows).map_err(csv_io)
}

pub fn per_example_csv(report: &ScoreReport) -> io::Result<Vec<u8>> {
    let header = [
        "example_id",
        "route",
        "reference_count",
        "candidate_count",
        "precision_hard",
        "recall_hard",
        "f1_hard",
        "precision_soft",
        "recall_soft",
        "f1_soft",
        "gamma",
        "gamma_skip",
        "s_empty",
    ];
    let rows: Vec<Vec<String>> = report
        .per_example
        .iter()
        .map(|e| {
            let route = match e.route {
                ExampleRoute::Overlap => "overlap",
                ExampleRoute::Empty => "empty",
                ExampleRoute::Failed => "failed",
            };
            let skip = match e.gamma_skip {
                Some(GammaSkip::EmptySide) => "empty_side",
                Some(GammaSkip::ZeroExpectedDisorder) => "zero_expected_disorder",
                None => "",
            };
            let mut row = vec![
                e.example_id.clone(),
                route.to_owned(),
                e.reference_count.to_string(),
                e.candidate_count.to_string(),
            ];
            for scores in [e.hard, e.soft] {
                row.extend([
                    fmt3(scores.map(|p| p.precision)),
                    fmt3(scores.map(|p| p.recall)),
                    fmt3(scores.map(|p| p.f1)),
                ]);
            }
            row.extend([fmt3(e.gamma), skip.to_owned(), fmt3(e.s_empty)]);
            row
        })
        .collect();
    csv_bytes(&header, &rows).map_err(csv_io)
}

pub const STATS_HEADER: [&str; 7] = ["annotator", "examples", "failed", "ann", "ann_per_ex", "empty_pct", "char_per_ann"];

pub fn stats_row(stats: &CampaignStats) -> Vec<String> {
    vec![
        stats.annotator_id.clone(),
        stats.examples.to_string(),
        stats.failed.to_string(),
        stats.annotations.to_string(),
        fmt3(Some(stats.annotations_per_example)),
        fmt3(Some(stats.empty_percent)),
        fmt3(stats.chars_per_annotation),
    ]
}

pub fn stats_csv(stats: &[CampaignStats]) -> io::Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = stats.iter().map(stats_row).collect();
    csv_bytes(&STATS_HEADER, &rows).map_err(csv_io)
}

pub fn report_json(report: &EvaluationReport) -> io::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanagree::metrics::{ExampleScores, PoolCounts};

    fn report() -> EvaluationReport {
        let prf = PrfScores {
            precision: 0.25,
            recall: 1.0 / 3.0,
            f1: 2.0 / 7.0,
        };
        let scores = ScoreReport {
            reference_id: "gold".into(),
            candidate_id: "llm".into(),
            pearson: None,
            hard: Some(prf),
            soft: Some(prf),
            f1_delta: Some(0.0),
            gamma: Some(-0.5),
            s_empty: Some(0.75),
            counts: PoolCounts::default(),
            per_example: vec![ExampleScores {
                example_id: "a,b".into(),
                reference_count: 0,
                candidate_count: 0,
                route: ExampleRoute::Empty,
                hard: None,
                soft: None,
                gamma: None,
                gamma_skip: Some(GammaSkip::EmptySide),
                s_empty: Some(1.0),
            }],
        };
        let stats = CampaignStats {
            annotator_id: "x".into(),
            examples: 1,
            failed: 0,
            annotations: 0,
            annotations_per_example: 0.0,
            empty_percent: 100.0,
            chars_per_annotation: None,
        };
        EvaluationReport {
            tool: TOOL.into(),
            version: VERSION.into(),
            config_hash: "h".into(),
            dataset: "d".into(),
            gamma: GammaConfig::default(),
            match_modes: vec![MatchMode::Hard, MatchMode::Soft],
            skips: SkipCounts::from_report(&scores),
            confusion: ConfusionReport {
                categories: vec!["A".into(), "B".into()],
                counts: vec![vec![1, 0], vec![2, 3]],
                row_normalized: vec![],
                unpaired_reference: 0,
            },
            scores,
            reference_stats: stats.clone(),
            candidate_stats: stats,
        }
    }

    #[test]
    fn summary_uses_three_decimals_and_blanks() {
        let text = String::from_utf8(summary_csv(&report()).unwrap()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER.join(","));
        assert_eq!(lines[1], "llm,gold,,0.250,0.333,0.286,0.250,0.333,0.286,0.000,-0.500,0.750");
    }

    #[test]
    fn unselected_modes_are_blank() {
        let mut r = report();
        r.match_modes = vec![MatchMode::Soft];
        let row = summary_row(&r);
        assert_eq!(&row[3..10], ["", "", "", "0.250", "0.333", "0.286", ""]);
    }

    #[test]
    fn per_example_quotes_ids() {
        let text = String::from_utf8(per_example_csv(&report().scores).unwrap()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "\"a,b\",empty,0,0,,,,,,,,empty_side,1.000");
    }

    #[test]
    fn confusion_layout() {
        let text = String::from_utf8(confusion_csv(&report().confusion).unwrap()).unwrap();
        assert_eq!(text, "reference\\candidate,A,B\nA,1,0\nB,2,3\n");
    }

    #[test]
    fn skip_counts() {
        let r = report();
        assert_eq!(r.skips.gamma_empty_side, 1);
        assert_eq!(r.skips.gamma_zero_expected, 0);
    }

    #[test]
    fn stats_blank_char_per_ann() {
        let text = String::from_utf8(stats_csv(&[report().reference_stats]).unwrap()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "x,1,0,0,0.000,100.000,");
    }
}
