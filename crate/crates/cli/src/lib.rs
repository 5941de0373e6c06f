//! Subcommands behind the `spanagree` binary.
//!
//! Exit codes: 0 success (possibly with per-example failures), 1 every
//! example failed, 2 usage, config or validation error, 3 I/O error.

pub mod config;
pub mod report;

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use spanagree::annotator::{annotate_dataset, AnnotateError, MockAdapter, OpenAiCompatible, ProviderAdapter, TraceCache};
use spanagree::ingest::{self, IngestError};
use spanagree::metrics::{aggregate, annotation_stats, confusion_matrix, MetricError};
use spanagree::model::{Campaign, Dataset};

use config::{load_config, LoadedConfig, Overrides, ReportFormat};
use report::{EvaluationReport, SkipCounts};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        Self {
            code: if e.is_io() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<AnnotateError> for CliError {
    fn from(e: AnnotateError) -> Self {
        match e {
            AnnotateError::Cache(e) => Self::io(format!("cache: {e}")),
            other => Self::config(other.to_string()),
        }
    }
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    report::write_file(dir, name, bytes).map_err(|e| CliError::io(format!("{}: {e}", dir.join(name).display())))
}

fn say(out: &mut dyn Write, line: impl fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::io(format!("stdout: {e}")))
}

/// Options shared by all subcommands.
#[derive(Debug, Clone)]
pub struct GlobalArgs {
    pub config: PathBuf,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mock: Option<PathBuf>,
}

impl GlobalArgs {
    fn load(&self) -> Result<LoadedConfig, CliError> {
        load_config(
            &self.config,
            &Overrides {
                output: self.output.clone(),
                seed: self.seed,
            },
        )
    }
}

fn load_dataset(cfg: &LoadedConfig) -> Result<Dataset, CliError> {
    Ok(ingest::load_dataset_with(&cfg.corpus_path(), cfg.category_file()?)?)
}

/// Load a configured campaign; `.tsv` files go through the offset importer
/// with the campaign id as annotator.
pub fn load_campaign(cfg: &LoadedConfig, dataset: &Dataset, id: &str) -> Result<Campaign, CliError> {
    let path = cfg.campaign_path(id)?;
    let is_tsv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    let campaign = if is_tsv {
        ingest::import_offset_tsv(&path, dataset, id)?
    } else {
        ingest::load_campaign(&path, dataset)?
    };
    Ok(campaign)
}

fn adapter(cfg: &LoadedConfig, mock: Option<&Path>, model_id: &str) -> Result<Box<dyn ProviderAdapter>, CliError> {
    if let Some(path) = mock {
        let mock = MockAdapter::from_jsonl(path).map_err(|e| CliError::config(e.to_string()))?;
        return Ok(Box::new(mock));
    }
    let provider = cfg
        .config
        .provider
        .as_ref()
        .ok_or_else(|| CliError::config("no provider configured; add a \"provider\" section or pass --mock"))?;
    let adapter = OpenAiCompatible::from_env(
        &provider.base_url,
        model_id,
        provider.api_key_env.as_deref(),
        Duration::from_secs(provider.timeout_s),
    )
    .map_err(|e| CliError::config(e.to_string()))?;
    Ok(Box::new(adapter))
}

/// Annotate the corpus and write `campaign.jsonl` and `traces.jsonl`.
pub fn cmd_annotate(args: &GlobalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.load()?;
    let annotator = cfg
        .config
        .annotator
        .clone()
        .ok_or_else(|| CliError::config("config has no \"annotator\" section"))?;
    let dataset = load_dataset(&cfg)?;
    let adapter = adapter(&cfg, args.mock.as_deref(), &annotator.model_id)?;
    let cache = match cfg.cache_path() {
        Some(path) => TraceCache::open(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?,
        None => TraceCache::disabled(),
    };
    let run = annotate_dataset(&dataset, &annotator, adapter.as_ref(), &cache)?;

    let mut campaign_bytes = Vec::new();
    ingest::write_campaign(&run.campaign, &mut campaign_bytes).map_err(|e| CliError::io(e.to_string()))?;
    write_out(&cfg.output_dir, "campaign.jsonl", &campaign_bytes)?;
    let mut trace_bytes = Vec::new();
    ingest::write_traces(run.campaign.traces.values(), &mut trace_bytes).map_err(|e| CliError::io(e.to_string()))?;
    write_out(&cfg.output_dir, "traces.jsonl", &trace_bytes)?;

    let total = run.campaign.sets.len();
    let latencies: Vec<f64> = run.campaign.traces.values().map(|t| t.latency_s).collect();
    let mean_latency = if latencies.is_empty() {
        0.0
    } else {
        latencies.iter().sum::<f64>() / latencies.len() as f64
    };
    say(out, format!("examples: {total}"))?;
    say(out, format!("failed: {}", run.failed.len()))?;
    if !run.failed.is_empty() {
        say(out, format!("failed ids: {}", run.failed.join(", ")))?;
    }
    say(out, format!("mean latency: {mean_latency:.3} s/out"))?;
    say(out, format!("requests: {}, cache hits: {}", run.requests, run.cache_hits))?;
    say(
        out,
        format!(
            "grounded: {}, dropped: {} unmatched, {} bad category, {} malformed",
            run.grounding.grounded, run.grounding.dropped_unmatched, run.grounding.dropped_bad_category, run.grounding.dropped_malformed
        ),
    )?;
    for (id, echo) in &run.echoes {
        say(out, format!("provider echo {id}: {echo}"))?;
    }
    if total > 0 && run.failed.len() == total {
        return Err(CliError {
            code: 1,
            message: "every example failed".into(),
        });
    }
    Ok(())
}

/// Build the full evaluation report for two configured campaigns.
pub fn evaluate(cfg: &LoadedConfig, reference_id: &str, candidate_id: &str) -> Result<EvaluationReport, CliError> {
    let dataset = load_dataset(cfg)?;
    let reference = load_campaign(cfg, &dataset, reference_id)?;
    let candidate = load_campaign(cfg, &dataset, candidate_id)?;
    let gamma = cfg.config.metrics.gamma;
    let mut scores = aggregate(&dataset, &reference, &candidate, &gamma)?;
    scores.reference_id = reference_id.to_owned();
    scores.candidate_id = candidate_id.to_owned();
    let confusion = confusion_matrix(&dataset.categories, &reference, &candidate);
    Ok(EvaluationReport {
        tool: report::TOOL.into(),
        version: report::VERSION.into(),
        config_hash: cfg.hash.clone(),
        dataset: dataset.name.clone(),
        gamma,
        match_modes: cfg.config.metrics.match_modes.clone(),
        skips: SkipCounts::from_report(&scores),
        confusion: (&confusion).into(),
        reference_stats: annotation_stats(&reference),
        candidate_stats: annotation_stats(&candidate),
        scores,
    })
}

/// Score a candidate campaign against a reference and write the reports.
pub fn cmd_evaluate(args: &GlobalArgs, reference_id: &str, candidate_id: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.load()?;
    let report = evaluate(&cfg, reference_id, candidate_id)?;
    let io_err = |e: io::Error| CliError::io(e.to_string());
    if cfg.config.report.wants(ReportFormat::Json) {
        write_out(&cfg.output_dir, "report.json", &report::report_json(&report).map_err(io_err)?)?;
    }
    let summary = report::summary_csv(&report).map_err(io_err)?;
    if cfg.config.report.wants(ReportFormat::Csv) {
        write_out(&cfg.output_dir, "summary.csv", &summary)?;
        write_out(&cfg.output_dir, "confusion.csv", &report::confusion_csv(&report.confusion).map_err(io_err)?)?;
        write_out(&cfg.output_dir, "per_example.csv", &report::per_example_csv(&report.scores).map_err(io_err)?)?;
    }
    out.write_all(&summary).map_err(|e| CliError::io(format!("stdout: {e}")))?;
    let c = &report.scores.counts;
    say(
        out,
        format!(
            "examples: {}, overlap pool: {}, empty pool: {}, failed: {}, gamma skipped: {}",
            c.examples, c.overlap_pool, c.empty_pool, c.failed, c.gamma_skipped
        ),
    )
}

/// Descriptive statistics of one campaign, printed and written to `stats.csv`.
pub fn cmd_stats(args: &GlobalArgs, campaign_id: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.load()?;
    let dataset = load_dataset(&cfg)?;
    let campaign = load_campaign(&cfg, &dataset, campaign_id)?;
    let mut stats = annotation_stats(&campaign);
    if stats.annotator_id.is_empty() {
        stats.annotator_id = campaign_id.to_owned();
    }
    let table = report::stats_csv(std::slice::from_ref(&stats)).map_err(|e| CliError::io(e.to_string()))?;
    write_out(&cfg.output_dir, "stats.csv", &table)?;
    out.write_all(&table).map_err(|e| CliError::io(format!("stdout: {e}")))
}
