//! Running an LLM over a dataset: prompt, call, parse, ground, normalize.

mod cache;
mod prompt;
mod provider;

use std::collections::BTreeMap;
use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::grounding::{
    extract_last_json_object, ground_annotations, parse_annotation_payload, split_reasoning, GroundingError,
    GroundingReport,
};
use crate::model::{normalize_annotation_set, AnnotationSet, Campaign, Dataset, Example, ModelError, TokenUsage, TraceRecord};

pub use cache::{cache_key, CacheRecord, TraceCache};
pub use prompt::{output_schema, render_categories, render_prompt, FewShotExample, PromptError, PromptTemplate, PromptVariant};
pub use provider::{Completion, CompletionRequest, MockAdapter, OpenAiCompatible, ProviderAdapter, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaMode {
    /// The provider enforces the output schema.
    #[default]
    Constrained,
    /// Free text; the last JSON object is extracted afterwards. Use this for
    /// reasoning models.
    Freeform,
}

fn default_temperature() -> f64 {
    0.0
}
fn default_seed() -> u64 {
    42
}
fn default_max_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}
fn default_fewshot_count() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatorConfig {
    pub model_id: String,
    #[serde(default)]
    pub variant: PromptVariant,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub schema_mode: SchemaMode,
    /// Attempts per example before it is flagged as failed.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default = "default_fewshot_count")]
    pub fewshot_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fewshot_examples: Vec<FewShotExample>,
    /// Replaces the built-in prompt body for the task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_body: Option<String>,
}

impl AnnotatorConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            variant: PromptVariant::Base,
            temperature: default_temperature(),
            seed: default_seed(),
            schema_mode: SchemaMode::Constrained,
            max_retries: default_max_retries(),
            concurrency_limit: default_concurrency(),
            fewshot_count: default_fewshot_count(),
            fewshot_examples: Vec::new(),
            prompt_body: None,
        }
    }

    pub fn validate(&self) -> Result<(), AnnotateError> {
        if self.model_id.trim().is_empty() {
            return Err(AnnotateError::Config("model_id must not be empty"));
        }
        if self.max_retries == 0 {
            return Err(AnnotateError::Config("max_retries must be at least 1"));
        }
        if self.concurrency_limit == 0 {
            return Err(AnnotateError::Config("concurrency_limit must be at least 1"));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(AnnotateError::Config("temperature must be a non-negative number"));
        }
        Ok(())
    }

    pub fn template(&self, dataset: &Dataset) -> PromptTemplate {
        let mut template = PromptTemplate::builtin(dataset.task, self.variant)
            .with_fewshot(self.fewshot_examples.clone(), self.fewshot_count);
        if let Some(body) = &self.prompt_body {
            template.body = body.clone();
        }
        template
    }

    fn schema(&self) -> Option<Value> {
        (self.schema_mode == SchemaMode::Constrained).then(|| output_schema(self.variant))
    }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("invalid annotator config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("grounded spans failed validation: {0}")]
    Model(#[from] ModelError),
    #[error("cache write failed: {0}")]
    Cache(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleOutcome {
    pub set: AnnotationSet,
    pub trace: TraceRecord,
    pub echo: Option<Value>,
    pub grounding: GroundingReport,
}

#[derive(Debug, Error)]
enum AttemptError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error("constrained output is not valid JSON: {0}")]
    Json(String),
}

struct Parsed {
    set: AnnotationSet,
    reasoning: String,
    grounding: GroundingReport,
}

fn parse_output(
    example: &Example,
    dataset: &Dataset,
    mode: SchemaMode,
    completion: &Completion,
) -> Result<Result<Parsed, AttemptError>, ModelError> {
    let (payload, think) = match mode {
        SchemaMode::Freeform => {
            let (rest, think) = split_reasoning(&completion.text);
            (extract_last_json_object(&rest).map_err(AttemptError::from), think)
        }
        SchemaMode::Constrained => (
            serde_json::from_str::<Value>(completion.text.trim()).map_err(|e| AttemptError::Json(e.to_string())),
            String::new(),
        ),
    };
    let payload = match payload {
        Ok(p) => p,
        Err(e) => return Ok(Err(e)),
    };
    let (raws, mut report) = match parse_annotation_payload(&example.id, &payload, dataset.categories.len()) {
        Ok(parsed) => parsed,
        Err(e) => return Ok(Err(e.into())),
    };
    let (spans, ground_report) = ground_annotations(&example.id, &raws, &example.text);
    report.merge(ground_report);
    let normalized = normalize_annotation_set(&example.id, spans, &example.text, dataset.no_overlap)?;
    let reasoning = [completion.reasoning.clone().unwrap_or_default(), think]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Ok(Parsed {
        set: normalized.set,
        reasoning,
        grounding: report,
    }))
}

/// Annotate one example with an already rendered prompt.
///
/// Malformed output and transport errors are retried with the identical
/// prompt; after `max_retries` attempts the example gets a failed set.
pub fn annotate_rendered(
    example: &Example,
    dataset: &Dataset,
    config: &AnnotatorConfig,
    prompt: &str,
    adapter: &dyn ProviderAdapter,
) -> Result<ExampleOutcome, AnnotateError> {
    let request = CompletionRequest {
        example_id: example.id.clone(),
        prompt: prompt.to_owned(),
        temperature: config.temperature,
        seed: config.seed,
        schema: config.schema(),
    };
    let mut usage = TokenUsage::default();
    let mut latency_s = 0.0;
    let mut failures = 0u32;
    let mut last_raw = String::new();
    let mut last_error = String::new();
    let mut echo = None;

    for _ in 0..config.max_retries {
        let completion = match adapter.complete(&request) {
            Ok(c) => c,
            Err(e) => {
                failures += 1;
                last_error = e.to_string();
                continue;
            }
        };
        usage += completion.usage;
        latency_s += completion.latency_s;
        echo = completion.echo.clone().or(echo);
        last_raw = completion.text.clone();
        match parse_output(example, dataset, config.schema_mode, &completion)? {
            Ok(parsed) => {
                let trace = TraceRecord {
                    example_id: example.id.clone(),
                    model_id: config.model_id.clone(),
                    variant: config.variant.to_string(),
                    raw_output: completion.text,
                    reasoning: parsed.reasoning,
                    annotations: parsed.set.annotations.clone(),
                    latency_s,
                    usage,
                    retries: failures,
                    failed: false,
                };
                return Ok(ExampleOutcome {
                    set: parsed.set,
                    trace,
                    echo,
                    grounding: parsed.grounding,
                });
            }
            Err(e) => {
                failures += 1;
                last_error = e.to_string();
            }
        }
    }

    let reasoning = if last_raw.is_empty() { last_error } else { String::new() };
    Ok(ExampleOutcome {
        set: AnnotationSet::failed(&example.id),
        trace: TraceRecord {
            example_id: example.id.clone(),
            model_id: config.model_id.clone(),
            variant: config.variant.to_string(),
            raw_output: last_raw,
            reasoning,
            annotations: Vec::new(),
            latency_s,
            usage,
            retries: failures,
            failed: true,
        },
        echo,
        grounding: GroundingReport::default(),
    })
}

/// Render, call and ground one example.
pub fn annotate_example(
    example: &Example,
    dataset: &Dataset,
    config: &AnnotatorConfig,
    adapter: &dyn ProviderAdapter,
) -> Result<ExampleOutcome, AnnotateError> {
    config.validate()?;
    let prompt = render_prompt(&config.template(dataset), example, &dataset.categories, &dataset.guidelines)?;
    annotate_rendered(example, dataset, config, &prompt, adapter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRun {
    pub campaign: Campaign,
    pub failed: Vec<String>,
    /// Provider calls issued, retries included.
    pub requests: usize,
    pub cache_hits: usize,
    pub grounding: GroundingReport,
    /// Generation settings reported by the provider, per example.
    pub echoes: BTreeMap<String, Value>,
}

struct Counting<'a> {
    inner: &'a dyn ProviderAdapter,
    calls: AtomicUsize,
}

impl ProviderAdapter for Counting<'_> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request)
    }
}

/// Annotate every example in id order, reusing successful cached traces.
///
/// Up to `concurrency_limit` examples are in flight at once. The result does
/// not depend on completion order.
pub fn annotate_dataset(
    dataset: &Dataset,
    config: &AnnotatorConfig,
    adapter: &dyn ProviderAdapter,
    cache: &TraceCache,
) -> Result<AnnotationRun, AnnotateError> {
    config.validate()?;
    let template = config.template(dataset);
    template.check()?;

    let mut outcomes: Vec<Option<ExampleOutcome>> = vec![None; dataset.examples.len()];
    let mut pending = Vec::new();
    let mut cache_hits = 0;
    for (i, example) in dataset.examples.iter().enumerate() {
        let prompt = render_prompt(&template, example, &dataset.categories, &dataset.guidelines)?;
        let key = cache_key(config, &prompt);
        match cache.get(&key) {
            Some(hit) => {
                cache_hits += 1;
                let set = AnnotationSet {
                    example_id: example.id.clone(),
                    annotations: hit.trace.annotations.clone(),
                    failed: false,
                };
                outcomes[i] = Some(ExampleOutcome {
                    set,
                    trace: hit.trace.clone(),
                    echo: hit.echo.clone(),
                    grounding: hit.grounding.clone(),
                });
            }
            None => pending.push((i, prompt, key)),
        }
    }

    let counting = Counting {
        inner: adapter,
        calls: AtomicUsize::new(0),
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<ExampleOutcome, AnnotateError>)>> = Mutex::new(Vec::new());
    let workers = config.concurrency_limit.min(pending.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::Relaxed);
                let Some((i, prompt, key)) = pending.get(n) else {
                    break;
                };
                let example = &dataset.examples[*i];
                let outcome = annotate_rendered(example, dataset, config, prompt, &counting).and_then(|outcome| {
                    cache.append(&CacheRecord {
                        key: key.clone(),
                        trace: outcome.trace.clone(),
                        echo: outcome.echo.clone(),
                        grounding: outcome.grounding.clone(),
                    })?;
                    Ok(outcome)
                });
                results.lock().unwrap_or_else(|e| e.into_inner()).push((*i, outcome));
            });
        }
    });
    let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    results.sort_by_key(|(i, _)| *i);
    for (i, outcome) in results {
        outcomes[i] = Some(outcome?);
    }

    let mut campaign = Campaign::new(config.model_id.clone(), dataset.name.clone());
    let mut grounding = GroundingReport::default();
    let mut echoes = BTreeMap::new();
    for outcome in outcomes.into_iter().flatten() {
        grounding.merge(outcome.grounding);
        if let Some(echo) = outcome.echo {
            echoes.insert(outcome.set.example_id.clone(), echo);
        }
        campaign.traces.insert(outcome.trace.example_id.clone(), outcome.trace);
        campaign.insert(outcome.set);
    }
    let failed = campaign.failed_ids().into_iter().map(str::to_owned).collect();
    Ok(AnnotationRun {
        campaign,
        failed,
        requests: counting.calls.load(Ordering::Relaxed),
        cache_hits,
        grounding,
        echoes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Category, CategorySet, SpanAnnotation, Task};
    use tempfile::TempDir;

    fn dataset(no_overlap: bool) -> Dataset {
        let examples = ["The cat sat on the mat.", "It rained all day in Brno.", "Nothing odd here."]
            .iter()
            .enumerate()
            .map(|(i, text)| Example {
                id: format!("ex{i}"),
                text: text.to_string(),
                source: Some("data".into()),
                task: Task::D2t,
                metadata: Default::default(),
            })
            .collect();
        let cats = CategorySet::new(
            ["A", "B"]
                .iter()
                .enumerate()
                .map(|(index, name)| Category {
                    index,
                    name: name.to_string(),
                    description: String::new(),
                })
                .collect(),
        )
        .unwrap();
        Dataset::new("toy", Task::D2t, examples, cats, "Be careful.", no_overlap).unwrap()
    }

    fn payload(spans: &[(&str, usize)]) -> String {
        let items: Vec<Value> = spans
            .iter()
            .map(|(text, t)| serde_json::json!({"reason": "r", "text": text, "type": t}))
            .collect();
        serde_json::json!({"annotations": items}).to_string()
    }

    fn config(mode: SchemaMode) -> AnnotatorConfig {
        AnnotatorConfig {
            schema_mode: mode,
            ..AnnotatorConfig::new("mock-model")
        }
    }

    #[test]
    fn happy_path_grounds_spans() {
        let ds = dataset(false);
        let mock = MockAdapter::new([("ex0".into(), vec![payload(&[("cat", 0), ("mat", 1)])])]);
        let out = annotate_example(&ds.examples[0], &ds, &config(SchemaMode::Constrained), &mock).unwrap();
        let keys: Vec<_> = out.set.annotations.iter().map(SpanAnnotation::key).collect();
        assert_eq!(keys, vec![(4, 7, 0), (19, 22, 1)]);
        assert!(!out.trace.failed);
        assert_eq!(out.trace.retries, 0);
        assert_eq!(out.grounding.grounded, 2);
    }

    #[test]
    fn think_tags_are_stripped_in_freeform_mode() {
        let ds = dataset(false);
        let raw = format!("<think>maybe {{\"annotations\": []}}</think> draft {} final {}", payload(&[("sat", 0)]), payload(&[("cat", 1)]));
        let mock = MockAdapter::new([("ex0".into(), vec![raw.clone()])]);
        let out = annotate_example(&ds.examples[0], &ds, &config(SchemaMode::Freeform), &mock).unwrap();
        assert_eq!(out.set.annotations[0].key(), (4, 7, 1));
        assert_eq!(out.set.len(), 1);
        assert!(out.trace.reasoning.contains("maybe"));
        assert_eq!(out.trace.raw_output, raw);
    }

    #[test]
    fn garbage_exhausts_retries() {
        let ds = dataset(false);
        let mock = MockAdapter::new([("ex0".into(), vec!["no json here".into()])]);
        let out = annotate_example(&ds.examples[0], &ds, &config(SchemaMode::Freeform), &mock).unwrap();
        assert!(out.set.failed && out.set.is_empty());
        assert!(out.trace.failed);
        assert_eq!(out.trace.retries, 3);
        assert_eq!(mock.attempts("ex0"), 3);
    }

    #[test]
    fn retry_recovers() {
        let ds = dataset(false);
        let mock = MockAdapter::new([("ex0".into(), vec!["oops".into(), payload(&[("cat", 0)])])]);
        let out = annotate_example(&ds.examples[0], &ds, &config(SchemaMode::Constrained), &mock).unwrap();
        assert!(!out.set.failed);
        assert_eq!(out.trace.retries, 1);
    }

    #[test]
    fn genuine_empty_is_not_failed() {
        let ds = dataset(false);
        let mock = MockAdapter::new([("ex0".into(), vec![payload(&[])])]);
        let out = annotate_example(&ds.examples[0], &ds, &config(SchemaMode::Constrained), &mock).unwrap();
        assert!(out.set.is_empty() && !out.set.failed);
    }

    #[test]
    fn overlap_rule_applies_to_model_output() {
        let ds = dataset(true);
        let mock = MockAdapter::new([("ex0".into(), vec![payload(&[("cat sat", 0), ("sat on", 1)])])]);
        let out = annotate_example(&ds.examples[0], &ds, &config(SchemaMode::Constrained), &mock).unwrap();
        assert_eq!(out.set.len(), 1);
    }

    fn replies() -> MockAdapter {
        MockAdapter::new([
            ("ex0".into(), vec![payload(&[("cat", 0)])]),
            ("ex1".into(), vec![payload(&[("Brno", 1)])]),
            ("ex2".into(), vec![payload(&[])]),
        ])
    }

    #[test]
    fn dataset_run_caches_and_resumes() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cache.jsonl");
        let ds = dataset(false);
        let cfg = config(SchemaMode::Constrained);

        let first = annotate_dataset(&ds, &cfg, &replies(), &TraceCache::open(&path).unwrap()).unwrap();
        assert_eq!(first.campaign.sets.len(), 3);
        assert_eq!((first.requests, first.cache_hits), (3, 0));
        let lines: Vec<String> = std::fs::read_to_string(&path).unwrap().lines().map(str::to_owned).collect();
        assert_eq!(lines.len(), 3);

        std::fs::write(&path, format!("{}\n{}\n", lines[0], lines[2])).unwrap();
        let mock = replies();
        let second = annotate_dataset(&ds, &cfg, &mock, &TraceCache::open(&path).unwrap()).unwrap();
        assert_eq!((second.requests, second.cache_hits), (1, 2));
        assert_eq!(mock.attempts("ex1"), 1);
        assert_eq!(mock.attempts("ex0"), 0);
        assert_eq!(second.campaign, first.campaign);

        let cot = AnnotatorConfig {
            variant: PromptVariant::Cot,
            ..cfg.clone()
        };
        let third = annotate_dataset(&ds, &cot, &replies(), &TraceCache::open(&path).unwrap()).unwrap();
        assert_eq!((third.requests, third.cache_hits), (3, 0));
    }

    #[test]
    fn truncated_cache_line_is_ignored() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cache.jsonl");
        let ds = dataset(false);
        let cfg = config(SchemaMode::Constrained);
        annotate_dataset(&ds, &cfg, &replies(), &TraceCache::open(&path).unwrap()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 20]).unwrap();
        let cache = TraceCache::open(&path).unwrap();
        assert_eq!((cache.len(), cache.skipped_lines), (2, 1));
        let run = annotate_dataset(&ds, &cfg, &replies(), &cache).unwrap();
        assert_eq!(run.requests, 1);
        assert_eq!(TraceCache::open(&path).unwrap().len(), 3);
    }

    #[test]
    fn failed_examples_are_retried_on_resume() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cache.jsonl");
        let ds = dataset(false);
        let cfg = config(SchemaMode::Constrained);
        let bad = MockAdapter::new([
            ("ex0".into(), vec![payload(&[("cat", 0)])]),
            ("ex1".into(), vec!["broken".into()]),
            ("ex2".into(), vec![payload(&[])]),
        ]);
        let run = annotate_dataset(&ds, &cfg, &bad, &TraceCache::open(&path).unwrap()).unwrap();
        assert_eq!(run.failed, vec!["ex1".to_string()]);
        let run = annotate_dataset(&ds, &cfg, &replies(), &TraceCache::open(&path).unwrap()).unwrap();
        assert_eq!(run.requests, 1);
        assert!(run.failed.is_empty());
    }

    #[test]
    fn concurrency_does_not_change_result() {
        let ds = dataset(false);
        let serial = AnnotatorConfig {
            concurrency_limit: 1,
            ..config(SchemaMode::Constrained)
        };
        let wide = AnnotatorConfig {
            concurrency_limit: 8,
            ..serial.clone()
        };
        let a = annotate_dataset(&ds, &serial, &replies(), &TraceCache::disabled()).unwrap();
        let b = annotate_dataset(&ds, &wide, &replies(), &TraceCache::disabled()).unwrap();
        assert_eq!(a.campaign, b.campaign);
    }

    #[test]
    fn rejects_bad_config() {
        let ds = dataset(false);
        let cfg = AnnotatorConfig {
            max_retries: 0,
            ..config(SchemaMode::Constrained)
        };
        assert!(matches!(annotate_dataset(&ds, &cfg, &replies(), &TraceCache::disabled()), Err(AnnotateError::Config(_))));
    }
}
