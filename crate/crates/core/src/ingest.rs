//! Reading and writing corpora, category inventories and campaigns.
//!
//! Interchange formats:
//!
//! * corpus: JSON Lines, one `{id, text, source?, task, metadata?}` per line;
//! * categories: one JSON object `{task, no_overlap, categories, guidelines}`;
//! * campaign: JSON Lines, one `{example_id, annotator_id, annotations, failed}`
//!   per line, spans as `{start, end, type, reason?, text?}`;
//! * traces: JSON Lines of [`TraceRecord`].
//!
//! All offsets are 0-based, end-exclusive, in Unicode scalar values. Loading
//! is strict: the first invalid line fails the whole file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AnnotationSet, Campaign, Category, CategorySet, Dataset, Example, ModelError, SpanAnnotation, Task,
    TraceRecord,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{path}:{line}: example {id:?} is not in the dataset")]
    DanglingExample { path: PathBuf, line: usize, id: String },
    #[error("{path}:{line}: {source}")]
    Invalid {
        path: PathBuf,
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("{path}:{line}: spans overlap or repeat in a set that forbids it: {spans:?}")]
    Overlap { path: PathBuf, line: usize, spans: Vec<(usize, usize, usize)> },
    #[error("{path}:{line}: annotator {found:?} differs from {expected:?}")]
    MixedAnnotators { path: PathBuf, line: usize, expected: String, found: String },
    #[error("{path}:{line}: unknown technique {name:?}")]
    UnknownTechnique { path: PathBuf, line: usize, name: String },
    #[error("{path}:{line}: offsets ({start}, {end}) invalid for text of length {text_len}")]
    OffsetOutOfBounds {
        path: PathBuf,
        line: usize,
        start: usize,
        end: usize,
        text_len: usize,
    },
    #[error("{path}: {source}")]
    Categories {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
}

impl IngestError {
    /// Whether this is an operating-system I/O failure rather than bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryFile {
    pub task: Task,
    #[serde(default)]
    pub no_overlap: bool,
    pub categories: Vec<Category>,
    #[serde(default)]
    pub guidelines: String,
}

impl CategoryFile {
    pub fn category_set(&self) -> Result<CategorySet, ModelError> {
        CategorySet::new(self.categories.clone())
    }
}

/// Category inventories shipped with the crate.
pub mod bundled {
    use crate::model::Task;

    pub const D2T: &str = include_str!("../data/categories/d2t.json");
    pub const MT: &str = include_str!("../data/categories/mt.json");
    pub const PROPAGANDA: &str = include_str!("../data/categories/propaganda.json");

    pub fn for_task(task: Task) -> Option<&'static str> {
        match task {
            Task::D2t => Some(D2T),
            Task::Mt => Some(MT),
            Task::Propaganda => Some(PROPAGANDA),
            Task::Generic => None,
        }
    }
}

pub fn parse_category_file(text: &str, path: &Path) -> Result<CategoryFile, IngestError> {
    let file: CategoryFile = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })?;
    file.category_set().map_err(|source| IngestError::Categories {
        path: path.to_owned(),
        source,
    })?;
    Ok(file)
}

pub fn load_category_file(path: &Path) -> Result<CategoryFile, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_category_file(&text, path)
}

fn jsonl_lines(path: &Path) -> Result<Vec<(usize, String)>, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, line: usize, text: &str) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusLine {
    id: String,
    text: String,
    #[serde(default)]
    source: Option<String>,
    task: Task,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

pub fn load_corpus(path: &Path) -> Result<Vec<Example>, IngestError> {
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (line, text) in jsonl_lines(path)? {
        let row: CorpusLine = parse_line(path, line, &text)?;
        if row.text.is_empty() {
            return Err(IngestError::Invalid {
                path: path.to_owned(),
                line,
                source: ModelError::EmptyText(row.id),
            });
        }
        if !seen.insert(row.id.clone()) {
            return Err(IngestError::DuplicateId {
                path: path.to_owned(),
                line,
                id: row.id,
            });
        }
        examples.push(Example {
            id: row.id,
            text: row.text,
            source: row.source,
            task: row.task,
            metadata: row.metadata,
        });
    }
    Ok(examples)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Load a corpus together with its category file. The dataset is named
/// after the corpus file stem.
pub fn load_dataset(corpus_path: &Path, category_path: &Path) -> Result<Dataset, IngestError> {
    let categories = load_category_file(category_path)?;
    load_dataset_with(corpus_path, categories)
}

/// Like [`load_dataset`] with an already parsed category file.
pub fn load_dataset_with(corpus_path: &Path, categories: CategoryFile) -> Result<Dataset, IngestError> {
    let examples = load_corpus(corpus_path)?;
    let invalid = |source| IngestError::Categories {
        path: corpus_path.to_owned(),
        source,
    };
    let set = categories.category_set().map_err(invalid)?;
    Dataset::new(
        file_stem(corpus_path),
        categories.task,
        examples,
        set,
        categories.guidelines,
        categories.no_overlap,
    )
    .map_err(invalid)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CampaignLine {
    example_id: String,
    annotator_id: String,
    annotations: Vec<SpanAnnotation>,
    #[serde(default)]
    failed: bool,
}

/// Validate one set against the dataset, refusing anything normalization
/// would have to repair.
fn checked_set(dataset: &Dataset, set: AnnotationSet, path: &Path, line: usize) -> Result<AnnotationSet, IngestError> {
    let Some(example) = dataset.example(&set.example_id) else {
        return Err(IngestError::DanglingExample {
            path: path.to_owned(),
            line,
            id: set.example_id,
        });
    };
    let original = set.annotations.len();
    let normalized = dataset
        .validate_set(&set, &example.text)
        .map_err(|source| IngestError::Invalid {
            path: path.to_owned(),
            line,
            source,
        })?;
    if normalized.set.annotations.len() != original {
        let mut spans: Vec<_> = normalized.dropped.iter().map(SpanAnnotation::key).collect();
        if spans.is_empty() {
            spans = set.annotations.iter().map(SpanAnnotation::key).collect();
        }
        return Err(IngestError::Overlap {
            path: path.to_owned(),
            line,
            spans,
        });
    }
    Ok(normalized.set)
}

pub fn load_campaign(path: &Path, dataset: &Dataset) -> Result<Campaign, IngestError> {
    let mut campaign = Campaign::new("", dataset.name.clone());
    let mut first = true;
    for (line, text) in jsonl_lines(path)? {
        let row: CampaignLine = parse_line(path, line, &text)?;
        if first {
            campaign.annotator_id = row.annotator_id.clone();
            first = false;
        } else if row.annotator_id != campaign.annotator_id {
            return Err(IngestError::MixedAnnotators {
                path: path.to_owned(),
                line,
                expected: campaign.annotator_id.clone(),
                found: row.annotator_id,
            });
        }
        if campaign.sets.contains_key(&row.example_id) {
            return Err(IngestError::DuplicateId {
                path: path.to_owned(),
                line,
                id: row.example_id,
            });
        }
        let set = AnnotationSet {
            example_id: row.example_id,
            annotations: row.annotations,
            failed: row.failed,
        };
        campaign.insert(checked_set(dataset, set, path, line)?);
    }
    Ok(campaign)
}

/// Campaign as JSON Lines in example-id order.
pub fn write_campaign<W: Write>(campaign: &Campaign, mut out: W) -> io::Result<()> {
    for set in campaign.sets.values() {
        let line = CampaignLine {
            example_id: set.example_id.clone(),
            annotator_id: campaign.annotator_id.clone(),
            annotations: set.annotations.clone(),
            failed: set.failed,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn export_campaign(campaign: &Campaign, path: &Path) -> Result<(), IngestError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_campaign(campaign, BufWriter::new(file)).map_err(io_err(path))
}

pub fn write_traces<'a, W: Write>(traces: impl IntoIterator<Item = &'a TraceRecord>, mut out: W) -> io::Result<()> {
    for trace in traces {
        serde_json::to_writer(&mut out, trace)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn load_traces(path: &Path) -> Result<Vec<TraceRecord>, IngestError> {
    jsonl_lines(path)?
        .into_iter()
        .map(|(line, text)| parse_line(path, line, &text))
        .collect()
}

/// Lowercase alphanumerics only, so `Name_Calling,Labeling` and
/// `Name Calling, Labeling` compare equal.
fn technique_key(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Import span labels from tab-separated `article_id, technique, start, end`
/// rows. Offsets are already 0-based and end-exclusive in characters, so no
/// conversion is applied. An article id matches a corpus id either verbatim
/// or with an `article` prefix. Every corpus example gets a set; examples
/// without rows get an empty one.
pub fn import_offset_tsv(path: &Path, dataset: &Dataset, annotator_id: &str) -> Result<Campaign, IngestError> {
    let by_name: HashMap<String, usize> = dataset
        .categories
        .iter()
        .map(|c| (technique_key(&c.name), c.index))
        .collect();
    let mut spans: BTreeMap<String, Vec<SpanAnnotation>> = dataset
        .examples
        .iter()
        .map(|e| (e.id.clone(), Vec::new()))
        .collect();
    let mut row_line: HashMap<String, usize> = HashMap::new();

    let file = File::open(path).map_err(io_err(path))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(IngestError::Parse {
                path: path.to_owned(),
                line: line_no,
                message: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let parse_offset = |s: &str| {
            s.parse::<usize>().map_err(|e| IngestError::Parse {
                path: path.to_owned(),
                line: line_no,
                message: format!("bad offset {s:?}: {e}"),
            })
        };
        let (article, technique) = (fields[0], fields[1]);
        let (start, end) = (parse_offset(fields[2])?, parse_offset(fields[3])?);

        let id = [article.to_owned(), format!("article{article}")]
            .into_iter()
            .find(|id| dataset.example(id).is_some())
            .ok_or_else(|| IngestError::DanglingExample {
                path: path.to_owned(),
                line: line_no,
                id: article.to_owned(),
            })?;
        let category = *by_name
            .get(&technique_key(technique))
            .ok_or_else(|| IngestError::UnknownTechnique {
                path: path.to_owned(),
                line: line_no,
                name: technique.to_owned(),
            })?;
        let text_len = dataset.example(&id).map(Example::char_len).unwrap_or_default();
        if start >= end || end > text_len {
            return Err(IngestError::OffsetOutOfBounds {
                path: path.to_owned(),
                line: line_no,
                start,
                end,
                text_len,
            });
        }
        row_line.entry(id.clone()).or_insert(line_no);
        spans
            .get_mut(&id)
            .expect("every dataset id is pre-seeded")
            .push(SpanAnnotation::new(start, end, category));
    }

    let mut campaign = Campaign::new(annotator_id, dataset.name.clone());
    for (id, raw) in spans {
        let text = &dataset.example(&id).expect("seeded from dataset").text;
        let line = row_line.get(&id).copied().unwrap_or(0);
        let normalized = crate::model::normalize_annotation_set(&id, raw, text, dataset.no_overlap).map_err(|source| {
            IngestError::Invalid {
                path: path.to_owned(),
                line,
                source,
            }
        })?;
        campaign.insert(normalized.set);
    }
    Ok(campaign)
}
