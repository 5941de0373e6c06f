//! Append-only JSONL store of finished traces, used to resume runs.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{AnnotatorConfig, SchemaMode};
use crate::grounding::GroundingReport;
use crate::model::TraceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub trace: TraceRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<Value>,
    #[serde(default)]
    pub grounding: GroundingReport,
}

/// Hex SHA-256 over everything that determines a request.
pub fn cache_key(config: &AnnotatorConfig, prompt: &str) -> String {
    let mode = match config.schema_mode {
        SchemaMode::Constrained => "constrained",
        SchemaMode::Freeform => "freeform",
    };
    let material = serde_json::json!([
        config.model_id,
        config.variant.to_string(),
        prompt,
        mode,
        config.temperature,
        config.seed,
    ]);
    hex::encode(Sha256::digest(material.to_string().as_bytes()))
}

/// Successful records are served from memory; writes go through one
/// mutex-guarded appender.
#[derive(Debug)]
pub struct TraceCache {
    path: Option<PathBuf>,
    entries: HashMap<String, CacheRecord>,
    writer: Mutex<Option<File>>,
    /// Lines that could not be parsed, e.g. one cut short by an interrupt.
    pub skipped_lines: usize,
}

impl TraceCache {
    /// A cache that remembers nothing.
    pub fn disabled() -> Self {
        Self {
            path: None,
            entries: HashMap::new(),
            writer: Mutex::new(None),
            skipped_lines: 0,
        }
    }

    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut entries = HashMap::new();
        let mut skipped_lines = 0;
        let mut needs_newline = false;
        if path.exists() {
            let bytes = fs::read(path)?;
            needs_newline = bytes.last().is_some_and(|&b| b != b'\n');
            for line in BufReader::new(bytes.as_slice()).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(record) if !record.trace.failed => {
                        entries.insert(record.key.clone(), record);
                    }
                    Ok(_) => {}
                    Err(_) => skipped_lines += 1,
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if needs_newline {
            file.write_all(b"\n")?;
        }
        Ok(Self {
            path: Some(path.to_owned()),
            entries,
            writer: Mutex::new(Some(file)),
            skipped_lines,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<&CacheRecord> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append one record as a single line and flush it.
    pub fn append(&self, record: &CacheRecord) -> io::Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(file) = writer.as_mut() {
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }
}
