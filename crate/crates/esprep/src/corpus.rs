//! Streaming JSON-lines corpus I/O.
//!
//! One document per line, UTF-8, fields `id`, `source`, `text`, `meta`.
//! Readers are lazy: memory stays bounded by the largest single document.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(default)]
    pub id: u64,
    #[serde(default)]
    pub source: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: u64, text: impl Into<String>) -> Self {
        Document {
            id,
            source: String::new(),
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }
}

/// Per-stage accounting. For filter stages,
/// `docs_out + sum(rejects_by_rule) == docs_in`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub docs_in: u64,
    pub docs_out: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    #[serde(default)]
    pub rejects_by_rule: BTreeMap<String, u64>,
}

impl CorpusStats {
    pub fn rejects_total(&self) -> u64 {
        self.rejects_by_rule.values().sum()
    }
}

/// Lazy reader over a JSON-lines corpus file.
pub struct CorpusReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    next_auto_id: u64,
}

impl CorpusReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(CorpusReader {
            path,
            lines: BufReader::new(file).lines(),
            line_no: 0,
            next_auto_id: 0,
        })
    }

    fn parse_line(&mut self, line: String) -> Result<Document> {
        #[derive(Deserialize)]
        struct Raw {
            id: Option<u64>,
            #[serde(default)]
            source: String,
            text: String,
            #[serde(default)]
            meta: BTreeMap<String, String>,
        }
        let raw: Raw = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: self.line_no,
            detail: e.to_string(),
        })?;
        let id = raw.id.unwrap_or(self.next_auto_id);
        if raw.text.contains('\0') {
            return Err(Error::Data(format!(
                "document {} contains NUL character",
                id
            )));
        }
        self.next_auto_id = self.next_auto_id.max(id) + 1;
        Ok(Document {
            id,
            source: raw.source,
            text: raw.text,
            meta: raw.meta,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            match self.lines.next()? {
                Ok(line) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(self.parse_line(line));
                }
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            }
        }
    }
}

/// Opens `path` and yields its documents lazily.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<CorpusReader> {
    CorpusReader::open(path)
}

/// Reads the whole corpus into memory. Convenience for desk-scale inputs.
pub fn read_corpus_vec(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    read_corpus(path)?.collect()
}

/// Writes one JSON line per document; returns basic accounting.
pub fn write_corpus<I>(docs: I, path: impl AsRef<Path>) -> Result<CorpusStats>
where
    I: IntoIterator<Item = Document>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut stats = CorpusStats::default();
    for doc in docs {
        let line = serde_json::to_string(&doc)
            .map_err(|e| Error::Data(format!("document {}: {}", doc.id, e)))?;
        stats.docs_in += 1;
        stats.docs_out += 1;
        stats.bytes_in += doc.text.len() as u64;
        stats.bytes_out += line.len() as u64 + 1;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(stats)
}
