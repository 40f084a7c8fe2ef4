//! Corpus data model, JSONL I/O, hardware taxonomy and dataset splitting.
//!
//! A corpus is a JSONL file with one [`CodeDocument`] per line:
//!
//! ```text
//! {"id": "p1", "dialect": "arduino", "sources": [{"name": "a.ino", "text": "..."}],
//!  "title": "...", "tags": ["..."], "description": "...", "label": "...",
//!  "components": ["resistor 10k", ...]}
//! ```
//!
//! `title`, `description` and `label` are optional; `tags` and `components`
//! default to empty lists. Documents keep file order.

mod split;
pub mod synth;
mod taxonomy;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use split::{split_indices, stratified_split, SplitSpec};
pub use synth::{
    class_label, generate_synthetic_corpus, generate_synthetic_hwconfigs, l1_generator_network,
    SyntheticCorpusSpec,
};
pub use taxonomy::{normalize_components, HardwareConfig, Level, Taxonomy};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("unknown dialect {0:?}")]
    UnknownDialect(String),
    #[error("class {0:?} is too small to supply both sides of the split")]
    ClassTooSmall(String),
    #[error("document {0:?} has no label but the split is stratified")]
    Unlabeled(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Arduino,
    Scl,
}

impl Dialect {
    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Arduino => "arduino",
            Dialect::Scl => "scl",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dialect {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arduino" => Ok(Dialect::Arduino),
            "scl" => Ok(Dialect::Scl),
            other => Err(CorpusError::UnknownDialect(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

/// One project (Arduino) or one function block (SCL).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDocument {
    pub id: String,
    pub dialect: Dialect,
    pub sources: Vec<SourceFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, rename = "components")]
    pub raw_components: Vec<String>,
}

impl CodeDocument {
    /// Checks the per-document invariants, returning a human-readable reason
    /// on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.sources.is_empty() {
            return Err(format!("document {:?} has no sources", self.id));
        }
        if self.dialect == Dialect::Scl && !self.raw_components.is_empty() {
            return Err(format!(
                "scl document {:?} carries hardware components",
                self.id
            ));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("document serialization cannot fail")
    }
}

/// An ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<CodeDocument>,
}

impl Corpus {
    pub fn new(docs: Vec<CodeDocument>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, doc) in docs.iter().enumerate() {
            doc.validate()
                .map_err(|detail| CorpusError::MalformedRecord { line: i + 1, detail })?;
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self { docs })
    }

    pub fn docs(&self) -> &[CodeDocument] {
        &self.docs
    }

    pub fn into_docs(self) -> Vec<CodeDocument> {
        self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CodeDocument> {
        self.docs.iter().find(|d| d.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CodeDocument> {
        self.docs.iter()
    }

    /// Distinct labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .docs
            .iter()
            .filter_map(|d| d.label.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        labels.sort();
        labels
    }

    /// Fills missing SCL labels from their `FAMILY: X` comment line.
    pub fn assign_family_labels(&mut self) {
        for doc in &mut self.docs {
            crate::featex::apply_family_label(doc);
        }
    }

    /// Parses JSONL from a reader. Blank lines are skipped but still counted
    /// for error line numbers.
    pub fn read_jsonl<R: BufRead>(reader: R, dialect: Dialect) -> Result<Self, CorpusError> {
        let mut docs = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc = parse_record(&line, line_no, dialect)?;
            if !seen.insert(doc.id.clone()) {
                return Err(CorpusError::DuplicateId(doc.id));
            }
            docs.push(doc);
        }
        Ok(Self { docs })
    }

    /// Canonical writer: one compact JSON object per line, fixed key order,
    /// trailing newline.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<(), CorpusError> {
        for doc in &self.docs {
            writer.write_all(doc.to_json_line().as_bytes())?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        self.write_jsonl(&mut writer)?;
        writer.flush()?;
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a CodeDocument;
    type IntoIter = std::slice::Iter<'a, CodeDocument>;

    fn into_iter(self) -> Self::IntoIter {
        self.docs.iter()
    }
}

fn parse_record(line: &str, line_no: usize, dialect: Dialect) -> Result<CodeDocument, CorpusError> {
    let malformed = |detail: String| CorpusError::MalformedRecord { line: line_no, detail };
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    // Dialect is checked before the typed parse so an unknown value gets its own error.
    let record_dialect = match value.get("dialect") {
        Some(serde_json::Value::String(s)) => s.parse::<Dialect>()?,
        Some(_) => return Err(malformed("dialect must be a string".into())),
        None => dialect,
    };
    if record_dialect != dialect {
        return Err(malformed(format!(
            "record dialect {record_dialect} does not match requested dialect {dialect}"
        )));
    }
    let mut doc: CodeDocument = match value.get("dialect") {
        Some(_) => serde_json::from_value(value),
        None => {
            let mut value = value;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("dialect".into(), dialect.as_str().into());
            }
            serde_json::from_value(value)
        }
    }
    .map_err(|e| malformed(e.to_string()))?;
    doc.dialect = record_dialect;
    doc.validate().map_err(malformed)?;
    Ok(doc)
}

/// Loads a JSONL corpus. Every record must be of `dialect` (records may omit
/// the field, in which case `dialect` is assumed).
pub fn load_corpus(path: impl AsRef<Path>, dialect: Dialect) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    Corpus::read_jsonl(std::io::BufReader::new(file), dialect)
}
