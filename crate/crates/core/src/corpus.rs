//! Document metadata records and match results, with their JSON-lines
//! representations.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tokenizer::tokenize;

/// A metadata record in the target collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub journal: String,
    #[serde(default)]
    pub year: Option<i64>,
    #[serde(default)]
    pub pages: BTreeSet<i64>,
    /// Raw bibliography reference strings found in this document.
    #[serde(default)]
    pub references: Vec<String>,
}

impl DocumentRecord {
    /// Word tokens of the author names, in order, original case.
    pub fn author_tokens(&self) -> Vec<String> {
        self.authors
            .iter()
            .flat_map(|name| tokenize(name))
            .filter(|t| t.is_word())
            .map(|t| t.text)
            .collect()
    }

    /// A flat reference-like rendering of the structured fields, used for
    /// whole-string comparisons against raw citations.
    pub fn reference_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if !self.authors.is_empty() {
            parts.push(self.authors.join(", "));
        }
        if !self.title.is_empty() {
            parts.push(self.title.clone());
        }
        if !self.journal.is_empty() {
            parts.push(self.journal.clone());
        }
        if let Some(y) = self.year {
            parts.push(y.to_string());
        }
        if !self.pages.is_empty() {
            let pages: Vec<String> = self.pages.iter().map(|p| p.to_string()).collect();
            parts.push(pages.join("-"));
        }
        parts.join(". ")
    }
}

/// Outcome of matching one reference string of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub source_doc_id: String,
    pub reference_index: u32,
    /// Absent when no candidate reached the acceptance threshold.
    pub matched_doc_id: Option<String>,
    pub score: f64,
}

/// One rejected line of a JSON-lines corpus file.
#[derive(Debug)]
pub struct RejectedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

/// Reads a JSON-lines corpus. Malformed lines and duplicate ids are
/// reported, not fatal; blank lines are ignored.
pub fn read_jsonl_corpus(
    path: &Path,
) -> std::io::Result<(Vec<DocumentRecord>, Vec<RejectedLine>)> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DocumentRecord>(&line) {
            Ok(rec) => {
                if rec.id.is_empty() {
                    rejected.push(RejectedLine {
                        line: i + 1,
                        reason: "empty document id".into(),
                    });
                } else if !seen.insert(rec.id.clone()) {
                    rejected.push(RejectedLine {
                        line: i + 1,
                        reason: format!("duplicate document id {:?}", rec.id),
                    });
                } else {
                    records.push(rec);
                }
            }
            Err(e) => rejected.push(RejectedLine {
                line: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    Ok((records, rejected))
}

/// Writes documents as JSON-lines.
pub fn write_jsonl_corpus(path: &Path, docs: &[DocumentRecord]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
