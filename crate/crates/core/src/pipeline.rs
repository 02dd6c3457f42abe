//! The two batch jobs: index building and citation matching.
//!
//! Index building runs a token-extraction map, a grouping reduce, a
//! rotation-generation map and a final sort into a map file. Matching runs
//! citation extraction, heuristic candidate retrieval against the on-disk
//! index, and a best-match reduce that scores pipeline-mode similarity
//! features. Job outputs are deterministic and independent of worker count.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DocumentRecord, MatchResult};
use crate::index::{candidates_in, KeyScanner};
use crate::mapfile::{mapfile_build, BuildOptions, MapFileError, MapFileReader, MapFileStore};
use crate::mapred::{run_job, run_simple_job, JobError, JobSpec};
use crate::matcher::LinearModel;
use crate::parser::{assemble, FeatureExtractor, ParsedCitation, Tagger, TaggerModel};
use crate::seqfile::{KVRecord, SeqFileError, SeqReader, SeqWriter};
use crate::similarity::{feature_vector, FeatureMode, FieldView};
use crate::tokenizer::tokenize;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Seq(#[from] SeqFileError),
    #[error(transparent)]
    MapFile(#[from] MapFileError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("corpus record {0:?} is not valid JSON: {1}")]
    BadCorpusRecord(String, String),
    #[error(transparent)]
    Model(#[from] crate::matcher::MatchModelError),
}

/// Composite citation key: length-prefixed document id followed by the
/// big-endian reference index. Grouping by byte equality groups by
/// (document, reference).
pub fn citation_key(doc_id: &str, ref_index: u32) -> Vec<u8> {
    let id = doc_id.as_bytes();
    let mut key = Vec::with_capacity(8 + id.len());
    key.extend_from_slice(&(id.len() as u32).to_be_bytes());
    key.extend_from_slice(id);
    key.extend_from_slice(&ref_index.to_be_bytes());
    key
}

pub fn decode_citation_key(key: &[u8]) -> Option<(String, u32)> {
    if key.len() < 8 {
        return None;
    }
    let id_len = u32::from_be_bytes(key[..4].try_into().unwrap()) as usize;
    if key.len() != 8 + id_len {
        return None;
    }
    let id = String::from_utf8(key[4..4 + id_len].to_vec()).ok()?;
    let ref_index = u32::from_be_bytes(key[4 + id_len..].try_into().unwrap());
    Some((id, ref_index))
}

/// Writes documents into a corpus sequence file (key = id, value = JSON).
pub fn write_corpus_seqfile(
    path: &Path,
    docs: &[DocumentRecord],
) -> Result<u64, PipelineError> {
    let mut writer = SeqWriter::create(path)?;
    for doc in docs {
        let value = serde_json::to_vec(doc).expect("document records serialize");
        writer.append(doc.id.as_bytes(), &value)?;
    }
    Ok(writer.finish()?)
}

/// Reads a corpus sequence file back into records.
pub fn read_corpus_seqfile(path: &Path) -> Result<Vec<DocumentRecord>, PipelineError> {
    let mut docs = Vec::new();
    for record in SeqReader::open(path)? {
        let record = record?;
        let doc: DocumentRecord = serde_json::from_slice(&record.value).map_err(|e| {
            PipelineError::BadCorpusRecord(
                String::from_utf8_lossy(&record.key).into_owned(),
                e.to_string(),
            )
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Rotation-index lookups backed by an on-disk map file.
pub struct DiskIndexScanner {
    reader: MapFileReader,
}

impl DiskIndexScanner {
    pub fn open(dir: &Path) -> Result<DiskIndexScanner, PipelineError> {
        let store = MapFileStore::open(dir)?;
        Ok(DiskIndexScanner {
            reader: store.reader()?,
        })
    }
}

impl KeyScanner for DiskIndexScanner {
    fn scan_prefix(
        &mut self,
        prefix: &str,
        visit: &mut dyn FnMut(&str, &[String]),
    ) -> std::io::Result<()> {
        let to_io = |e: String| std::io::Error::new(std::io::ErrorKind::InvalidData, e);
        let scan = self
            .reader
            .seek_scan(prefix.as_bytes(), {
                let prefix = prefix.as_bytes().to_vec();
                move |key: &[u8]| key.starts_with(&prefix)
            })
            .map_err(|e| to_io(e.to_string()))?;
        for record in scan {
            let record = record.map_err(|e| to_io(e.to_string()))?;
            let key = String::from_utf8(record.key)
                .map_err(|e| to_io(format!("index key is not UTF-8: {e}")))?;
            let ids: Vec<String> = serde_json::from_slice(&record.value)
                .map_err(|e| to_io(format!("bad posting list for {key:?}: {e}")))?;
            visit(&key, &ids);
        }
        Ok(())
    }
}

/// Phase timings and counters of a finished index build.
#[derive(Debug, Clone)]
pub struct IndexBuildReport {
    pub documents: u64,
    pub distinct_tokens: u64,
    pub index_entries: u64,
    pub phases: Vec<(&'static str, Duration)>,
}

/// Builds the on-disk rotation index for a corpus sequence file.
pub fn job_build_index(
    docs_seq: &Path,
    out_dir: &Path,
    scratch: &Path,
    workers: usize,
    index_interval: usize,
) -> Result<IndexBuildReport, PipelineError> {
    std::fs::create_dir_all(scratch)?;

    // Document ids must be unique before grouping loses track of them.
    let mut ids = BTreeSet::new();
    let mut documents = 0u64;
    for record in SeqReader::open(docs_seq)? {
        let record = record?;
        if !ids.insert(record.key.clone()) {
            return Err(PipelineError::DuplicateDocId(
                String::from_utf8_lossy(&record.key).into_owned(),
            ));
        }
        documents += 1;
    }
    drop(ids);

    let tokens_out = scratch.join("token-postings.seq");
    let started = Instant::now();
    let spec = JobSpec::new(
        "author-token-extraction",
        vec![docs_seq.to_path_buf()],
        tokens_out.clone(),
        scratch.join("job-tokens"),
        workers,
    );
    let token_stats = run_simple_job(
        &spec,
        |record: &KVRecord| {
            let doc: DocumentRecord = serde_json::from_slice(&record.value)
                .map_err(|e| format!("bad document record: {e}"))?;
            let tokens: BTreeSet<String> = doc
                .author_tokens()
                .into_iter()
                .map(|t| t.to_lowercase())
                .filter(|t| !t.is_empty() && !t.contains(crate::index::SENTINEL))
                .collect();
            Ok(tokens
                .into_iter()
                .map(|t| KVRecord::new(t.into_bytes(), doc.id.as_bytes().to_vec()))
                .collect())
        },
        Some(|token: &[u8], values: Vec<Vec<u8>>| {
            let mut ids: Vec<String> = values
                .into_iter()
                .map(|v| String::from_utf8_lossy(&v).into_owned())
                .collect();
            ids.sort();
            ids.dedup();
            let value = serde_json::to_vec(&ids).expect("string lists serialize");
            Ok(vec![KVRecord::new(token.to_vec(), value)])
        }),
    )?;
    let extraction_time = started.elapsed();

    let rotations_out = scratch.join("rotation-entries.seq");
    let started = Instant::now();
    let spec = JobSpec::new(
        "rotation-generation",
        vec![tokens_out],
        rotations_out.clone(),
        scratch.join("job-rotations"),
        workers,
    );
    type NoReduce = fn(&[u8], Vec<Vec<u8>>) -> Result<Vec<KVRecord>, String>;
    run_simple_job(
        &spec,
        |record: &KVRecord| {
            let token = String::from_utf8(record.key.clone())
                .map_err(|e| format!("token is not UTF-8: {e}"))?;
            let keys = crate::index::rotations(&token).map_err(|e| e.to_string())?;
            Ok(keys
                .into_iter()
                .map(|k| KVRecord::new(k.into_bytes(), record.value.clone()))
                .collect())
        },
        None::<NoReduce>,
    )?;
    let rotation_time = started.elapsed();

    let started = Instant::now();
    let store = mapfile_build(
        &rotations_out,
        out_dir,
        &BuildOptions {
            index_interval,
            ..Default::default()
        },
    )?;
    let sort_time = started.elapsed();

    let mut index_entries = 0u64;
    for record in SeqReader::open(&store.data_path())? {
        record?;
        index_entries += 1;
    }

    Ok(IndexBuildReport {
        documents,
        distinct_tokens: token_stats.reduce_groups,
        index_entries,
        phases: vec![
            ("token extraction", extraction_time),
            ("rotation generation", rotation_time),
            ("sort and index", sort_time),
        ],
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum HeuristicValue {
    Citation { parsed: ParsedCitation },
    Candidate { id: String },
}

/// How `job_match` reads and scores citations.
#[derive(Debug, Clone)]
pub struct MatchOptions {
    pub threshold: f64,
    pub workers: usize,
    /// Exact Levenshtein-distance-1 verification of index retrievals.
    pub exact_verify: bool,
    /// Treat reference strings as pre-parsed citation JSON instead of raw
    /// text, skipping the tagger.
    pub parsed_refs: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            threshold: 0.5,
            workers: 1,
            exact_verify: false,
            parsed_refs: false,
        }
    }
}

/// Counters and phase timings of a finished match job.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub citations: u64,
    pub matched: u64,
    pub unmatched: u64,
    pub phases: Vec<(&'static str, Duration)>,
}

/// Matches every reference of every document against the indexed corpus.
///
/// Writes a sequence file of (citation key, MatchResult JSON) records,
/// grouped and sorted by citation key. Unmatched citations are emitted with
/// a null match for auditability.
#[allow(clippy::too_many_arguments)]
pub fn job_match(
    docs_seq: &Path,
    index_dir: &Path,
    tagger_model: Option<&TaggerModel>,
    extractor: &FeatureExtractor,
    model: &LinearModel,
    out_seq: &Path,
    scratch: &Path,
    options: &MatchOptions,
) -> Result<MatchReport, PipelineError> {
    std::fs::create_dir_all(scratch)?;

    // Candidate metadata is served from memory during the reduce.
    let corpus: HashMap<String, DocumentRecord> = read_corpus_seqfile(docs_seq)?
        .into_iter()
        .map(|d| (d.id.clone(), d))
        .collect();

    // Phase 1: citation extraction.
    let extraction_out = scratch.join("citations.seq");
    let started = Instant::now();
    let spec = JobSpec::new(
        "citation-extraction",
        vec![docs_seq.to_path_buf()],
        extraction_out.clone(),
        scratch.join("job-extract"),
        options.workers,
    );
    type NoReduce = fn(&[u8], Vec<Vec<u8>>) -> Result<Vec<KVRecord>, String>;
    let extract_stats = run_simple_job(
        &spec,
        |record: &KVRecord| {
            let doc: DocumentRecord = serde_json::from_slice(&record.value)
                .map_err(|e| format!("bad document record: {e}"))?;
            Ok(doc
                .references
                .iter()
                .enumerate()
                .map(|(i, raw)| {
                    KVRecord::new(citation_key(&doc.id, i as u32), raw.as_bytes().to_vec())
                })
                .collect())
        },
        None::<NoReduce>,
    )?;
    let extraction_time = started.elapsed();

    // Phase 2: heuristic matching. Each worker opens its own index reader.
    let heuristic_out = scratch.join("heuristic.seq");
    let started = Instant::now();
    let spec = JobSpec::new(
        "heuristic-matching",
        vec![extraction_out],
        heuristic_out.clone(),
        scratch.join("job-heuristic"),
        options.workers,
    );
    let parsed_refs = options.parsed_refs;
    let exact_verify = options.exact_verify;
    run_job(
        &spec,
        || {
            let scanner = DiskIndexScanner::open(index_dir).map_err(|e| e.to_string())?;
            let tagger = tagger_model.map(|m| Tagger::new(m, extractor));
            let mut scanner = scanner;
            Ok(move |record: &KVRecord| -> Result<Vec<KVRecord>, String> {
                let raw = String::from_utf8_lossy(&record.value).into_owned();
                let parsed = parse_reference(&raw, parsed_refs, tagger.as_ref());
                let candidates = candidates_in(&mut scanner, &parsed, exact_verify)
                    .map_err(|e| e.to_string())?;
                let mut out = Vec::with_capacity(1 + candidates.len());
                let citation = HeuristicValue::Citation { parsed };
                out.push(KVRecord::new(
                    record.key.clone(),
                    serde_json::to_vec(&citation).expect("serializes"),
                ));
                for (id, _count) in candidates {
                    let value = HeuristicValue::Candidate { id };
                    out.push(KVRecord::new(
                        record.key.clone(),
                        serde_json::to_vec(&value).expect("serializes"),
                    ));
                }
                Ok(out)
            })
        },
        None::<NoReduce>,
    )?;
    let heuristic_time = started.elapsed();

    // Phase 3: best-match selection.
    let started = Instant::now();
    let spec = JobSpec::new(
        "best-match-selection",
        vec![heuristic_out],
        out_seq.to_path_buf(),
        scratch.join("job-best"),
        options.workers,
    );
    let threshold = options.threshold;
    let matched_counter = std::sync::atomic::AtomicU64::new(0);
    run_simple_job(
        &spec,
        |record: &KVRecord| Ok(vec![record.clone()]),
        Some(|key: &[u8], values: Vec<Vec<u8>>| {
            let (source_id, ref_index) = decode_citation_key(key)
                .ok_or_else(|| "malformed citation key".to_string())?;
            let mut parsed: Option<ParsedCitation> = None;
            let mut candidate_ids: Vec<String> = Vec::new();
            for value in &values {
                match serde_json::from_slice::<HeuristicValue>(value) {
                    Ok(HeuristicValue::Citation { parsed: p }) => parsed = Some(p),
                    Ok(HeuristicValue::Candidate { id }) => candidate_ids.push(id),
                    Err(e) => return Err(format!("bad heuristic value: {e}")),
                }
            }
            let result = match parsed {
                Some(parsed) => select_best_match(
                    &source_id,
                    ref_index,
                    &parsed,
                    &candidate_ids,
                    &corpus,
                    model,
                    threshold,
                )?,
                None => {
                    log::warn!("citation {source_id}/{ref_index} has no parsed record");
                    MatchResult {
                        source_doc_id: source_id,
                        reference_index: ref_index,
                        matched_doc_id: None,
                        score: 0.0,
                    }
                }
            };
            if result.matched_doc_id.is_some() {
                matched_counter.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
            let value = serde_json::to_vec(&result).expect("serializes");
            Ok(vec![KVRecord::new(key.to_vec(), value)])
        }),
    )?;
    let best_time = started.elapsed();

    let citations = extract_stats.map_output_records;
    let matched = matched_counter.into_inner();
    Ok(MatchReport {
        citations,
        matched,
        unmatched: citations - matched,
        phases: vec![
            ("citation extraction", extraction_time),
            ("heuristic matching", heuristic_time),
            ("selecting the best match", best_time),
        ],
    })
}

fn parse_reference(raw: &str, parsed_refs: bool, tagger: Option<&Tagger>) -> ParsedCitation {
    if parsed_refs {
        match serde_json::from_str::<ParsedCitation>(raw) {
            Ok(parsed) => return parsed,
            Err(e) => {
                log::warn!("reference is not parsed-citation JSON ({e}); treating as unparsed");
                return ParsedCitation {
                    raw: raw.to_string(),
                    ..Default::default()
                };
            }
        }
    }
    match tagger {
        Some(tagger) => {
            let tokens = tokenize(raw);
            let labels = tagger.tag(&tokens);
            assemble(raw, &tokens, &labels)
        }
        None => {
            log::warn!("no parser model supplied; citation left unparsed");
            ParsedCitation {
                raw: raw.to_string(),
                ..Default::default()
            }
        }
    }
}

fn select_best_match(
    source_id: &str,
    ref_index: u32,
    parsed: &ParsedCitation,
    candidate_ids: &[String],
    corpus: &HashMap<String, DocumentRecord>,
    model: &LinearModel,
    threshold: f64,
) -> Result<MatchResult, String> {
    let citation_view = FieldView::from_citation(parsed);
    let mut best: Option<(f64, &str)> = None;
    for id in candidate_ids {
        if id == source_id {
            continue;
        }
        let Some(doc) = corpus.get(id) else {
            log::warn!(
                "candidate {id:?} for citation {source_id}/{ref_index} has no metadata; skipped"
            );
            continue;
        };
        let features = feature_vector(
            &citation_view,
            &FieldView::from_document(doc),
            FeatureMode::Pipeline,
        );
        let score = model.score(&features).map_err(|e| e.to_string())?;
        let better = match best {
            None => true,
            Some((best_score, best_id)) => {
                score > best_score || (score == best_score && id.as_str() < best_id)
            }
        };
        if better {
            best = Some((score, id));
        }
    }
    let (score, matched) = match best {
        Some((score, id)) if score >= threshold => (score, Some(id.to_string())),
        Some((score, _)) => (score, None),
        None => (0.0, None),
    };
    Ok(MatchResult {
        source_doc_id: source_id.to_string(),
        reference_index: ref_index,
        matched_doc_id: matched,
        score,
    })
}

/// Converts a match-result sequence file to JSON-lines.
pub fn write_match_jsonl(results_seq: &Path, out: &Path) -> Result<u64, PipelineError> {
    let mut writer = std::io::BufWriter::new(std::fs::File::create(out)?);
    let mut count = 0u64;
    for record in SeqReader::open(results_seq)? {
        let record = record?;
        writer.write_all(&record.value)?;
        writer.write_all(b"\n")?;
        count += 1;
    }
    writer.flush()?;
    Ok(count)
}

/// Reads match results back from a sequence file.
pub fn read_match_results(results_seq: &Path) -> Result<Vec<MatchResult>, PipelineError> {
    let mut results = Vec::new();
    for record in SeqReader::open(results_seq)? {
        let record = record?;
        let result: MatchResult = serde_json::from_slice(&record.value).map_err(|e| {
            PipelineError::BadCorpusRecord(
                String::from_utf8_lossy(&record.key).into_owned(),
                e.to_string(),
            )
        })?;
        results.push(result);
    }
    Ok(results)
}

pub use crate::mapfile::DEFAULT_INDEX_INTERVAL;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn citation_key_round_trip() {
        for (id, idx) in [("d1", 0u32), ("", 7), ("long-доc-id", u32::MAX)] {
            let key = citation_key(id, idx);
            assert_eq!(decode_citation_key(&key), Some((id.to_string(), idx)));
        }
        assert_eq!(decode_citation_key(b"short"), None);
        let mut bad = citation_key("d1", 0);
        bad.push(0);
        assert_eq!(decode_citation_key(&bad), None);
    }

    #[test]
    fn citation_keys_group_correctly() {
        // Equality of encoded keys must coincide with tuple equality even
        // when ids are prefixes of each other.
        let a = citation_key("d1", 258);
        let b = citation_key("d11", 2);
        let c = citation_key("d1", 258);
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn corpus_seqfile_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.seq");
        let docs = vec![
            DocumentRecord {
                id: "a".into(),
                authors: vec!["John Smith".into()],
                title: "A title".into(),
                journal: "Journal".into(),
                year: Some(1999),
                pages: [1, 9].into_iter().collect(),
                references: vec!["ref one".into()],
            },
            DocumentRecord {
                id: "b".into(),
                authors: vec![],
                title: String::new(),
                journal: String::new(),
                year: None,
                pages: Default::default(),
                references: vec![],
            },
        ];
        assert_eq!(write_corpus_seqfile(&path, &docs).unwrap(), 2);
        assert_eq!(read_corpus_seqfile(&path).unwrap(), docs);
    }
}
