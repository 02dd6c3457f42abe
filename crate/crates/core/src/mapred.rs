//! Single-machine map-reduce over sequence files.
//!
//! Records are mapped in parallel over disjoint input splits. With a reduce
//! function, map outputs are externally sorted by (key, input position,
//! emission index) and reduced group by group, so the output is a pure
//! function of the input bytes and the job functions: worker count and
//! scheduling never change a single output byte. Without a reduce function
//! map outputs are written in input order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::seqfile::{KVRecord, SeqFileError, SeqReader, SeqWriter};

#[derive(Debug, Error)]
pub enum JobError {
    #[error(transparent)]
    Seq(#[from] SeqFileError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("worker initialization failed: {0}")]
    Init(String),
    #[error("map function failed on key {key:?}: {message}")]
    Map { key: String, message: String },
    #[error("reduce function failed on key {key:?}: {message}")]
    Reduce { key: String, message: String },
}

/// Where a job reads, scratches and writes.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub name: String,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub scratch: PathBuf,
    pub workers: usize,
    /// Map-output entries buffered in memory before spilling a sorted run.
    pub max_buffer_records: usize,
}

impl JobSpec {
    pub fn new(
        name: &str,
        inputs: Vec<PathBuf>,
        output: PathBuf,
        scratch: PathBuf,
        workers: usize,
    ) -> JobSpec {
        JobSpec {
            name: name.to_string(),
            inputs,
            output,
            scratch,
            workers: workers.max(1),
            max_buffer_records: 500_000,
        }
    }
}

/// Counters reported by a finished job.
#[derive(Debug, Clone, Copy, Default)]
pub struct JobStats {
    pub input_records: u64,
    pub map_output_records: u64,
    pub reduce_groups: u64,
    pub output_records: u64,
}

// One shuffled map output: sorted by key, then global input position, then
// emission index, which makes the shuffle independent of worker count.
struct ShuffleEntry {
    key: Vec<u8>,
    seq: u64,
    emit: u32,
    value: Vec<u8>,
}

impl ShuffleEntry {
    fn encode(&self) -> KVRecord {
        let mut value = Vec::with_capacity(12 + self.value.len());
        value.extend_from_slice(&self.seq.to_be_bytes());
        value.extend_from_slice(&self.emit.to_be_bytes());
        value.extend_from_slice(&self.value);
        KVRecord {
            key: self.key.clone(),
            value,
        }
    }

    fn decode(record: KVRecord) -> Result<ShuffleEntry, SeqFileError> {
        if record.value.len() < 12 {
            return Err(SeqFileError::Truncated { offset: 0 });
        }
        let seq = u64::from_be_bytes(record.value[..8].try_into().unwrap());
        let emit = u32::from_be_bytes(record.value[8..12].try_into().unwrap());
        Ok(ShuffleEntry {
            key: record.key,
            seq,
            emit,
            value: record.value[12..].to_vec(),
        })
    }

    fn sort_key(&self) -> (&[u8], u64, u32) {
        (&self.key, self.seq, self.emit)
    }
}

/// Runs a map(-reduce) job. `map_init` builds one map closure per worker
/// thread, which allows per-worker state such as open index readers.
pub fn run_job<MI, M, R>(
    spec: &JobSpec,
    map_init: MI,
    reduce: Option<R>,
) -> Result<JobStats, JobError>
where
    MI: Fn() -> Result<M, String> + Sync,
    M: FnMut(&KVRecord) -> Result<Vec<KVRecord>, String>,
    R: Fn(&[u8], Vec<Vec<u8>>) -> Result<Vec<KVRecord>, String>,
{
    std::fs::create_dir_all(&spec.scratch)?;
    if let Some(parent) = spec.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut stats = JobStats::default();

    let mut writer = if reduce.is_none() {
        Some(SeqWriter::create(&spec.output)?)
    } else {
        None
    };
    let mut buffer: Vec<ShuffleEntry> = Vec::new();
    let mut runs: Vec<PathBuf> = Vec::new();

    let batch_size = (spec.workers * 2048).max(2048);
    let mut batch: Vec<(u64, KVRecord)> = Vec::with_capacity(batch_size);
    let mut seq = 0u64;

    let flush_batch = |batch: &mut Vec<(u64, KVRecord)>,
                           stats: &mut JobStats,
                           buffer: &mut Vec<ShuffleEntry>,
                           writer: &mut Option<SeqWriter>,
                           runs: &mut Vec<PathBuf>|
     -> Result<(), JobError> {
        if batch.is_empty() {
            return Ok(());
        }
        let chunk_len = batch.len().div_ceil(spec.workers);
        let chunks: Vec<&[(u64, KVRecord)]> = batch.chunks(chunk_len).collect();
        let results: Vec<Result<Vec<ShuffleEntry>, JobError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    let map_init = &map_init;
                    scope.spawn(move || {
                        let mut map_fn = map_init().map_err(JobError::Init)?;
                        let mut out = Vec::new();
                        for (seq, record) in chunk {
                            let mapped = map_fn(record).map_err(|message| JobError::Map {
                                key: String::from_utf8_lossy(&record.key).into_owned(),
                                message,
                            })?;
                            for (emit, kv) in mapped.into_iter().enumerate() {
                                out.push(ShuffleEntry {
                                    key: kv.key,
                                    seq: *seq,
                                    emit: emit as u32,
                                    value: kv.value,
                                });
                            }
                        }
                        Ok(out)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("map worker panicked"))
                .collect()
        });
        for result in results {
            let entries = result?;
            stats.map_output_records += entries.len() as u64;
            match writer {
                Some(w) => {
                    // Map-only: entries are already in input order.
                    for e in entries {
                        w.append(&e.key, &e.value)?;
                        stats.output_records += 1;
                    }
                }
                None => {
                    buffer.extend(entries);
                    if buffer.len() >= spec.max_buffer_records {
                        spill_run(&spec.scratch, buffer, runs)?;
                    }
                }
            }
        }
        batch.clear();
        Ok(())
    };

    for input in &spec.inputs {
        for record in SeqReader::open(input)? {
            batch.push((seq, record?));
            seq += 1;
            if batch.len() >= batch_size {
                flush_batch(&mut batch, &mut stats, &mut buffer, &mut writer, &mut runs)?;
            }
        }
    }
    flush_batch(&mut batch, &mut stats, &mut buffer, &mut writer, &mut runs)?;
    stats.input_records = seq;

    if let Some(w) = writer {
        w.finish()?;
        return Ok(stats);
    }
    let reduce = reduce.expect("writer is None only when reduce is present");

    // Shuffle: merge sorted runs with the in-memory remainder and reduce
    // each key group.
    buffer.sort_unstable_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut run_readers: Vec<SeqReader> = runs
        .iter()
        .map(|p| SeqReader::open(p))
        .collect::<Result<_, _>>()?;
    let mut heap: BinaryHeap<Reverse<(Vec<u8>, u64, u32, usize, Vec<u8>)>> = BinaryHeap::new();
    for (i, reader) in run_readers.iter_mut().enumerate() {
        if let Some(record) = reader.next() {
            let e = ShuffleEntry::decode(record?)?;
            heap.push(Reverse((e.key, e.seq, e.emit, i, e.value)));
        }
    }
    let mut memory = buffer.into_iter().peekable();

    let mut out = SeqWriter::create(&spec.output)?;
    let mut current_key: Option<Vec<u8>> = None;
    let mut values: Vec<Vec<u8>> = Vec::new();

    let emit_group = |key: &[u8], values: Vec<Vec<u8>>, out: &mut SeqWriter, stats: &mut JobStats| -> Result<(), JobError> {
        stats.reduce_groups += 1;
        let produced = reduce(key, values).map_err(|message| JobError::Reduce {
            key: String::from_utf8_lossy(key).into_owned(),
            message,
        })?;
        for kv in produced {
            out.append(&kv.key, &kv.value)?;
            stats.output_records += 1;
        }
        Ok(())
    };

    loop {
        // Next entry is the smaller of the run heap and the memory iterator.
        let take_memory = match (memory.peek(), heap.peek()) {
            (Some(m), Some(Reverse((k, s, e, _, _)))) => {
                m.sort_key() < (k.as_slice(), *s, *e)
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let entry = if take_memory {
            memory.next().unwrap()
        } else {
            let Reverse((key, s, e, run, value)) = heap.pop().unwrap();
            if let Some(record) = run_readers[run].next() {
                let next = ShuffleEntry::decode(record?)?;
                heap.push(Reverse((next.key, next.seq, next.emit, run, next.value)));
            }
            ShuffleEntry {
                key,
                seq: s,
                emit: e,
                value,
            }
        };
        match &current_key {
            Some(k) if *k == entry.key => values.push(entry.value),
            Some(k) => {
                let done_key = k.clone();
                let done_values = std::mem::take(&mut values);
                emit_group(&done_key, done_values, &mut out, &mut stats)?;
                current_key = Some(entry.key);
                values.push(entry.value);
            }
            None => {
                current_key = Some(entry.key);
                values.push(entry.value);
            }
        }
    }
    if let Some(k) = current_key {
        emit_group(&k, values, &mut out, &mut stats)?;
    }
    out.finish()?;
    for run in &runs {
        let _ = std::fs::remove_file(run);
    }
    Ok(stats)
}

fn spill_run(
    scratch: &Path,
    buffer: &mut Vec<ShuffleEntry>,
    runs: &mut Vec<PathBuf>,
) -> Result<(), JobError> {
    buffer.sort_unstable_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let path = scratch.join(format!("shuffle-{:06}.seq", runs.len()));
    let mut w = SeqWriter::create(&path)?;
    for e in buffer.drain(..) {
        let rec = e.encode();
        w.append(&rec.key, &rec.value)?;
    }
    w.finish()?;
    runs.push(path);
    Ok(())
}

/// Convenience for stateless map functions.
pub fn run_simple_job<M, R>(
    spec: &JobSpec,
    map_fn: M,
    reduce: Option<R>,
) -> Result<JobStats, JobError>
where
    M: Fn(&KVRecord) -> Result<Vec<KVRecord>, String> + Sync,
    R: Fn(&[u8], Vec<Vec<u8>>) -> Result<Vec<KVRecord>, String>,
{
    let map_fn = &map_fn;
    run_job(spec, || Ok(|r: &KVRecord| map_fn(r)), reduce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqfile::{seq_read_all, seq_write};

    type NoReduce = fn(&[u8], Vec<Vec<u8>>) -> Result<Vec<KVRecord>, String>;

    fn kv(k: &str, v: &str) -> KVRecord {
        KVRecord::new(k.as_bytes(), v.as_bytes())
    }

    fn spec(dir: &Path, workers: usize) -> JobSpec {
        JobSpec::new(
            "test",
            vec![dir.join("input.seq")],
            dir.join("output.seq"),
            dir.join("scratch"),
            workers,
        )
    }

    #[test]
    fn identity_map_without_reduce_copies_input() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![kv("b", "2"), kv("a", "1"), kv("c", "3")];
        seq_write(&dir.path().join("input.seq"), records.clone()).unwrap();
        let stats = run_simple_job(
            &spec(dir.path(), 1),
            |r| Ok(vec![r.clone()]),
            None::<NoReduce>,
        )
        .unwrap();
        assert_eq!(stats.input_records, 3);
        assert_eq!(stats.output_records, 3);
        assert_eq!(seq_read_all(&dir.path().join("output.seq")).unwrap(), records);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let dir = tempfile::tempdir().unwrap();
        seq_write(&dir.path().join("input.seq"), []).unwrap();
        let stats = run_simple_job(
            &spec(dir.path(), 4),
            |r| Ok(vec![r.clone()]),
            None::<NoReduce>,
        )
        .unwrap();
        assert_eq!(stats.output_records, 0);
        assert!(seq_read_all(&dir.path().join("output.seq")).unwrap().is_empty());
    }

    fn word_count_input() -> Vec<KVRecord> {
        let lines = [
            "the quick brown fox",
            "jumps over the lazy dog",
            "the dog barks",
            "quick quick slow",
        ];
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| kv(&format!("line{i}"), l))
            .collect()
    }

    fn word_count_map(r: &KVRecord) -> Result<Vec<KVRecord>, String> {
        let text = String::from_utf8_lossy(&r.value).into_owned();
        Ok(text
            .split_whitespace()
            .map(|w| KVRecord::new(w.as_bytes().to_vec(), b"1".to_vec()))
            .collect())
    }

    fn word_count_reduce(key: &[u8], values: Vec<Vec<u8>>) -> Result<Vec<KVRecord>, String> {
        Ok(vec![KVRecord::new(
            key.to_vec(),
            values.len().to_string().into_bytes(),
        )])
    }

    #[test]
    fn word_count_matches_single_threaded_oracle_across_worker_counts() {
        use std::collections::BTreeMap;
        let mut oracle: BTreeMap<String, usize> = BTreeMap::new();
        for r in word_count_input() {
            for w in String::from_utf8_lossy(&r.value).split_whitespace() {
                *oracle.entry(w.to_string()).or_insert(0) += 1;
            }
        }
        let mut outputs: Vec<Vec<u8>> = Vec::new();
        for workers in [1usize, 2, 8] {
            let dir = tempfile::tempdir().unwrap();
            seq_write(&dir.path().join("input.seq"), word_count_input()).unwrap();
            let mut s = spec(dir.path(), workers);
            s.max_buffer_records = 3; // force spills
            run_simple_job(&s, word_count_map, Some(word_count_reduce)).unwrap();
            let got: BTreeMap<String, usize> = seq_read_all(&dir.path().join("output.seq"))
                .unwrap()
                .into_iter()
                .map(|r| {
                    (
                        String::from_utf8(r.key).unwrap(),
                        String::from_utf8(r.value).unwrap().parse().unwrap(),
                    )
                })
                .collect();
            assert_eq!(got, oracle, "workers = {workers}");
            outputs.push(std::fs::read(dir.path().join("output.seq")).unwrap());
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "output bytes differ");
    }

    #[test]
    fn reduce_sees_values_in_global_input_order() {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<KVRecord> = (0..100)
            .map(|i| kv("same-key", &format!("{i:03}")))
            .collect();
        seq_write(&dir.path().join("input.seq"), records).unwrap();
        let mut s = spec(dir.path(), 8);
        s.max_buffer_records = 7;
        run_simple_job(
            &s,
            |r| Ok(vec![r.clone()]),
            Some(|key: &[u8], values: Vec<Vec<u8>>| {
                let joined = values
                    .iter()
                    .map(|v| String::from_utf8_lossy(v).into_owned())
                    .collect::<Vec<_>>()
                    .join(",");
                Ok(vec![KVRecord::new(key.to_vec(), joined.into_bytes())])
            }),
        )
        .unwrap();
        let out = seq_read_all(&dir.path().join("output.seq")).unwrap();
        assert_eq!(out.len(), 1);
        let expected: Vec<String> = (0..100).map(|i| format!("{i:03}")).collect();
        assert_eq!(
            String::from_utf8(out[0].value.clone()).unwrap(),
            expected.join(",")
        );
    }

    #[test]
    fn map_failure_reports_key() {
        let dir = tempfile::tempdir().unwrap();
        seq_write(
            &dir.path().join("input.seq"),
            vec![kv("good", "1"), kv("poison", "2")],
        )
        .unwrap();
        let err = run_simple_job(
            &spec(dir.path(), 2),
            |r| {
                if r.key == b"poison" {
                    Err("boom".to_string())
                } else {
                    Ok(vec![r.clone()])
                }
            },
            None::<NoReduce>,
        )
        .unwrap_err();
        match err {
            JobError::Map { key, message } => {
                assert_eq!(key, "poison");
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reduce_failure_reports_key() {
        let dir = tempfile::tempdir().unwrap();
        seq_write(&dir.path().join("input.seq"), vec![kv("k", "v")]).unwrap();
        let err = run_simple_job(
            &spec(dir.path(), 1),
            |r| Ok(vec![r.clone()]),
            Some(|_: &[u8], _: Vec<Vec<u8>>| Err("reduce boom".to_string())),
        )
        .unwrap_err();
        assert!(matches!(err, JobError::Reduce { key, .. } if key == "k"));
    }

    #[test]
    fn multiple_inputs_are_concatenated_in_order() {
        let dir = tempfile::tempdir().unwrap();
        seq_write(&dir.path().join("a.seq"), vec![kv("1", "a")]).unwrap();
        seq_write(&dir.path().join("b.seq"), vec![kv("2", "b")]).unwrap();
        let spec = JobSpec::new(
            "multi",
            vec![dir.path().join("a.seq"), dir.path().join("b.seq")],
            dir.path().join("out.seq"),
            dir.path().join("scratch"),
            2,
        );
        run_simple_job(&spec, |r| Ok(vec![r.clone()]), None::<NoReduce>).unwrap();
        let out = seq_read_all(&dir.path().join("out.seq")).unwrap();
        assert_eq!(out, vec![kv("1", "a"), kv("2", "b")]);
    }
}
