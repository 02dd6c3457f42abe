//! Sorted key-value stores with a sparse seek index.
//!
//! A map file is a directory holding `data.seq` (records in non-decreasing
//! key byte order) and `index.seq`, whose records pair every K-th data key
//! with the 8-byte big-endian byte offset of that record in the data file.
//! Lookup positions through the index and scans forward.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::seqfile::{seq_write, KVRecord, SeqFileError, SeqReader, SeqWriter};

pub const DATA_FILE: &str = "data.seq";
pub const INDEX_FILE: &str = "index.seq";
pub const DEFAULT_INDEX_INTERVAL: usize = 128;

#[derive(Debug, Error)]
pub enum MapFileError {
    #[error(transparent)]
    Seq(#[from] SeqFileError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("index interval must be at least 1")]
    BadInterval,
    #[error("map file index entry has a malformed offset")]
    BadIndexEntry,
}

/// Build options: `max_run_records` bounds the in-memory sort buffer of the
/// external merge sort.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub index_interval: usize,
    pub max_run_records: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            index_interval: DEFAULT_INDEX_INTERVAL,
            max_run_records: 200_000,
        }
    }
}

/// Sorts an unsorted record file into a map file directory.
///
/// The sort is an external merge sort on key bytes and is stable: records
/// with equal keys keep their input order.
pub fn mapfile_build(
    input: &Path,
    out_dir: &Path,
    options: &BuildOptions,
) -> Result<MapFileStore, MapFileError> {
    if options.index_interval == 0 {
        return Err(MapFileError::BadInterval);
    }
    std::fs::create_dir_all(out_dir)?;
    let scratch = out_dir.join("sort-runs");
    std::fs::create_dir_all(&scratch)?;

    // Phase 1: sorted runs.
    let mut run_paths: Vec<PathBuf> = Vec::new();
    let mut buffer: Vec<KVRecord> = Vec::new();
    let spill = |buffer: &mut Vec<KVRecord>, runs: &mut Vec<PathBuf>| -> Result<(), MapFileError> {
        if buffer.is_empty() {
            return Ok(());
        }
        buffer.sort_by(|a, b| a.key.cmp(&b.key)); // stable sort
        let path = scratch.join(format!("run-{:06}.seq", runs.len()));
        seq_write(&path, buffer.drain(..))?;
        runs.push(path);
        Ok(())
    };
    for record in SeqReader::open(input)? {
        buffer.push(record?);
        if buffer.len() >= options.max_run_records {
            spill(&mut buffer, &mut run_paths)?;
        }
    }
    spill(&mut buffer, &mut run_paths)?;

    // Phase 2: merge runs into the data file, sampling the sparse index.
    let mut data = SeqWriter::create(&out_dir.join(DATA_FILE))?;
    let mut index = SeqWriter::create(&out_dir.join(INDEX_FILE))?;

    // Equal keys compare by run id, and runs are consecutive input chunks,
    // so the merge preserves input order for duplicates.
    let mut readers: Vec<SeqReader> = run_paths
        .iter()
        .map(|p| SeqReader::open(p))
        .collect::<Result<_, _>>()?;
    let mut heap: BinaryHeap<Reverse<(Vec<u8>, usize, Vec<u8>)>> = BinaryHeap::new();
    for (run, reader) in readers.iter_mut().enumerate() {
        if let Some(record) = reader.next() {
            let record = record?;
            heap.push(Reverse((record.key, run, record.value)));
        }
    }
    let mut emitted = 0usize;
    while let Some(Reverse((key, run, value))) = heap.pop() {
        let offset = data.append(&key, &value)?;
        if emitted % options.index_interval == 0 {
            index.append(&key, &offset.to_be_bytes())?;
        }
        emitted += 1;
        if let Some(record) = readers[run].next() {
            let record = record?;
            heap.push(Reverse((record.key, run, record.value)));
        }
    }
    data.finish()?;
    index.finish()?;
    std::fs::remove_dir_all(&scratch)?;
    Ok(MapFileStore {
        dir: out_dir.to_path_buf(),
    })
}

/// Handle to a map file directory.
#[derive(Debug, Clone)]
pub struct MapFileStore {
    dir: PathBuf,
}

impl MapFileStore {
    pub fn open(dir: &Path) -> Result<MapFileStore, MapFileError> {
        let store = MapFileStore {
            dir: dir.to_path_buf(),
        };
        if !store.data_path().is_file() || !store.index_path().is_file() {
            return Err(MapFileError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} is not a map file directory", dir.display()),
            )));
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn data_path(&self) -> PathBuf {
        self.dir.join(DATA_FILE)
    }

    pub fn index_path(&self) -> PathBuf {
        self.dir.join(INDEX_FILE)
    }

    pub fn reader(&self) -> Result<MapFileReader, MapFileError> {
        MapFileReader::open(self)
    }
}

/// Reader with the sparse index loaded in memory.
pub struct MapFileReader {
    data_path: PathBuf,
    index: Vec<(Vec<u8>, u64)>,
}

impl MapFileReader {
    pub fn open(store: &MapFileStore) -> Result<MapFileReader, MapFileError> {
        let mut index = Vec::new();
        for record in SeqReader::open(&store.index_path())? {
            let record = record?;
            let offset = u64::from_be_bytes(
                record
                    .value
                    .as_slice()
                    .try_into()
                    .map_err(|_| MapFileError::BadIndexEntry)?,
            );
            index.push((record.key, offset));
        }
        Ok(MapFileReader {
            data_path: store.data_path().to_path_buf(),
            index,
        })
    }

    /// Number of sampled index entries.
    pub fn index_len(&self) -> usize {
        self.index.len()
    }

    /// Scans records whose key is >= `prefix`, starting from the sparse-index
    /// position at the greatest sampled key strictly below `prefix`, and
    /// yields records for as long as `pred` accepts the key. Strictly-below
    /// positioning is required for completeness: a sample equal to `prefix`
    /// may sit in the middle of a run of equal keys.
    pub fn seek_scan<P>(
        &self,
        prefix: &[u8],
        pred: P,
    ) -> Result<SeekScan<P>, MapFileError>
    where
        P: FnMut(&[u8]) -> bool,
    {
        let pos = self.index.partition_point(|(k, _)| k.as_slice() < prefix);
        let offset = if pos == 0 { None } else { Some(self.index[pos - 1].1) };
        let reader = match offset {
            Some(off) => SeqReader::open_at(&self.data_path, off)?,
            None => SeqReader::open(&self.data_path)?,
        };
        Ok(SeekScan {
            reader,
            prefix: prefix.to_vec(),
            pred,
            positioned: false,
            done: false,
        })
    }

    /// Convenience: all records whose key starts with `prefix`.
    pub fn prefix_scan(&self, prefix: &[u8]) -> Result<Vec<KVRecord>, MapFileError> {
        let p = prefix.to_vec();
        self.seek_scan(prefix, move |key| key.starts_with(&p))?
            .map(|r| r.map_err(MapFileError::from))
            .collect()
    }
}

/// Iterator over a positioned forward scan.
pub struct SeekScan<P> {
    reader: SeqReader,
    prefix: Vec<u8>,
    pred: P,
    positioned: bool,
    done: bool,
}

impl<P: FnMut(&[u8]) -> bool> Iterator for SeekScan<P> {
    type Item = Result<KVRecord, SeqFileError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let record = match self.reader.next() {
                Some(Ok(r)) => r,
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => {
                    self.done = true;
                    return None;
                }
            };
            if !self.positioned {
                if record.key.as_slice() < self.prefix.as_slice() {
                    continue;
                }
                self.positioned = true;
            }
            if (self.pred)(&record.key) {
                return Some(Ok(record));
            }
            self.done = true;
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build_store(
        records: Vec<KVRecord>,
        options: &BuildOptions,
    ) -> (tempfile::TempDir, MapFileStore) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.seq");
        seq_write(&input, records).unwrap();
        let store = mapfile_build(&input, &dir.path().join("store"), options).unwrap();
        (dir, store)
    }

    fn kv(k: &str, v: &str) -> KVRecord {
        KVRecord::new(k.as_bytes(), v.as_bytes())
    }

    #[test]
    fn sorted_input_stays_sorted() {
        let records = vec![kv("a", "1"), kv("b", "2"), kv("c", "3")];
        let (_dir, store) = build_store(records.clone(), &BuildOptions::default());
        let data = crate::seqfile::seq_read_all(&store.data_path()).unwrap();
        assert_eq!(data, records);
    }

    #[test]
    fn reverse_sorted_input_is_sorted_with_small_runs() {
        let n = 1000;
        let records: Vec<KVRecord> = (0..n)
            .rev()
            .map(|i| kv(&format!("key-{i:05}"), &format!("v{i}")))
            .collect();
        let options = BuildOptions {
            index_interval: 16,
            max_run_records: 64, // force many runs and a real merge
        };
        let (_dir, store) = build_store(records, &options);
        let data = crate::seqfile::seq_read_all(&store.data_path()).unwrap();
        let mut expected: Vec<String> = (0..n).map(|i| format!("key-{i:05}")).collect();
        expected.sort();
        let got: Vec<String> = data
            .iter()
            .map(|r| String::from_utf8(r.key.clone()).unwrap())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn duplicate_keys_keep_input_order() {
        let records = vec![
            kv("dup", "first"),
            kv("aaa", "x"),
            kv("dup", "second"),
            kv("dup", "third"),
        ];
        let options = BuildOptions {
            index_interval: 2,
            max_run_records: 2, // duplicates split across runs
        };
        let (_dir, store) = build_store(records, &options);
        let data = crate::seqfile::seq_read_all(&store.data_path()).unwrap();
        let dup_values: Vec<&[u8]> = data
            .iter()
            .filter(|r| r.key == b"dup")
            .map(|r| r.value.as_slice())
            .collect();
        assert_eq!(dup_values, [b"first".as_slice(), b"second", b"third"]);
    }

    #[test]
    fn index_entries_point_at_their_records() {
        let records: Vec<KVRecord> = (0..100).map(|i| kv(&format!("k{i:03}"), "v")).collect();
        let options = BuildOptions {
            index_interval: 8,
            ..Default::default()
        };
        let (_dir, store) = build_store(records, &options);
        let reader = store.reader().unwrap();
        assert_eq!(reader.index_len(), 13); // ceil(100 / 8)
        for (key, offset) in &reader.index {
            let mut r = SeqReader::open_at(&store.data_path(), *offset).unwrap();
            let record = r.next().unwrap().unwrap();
            assert_eq!(&record.key, key);
        }
    }

    #[test]
    fn seek_scan_prefix_behaviour() {
        let records = vec![
            kv("apple", "1"),
            kv("apricot", "2"),
            kv("banana", "3"),
            kv("berry", "4"),
        ];
        let (_dir, store) = build_store(records, &BuildOptions::default());
        let reader = store.reader().unwrap();

        let got = reader.prefix_scan(b"ap").unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].key, b"apple");

        // Prefix equal to an existing key: that record first.
        let got = reader.prefix_scan(b"banana").unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].value, b"3");

        // Beyond all keys: empty.
        assert!(reader.prefix_scan(b"zzz").unwrap().is_empty());
        assert!(reader.prefix_scan(b"az").unwrap().is_empty());
    }

    #[test]
    fn seek_scan_matches_linear_scan_on_random_stores() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for round in 0..10 {
            let n = rng.random_range(0..200);
            let records: Vec<KVRecord> = (0..n)
                .map(|i| {
                    let len = rng.random_range(0..6);
                    let key: Vec<u8> =
                        (0..len).map(|_| b'a' + rng.random_range(0..3u8)).collect();
                    KVRecord::new(key, format!("v{i}").into_bytes())
                })
                .collect();
            let options = BuildOptions {
                index_interval: rng.random_range(1..20),
                max_run_records: rng.random_range(1..50),
            };
            let (_dir, store) = build_store(records, &options);
            let reader = store.reader().unwrap();
            let all = crate::seqfile::seq_read_all(&store.data_path()).unwrap();
            for _ in 0..20 {
                let plen = rng.random_range(0..4);
                let prefix: Vec<u8> =
                    (0..plen).map(|_| b'a' + rng.random_range(0..3u8)).collect();
                let got = reader.prefix_scan(&prefix).unwrap();
                let expected: Vec<KVRecord> = all
                    .iter()
                    .filter(|r| r.key.starts_with(&prefix))
                    .cloned()
                    .collect();
                assert_eq!(got, expected, "round {round} prefix {prefix:?}");
            }
        }
    }
}
