//! Binary key-value record files.
//!
//! Layout: magic "CMSQ", version byte 0x01, then per record a 4-byte
//! big-endian key length, the key bytes, a 4-byte big-endian value length
//! and the value bytes. The file ends with an 8-byte 0xFF marker followed
//! by the 8-byte big-endian record count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"CMSQ";
pub const VERSION: u8 = 0x01;
const TRAILER_MARKER: u32 = u32::MAX;
const HEADER_LEN: u64 = 5;

#[derive(Debug, Error)]
pub enum SeqFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes {found:02x?}: not a sequence file")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported sequence file version {0}")]
    UnsupportedVersion(u8),
    #[error("file truncated at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("trailer count {expected} does not match {actual} records present")]
    TrailerMismatch { expected: u64, actual: u64 },
}

/// One key-value record; keys and values are arbitrary bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KVRecord {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl KVRecord {
    pub fn new(key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) -> KVRecord {
        KVRecord {
            key: key.into(),
            value: value.into(),
        }
    }

    /// On-disk size of this record in bytes.
    pub fn encoded_len(&self) -> u64 {
        8 + self.key.len() as u64 + self.value.len() as u64
    }
}

/// Streaming writer. `finish` must be called to emit the trailer.
pub struct SeqWriter {
    out: BufWriter<File>,
    count: u64,
    offset: u64,
}

impl SeqWriter {
    pub fn create(path: &Path) -> Result<SeqWriter, SeqFileError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&MAGIC)?;
        out.write_all(&[VERSION])?;
        Ok(SeqWriter {
            out,
            count: 0,
            offset: HEADER_LEN,
        })
    }

    /// Appends a record and returns its starting byte offset.
    pub fn append(&mut self, key: &[u8], value: &[u8]) -> Result<u64, SeqFileError> {
        let start = self.offset;
        self.out.write_all(&(key.len() as u32).to_be_bytes())?;
        self.out.write_all(key)?;
        self.out.write_all(&(value.len() as u32).to_be_bytes())?;
        self.out.write_all(value)?;
        self.offset += 8 + key.len() as u64 + value.len() as u64;
        self.count += 1;
        Ok(start)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Writes the trailer and returns the record count.
    pub fn finish(mut self) -> Result<u64, SeqFileError> {
        self.out.write_all(&TRAILER_MARKER.to_be_bytes())?;
        self.out.write_all(&TRAILER_MARKER.to_be_bytes())?;
        self.out.write_all(&self.count.to_be_bytes())?;
        self.out.flush()?;
        Ok(self.count)
    }
}

/// Writes all records from an iterator; returns the count written.
pub fn seq_write<I>(path: &Path, records: I) -> Result<u64, SeqFileError>
where
    I: IntoIterator<Item = KVRecord>,
{
    let mut writer = SeqWriter::create(path)?;
    for record in records {
        writer.append(&record.key, &record.value)?;
    }
    writer.finish()
}

/// Reads one record at the reader's current position, or `None` at the
/// trailer. `offset` must hold the current byte position and is advanced.
pub(crate) fn read_record<R: Read>(
    input: &mut R,
    offset: &mut u64,
    records_seen: u64,
) -> Result<Option<KVRecord>, SeqFileError> {
    let mut len_buf = [0u8; 4];
    let record_start = *offset;
    if let Err(e) = input.read_exact(&mut len_buf) {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            return Err(SeqFileError::Truncated {
                offset: record_start,
            });
        }
        return Err(e.into());
    }
    *offset += 4;
    let key_len = u32::from_be_bytes(len_buf);
    if key_len == TRAILER_MARKER {
        // Second marker word plus the count.
        let mut rest = [0u8; 12];
        input
            .read_exact(&mut rest)
            .map_err(|_| SeqFileError::Truncated {
                offset: record_start,
            })?;
        *offset += 12;
        if rest[..4] != TRAILER_MARKER.to_be_bytes() {
            return Err(SeqFileError::Truncated {
                offset: record_start,
            });
        }
        let expected = u64::from_be_bytes(rest[4..].try_into().unwrap());
        if expected != records_seen {
            return Err(SeqFileError::TrailerMismatch {
                expected,
                actual: records_seen,
            });
        }
        return Ok(None);
    }

    let mut key = vec![0u8; key_len as usize];
    input.read_exact(&mut key).map_err(|_| SeqFileError::Truncated {
        offset: record_start,
    })?;
    *offset += key_len as u64;
    input
        .read_exact(&mut len_buf)
        .map_err(|_| SeqFileError::Truncated {
            offset: record_start,
        })?;
    *offset += 4;
    let value_len = u32::from_be_bytes(len_buf);
    let mut value = vec![0u8; value_len as usize];
    input
        .read_exact(&mut value)
        .map_err(|_| SeqFileError::Truncated {
            offset: record_start,
        })?;
    *offset += value_len as u64;
    Ok(Some(KVRecord { key, value }))
}

pub(crate) fn check_header<R: Read>(input: &mut R) -> Result<(), SeqFileError> {
    let mut header = [0u8; 5];
    input.read_exact(&mut header).map_err(|_| SeqFileError::BadMagic {
        found: [0; 4],
    })?;
    if header[..4] != MAGIC {
        return Err(SeqFileError::BadMagic {
            found: header[..4].try_into().unwrap(),
        });
    }
    if header[4] != VERSION {
        return Err(SeqFileError::UnsupportedVersion(header[4]));
    }
    Ok(())
}

/// Streaming reader; iterates records in file order and validates the
/// trailer when the end is reached.
pub struct SeqReader {
    input: BufReader<File>,
    offset: u64,
    records_seen: u64,
    done: bool,
}

impl SeqReader {
    pub fn open(path: &Path) -> Result<SeqReader, SeqFileError> {
        let mut input = BufReader::new(File::open(path)?);
        check_header(&mut input)?;
        Ok(SeqReader {
            input,
            offset: HEADER_LEN,
            records_seen: 0,
            done: false,
        })
    }

    /// Opens the file and positions at `offset` (a record boundary).
    pub fn open_at(path: &Path, offset: u64) -> Result<SeqReader, SeqFileError> {
        let mut input = BufReader::new(File::open(path)?);
        check_header(&mut input)?;
        input.seek(SeekFrom::Start(offset))?;
        Ok(SeqReader {
            input,
            offset,
            // Record counting only works from the start; a mid-file reader
            // skips trailer validation.
            records_seen: u64::MAX,
            done: false,
        })
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }
}

impl Iterator for SeqReader {
    type Item = Result<KVRecord, SeqFileError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let counting = self.records_seen != u64::MAX;
        let seen = if counting { self.records_seen } else { 0 };
        match read_record(&mut self.input, &mut self.offset, seen) {
            Ok(Some(record)) => {
                if counting {
                    self.records_seen += 1;
                }
                Some(Ok(record))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(SeqFileError::TrailerMismatch { expected, actual }) if !counting => {
                // Mid-file readers cannot know the true count.
                let _ = (expected, actual);
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads the whole file into memory.
pub fn seq_read_all(path: &Path) -> Result<Vec<KVRecord>, SeqFileError> {
    SeqReader::open(path)?.collect()
}
