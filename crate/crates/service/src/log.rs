//! Append-only record log.
//!
//! Each frame is `len: u32 LE | crc: u32 LE | payload`, where the CRC-32
//! covers the length bytes and the payload. Opening the log replays every
//! frame. A frame cut short by a crash (or a checksum failure in the very
//! last frame) is a torn tail: it is truncated away with a warning. A
//! checksum failure anywhere else is corruption and refuses to open.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

const HEADER: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("record log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(
        "record log {path}: record {index} at byte {offset} fails its checksum \
         (stored {stored:#010x}, computed {computed:#010x}) with {following} bytes after it"
    )]
    CorruptRecord { path: PathBuf, index: usize, offset: u64, stored: u32, computed: u32, following: u64 },
    #[error("record of {0} bytes exceeds the u32 frame limit")]
    TooLarge(usize),
}

/// What opening the log found.
#[derive(Debug, Default)]
pub struct Recovery {
    pub records: Vec<Vec<u8>>,
    /// Bytes dropped from a torn tail; zero after a clean shutdown.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct RecordLog {
    path: PathBuf,
    file: File,
    len: u64,
}

fn checksum(len: &[u8; 4], payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(len);
    h.update(payload);
    h.finalize()
}

impl RecordLog {
    /// Opens or creates the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<(RecordLog, Recovery), LogError> {
        let io_err = |source| LogError::Io { path: path.to_path_buf(), source };
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path).map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;

        let mut recovery = Recovery::default();
        let mut at = 0usize;
        while at < bytes.len() {
            let rest = &bytes[at..];
            if rest.len() < HEADER {
                break;
            }
            let len_bytes: [u8; 4] = rest[..4].try_into().expect("4 bytes");
            let stored = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes"));
            let len = u32::from_le_bytes(len_bytes) as usize;
            if rest.len() - HEADER < len {
                break;
            }
            let payload = &rest[HEADER..HEADER + len];
            let computed = checksum(&len_bytes, payload);
            let end = at + HEADER + len;
            if computed != stored {
                if end == bytes.len() {
                    break;
                }
                return Err(LogError::CorruptRecord {
                    path: path.to_path_buf(),
                    index: recovery.records.len(),
                    offset: at as u64,
                    stored,
                    computed,
                    following: (bytes.len() - end) as u64,
                });
            }
            recovery.records.push(payload.to_vec());
            at = end;
        }

        if at < bytes.len() {
            recovery.truncated_bytes = (bytes.len() - at) as u64;
            tracing::warn!(
                path = %path.display(),
                dropped_bytes = recovery.truncated_bytes,
                kept_records = recovery.records.len(),
                "discarding torn record at the end of the log"
            );
            file.set_len(at as u64).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err)?;
        Ok((RecordLog { path: path.to_path_buf(), file, len: at as u64 }, recovery))
    }

    /// Appends one record and waits for it to reach the disk. Returns the
    /// frame's byte offset.
    pub fn append(&mut self, payload: &[u8]) -> Result<u64, LogError> {
        let len = u32::try_from(payload.len()).map_err(|_| LogError::TooLarge(payload.len()))?;
        let len_bytes = len.to_le_bytes();
        let mut frame = Vec::with_capacity(HEADER + payload.len());
        frame.extend_from_slice(&len_bytes);
        frame.extend_from_slice(&checksum(&len_bytes, payload).to_le_bytes());
        frame.extend_from_slice(payload);

        let io_err = |source| LogError::Io { path: self.path.clone(), source };
        self.file.write_all(&frame).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)?;
        let offset = self.len;
        self.len += frame.len() as u64;
        Ok(offset)
    }

    pub fn len_bytes(&self) -> u64 {
        self.len
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
