//! Collection file format (version 1). All integers little-endian.
//!
//! ```text
//! header:  magic "MATECVEC" (8 bytes) | version u16 | dimension u32
//!          | embedder_id_len u16 | embedder_id (UTF-8)
//! record:  body_len u32 | crc32(body) u32 | body
//! body:    kind u8, then
//!   kind 1 (replace document): doc_id str16 | chunk_count u32
//!   kind 2 (chunk):            doc_id str16 | ordinal u32 | char_start u32
//!                              | title str16 | text str32 | vector f32 x dimension
//! str16 / str32: u16 / u32 byte length followed by UTF-8 bytes
//! ```
//!
//! A replace record is followed by exactly `chunk_count` chunk records; the
//! group is applied only if it is complete, so a crash mid-ingest leaves the
//! previous version of the document in place. An incomplete trailing record
//! or group is truncated on open; a checksum failure before the tail is an
//! error.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Cursor, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Chunk, ChunkId};

const MAGIC: &[u8; 8] = b"MATECVEC";
const VERSION: u16 = 1;
const KIND_REPLACE: u8 = 1;
const KIND_CHUNK: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("collection io: {0}")]
    Io(#[from] io::Error),
    #[error("{path}: not a collection file")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported collection version {version}")]
    UnsupportedVersion { path: PathBuf, version: u16 },
    #[error(
        "{path}: built with embedder {found} (dimension {found_dim}), store uses {expected} (dimension {expected_dim})"
    )]
    EmbedderMismatch { path: PathBuf, expected: String, expected_dim: usize, found: String, found_dim: usize },
    #[error("{path}: corrupt record at byte {offset}: {reason}")]
    Corrupt { path: PathBuf, offset: u64, reason: String },
}

pub struct CollectionFile {
    path: PathBuf,
    file: File,
    embedder_id: String,
    dimension: usize,
}

enum Record {
    Replace { doc_id: String, count: u32 },
    Chunk(Chunk),
}

impl CollectionFile {
    /// Opens or creates `path`, returning the live chunks.
    pub fn open(path: &Path, embedder_id: &str, dimension: usize) -> Result<(Self, Vec<Chunk>), PersistError> {
        let file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path)?;
        let len = file.metadata()?.len();
        let mut this = CollectionFile { path: path.to_path_buf(), file, embedder_id: embedder_id.into(), dimension };
        if len == 0 {
            this.write_header()?;
            return Ok((this, Vec::new()));
        }
        let mut bytes = Vec::with_capacity(len as usize);
        this.file.seek(SeekFrom::Start(0))?;
        this.file.read_to_end(&mut bytes)?;
        let chunks = this.replay(&bytes)?;
        Ok((this, chunks))
    }

    fn write_header(&mut self) -> Result<(), PersistError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.write_u16::<LittleEndian>(VERSION)?;
        buf.write_u32::<LittleEndian>(self.dimension as u32)?;
        write_str16(&mut buf, &self.embedder_id)?;
        self.file.set_len(0)?;
        self.file.seek(SeekFrom::Start(0))?;
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    fn replay(&mut self, bytes: &[u8]) -> Result<Vec<Chunk>, PersistError> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic).map_err(|_| PersistError::BadMagic { path: self.path.clone() })?;
        if &magic != MAGIC {
            return Err(PersistError::BadMagic { path: self.path.clone() });
        }
        let version = cur.read_u16::<LittleEndian>()?;
        if version != VERSION {
            return Err(PersistError::UnsupportedVersion { path: self.path.clone(), version });
        }
        let dim = cur.read_u32::<LittleEndian>()? as usize;
        let id = read_str16(&mut cur)?;
        if id != self.embedder_id || dim != self.dimension {
            return Err(PersistError::EmbedderMismatch {
                path: self.path.clone(),
                expected: self.embedder_id.clone(),
                expected_dim: self.dimension,
                found: id,
                found_dim: dim,
            });
        }

        let mut live: BTreeMap<ChunkId, Chunk> = BTreeMap::new();
        let mut committed_end = cur.position();
        let mut pending: Option<(String, u32, Vec<Chunk>)> = None;
        let total = bytes.len() as u64;
        loop {
            let offset = cur.position();
            if offset == total {
                break;
            }
            let Some(body) = next_record(&mut cur, total).map_err(|reason| PersistError::Corrupt {
                path: self.path.clone(),
                offset,
                reason,
            })?
            else {
                break; // torn tail
            };
            let record = decode_body(&body, self.dimension).map_err(|reason| PersistError::Corrupt {
                path: self.path.clone(),
                offset,
                reason,
            })?;
            match (record, pending.as_mut()) {
                (Record::Replace { doc_id, count }, None) => pending = Some((doc_id, count, Vec::new())),
                (Record::Chunk(c), Some((doc_id, _, group))) if &c.chunk_id.doc_id == doc_id => group.push(c),
                _ => {
                    return Err(PersistError::Corrupt {
                        path: self.path.clone(),
                        offset,
                        reason: "record out of sequence".into(),
                    })
                }
            }
            if let Some((doc_id, count, group)) = pending.take_if(|(_, count, group)| group.len() == *count as usize) {
                debug_assert_eq!(group.len(), count as usize);
                live.retain(|k, _| k.doc_id != doc_id);
                live.extend(group.into_iter().map(|c| (c.chunk_id.clone(), c)));
                committed_end = cur.position();
            }
        }
        if committed_end < total {
            tracing::warn!(
                path = %self.path.display(),
                dropped_bytes = total - committed_end,
                "discarding incomplete trailing records in collection file"
            );
            self.file.set_len(committed_end)?;
        }
        self.file.seek(SeekFrom::End(0))?;
        Ok(live.into_values().collect())
    }

    pub fn append_document(&mut self, doc_id: &str, chunks: &[Chunk]) -> Result<(), PersistError> {
        let mut buf = Vec::new();
        encode_document(&mut buf, doc_id, chunks, self.dimension)?;
        self.file.seek(SeekFrom::End(0))?;
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    /// Rewrites the file with one group per live document, then atomically
    /// renames it over the original.
    pub fn compact<'a>(&mut self, chunks: impl Iterator<Item = &'a Chunk>) -> Result<(), PersistError> {
        let mut by_doc: BTreeMap<&str, Vec<Chunk>> = BTreeMap::new();
        for c in chunks {
            by_doc.entry(c.chunk_id.doc_id.as_str()).or_default().push(c.clone());
        }
        let tmp = self.path.with_extension("compact.tmp");
        {
            let mut out = File::create(&tmp)?;
            let mut buf = Vec::new();
            buf.extend_from_slice(MAGIC);
            buf.write_u16::<LittleEndian>(VERSION)?;
            buf.write_u32::<LittleEndian>(self.dimension as u32)?;
            write_str16(&mut buf, &self.embedder_id)?;
            for (doc_id, group) in &by_doc {
                encode_document(&mut buf, doc_id, group, self.dimension)?;
            }
            out.write_all(&buf)?;
            out.sync_all()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        self.file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        self.file.seek(SeekFrom::End(0))?;
        Ok(())
    }
}

fn encode_document(buf: &mut Vec<u8>, doc_id: &str, chunks: &[Chunk], dimension: usize) -> io::Result<()> {
    let mut body = vec![KIND_REPLACE];
    write_str16(&mut body, doc_id)?;
    body.write_u32::<LittleEndian>(chunks.len() as u32)?;
    frame(buf, &body)?;
    for c in chunks {
        assert_eq!(c.vector.len(), dimension, "vector dimension");
        let mut body = vec![KIND_CHUNK];
        write_str16(&mut body, &c.chunk_id.doc_id)?;
        body.write_u32::<LittleEndian>(c.chunk_id.ordinal)?;
        body.write_u32::<LittleEndian>(c.char_start as u32)?;
        write_str16(&mut body, &c.source_title)?;
        let text = c.text.as_bytes();
        body.write_u32::<LittleEndian>(text.len() as u32)?;
        body.extend_from_slice(text);
        for x in &c.vector {
            body.write_f32::<LittleEndian>(*x)?;
        }
        frame(buf, &body)?;
    }
    Ok(())
}

fn frame(buf: &mut Vec<u8>, body: &[u8]) -> io::Result<()> {
    buf.write_u32::<LittleEndian>(body.len() as u32)?;
    buf.write_u32::<LittleEndian>(crc32fast::hash(body))?;
    buf.extend_from_slice(body);
    Ok(())
}

/// `Ok(None)` when the remaining bytes cannot hold a complete record, or the
/// last record fails its checksum (a torn write). A bad checksum with more
/// data after it is corruption.
fn next_record(cur: &mut Cursor<&[u8]>, total: u64) -> Result<Option<Vec<u8>>, String> {
    let start = cur.position();
    if total - start < 8 {
        return Ok(None);
    }
    let len = cur.read_u32::<LittleEndian>().map_err(|e| e.to_string())? as u64;
    let crc = cur.read_u32::<LittleEndian>().map_err(|e| e.to_string())?;
    if total - cur.position() < len {
        return Ok(None);
    }
    let mut body = vec![0u8; len as usize];
    cur.read_exact(&mut body).map_err(|e| e.to_string())?;
    if crc32fast::hash(&body) != crc {
        if cur.position() == total {
            return Ok(None);
        }
        return Err("checksum mismatch".into());
    }
    Ok(Some(body))
}

fn decode_body(body: &[u8], dimension: usize) -> Result<Record, String> {
    let mut cur = Cursor::new(body);
    let kind = cur.read_u8().map_err(|e| e.to_string())?;
    let io = |e: io::Error| e.to_string();
    match kind {
        KIND_REPLACE => {
            let doc_id = read_str16(&mut cur).map_err(io)?;
            let count = cur.read_u32::<LittleEndian>().map_err(io)?;
            Ok(Record::Replace { doc_id, count })
        }
        KIND_CHUNK => {
            let doc_id = read_str16(&mut cur).map_err(io)?;
            let ordinal = cur.read_u32::<LittleEndian>().map_err(io)?;
            let char_start = cur.read_u32::<LittleEndian>().map_err(io)? as usize;
            let source_title = read_str16(&mut cur).map_err(io)?;
            let text_len = cur.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut text = vec![0u8; text_len];
            cur.read_exact(&mut text).map_err(io)?;
            let text = String::from_utf8(text).map_err(|e| e.to_string())?;
            let mut vector = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                vector.push(cur.read_f32::<LittleEndian>().map_err(io)?);
            }
            Ok(Record::Chunk(Chunk { chunk_id: ChunkId { doc_id, ordinal }, text, vector, source_title, char_start }))
        }
        other => Err(format!("unknown record kind {other}")),
    }
}

fn write_str16(buf: &mut Vec<u8>, s: &str) -> io::Result<()> {
    let bytes = s.as_bytes();
    let len = u16::try_from(bytes.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "string too long"))?;
    buf.write_u16::<LittleEndian>(len)?;
    buf.extend_from_slice(bytes);
    Ok(())
}

fn read_str16(cur: &mut Cursor<&[u8]>) -> io::Result<String> {
    let len = cur.read_u16::<LittleEndian>()? as usize;
    let mut bytes = vec![0u8; len];
    cur.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
