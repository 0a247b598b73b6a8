//! Append-only index log.
//!
//! Layout: an 8-byte magic `SEGSTIDX` and a little-endian `u32` format
//! version, followed by frames of `[len: u32 LE][crc32: u32 LE][payload]`.
//! A frame is committed once its bytes are synced. On open, replay stops
//! at the first short or checksum-failing frame and the file is truncated
//! there, which discards a torn tail left by a crash mid-append.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const INDEX_MAGIC: &[u8; 8] = b"SEGSTIDX";
pub const INDEX_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;
const FRAME_HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Recovery {
    pub records: usize,
    /// Bytes dropped from the end of the log.
    pub truncated_bytes: u64,
}

pub struct IndexLog {
    file: File,
    path: PathBuf,
}

fn header() -> Vec<u8> {
    let mut h = INDEX_MAGIC.to_vec();
    h.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
    h
}

fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

impl IndexLog {
    /// Opens or creates the log and returns every committed payload.
    pub fn open(path: &Path) -> Result<(IndexLog, Vec<Vec<u8>>, Recovery)> {
        let mut bytes = Vec::new();
        if path.exists() {
            File::open(path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(Error::io(format!("reading {}", path.display())))?;
        }
        let fresh = bytes.len() < HEADER_LEN && header().starts_with(&bytes);
        if fresh {
            let mut f =
                File::create(path).map_err(Error::io(format!("creating {}", path.display())))?;
            f.write_all(&header())
                .and_then(|_| f.sync_all())
                .map_err(Error::io("writing index header"))?;
            sync_parent(path)?;
            let file = OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(Error::io("opening index log"))?;
            let log = IndexLog {
                file,
                path: path.to_path_buf(),
            };
            return Ok((log, Vec::new(), Recovery::default()));
        }
        if &bytes[..8] != INDEX_MAGIC {
            return Err(Error::Integrity(format!(
                "{} is not an index log",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != INDEX_FORMAT_VERSION {
            return Err(Error::Unsupported(format!(
                "index log format version {version}"
            )));
        }

        let mut pos = HEADER_LEN;
        let mut payloads = Vec::new();
        while pos + FRAME_HEADER_LEN <= bytes.len() {
            let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
            let crc = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().expect("4 bytes"));
            let start = pos + FRAME_HEADER_LEN;
            let Some(payload) = bytes.get(start..start + len) else {
                break;
            };
            if crc32fast::hash(payload) != crc {
                break;
            }
            payloads.push(payload.to_vec());
            pos = start + len;
        }
        let truncated = (bytes.len() - pos) as u64;
        if truncated > 0 {
            tracing::warn!(
                path = %path.display(),
                bytes = truncated,
                "discarding incomplete tail of index log"
            );
            let f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(Error::io("opening index log for truncation"))?;
            f.set_len(pos as u64)
                .and_then(|_| f.sync_all())
                .map_err(Error::io("truncating index log"))?;
        }
        let mut file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(Error::io("opening index log"))?;
        file.seek(SeekFrom::End(0))
            .map_err(Error::io("seeking index log"))?;
        let recovery = Recovery {
            records: payloads.len(),
            truncated_bytes: truncated,
        };
        Ok((
            IndexLog {
                file,
                path: path.to_path_buf(),
            },
            payloads,
            recovery,
        ))
    }

    /// Appends one record and syncs it to disk.
    pub fn append(&mut self, payload: &[u8]) -> Result<()> {
        self.file
            .write_all(&frame(payload))
            .and_then(|_| self.file.sync_data())
            .map_err(Error::io("appending to index log"))
    }

    /// Writes only the first half of a frame. Crash-testing hook.
    pub(crate) fn append_torn(&mut self, payload: &[u8]) -> Result<()> {
        let f = frame(payload);
        self.file
            .write_all(&f[..f.len() / 2])
            .and_then(|_| self.file.sync_data())
            .map_err(Error::io("appending to index log"))
    }

    /// Atomically replaces the log with `payloads`.
    pub fn rewrite(&mut self, payloads: &[Vec<u8>]) -> Result<()> {
        let tmp = self.path.with_extension("log.compact");
        {
            let mut f = File::create(&tmp).map_err(Error::io("creating compacted index"))?;
            let mut buf = header();
            for p in payloads {
                buf.extend(frame(p));
            }
            f.write_all(&buf)
                .and_then(|_| f.sync_all())
                .map_err(Error::io("writing compacted index"))?;
        }
        fs::rename(&tmp, &self.path).map_err(Error::io("installing compacted index"))?;
        sync_parent(&self.path)?;
        self.file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(Error::io("reopening index log"))?;
        Ok(())
    }
}

pub(crate) fn sync_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        // Directory fsync is not supported everywhere; failure is not fatal.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}
