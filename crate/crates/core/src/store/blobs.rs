//! Content-addressed blob files named by the SHA-256 of their contents.

use std::fs::{self, File};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::wal::sync_parent;
use crate::error::{Error, Result};

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct BlobStore {
    dir: PathBuf,
    tmp: PathBuf,
}

impl BlobStore {
    pub fn open(root: &Path) -> Result<Self> {
        let dir = root.join("blobs");
        let tmp = root.join("tmp");
        for d in [&dir, &tmp] {
            fs::create_dir_all(d).map_err(Error::io(format!("creating {}", d.display())))?;
        }
        Ok(Self { dir, tmp })
    }

    pub fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(hash)
    }

    /// Writes `bytes` durably and returns its checksum. Existing intact
    /// blobs are left alone; a corrupted one is replaced.
    pub fn put(&self, bytes: &[u8]) -> Result<String> {
        let hash = checksum(bytes);
        let path = self.path(&hash);
        if let Ok(existing) = fs::read(&path) {
            if checksum(&existing) == hash {
                return Ok(hash);
            }
        }
        let tmp = self.tmp.join(format!("{hash}.{}", uuid::Uuid::new_v4()));
        {
            let mut f = File::create(&tmp).map_err(Error::io("creating blob temp file"))?;
            f.write_all(bytes)
                .and_then(|_| f.sync_all())
                .map_err(Error::io("writing blob"))?;
        }
        fs::rename(&tmp, &path).map_err(Error::io("installing blob"))?;
        sync_parent(&path)?;
        Ok(hash)
    }

    /// Reads a blob and verifies its checksum.
    pub fn get(&self, hash: &str) -> Result<Vec<u8>> {
        let bytes = match fs::read(self.path(hash)) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => {
                return Err(Error::Integrity(format!("blob {hash} is missing")));
            }
            Err(e) => return Err(Error::io(format!("reading blob {hash}"))(e)),
        };
        let actual = checksum(&bytes);
        if actual != hash {
            return Err(Error::Integrity(format!(
                "blob {hash} is corrupted (content hashes to {actual})"
            )));
        }
        Ok(bytes)
    }

    pub fn verify(&self, hash: &str) -> Result<()> {
        self.get(hash).map(|_| ())
    }

    pub fn remove(&self, hash: &str) -> Result<bool> {
        match fs::remove_file(self.path(hash)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(false),
            Err(e) => Err(Error::io(format!("removing blob {hash}"))(e)),
        }
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(Error::io("listing blobs"))? {
            let entry = entry.map_err(Error::io("listing blobs"))?;
            if let Some(name) = entry.file_name().to_str() {
                out.push(name.to_string());
            }
        }
        out.sort();
        Ok(out)
    }

    /// Removes leftover temp files from interrupted writes.
    pub fn clear_tmp(&self) -> Result<usize> {
        let mut n = 0;
        for entry in fs::read_dir(&self.tmp).map_err(Error::io("listing temp dir"))? {
            let entry = entry.map_err(Error::io("listing temp dir"))?;
            if fs::remove_file(entry.path()).is_ok() {
                n += 1;
            }
        }
        Ok(n)
    }
}
