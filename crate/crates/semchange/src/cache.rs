//! On-disk cache of trained period spaces.
//!
//! Entries live under `<cache_dir>/<key>/`, one space file per period plus a
//! `complete` marker written last. Every file is written through a temporary
//! file and renamed into place, so concurrent runs never read a torn entry.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use semchange_core::embedding::EmbeddingSpace;

use crate::error::{Error, Result};
use crate::formats::{read_space, write_atomic, write_space};

const MARKER: &str = "complete";

/// Hex SHA-256 of the JSON form of `parts`.
pub fn cache_key<T: Serialize + ?Sized>(parts: &T) -> String {
    let bytes = serde_json::to_vec(parts).expect("cache key parts serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone)]
pub struct SpaceCache {
    dir: PathBuf,
}

impl SpaceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SpaceCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    /// The cached spaces for `key`, or `None` when absent or unreadable.
    pub fn load(&self, key: &str) -> Option<Vec<EmbeddingSpace>> {
        let entry = self.entry(key);
        let count: usize = fs::read_to_string(entry.join(MARKER)).ok()?.trim().parse().ok()?;
        let mut spaces = Vec::with_capacity(count);
        for i in 0..count {
            match read_space(&entry.join(format!("{i}.space"))) {
                Ok(s) => spaces.push(s),
                Err(e) => {
                    log::warn!("ignoring damaged cache entry {key}: {e}");
                    return None;
                }
            }
        }
        Some(spaces)
    }

    pub fn store(&self, key: &str, spaces: &[EmbeddingSpace]) -> Result<()> {
        let entry = self.entry(key);
        fs::create_dir_all(&entry).map_err(|e| Error::io(&entry, e))?;
        for (i, s) in spaces.iter().enumerate() {
            write_space(&entry.join(format!("{i}.space")), s)?;
        }
        write_atomic(&entry.join(MARKER), &format!("{}\n", spaces.len()))
    }
}
