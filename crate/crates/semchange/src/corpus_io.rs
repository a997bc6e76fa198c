//! Reading time-binned corpora from disk.
//!
//! A period is either a text file or a directory of text files (read in
//! file-name order, hidden files skipped). Each line is one sentence.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use semchange_core::corpus::{CorpusBin, TimeBinnedCorpus};

use crate::config::Period;
use crate::error::{Error, Result};

/// Files making up one period, in reading order.
pub fn period_files(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no corpus files in directory"),
        ));
    }
    Ok(files)
}

pub fn read_period(period: &Period) -> Result<CorpusBin> {
    let mut bin = CorpusBin::new(period.id.clone());
    for file in period_files(&period.path)? {
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::io(&file, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            bin.push_line(line);
        }
    }
    Ok(bin)
}

pub fn read_corpus(periods: &[Period]) -> Result<TimeBinnedCorpus> {
    let bins = periods.iter().map(read_period).collect::<Result<Vec<_>>>()?;
    let corpus = TimeBinnedCorpus::new(bins);
    corpus.require_two_bins()?;
    Ok(corpus)
}

/// Content hash of every period: its id plus the bytes of its files in
/// reading order. File names and locations do not enter the hash.
pub fn corpus_hash(periods: &[Period]) -> Result<String> {
    let mut h = Sha256::new();
    for p in periods {
        h.update((p.id.len() as u64).to_le_bytes());
        h.update(p.id.as_bytes());
        let files = period_files(&p.path)?;
        h.update((files.len() as u64).to_le_bytes());
        for f in files {
            let bytes = fs::read(&f).map_err(|e| Error::io(&f, e))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// Writes one bin as one sentence per line.
pub fn format_bin(bin: &CorpusBin) -> String {
    let mut out = String::new();
    for s in &bin.sentences {
        out.push_str(&s.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_is_read_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "c d\n").unwrap();
        fs::write(dir.path().join("a.txt"), "a b\n\n").unwrap();
        fs::write(dir.path().join(".hidden"), "zzz\n").unwrap();
        let bin = read_period(&Period {
            id: "t1".into(),
            path: dir.path().to_path_buf(),
        })
        .unwrap();
        assert_eq!(bin.sentences, vec![vec!["a", "b"], vec!["c", "d"]]);
    }

    #[test]
    fn hash_follows_content_not_location() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        for d in [&d1, &d2] {
            fs::write(d.path().join("x.txt"), "same text\n").unwrap();
        }
        let p = |d: &tempfile::TempDir| {
            vec![Period {
                id: "t1".into(),
                path: d.path().join("x.txt"),
            }]
        };
        assert_eq!(corpus_hash(&p(&d1)).unwrap(), corpus_hash(&p(&d2)).unwrap());
        fs::write(d2.path().join("x.txt"), "other text\n").unwrap();
        assert_ne!(corpus_hash(&p(&d1)).unwrap(), corpus_hash(&p(&d2)).unwrap());
    }

    #[test]
    fn missing_period_is_an_io_error() {
        let err = read_period(&Period {
            id: "t1".into(),
            path: "/nonexistent/corpus".into(),
        })
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
