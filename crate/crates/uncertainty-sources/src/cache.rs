//! Append-only verdict cache keyed by content hash.
//!
//! Verdicts are keyed by what the judge actually saw — template id, model
//! name, instruction, response — so re-annotation never repeats a network
//! call and two samples with identical content share one verdict. The file
//! is JSON-lines, append-only: merging two caches is file concatenation, and
//! on load the newest entry for a hash wins.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SourceError;

/// Hash of everything that determines a verdict. Fields are length-prefixed
/// before hashing so no two distinct tuples can collide by concatenation.
pub fn content_hash(template_id: &str, model: &str, instruction: &str, response: &str) -> String {
    let mut hasher = Sha256::new();
    for field in [template_id, model, instruction, response] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("write to string");
    }
    hex
}

/// One cached judge verdict. Deliberately carries no sample id: identical
/// content is one entry no matter how many samples share it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub hash: String,
    pub score: u8,
    pub raw_text: String,
    pub template_id: String,
    pub model: String,
}

/// In-memory index over the append-only cache file. Reads are lock-cheap;
/// writes serialize through a single writer handle so concurrent annotation
/// threads never interleave partial lines.
#[derive(Debug)]
pub struct VerdictCache {
    map: Mutex<HashMap<String, CacheEntry>>,
    writer: Mutex<File>,
}

impl VerdictCache {
    /// Opens (creating if absent) a cache file and loads every entry.
    pub fn open(path: &Path) -> Result<Self, SourceError> {
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (index, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry =
                    serde_json::from_str(&line).map_err(|e| SourceError::CacheFormat {
                        line: index + 1,
                        message: e.to_string(),
                    })?;
                map.insert(entry.hash.clone(), entry);
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            map: Mutex::new(map),
            writer: Mutex::new(writer),
        })
    }

    pub fn get(&self, hash: &str) -> Option<CacheEntry> {
        self.map.lock().expect("cache map lock").get(hash).cloned()
    }

    /// Appends one entry to the file (flushed before returning) and indexes it.
    pub fn insert(&self, entry: CacheEntry) -> Result<(), SourceError> {
        let line = serde_json::to_string(&entry).expect("cache entry serializes");
        {
            let mut writer = self.writer.lock().expect("cache writer lock");
            writer.write_all(line.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        self.map
            .lock()
            .expect("cache map lock")
            .insert(entry.hash.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_separates_field_boundaries() {
        // Same concatenation, different field split.
        let a = content_hash("t", "m", "ab", "c");
        let b = content_hash("t", "m", "a", "bc");
        assert_ne!(a, b);
        assert_eq!(a, content_hash("t", "m", "ab", "c"));
    }

    #[test]
    fn insert_then_reopen_round_trips() {
        let dir = std::env::temp_dir().join(format!("ual-cache-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cache.jsonl");
        let _ = std::fs::remove_file(&path);

        let cache = VerdictCache::open(&path).unwrap();
        assert!(cache.is_empty());
        cache
            .insert(CacheEntry {
                hash: "h1".into(),
                score: 40,
                raw_text: "SCORE: 40".into(),
                template_id: "uncertainty-v1".into(),
                model: "mock".into(),
            })
            .unwrap();

        let reopened = VerdictCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 1);
        assert_eq!(reopened.get("h1").unwrap().score, 40);
        assert!(reopened.get("h2").is_none());
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = std::env::temp_dir().join(format!("ual-cache-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.jsonl");
        std::fs::write(&path, "{\"hash\":\"h\",\"score\":1,\"raw_text\":\"\",\"template_id\":\"t\",\"model\":\"m\"}\nnot json\n").unwrap();
        let err = VerdictCache::open(&path).unwrap_err();
        assert!(matches!(err, SourceError::CacheFormat { line: 2, .. }));
        std::fs::remove_file(&path).unwrap();
    }
}
