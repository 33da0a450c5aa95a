use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Day,
    Night,
    Converted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub image: PathBuf,
    /// Panoptic PNG; its JSON sidecar sits next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PathBuf>,
    pub split: Split,
    pub domain: Domain,
    /// Where the entry came from when datasets are mixed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// A dataset manifest. Relative paths in a manifest file are resolved against
/// the directory that contains it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub seed: u64,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetIndex {
    pub fn new(seed: u64, entries: Vec<DatasetEntry>) -> Result<Self> {
        let index = DatasetIndex { seed, entries };
        index.check()?;
        Ok(index)
    }

    pub fn empty(seed: u64) -> Self {
        DatasetIndex {
            seed,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Image paths must be unique, and so must label paths.
    pub fn check(&self) -> Result<()> {
        let mut images = HashSet::new();
        let mut labels = HashSet::new();
        for e in &self.entries {
            if !images.insert(&e.image) {
                return Err(Error::Validation(format!("duplicate image path {}", e.image.display())));
            }
            if let Some(l) = &e.label {
                if !labels.insert(l) {
                    return Err(Error::Validation(format!("duplicate label path {}", l.display())));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Writes the manifest with paths made relative to its directory where
    /// possible, so the file content does not depend on where the dataset
    /// lives.
    pub fn save(&self, path: &Path) -> Result<String> {
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: &PathBuf| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.clone());
        let portable = DatasetIndex {
            seed: self.seed,
            entries: self
                .entries
                .iter()
                .map(|e| DatasetEntry {
                    image: rel(&e.image),
                    label: e.label.as_ref().map(rel),
                    ..e.clone()
                })
                .collect(),
        };
        let text = portable.to_json();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut index: DatasetIndex = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut index.entries {
            if e.image.is_relative() {
                e.image = base.join(&e.image);
            }
            if let Some(l) = &mut e.label {
                if l.is_relative() {
                    *l = base.join(&*l);
                }
            }
        }
        index.check()?;
        Ok(index)
    }

    /// SHA-256 of the manifest file as stored on disk.
    pub fn file_hash(path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(&bytes))
    }
}
