use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use harcascade::data::{read_cache, write_cache, LabeledDataset};

/// Every JSON artifact: the payload plus the run's config hash and seed.
#[derive(Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub seed: u64,
    pub body: T,
}

/// Output-directory layout.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn train_cache(&self) -> PathBuf {
        self.path("train.cache")
    }

    pub fn test_cache(&self) -> PathBuf {
        self.path("test.cache")
    }

    pub fn cnn(&self, target: &str, config_id: &str) -> PathBuf {
        self.root.join("cnn").join(target).join(format!("{config_id}.json"))
    }

    pub fn cascade(&self, config_id: &str) -> PathBuf {
        self.root.join("cascades").join(format!("{config_id}.json"))
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_artifact<T: Serialize>(path: &Path, hash: &str, seed: u64, body: T) -> Result<()> {
    let doc = Artifact { config_hash: hash.to_string(), seed, body };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_text(path, &text)
}

fn check_hash(path: &Path, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        bail!(
            "config hash mismatch: {} was produced with config {found}, current config is {expected}; \
             re-run the upstream commands",
            path.display()
        );
    }
    Ok(())
}

pub fn read_artifact<T: DeserializeOwned>(path: &Path, expected_hash: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("missing artifact {}", path.display()))?;
    let doc: Artifact<T> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    check_hash(path, &doc.config_hash, expected_hash)?;
    Ok(doc.body)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub static_ids: Vec<u16>,
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset, hash: &str, seed: u64, meta: &DatasetMeta) -> Result<()> {
    ensure_parent(path)?;
    let doc = Artifact { config_hash: hash.to_string(), seed, body: meta };
    write_cache(path, ds, &serde_json::to_string(&doc)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_dataset(path: &Path, expected_hash: &str) -> Result<(LabeledDataset, DatasetMeta)> {
    if !path.exists() {
        bail!("missing dataset cache {}; run `harcascade prepare` first", path.display());
    }
    let (ds, meta) = read_cache(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Artifact<DatasetMeta> =
        serde_json::from_str(&meta).with_context(|| format!("parsing metadata of {}", path.display()))?;
    check_hash(path, &doc.config_hash, expected_hash)?;
    Ok((ds, doc.body))
}
