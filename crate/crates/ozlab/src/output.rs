//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// First 12 hex digits of the digest of the resolved configuration.
pub fn run_id(resolved: &str) -> String {
    sha256_hex(resolved.as_bytes())[..12].to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub code_version: String,
    pub resolved_config: String,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileDigest>,
}

/// Files written by one run, all inside one directory.
pub struct Output {
    dir: PathBuf,
    run_id: String,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, run_id: &str) -> anyhow::Result<Output> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            run_id: run_id.to_string(),
            files: Vec::new(),
        })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn create(&mut self, name: &str) -> anyhow::Result<BufWriter<fs::File>> {
        let path = self.dir.join(name);
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(BufWriter::new(f))
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn jsonl<T: Serialize, I: IntoIterator<Item = T>>(&mut self, name: &str, rows: I) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        for r in rows {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn digests(&self) -> anyhow::Result<Vec<FileDigest>> {
        self.files
            .iter()
            .map(|name| {
                let bytes = fs::read(self.dir.join(name))?;
                Ok(FileDigest {
                    path: name.clone(),
                    bytes: bytes.len() as u64,
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect()
    }
}

/// Recompute the digests listed in a manifest; returns the mismatching paths.
pub fn verify_digests(dir: &Path, manifest: &RunManifest) -> anyhow::Result<Vec<String>> {
    let mut bad = Vec::new();
    for f in &manifest.files {
        let bytes = fs::read(dir.join(&f.path)).with_context(|| format!("reading {}", f.path))?;
        if sha256_hex(&bytes) != f.sha256 {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}
