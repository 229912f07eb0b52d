//! Output-directory plumbing shared by every subcommand.
//!
//! All artifacts land in one directory chosen with `--out`. Each subcommand
//! records what it read, what it wrote and a digest of its effective
//! configuration in `run_manifest.json`; rerunning a subcommand replaces its
//! earlier record, so repeating a pipeline leaves the directory byte for
//! byte identical (timestamps honor `SOURCE_DATE_EPOCH`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "run_manifest.json";

/// Handle on the `--out` directory that tracks every file written through
/// it, so `finish` can list the run's complete output inventory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Record a file that was written to `self.path(name)` by other means.
    pub fn mark_written(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    /// How a user-supplied input file should appear in the manifest: files
    /// inside the output directory are listed by their artifact name, so a
    /// pipeline that feeds its own outputs back in stays reproducible no
    /// matter where the directory lives; anything else keeps the path as
    /// given.
    pub fn input_name(&self, path: &Path) -> String {
        if let (Ok(root), Ok(full)) = (self.root.canonicalize(), path.canonicalize()) {
            if let Ok(rel) = full.strip_prefix(&root) {
                return rel.display().to_string();
            }
        }
        path.display().to_string()
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(value).with_context(|| format!("serializing {name}"))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Read an artifact a previous pipeline stage should have produced.
    pub fn read_json<T: DeserializeOwned>(&self, name: &str, produced_by: &str) -> Result<T> {
        let path = self.path(name);
        let text = fs::read_to_string(&path).with_context(|| {
            format!(
                "reading {} (run `cces {produced_by}` with the same --out first)",
                path.display()
            )
        })?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn read_text(&self, name: &str, produced_by: &str) -> Result<String> {
        let path = self.path(name);
        fs::read_to_string(&path).with_context(|| {
            format!(
                "reading {} (run `cces {produced_by}` with the same --out first)",
                path.display()
            )
        })
    }

    /// Close out the run: merge its record into the manifest.
    pub fn finish(
        self,
        subcommand: &str,
        inputs: &[String],
        config: &serde_json::Value,
    ) -> Result<()> {
        let manifest_path = self.path(MANIFEST_NAME);
        let mut manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => serde_json::from_str::<Manifest>(&text)
                .with_context(|| format!("parsing {}", manifest_path.display()))?,
            Err(_) => Manifest::default(),
        };
        manifest.tool = "cces".to_string();
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        manifest.runs.insert(
            subcommand.to_string(),
            RunRecord {
                timestamp: timestamp(),
                inputs: inputs.to_vec(),
                config_digest: config_digest(config),
                outputs: self.written,
            },
        );
        let mut text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        text.push('\n');
        fs::write(&manifest_path, text)
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        Ok(())
    }
}

/// The run manifest: one record per subcommand, newest run wins.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub runs: BTreeMap<String, RunRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    /// Unix seconds; `SOURCE_DATE_EPOCH` overrides the wall clock.
    pub timestamp: u64,
    /// Files the run consumed (user paths and upstream artifacts).
    pub inputs: Vec<String>,
    /// Digest of the effective configuration, stable under key reordering.
    pub config_digest: String,
    /// Every file the run emitted, relative to the output directory.
    pub outputs: Vec<String>,
}

fn timestamp() -> u64 {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(t) = v.trim().parse() {
            return t;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// SHA-256 over a canonical rendering of the JSON value. Object keys are
/// sorted recursively, so two configs that differ only in key order digest
/// identically.
pub fn config_digest(value: &serde_json::Value) -> String {
    let mut canon = String::new();
    canonical_json(value, &mut canon);
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

fn canonical_json(value: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            out.push('{');
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings always serialize"));
                out.push(':');
                canonical_json(&map[key.as_str()], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_json(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}
