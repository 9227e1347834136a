//! Output directories: an exclusive lock, a refusal to overwrite finished
//! outputs without `--force`, and a manifest of input and output hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use idrr_core::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::exit::{Failure, FailureKind};

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub hierarchy_hash: String,
    /// Input file path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
    /// Output path relative to the directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl Manifest {
    pub fn new(command: &str, hierarchy_hash: String) -> Manifest {
        Manifest {
            tool: "idrr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            complete: false,
            error: None,
            config_hash: None,
            hierarchy_hash,
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
            started_unix: now(),
            finished_unix: None,
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    /// Reads the manifest of a finished directory and recomputes every
    /// recorded output hash.
    pub fn load_verified(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| {
            Failure::new(FailureKind::Data, format!("{}: {e}; is this an output directory?", path.display()))
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if !manifest.complete {
            return Err(Failure::new(
                FailureKind::Data,
                format!(
                    "{} is incomplete ({})",
                    dir.display(),
                    manifest.error.as_deref().unwrap_or("interrupted")
                ),
            )
            .into());
        }
        for (rel, expected) in &manifest.outputs {
            let found = file_hash(&dir.join(rel))?;
            if &found != expected {
                return Err(idrr_core::Error::HashMismatch {
                    what: dir.join(rel).display().to_string(),
                    expected: expected.clone(),
                    found,
                }
                .into());
            }
        }
        Ok(manifest)
    }
}

/// An output directory held under an exclusive lock until dropped.
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: Manifest,
}

fn is_empty_except_lock(dir: &Path) -> Result<bool> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        if entry?.file_name() != LOCK {
            return Ok(false);
        }
    }
    Ok(true)
}

impl RunDir {
    /// Creates or reuses `path`. A directory holding a manifest is cleared
    /// only with `force`; a nonempty directory without one is never touched.
    pub fn create(path: &Path, force: bool, manifest: Manifest) -> Result<RunDir> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        match fs::create_dir(path.join(LOCK)) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Failure::new(
                    FailureKind::Runtime,
                    format!(
                        "{} is locked by another process; remove {} if that process is gone",
                        path.display(),
                        path.join(LOCK).display()
                    ),
                )
                .into())
            }
            Err(e) => return Err(e).with_context(|| format!("locking {}", path.display())),
        }
        let dir = RunDir {
            path: path.to_path_buf(),
            manifest,
        };
        if !is_empty_except_lock(path)? {
            if !path.join(MANIFEST).is_file() {
                return Err(Failure::new(
                    FailureKind::Config,
                    format!("{} exists and is not an output directory; choose another --out", path.display()),
                )
                .into());
            }
            if !force {
                return Err(Failure::new(
                    FailureKind::Config,
                    format!("{} already holds outputs; pass --force to replace them", path.display()),
                )
                .into());
            }
            for entry in fs::read_dir(path)? {
                let entry = entry?;
                if entry.file_name() == LOCK {
                    continue;
                }
                let p = entry.path();
                if entry.file_type()?.is_dir() {
                    fs::remove_dir_all(&p)
                } else {
                    fs::remove_file(&p)
                }
                .with_context(|| format!("removing {}", p.display()))?;
            }
        }
        dir.write_manifest()?;
        Ok(dir)
    }

    pub fn join(&self, rel: &str) -> PathBuf {
        self.path.join(rel)
    }

    /// Path of `rel` with its parent directories created.
    pub fn path_for(&self, rel: &str) -> Result<PathBuf> {
        let path = self.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(path)
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path_for(rel)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json(&self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    fn write_manifest(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.join(MANIFEST);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// Hashes every file under the directory except the manifest, the lock
    /// and nested output directories, and marks the manifest complete.
    pub fn finish(mut self) -> Result<()> {
        let mut outputs = BTreeMap::new();
        collect_outputs(&self.path, &self.path, &mut outputs)?;
        self.manifest.outputs = outputs;
        self.manifest.complete = true;
        self.manifest.finished_unix = Some(now());
        self.write_manifest()
    }

    /// Records the failure; the manifest stays incomplete.
    pub fn fail(mut self, error: &anyhow::Error) {
        self.manifest.error = Some(format!("{error:#}"));
        self.manifest.finished_unix = Some(now());
        let mut outputs = BTreeMap::new();
        if collect_outputs(&self.path, &self.path, &mut outputs).is_ok() {
            self.manifest.outputs = outputs;
        }
        if let Err(e) = self.write_manifest() {
            log::warn!("could not record the failure in {}: {e:#}", self.path.display());
        }
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir(self.path.join(LOCK));
    }
}

fn collect_outputs(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let name = entry.file_name();
        if name == LOCK || (dir == root && name == MANIFEST) {
            continue;
        }
        if entry.file_type()?.is_dir() {
            if !path.join(MANIFEST).exists() {
                collect_outputs(root, &path, out)?;
            }
            continue;
        }
        let rel = path.strip_prefix(root).expect("under root");
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        out.insert(rel, file_hash(&path)?);
    }
    Ok(())
}

/// Runs `body` inside `dir`, finishing the manifest on success and recording
/// the error otherwise.
pub fn run_in<T>(dir: RunDir, body: impl FnOnce(&mut RunDir) -> Result<T>) -> Result<T> {
    let mut dir = dir;
    match body(&mut dir) {
        Ok(v) => {
            dir.finish()?;
            Ok(v)
        }
        Err(e) => {
            dir.fail(&e);
            Err(e)
        }
    }
}
