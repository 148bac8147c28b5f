//! On-disk layout shared by all commands.
//!
//! ```text
//! <root>/.dfl-lock
//! <root>/{src,dst}/{frames,landmarks,masks,aligned,aligned_masks,meta}/
//! <root>/model/        checkpoint + loss.jsonl
//! <root>/output/       converted frames, masks, diagnostics.jsonl
//! ```

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use facelab_core::{Error, Result};

pub const LOCK_FILE: &str = ".dfl-lock";
pub const LOSS_LOG: &str = "loss.jsonl";
pub const EXTRACT_MANIFEST: &str = "extract_manifest.json";
pub const DIAGNOSTICS: &str = "diagnostics.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Src,
    Dst,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Src => "src",
            Side::Dst => "dst",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn side(&self, side: Side) -> PathBuf {
        self.root.join(side.name())
    }

    pub fn side_dir(&self, side: Side, sub: &str) -> PathBuf {
        self.side(side).join(sub)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.root.join("output")
    }

    /// Takes the advisory lock; it is released when the guard drops.
    pub fn lock(&self) -> Result<LockGuard> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::InvalidArgument(format!(
                "workspace {} is in use by another command (remove {} if it is stale)",
                self.root.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Sorted file stems in `dir` with extension `ext`; a missing directory is empty.
pub fn stems(dir: &Path, ext: &str) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == ext) {
            if let Some(s) = p.file_stem().and_then(|s| s.to_str()) {
                out.insert(s.to_string());
            }
        }
    }
    Ok(out)
}

pub fn is_nonempty_dir(dir: &Path) -> bool {
    std::fs::read_dir(dir).is_ok_and(|mut it| it.next().is_some())
}

pub fn reset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
