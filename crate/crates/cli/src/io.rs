//! Output files are written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use tempfile::{NamedTempFile, TempDir};

use crate::error::{CliError, CliResult};

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    hypertrees::Error::io(path, e).into()
}

/// Writes `path` atomically with the bytes produced by `fill`.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> CliResult<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let dir = parent_of(path);
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(&buf).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Directory built in a temporary sibling, then renamed onto `path`,
/// replacing a previous directory there.
pub struct StagedDir {
    tmp: TempDir,
}

impl StagedDir {
    pub fn new(path: &Path) -> CliResult<Self> {
        let dir = parent_of(path);
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let tmp = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(dir)
            .map_err(|e| io_err(dir, e))?;
        Ok(StagedDir { tmp })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.tmp.path().join(name);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
        }
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))
    }

    pub fn commit(self, path: &Path) -> CliResult<()> {
        if path.exists() {
            fs::remove_dir_all(path).map_err(|e| io_err(path, e))?;
        }
        let staged = self.tmp.keep();
        fs::rename(&staged, path).map_err(|e| io_err(path, e))
    }
}
