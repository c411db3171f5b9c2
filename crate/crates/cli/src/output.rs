//! Run directories, JSON artifacts and the per-run manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use npt_core::{NptError, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NptError + '_ {
    move |source| NptError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Output directory of one run; records every file written into it.
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Path for `name` inside the run directory, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_owned());
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.file(name);
        write_json(&path, value)
    }

    /// Writes `manifest.json` with the full configuration and file list.
    pub fn finish(mut self, command: &str, config: Value) -> Result<()> {
        let files = self.files.clone();
        let manifest = json!({
            "tool": "npt",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "files": files,
        });
        self.write_json("manifest.json", &manifest)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(io_err(path))?;
    Ok(())
}

/// Writes serializable rows as CSV with a header.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
