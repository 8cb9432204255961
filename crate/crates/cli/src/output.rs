use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{CliError, CliResult};

/// Fixed-precision float for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Collects files written into the output directory.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("outputs serialize");
        self.write(name, &(text + "\n"))
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(mut self, mut manifest: Manifest) -> CliResult<()> {
        manifest.finished_at = unix_now();
        manifest.outputs = self.written.iter().map(|p| p.display().to_string()).collect();
        self.json("manifest.json", &manifest)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub root_seed: Option<u64>,
    pub threads: usize,
    pub started_at: f64,
    pub finished_at: f64,
    pub library_version: String,
    pub outputs: Vec<String>,
}
