//! Output directory handling and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use leakmap::io::{write_heatmap, HeatmapSidecar};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Config,
    pub timings: Vec<Timing>,
    pub results: serde_json::Map<String, serde_json::Value>,
    /// Every file under the output directory except the manifest itself.
    pub files: Vec<FileEntry>,
}

/// Writes files into one output directory, one at a time.
pub struct OutputDir {
    root: PathBuf,
    timings: Vec<Timing>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| output_error(&root, e))?;
        Ok(Self {
            root,
            timings: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{stage}: {seconds:.2} s");
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds,
        });
        out
    }

    pub fn write<T>(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> leakmap::Result<T>,
    ) -> Result<T, CliError> {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| output_error(&path, e))?;
        let mut w = BufWriter::new(file);
        let out = f(&mut w).map_err(|e| match e {
            leakmap::Error::Io(io) => output_error(&path, io),
            other => CliError::Numerical(other),
        })?;
        w.flush().map_err(|e| output_error(&path, e))?;
        log::debug!("wrote {}", path.display());
        Ok(out)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// PGM heatmap plus its JSON scale sidecar.
    pub fn write_heatmap(
        &self,
        stem: &str,
        n_q: usize,
        n_p: usize,
        values: &[f64],
        mask: Option<&[bool]>,
    ) -> Result<HeatmapSidecar, CliError> {
        let sidecar = self.write(&format!("{stem}.pgm"), |w| write_heatmap(w, n_q, n_p, values, mask))?;
        self.write_json(&format!("{stem}.json"), &sidecar)?;
        Ok(sidecar)
    }

    /// Checksums everything on disk and writes `manifest.json`.
    pub fn finish(
        self,
        command: &str,
        config: &Config,
        results: serde_json::Map<String, serde_json::Value>,
    ) -> Result<RunManifest, CliError> {
        let files = inventory(&self.root)?;
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            timings: self.timings.clone(),
            results,
            files,
        };
        self.write_json(MANIFEST_NAME, &manifest)?;
        Ok(manifest)
    }
}

fn output_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Sorted list of all files below `root`, excluding the manifest.
pub fn inventory(root: &Path) -> Result<Vec<FileEntry>, CliError> {
    let mut paths = Vec::new();
    collect_files(root, &mut paths).map_err(|e| output_error(root, e))?;
    let mut entries = Vec::new();
    for path in paths {
        let rel = path
            .strip_prefix(root)
            .expect("walked below root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if rel == MANIFEST_NAME {
            continue;
        }
        let bytes = std::fs::read(&path).map_err(|e| output_error(&path, e))?;
        entries.push(FileEntry {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
