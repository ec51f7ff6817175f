//! Output directory handling and the run manifest.
//!
//! Every command writes into a staging directory under `out` and moves the
//! files into place only once everything succeeded, so a failed command
//! leaves no partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";
const STAGING_DIR: &str = ".radar-ego-staging";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub dataset: Option<PathBuf>,
    /// Other input files (configs, trajectories).
    pub inputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    pub wall_clock_s: f64,
    /// Paths relative to the output directory, this manifest included.
    pub outputs: Vec<String>,
}

pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    created_out: bool,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        let created_out = !out.exists();
        let dir = out.join(STAGING_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            created_out,
            committed: false,
        })
    }

    /// Directory to write into before [`Staging::commit`].
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes the manifest and moves everything into the output directory.
    /// `started` is when the command began.
    pub fn commit(mut self, mut manifest: RunManifest, started: Instant) -> Result<RunManifest> {
        let mut files = Vec::new();
        list_files(&self.dir, Path::new(""), &mut files)?;
        files.push(MANIFEST_FILE.to_string());
        files.sort();
        manifest.outputs = files;
        manifest.wall_clock_s = started.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&manifest)?;
        self.write(MANIFEST_FILE, json + "\n")?;

        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let target = self.out.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target)?;
            } else if target.exists() {
                fs::remove_file(&target)?;
            }
            fs::rename(entry.path(), &target)
                .with_context(|| format!("moving output to {}", target.display()))?;
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(manifest)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        let _ = fs::remove_dir_all(&self.dir);
        if self.created_out {
            let _ = fs::remove_dir(&self.out);
        }
    }
}

fn list_files(root: &Path, rel: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(root.join(rel))? {
        let entry = entry?;
        let rel = rel.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            list_files(root, &rel, out)?;
        } else {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn manifest(command: &str, dataset: Option<&Path>, inputs: Vec<PathBuf>, config: serde_json::Value) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: dataset.map(Path::to_path_buf),
        inputs,
        config,
        wall_clock_s: 0.0,
        outputs: Vec::new(),
    }
}
