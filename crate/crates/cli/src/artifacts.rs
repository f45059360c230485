//! Output files and the run manifest.
//!
//! Every file is first written as `<name>.partial` and renamed once its
//! writer returns. A failed writer leaves the `.partial` file behind for
//! inspection.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, InStage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    /// Path relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub longhorizon: String,
    pub cli: String,
    pub surrogate_format: u32,
    pub policy_format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            longhorizon: longhorizon::VERSION.to_string(),
            cli: env!("CARGO_PKG_VERSION").to_string(),
            surrogate_format: longhorizon::surrogate::SURROGATE_FORMAT_VERSION,
            policy_format: longhorizon::policy::POLICY_FORMAT_VERSION,
        }
    }
}

/// Record of one invocation: what was run and what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<StageTiming>,
    pub versions: Versions,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes artifacts into one directory and keeps the manifest entries.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
    timings: Vec<StageTiming>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)
            .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self {
            root,
            artifacts: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Run `write` against `<name>.partial`, then move it into place.
    pub fn write_with<F>(&mut self, stage: &'static str, name: &str, write: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&Path) -> longhorizon::Result<()>,
    {
        let target = self.path(name);
        let partial = self.path(&format!("{name}.partial"));
        write(&partial).stage(stage)?;
        let bytes = std::fs::read(&partial).map_err(|e| io_error(stage, &partial, e))?;
        std::fs::rename(&partial, &target).map_err(|e| io_error(stage, &target, e))?;
        self.artifacts.retain(|a| a.name != name);
        self.artifacts.push(Artifact {
            name: name.to_string(),
            path: PathBuf::from(name),
            sha256: sha256_hex(&bytes),
        });
        Ok(target)
    }

    pub fn write_bytes(&mut self, stage: &'static str, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        self.write_with(stage, name, |p| {
            std::fs::write(p, bytes).map_err(|e| longhorizon::Error::Io {
                path: p.display().to_string(),
                source: e,
            })
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, stage: &'static str, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(longhorizon::Error::from).stage(stage)?;
        text.push('\n');
        self.write_bytes(stage, name, text.as_bytes())
    }

    /// Run a stage and record its wall time.
    pub fn timed<T>(&mut self, stage: &'static str, run: impl FnOnce(&mut Self) -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        log::info!("stage {stage}: start");
        let out = run(self)?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("stage {stage}: done in {seconds:.2}s");
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds,
        });
        Ok(out)
    }

    /// Write `manifest.json` listing everything written so far.
    pub fn finish(mut self, command: &str, config_hash: String, seed: u64) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            artifacts: self.artifacts.clone(),
            timings: std::mem::take(&mut self.timings),
            versions: Versions::current(),
        };
        self.write_json("manifest", "manifest.json", &manifest)?;
        Ok(manifest)
    }
}

fn io_error(stage: &'static str, path: &Path, source: std::io::Error) -> CliError {
    CliError::Stage {
        stage,
        source: longhorizon::Error::Io {
            path: path.display().to_string(),
            source,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_writer_leaves_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let err = out
            .write_with("demo", "x.csv", |p| {
                std::fs::write(p, "half").unwrap();
                Err(longhorizon::Error::Numeric("boom".into()))
            })
            .unwrap_err();
        assert!(err.to_string().contains("demo"));
        assert!(dir.path().join("x.csv.partial").exists());
        assert!(!dir.path().join("x.csv").exists());
    }

    #[test]
    fn manifest_lists_every_artifact_with_its_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_bytes("demo", "a.txt", b"abc").unwrap();
        let m = out.finish("demo", "h".into(), 7).unwrap();
        assert_eq!(m.artifacts.len(), 1);
        // Known SHA-256 of "abc".
        assert_eq!(m.artifacts[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert!(dir.path().join("manifest.json").exists());
        assert!(!dir.path().join("a.txt.partial").exists());
    }
}
