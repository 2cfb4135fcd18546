use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// An output directory that refuses to replace existing artifacts unless
/// forced, and records what was written in a run manifest.
pub struct OutputDir {
    dir: PathBuf,
    force: bool,
    artifacts: Vec<String>,
    inputs: Vec<String>,
    seeds: BTreeMap<String, u64>,
}

impl OutputDir {
    /// Fails when any of `planned` (or the run manifest) already exists
    /// under `dir` and `force` is off.
    pub fn open(dir: &Path, force: bool, planned: &[&str]) -> Result<Self> {
        if !force {
            for name in planned.iter().copied().chain([RUN_MANIFEST]) {
                let p = dir.join(name);
                if p.exists() {
                    bail!("{} already exists (pass --force to overwrite)", p.display());
                }
            }
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            force,
            artifacts: Vec::new(),
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.display().to_string());
        self
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    /// Notes a file written by other means.
    pub fn record(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.dir.join(name);
        if !self.force && p.exists() {
            bail!("{} already exists (pass --force to overwrite)", p.display());
        }
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.record(name);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes the run manifest. The timestamp lives only here, so every
    /// other artifact is reproducible byte for byte.
    pub fn finish<C: Serialize>(self, command: &str, config: &C) -> Result<()> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest: Value = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp_unix": timestamp,
            "config": config,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let p = self.dir.join(RUN_MANIFEST);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(())
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
