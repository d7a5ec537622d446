//! Run directories, CSV/JSON writers and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};
use crate::error::{LabError, LabResult};

/// One directory per run: `<base>/<command>-<config hash prefix>-<seed>`.
pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

pub fn run_dir_name(command: Command, config: &ExperimentConfig) -> String {
    format!("{}-{}-{}", command.name(), &config.content_hash()[..16], config.run.master_seed)
}

impl RunDir {
    pub fn create(base: &Path, name: &str) -> LabResult<Self> {
        let path = base.join(name);
        fs::create_dir_all(&path).map_err(|e| LabError::io(&path, e))?;
        Ok(Self { path, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> LabResult<()> {
        let p = self.path.join(name);
        fs::write(&p, content).map_err(|e| LabError::io(&p, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| LabError::Internal(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> LabResult<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| LabError::Internal(format!("{name}: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Internal(format!("{name}: {e}")))?;
        self.write_text(name, &String::from_utf8(bytes).map_err(|e| LabError::Internal(e.to_string()))?)
    }

    /// The manifest is the only file allowed to differ between reruns.
    pub fn write_manifest(&mut self, command: Command, config: &ExperimentConfig, seeds: &Value, workers: usize, wall_seconds: f64) -> LabResult<()> {
        let manifest = json!({
            "command": command.name(),
            "config": config,
            "config_hash": config.content_hash(),
            "seeds": seeds,
            "versions": { "lrp-lab": env!("CARGO_PKG_VERSION"), "lrp-core": lrp_core::VERSION },
            "workers": workers,
            "wall_time_seconds": wall_seconds,
            "files": self.files,
        });
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Internal(e.to_string()))?;
        text.push('\n');
        let p = self.path.join("manifest.json");
        fs::write(&p, text).map_err(|e| LabError::io(&p, e))
    }
}

/// Shortest round-trip decimal form; non-finite values as `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number, or `null` when not finite.
pub fn jnum(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}
