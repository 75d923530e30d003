//! Output directory with provenance stamped into every file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub struct Artifacts {
    dir: PathBuf,
    command: &'static str,
    hash: String,
}

impl Artifacts {
    /// Creates `dir` if needed. Nothing is written before this point.
    pub fn create(dir: &Path, command: &'static str, hash: String) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            hash,
        })
    }

    /// Comment lines heading every CSV.
    pub fn preamble(&self) -> Vec<String> {
        vec![
            format!("lieflow {} {}", lieflow::VERSION, self.command),
            format!("config_hash {}", self.hash),
        ]
    }

    /// Writes a CSV through one of the core writers.
    pub fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>, &[String]) -> lieflow::Result<()>,
    ) -> CliResult<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w, &self.preamble()).map_err(CliError::numeric)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `{"tool", "version", "command", "config_hash", <key>: value}`.
    pub fn json(&mut self, name: &str, key: &str, value: &impl Serialize) -> CliResult<()> {
        let payload = serde_json::to_value(value).map_err(|e| CliError::Numeric(e.into()))?;
        let mut doc = json!({
            "tool": "lieflow",
            "version": lieflow::VERSION,
            "command": self.command,
            "config_hash": self.hash,
        });
        if let Value::Object(m) = &mut doc {
            m.insert(key.to_string(), payload);
        }
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numeric(e.into()))?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(())
    }
}
