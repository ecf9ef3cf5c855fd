use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use bcd_core::Warning;
use serde::Serialize;

use crate::{CliError, RunConfig};

/// Collects the files and summary values of one command run.
pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    command: &'static str,
    written: Vec<PathBuf>,
    results: BTreeMap<String, String>,
    warnings: BTreeMap<&'static str, usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    outputs: Vec<String>,
    results: &'a BTreeMap<String, String>,
    warnings: &'a BTreeMap<&'static str, usize>,
    config: &'a RunConfig,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a RunConfig, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out.display())))?;
        Ok(Self {
            cfg,
            command,
            written: Vec::new(),
            results: BTreeMap::new(),
            warnings: BTreeMap::new(),
        })
    }

    pub fn csv(&mut self, name: &str, header: &[String]) -> Result<csv::Writer<File>, CliError> {
        let path = self.cfg.out.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        self.written.push(path);
        Ok(w)
    }

    pub fn result(&mut self, key: impl Into<String>, value: impl ToString) {
        self.results.insert(key.into(), value.to_string());
    }

    pub fn warn(&mut self, warnings: &[Warning]) {
        for w in warnings {
            let kind = match w {
                Warning::DegenerateBands { .. } => "degenerate-bands",
                Warning::VanHoveProximity { .. } => "van-hove-proximity",
                Warning::DeformationTooStrong { .. } => "deformation-too-strong",
            };
            *self.warnings.entry(kind).or_default() += 1;
        }
    }

    pub fn finish(mut self) -> Result<Vec<PathBuf>, CliError> {
        let path = self.cfg.out.join(format!("{}.manifest.toml", self.command));
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            outputs: self.written.iter().map(|p| file_name(p)).collect(),
            results: &self.results,
            warnings: &self.warnings,
            config: self.cfg,
        };
        let text = toml::to_string(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text)?;
        self.written.push(path);
        Ok(self.written)
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
