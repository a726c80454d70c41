//! Output directory bookkeeping and the `report.json` written by every command.

use std::path::{Path, PathBuf};

use serde::Serialize;
use softcompose::io::write_json;
use softcompose::rng::RNG_ALGORITHM;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub const REPORT_FILE: &str = "report.json";

/// An output directory that remembers which files a command wrote.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for `name`, recorded in the report's file list.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    /// Writes `report.json` and returns the recorded file names.
    pub fn finish<R: Serialize>(
        mut self,
        command: &str,
        config: &ExperimentConfig,
        results: &R,
    ) -> CliResult<Vec<String>> {
        self.files.sort();
        self.files.dedup();
        let report = Report {
            command,
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_ALGORITHM,
            config,
            files: &self.files,
            results,
        };
        write_json(&self.dir.join(REPORT_FILE), &report)?;
        Ok(self.files)
    }
}

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    command: &'a str,
    version: &'a str,
    rng: &'a str,
    config: &'a ExperimentConfig,
    files: &'a [String],
    results: &'a R,
}
