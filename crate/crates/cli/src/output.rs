use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("CDA_GIT_DESCRIBE"));

/// Formats a float with 12 significant digits, `%.12g` style.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// A CSV artifact held in memory until the run has succeeded.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&str]) -> Self {
        Self {
            name,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(name: &'static str, header: Vec<String>) -> Self {
        Self {
            name,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

/// Random streams used by one batch: replicate `i` draws from stream
/// `first_stream + i` of `master_seed`.
#[derive(Debug, Clone, Serialize)]
pub struct SeedBlock {
    pub label: String,
    pub master_seed: u64,
    pub first_stream: u64,
    pub count: u64,
}

/// Everything a command produces before anything is written.
#[derive(Debug)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub payload: serde_json::Value,
    pub seeds: Vec<SeedBlock>,
    pub summary: serde_json::Value,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    duration_secs: f64,
    files: &'a [String],
    seeds: &'a [SeedBlock],
    payload: &'a serde_json::Value,
}

/// Writes the tables (CSV format only) and run.json; returns the file names.
pub fn write_outcome(
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    elapsed: Duration,
) -> Result<Vec<String>, CliError> {
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    if cfg.format == Format::Csv {
        for table in &outcome.tables {
            table.write(&dir.join(table.name))?;
            files.push(table.name.to_string());
        }
    }
    files.push("run.json".to_string());
    let record = RunRecord {
        version: VERSION,
        config: cfg,
        duration_secs: elapsed.as_secs_f64(),
        files: &files,
        seeds: &outcome.seeds,
        payload: &outcome.payload,
    };
    let path = dir.join("run.json");
    let mut text = serde_json::to_string_pretty(&record).expect("serializable record");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(path, e))?;
    Ok(files)
}
