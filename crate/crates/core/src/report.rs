//! Output files: ranked score records, run manifests and experiment tables.
//!
//! Every writer takes a path stem and a [`Format`]; the extension is added
//! here. Manifests are always JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conformal::ConformalOutcome;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scores::{ScoreMethod, ScoreVector};
use crate::simbench::{ConformalTable, FilterTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::config(format!("unknown report format '{other}'"))),
        }
    }
}

/// One row of a ranked score report. Rank 1 is the most suspicious row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub row_id: String,
    pub method: ScoreMethod,
    pub score: f64,
    pub rank: usize,
}

/// Records in rank order.
pub fn score_records(ds: &Dataset, scores: &ScoreVector) -> Result<Vec<ScoreRecord>> {
    if scores.len() != ds.n() {
        return Err(Error::data(format!("{} scores for {} rows", scores.len(), ds.n())));
    }
    Ok(scores
        .ranking()
        .into_iter()
        .enumerate()
        .map(|(r, i)| ScoreRecord {
            row_id: ds.row_ids()[i].clone(),
            method: scores.method,
            score: scores.values[i],
            rank: r + 1,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRecord {
    pub row_id: String,
    pub score: f64,
    pub pvalue: f64,
    pub rejected: bool,
}

pub fn pvalue_records(test: &Dataset, outcome: &ConformalOutcome) -> Vec<PValueRecord> {
    let mut rejected = vec![false; test.n()];
    for &i in &outcome.rejected {
        rejected[i] = true;
    }
    (0..test.n())
        .map(|i| PValueRecord {
            row_id: test.row_ids()[i].clone(),
            score: outcome.test_scores[i],
            pvalue: outcome.pvalues[i],
            rejected: rejected[i],
        })
        .collect()
}

/// Flat row of a conformal experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalRow {
    pub setting: u8,
    pub contaminated: bool,
    pub noise_level: f64,
    pub noise_reading: String,
    pub runs: usize,
    pub method: ScoreMethod,
    pub strength: f64,
    pub fdr_mean: f64,
    pub fdr_sd: f64,
    pub power_mean: f64,
    pub power_sd: f64,
    pub auroc_mean: f64,
    pub auroc_sd: f64,
    pub auprc_mean: f64,
    pub auprc_sd: f64,
}

pub fn conformal_rows(t: &ConformalTable) -> Vec<ConformalRow> {
    t.cells
        .iter()
        .map(|c| ConformalRow {
            setting: t.setting,
            contaminated: t.contaminated,
            noise_level: t.noise.level,
            noise_reading: t.noise.reading.to_string(),
            runs: t.runs,
            method: c.method,
            strength: c.strength,
            fdr_mean: c.fdr.mean,
            fdr_sd: c.fdr.sd,
            power_mean: c.power.mean,
            power_sd: c.power.sd,
            auroc_mean: c.auroc.mean,
            auroc_sd: c.auroc.sd,
            auprc_mean: c.auprc.mean,
            auprc_sd: c.auprc.sd,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRow {
    pub setting: u8,
    pub noise_level: f64,
    pub noise_reading: String,
    pub runs: usize,
    pub method: ScoreMethod,
    pub strength: f64,
    pub auprc_before_mean: f64,
    pub auprc_before_sd: f64,
    pub auprc_after_mean: f64,
    pub auprc_after_sd: f64,
    pub removed_mean: f64,
    pub removed_sd: f64,
    pub error_after_mean: f64,
    pub error_after_sd: f64,
    pub improved_share: f64,
}

pub fn filter_rows(t: &FilterTable) -> Vec<FilterRow> {
    t.cells
        .iter()
        .map(|c| FilterRow {
            setting: t.setting,
            noise_level: t.noise.level,
            noise_reading: t.noise.reading.to_string(),
            runs: t.runs,
            method: c.method,
            strength: c.strength,
            auprc_before_mean: c.auprc_before.mean,
            auprc_before_sd: c.auprc_before.sd,
            auprc_after_mean: c.auprc_after.mean,
            auprc_after_sd: c.auprc_after.sd,
            removed_mean: c.removed_fraction.mean,
            removed_sd: c.removed_fraction.sd,
            error_after_mean: c.error_fraction_after.mean,
            error_after_sd: c.error_fraction_after.sd,
            improved_share: c.improved_share,
        })
        .collect()
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write flat records to `stem.json` or `stem.csv`; returns the path.
pub fn write_records<T: Serialize>(stem: &Path, format: Format, records: &[T]) -> Result<PathBuf> {
    let path = with_ext(stem, format.extension());
    match format {
        Format::Json => write_json(&path, records)?,
        Format::Csv => {
            ensure_parent(&path)?;
            let mut w = csv::Writer::from_path(&path)?;
            for r in records {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(path)
}

/// Everything needed to rerun a command: the tool version, the subcommand,
/// every effective parameter and the seeds derived from the base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub threads: usize,
    pub format: Format,
    pub parameters: serde_json::Value,
    pub derived_seeds: BTreeMap<String, u64>,
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64, threads: usize, format: Format, parameters: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            seed,
            threads,
            format,
            parameters,
            derived_seeds: BTreeMap::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}
