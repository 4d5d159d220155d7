//! File-exchange protocol for regressors that live outside this process.
//!
//! For every prediction request the tool creates a fresh directory holding
//!
//! * `train.csv`   header `x1,...,xd,y`, one row per training example
//! * `predict.csv` header `x1,...,xd`, one row per query
//!
//! and runs the configured command through `sh -c` with that directory as
//! working directory. The environment carries `VERACITY_EXCHANGE_DIR` (the
//! directory) and `VERACITY_SEED` (decimal u64). The command must write
//! `predictions.csv`: one number per line, one line per row of
//! `predict.csv` in the same order, optionally preceded by a single
//! non-numeric header line. A non-zero exit status is an error.

use std::path::Path;
use std::process::Command;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub command: String,
}

impl ExternalConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.command.trim().is_empty() {
            return Err(Error::config("external regressor needs a command"));
        }
        Ok(())
    }

    pub(crate) fn fit(&self, x: &Array2<f64>, y: &[f64], seed: u64) -> Box<dyn Predictor> {
        Box::new(External {
            command: self.command.clone(),
            x: x.clone(),
            y: y.to_vec(),
            seed,
        })
    }
}

struct External {
    command: String,
    x: Array2<f64>,
    y: Vec<f64>,
    seed: u64,
}

fn write_matrix(path: &Path, x: &Array2<f64>, y: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    if y.is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(y) = y {
            rec.push(y[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_predictions(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.first().is_some_and(|l| l.parse::<f64>().is_err()) {
        lines.remove(0);
    }
    let values = lines
        .iter()
        .enumerate()
        .map(|(i, l)| match l.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::data(format!("predictions.csv line {}: bad value '{l}'", i + 1))),
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::data(format!(
            "predictions.csv has {} values, expected {expected}",
            values.len()
        )));
    }
    Ok(values)
}

impl Predictor for External {
    fn n_features(&self) -> usize {
        self.x.ncols()
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        write_matrix(&dir.path().join("train.csv"), &self.x, Some(&self.y))?;
        write_matrix(&dir.path().join("predict.csv"), x, None)?;
        let status = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .current_dir(dir.path())
            .env("VERACITY_EXCHANGE_DIR", dir.path())
            .env("VERACITY_SEED", self.seed.to_string())
            .status()
            .map_err(|e| Error::io("sh", e))?;
        if !status.success() {
            return Err(Error::data(format!(
                "external regressor command failed with {status}"
            )));
        }
        read_predictions(&dir.path().join("predictions.csv"), x.nrows())
    }
}
