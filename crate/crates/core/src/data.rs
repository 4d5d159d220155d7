//! Dataset representation, CSV ingestion, corruption injection and splitting.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::seed;

/// Name of the optional identifier column recognised by [`load_csv`] and
/// emitted by [`write_csv`].
pub const ROW_ID_COLUMN: &str = "row_id";

/// Covariates plus an observed (possibly corrupted) response.
///
/// A dataset may also carry the true response for evaluation. Nothing in the
/// scoring, filtering or conformal code paths reads it; only [`crate::metrics`]
/// helpers and experiment drivers take it, through
/// [`Dataset::evaluation_truth`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    response: Vec<f64>,
    true_response: Option<Vec<f64>>,
    row_ids: Vec<String>,
    feature_names: Vec<String>,
    target_name: String,
    true_name: Option<String>,
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::data(format!("{what} has a non-finite value at row {i}"))),
        None => Ok(()),
    }
}

impl Dataset {
    pub fn new(features: Array2<f64>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if n == 0 {
            return Err(Error::data("dataset has no rows"));
        }
        if features.nrows() != n {
            return Err(Error::data(format!(
                "feature matrix has {} rows but response has {n}",
                features.nrows()
            )));
        }
        check_finite(&response, "response")?;
        if let Some((idx, _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::data(format!(
                "feature column {} has a non-finite value at row {}",
                idx.1, idx.0
            )));
        }
        let d = features.ncols();
        Ok(Self {
            features,
            response,
            true_response: None,
            row_ids: (0..n).map(|i| i.to_string()).collect(),
            feature_names: (0..d).map(|j| format!("x{}", j + 1)).collect(),
            target_name: "y".to_string(),
            true_name: None,
        })
    }

    /// Build from row vectors; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::data("ragged feature rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::data(e.to_string()))?;
        Self::new(features, response)
    }

    pub fn with_true_response(mut self, truth: Vec<f64>) -> Result<Self> {
        if truth.len() != self.n() {
            return Err(Error::data("true response length differs from response"));
        }
        check_finite(&truth, "true response")?;
        self.true_response = Some(truth);
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::data("row id count differs from row count"));
        }
        self.row_ids = ids;
        Ok(self)
    }

    pub fn with_names(mut self, features: Vec<String>, target: impl Into<String>) -> Result<Self> {
        if features.len() != self.d() {
            return Err(Error::data("feature name count differs from column count"));
        }
        self.feature_names = features;
        self.target_name = target.into();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// True response values, when known. Evaluation only.
    pub fn evaluation_truth(&self) -> Option<&[f64]> {
        self.true_response.as_deref()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            response: idx.iter().map(|&i| self.response[i]).collect(),
            true_response: self
                .true_response
                .as_ref()
                .map(|t| idx.iter().map(|&i| t[i]).collect()),
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            true_name: self.true_name.clone(),
        }
    }

    /// Same rows with a replaced observed response.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Dataset> {
        if response.len() != self.n() {
            return Err(Error::data("response length differs from row count"));
        }
        check_finite(&response, "response")?;
        Ok(Dataset {
            response,
            ..self.clone()
        })
    }
}

/// Column routing for [`load_csv_with`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub target: String,
    pub true_column: Option<String>,
}

pub fn load_csv(path: impl AsRef<Path>, target: &str, true_column: Option<&str>) -> Result<Dataset> {
    load_csv_with(
        path,
        &CsvOptions {
            target: target.to_string(),
            true_column: true_column.map(str::to_string),
        },
    )
}

/// Read a headered CSV. Every column other than the target, the optional
/// true column and an optional `row_id` column becomes a feature and must be
/// numeric. Rows whose target cell is empty are skipped; a non-empty
/// non-numeric target cell is an error.
pub fn load_csv_with(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let find = |name: &str| headers.iter().position(|h| h == name);
    let target_col = find(&opts.target)
        .ok_or_else(|| Error::data(format!("missing target column '{}'", opts.target)))?;
    let true_col = match &opts.true_column {
        Some(name) => Some(find(name).ok_or_else(|| Error::data(format!("missing true column '{name}'")))?),
        None => None,
    };
    let id_col = find(ROW_ID_COLUMN);
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != target_col && Some(c) != true_col && Some(c) != id_col)
        .collect();

    let mut flat = Vec::new();
    let mut response = Vec::new();
    let mut truth = Vec::new();
    let mut ids = Vec::new();
    for (record_no, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(record_no as u64 + 2, |p| p.line());
        let cell = |c: usize| record.get(c).unwrap_or("").trim();
        let parse = |c: usize| -> Result<f64> {
            let raw = cell(c);
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::data(format!(
                    "row {line}: column '{}' has non-numeric value '{raw}'",
                    headers[c]
                ))),
            }
        };
        if cell(target_col).is_empty() {
            continue;
        }
        let y = parse(target_col)?;
        for &c in &feature_cols {
            flat.push(parse(c)?);
        }
        if let Some(c) = true_col {
            truth.push(parse(c)?);
        }
        response.push(y);
        ids.push(match id_col {
            Some(c) => cell(c).to_string(),
            None => record_no.to_string(),
        });
    }
    if response.is_empty() {
        return Err(Error::data(format!("{}: no usable rows", path.display())));
    }

    let n = response.len();
    let features = Array2::from_shape_vec((n, feature_cols.len()), flat)
        .map_err(|e| Error::data(e.to_string()))?;
    let mut ds = Dataset::new(features, response)?
        .with_row_ids(ids)?
        .with_names(
            feature_cols.iter().map(|&c| headers[c].clone()).collect(),
            opts.target.clone(),
        )?;
    if let Some(c) = true_col {
        ds = ds.with_true_response(truth)?;
        ds.true_name = Some(headers[c].clone());
    }
    Ok(ds)
}

/// Write `row_id`, the features, the target and (when present) the true
/// column. Floats use the shortest representation that parses back to the
/// same bits.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![ROW_ID_COLUMN.to_string()];
    header.extend(ds.feature_names.iter().cloned());
    header.push(ds.target_name.clone());
    if ds.true_response.is_some() {
        header.push(ds.true_name.clone().unwrap_or_else(|| "true_response".into()));
    }
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec = vec![ds.row_ids[i].clone()];
        rec.extend(ds.features.row(i).iter().map(|v| v.to_string()));
        rec.push(ds.response[i].to_string());
        if let Some(t) = &ds.true_response {
            rec.push(t[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Additive point-mass corruption of a fraction of the responses.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorruptionSpec {
    pub fraction: f64,
    pub strength: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    /// Number of corrupted rows out of `n`: nearest integer, ties to even.
    pub fn count(&self, n: usize) -> usize {
        (self.fraction * n as f64).round_ties_even() as usize
    }
}

/// Shift `round(fraction * n)` uniformly chosen responses by `strength`.
/// The pre-corruption response becomes the dataset's true response unless
/// one is already attached.
pub fn inject_corruption(ds: &Dataset, spec: &CorruptionSpec) -> Result<(Dataset, Vec<bool>)> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(Error::config(format!(
            "corruption fraction {} outside [0, 1]",
            spec.fraction
        )));
    }
    if !spec.strength.is_finite() {
        return Err(Error::config("corruption strength must be finite"));
    }
    let n = ds.n();
    let count = spec.count(n);
    let mut rng = seed::rng_for(spec.seed, &[seed::TAG_CORRUPT]);
    let mut mask = vec![false; n];
    for i in index::sample(&mut rng, n, count) {
        mask[i] = true;
    }
    let response: Vec<f64> = ds
        .response
        .iter()
        .zip(&mask)
        .map(|(&y, &m)| if m { y + spec.strength } else { y })
        .collect();
    let mut out = ds.with_response(response)?;
    if out.true_response.is_none() {
        out.true_response = Some(ds.response.clone());
    }
    Ok((out, mask))
}

/// Train / calibration / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub calibration: f64,
    pub test: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub calibration: Dataset,
    pub test: Dataset,
}

impl SplitSpec {
    /// Row indices of each part after a seeded shuffle.
    pub fn indices(&self, n: usize) -> Result<[Vec<usize>; 3]> {
        let fr = [self.train, self.calibration, self.test];
        if fr.iter().any(|f| *f < 0.0 || !f.is_finite()) {
            return Err(Error::config("split fractions must be non-negative"));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split fractions must sum to 1"));
        }
        let n_train = ((self.train * n as f64).round() as usize).min(n);
        let n_cal = ((self.calibration * n as f64).round() as usize).min(n - n_train);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(self.seed));
        let test = perm.split_off(n_train + n_cal);
        let cal = perm.split_off(n_train);
        Ok([perm, cal, test])
    }
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let [train, cal, test] = spec.indices(ds.n())?;
    Ok(Split {
        train: ds.subset(&train),
        calibration: ds.subset(&cal),
        test: ds.subset(&test),
    })
}
