//! Per-row epistemic and aleatoric uncertainty.
//!
//! Epistemic uncertainty is the standard deviation, across `B` models fit on
//! bootstrap resamples, of the prediction at each row. Aleatoric uncertainty
//! is the out-of-sample prediction of a second model trained to predict the
//! absolute out-of-sample residual from the covariates.

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{assign_folds, cross_fit, fit, residual_regressor, OosPrediction, Regressor};
use crate::seed;

/// Floored uncertainty estimates; both vectors are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEstimates {
    epistemic: Vec<f64>,
    aleatoric: Vec<f64>,
    bootstrap_count: usize,
    floor_applied: Vec<bool>,
    epistemic_floor: f64,
    aleatoric_floor: f64,
}

/// `max(1e-12, 1e-3 * median(values))`.
pub fn floor_for(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    (1e-3 * median).max(1e-12)
}

impl UncertaintyEstimates {
    /// Floor raw estimates. Rows raised to the floor in either vector are
    /// marked in [`floor_applied`](Self::floor_applied).
    pub fn from_raw(epistemic: Vec<f64>, aleatoric: Vec<f64>, bootstrap_count: usize) -> Result<Self> {
        let floors = (floor_for(&epistemic), floor_for(&aleatoric));
        Self::with_floors(epistemic, aleatoric, bootstrap_count, floors)
    }

    /// Floor raw estimates at given floors rather than ones derived from the
    /// vectors themselves. Used when rows are scored in several batches that
    /// must be treated identically.
    pub fn with_floors(
        epistemic: Vec<f64>,
        aleatoric: Vec<f64>,
        bootstrap_count: usize,
        (epistemic_floor, aleatoric_floor): (f64, f64),
    ) -> Result<Self> {
        if epistemic.len() != aleatoric.len() {
            return Err(Error::data("epistemic and aleatoric vectors differ in length"));
        }
        if epistemic.iter().chain(&aleatoric).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::numerical("uncertainty estimates must be finite and non-negative"));
        }
        if !(epistemic_floor > 0.0 && aleatoric_floor > 0.0) {
            return Err(Error::config("uncertainty floors must be positive"));
        }
        let floor_applied = epistemic
            .iter()
            .zip(&aleatoric)
            .map(|(&u, &s)| u < epistemic_floor || s < aleatoric_floor)
            .collect();
        Ok(Self {
            epistemic: epistemic.into_iter().map(|u| u.max(epistemic_floor)).collect(),
            aleatoric: aleatoric.into_iter().map(|s| s.max(aleatoric_floor)).collect(),
            bootstrap_count,
            floor_applied,
            epistemic_floor,
            aleatoric_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.epistemic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epistemic.is_empty()
    }

    pub fn epistemic(&self) -> &[f64] {
        &self.epistemic
    }

    pub fn aleatoric(&self) -> &[f64] {
        &self.aleatoric
    }

    pub fn bootstrap_count(&self) -> usize {
        self.bootstrap_count
    }

    pub fn floor_applied(&self) -> &[bool] {
        &self.floor_applied
    }

    pub fn floors(&self) -> (f64, f64) {
        (self.epistemic_floor, self.aleatoric_floor)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect();
        Self {
            epistemic: pick(&self.epistemic),
            aleatoric: pick(&self.aleatoric),
            bootstrap_count: self.bootstrap_count,
            floor_applied: idx.iter().map(|&i| self.floor_applied[i]).collect(),
            epistemic_floor: self.epistemic_floor,
            aleatoric_floor: self.aleatoric_floor,
        }
    }
}

/// Bootstrap resamples (row indices, with replacement) of size `n`.
pub fn bootstrap_resamples(n: usize, b: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..b)
        .map(|r| {
            let mut rng = seed::rng_for(seed, &[seed::TAG_BOOTSTRAP, r as u64]);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        })
        .collect()
}

/// Standard deviation across models fit on the given resamples, evaluated at
/// each row of `eval`.
pub fn epistemic_from_resamples(
    reg: &dyn Regressor,
    x: &Array2<f64>,
    y: &[f64],
    eval: &Array2<f64>,
    resamples: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<f64>> {
    let b = resamples.len();
    if b < 2 {
        return Err(Error::config(format!("need at least 2 bootstrap replicates, got {b}")));
    }
    let preds: Vec<Vec<f64>> = resamples
        .par_iter()
        .enumerate()
        .map(|(r, idx)| {
            let xb = x.select(Axis(0), idx);
            let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            fit(reg, &xb, &yb, seed::derive(seed, &[seed::TAG_BOOTSTRAP, r as u64]))?.predict(eval)
        })
        .collect::<Result<_>>()?;
    Ok((0..eval.nrows())
        .map(|i| {
            let mean = preds.iter().map(|p| p[i]).sum::<f64>() / b as f64;
            let ss: f64 = preds.iter().map(|p| (p[i] - mean) * (p[i] - mean)).sum();
            (ss / (b - 1) as f64).sqrt()
        })
        .collect())
}

/// Epistemic uncertainty at `eval` for models trained on `(x, y)`.
pub fn epistemic_at(
    reg: &dyn Regressor,
    x: &Array2<f64>,
    y: &[f64],
    eval: &Array2<f64>,
    b: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if b < 2 {
        return Err(Error::config(format!("need at least 2 bootstrap replicates, got {b}")));
    }
    if y.len() < 2 {
        return Err(Error::data("bootstrap needs at least 2 rows"));
    }
    epistemic_from_resamples(reg, x, y, eval, &bootstrap_resamples(y.len(), b, seed), seed)
}

/// Raw (unfloored) epistemic uncertainty for every row of `ds`.
pub fn epistemic(reg: &dyn Regressor, ds: &Dataset, b: usize, seed: u64) -> Result<Vec<f64>> {
    epistemic_at(reg, ds.features(), ds.response(), ds.features(), b, seed)
}

/// Absolute residual targets, clamped predictions.
pub(crate) fn abs_residuals(y: &[f64], yhat: &[f64]) -> Vec<f64> {
    y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect()
}

/// Cross-fit the residual model on `(x, targets)`: out-of-sample estimates
/// for the training rows and fold-averaged estimates at `extra`. Negative
/// predictions are clamped to 0.
pub(crate) fn aleatoric_cross(
    reg: &dyn Regressor,
    x: &Array2<f64>,
    targets: &[f64],
    k: usize,
    seed: u64,
    extra: Option<&Array2<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = seed::derive(seed, &[seed::TAG_ALEATORIC]);
    let folds = assign_folds(targets.len(), k, s)?;
    let cf = cross_fit(residual_regressor(reg), x, targets, &folds, s, extra)?;
    let clamp = |v: Vec<f64>| v.into_iter().map(|p| p.max(0.0)).collect();
    Ok((clamp(cf.oos.predictions), clamp(cf.extra)))
}

/// Raw (unfloored) aleatoric uncertainty for every row of `ds`, given
/// out-of-sample predictions aligned with it.
pub fn aleatoric(reg: &dyn Regressor, ds: &Dataset, oos: &OosPrediction, k: usize, seed: u64) -> Result<Vec<f64>> {
    if oos.predictions.len() != ds.n() {
        return Err(Error::data(format!(
            "{} out-of-sample predictions for {} rows",
            oos.predictions.len(),
            ds.n()
        )));
    }
    let targets = abs_residuals(ds.response(), &oos.predictions);
    Ok(aleatoric_cross(reg, ds.features(), &targets, k, seed, None)?.0)
}

/// Both estimates for `ds`, floored.
pub fn estimate(
    reg: &dyn Regressor,
    ds: &Dataset,
    oos: &OosPrediction,
    b: usize,
    k: usize,
    seed: u64,
) -> Result<UncertaintyEstimates> {
    let u = epistemic(reg, ds, b, seed)?;
    let s = aleatoric(reg, ds, oos, k, seed)?;
    UncertaintyEstimates::from_raw(u, s, b)
}
