//! End-to-end scoring: out-of-sample predictions, uncertainty estimates and
//! the final score vector.
//!
//! Two entry points cover the two ways scores are used. [`score_dataset`]
//! cross-fits on a dataset and scores every row of it, optionally scoring
//! extra rows that took no part in any fit (the filter needs this for rows
//! it has set aside). [`FittedScorer`] fits once on a training set and then
//! scores any number of new batches identically, which is what split
//! conformal detection needs.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{assign_folds, cross_fit, fit, residual_regressor, FittedModel, Regressor};
use crate::scores::{self, ScoreMethod, ScoreVector};
use crate::seed;
use crate::uncertainty::{self, bootstrap_resamples, floor_for, UncertaintyEstimates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub method: ScoreMethod,
    /// Bootstrap replicates for epistemic uncertainty.
    pub bootstrap: usize,
    /// Cross-validation folds.
    pub folds: usize,
    pub lof_k: usize,
    pub outre_k: usize,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            method: ScoreMethod::Arithmetic,
            bootstrap: 20,
            folds: 5,
            lof_k: 20,
            outre_k: 10,
        }
    }
}

impl ScoringParams {
    pub fn with_method(method: ScoreMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.method.needs_uncertainty() && self.bootstrap < 2 {
            return Err(Error::config(format!("bootstrap must be at least 2, got {}", self.bootstrap)));
        }
        if self.lof_k == 0 || self.outre_k == 0 {
            return Err(Error::config("neighbour counts must be at least 1"));
        }
        Ok(())
    }
}

/// Scores for every row of a dataset together with what produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredRows {
    /// Out-of-sample prediction for fitted rows; mean fold-model prediction
    /// for rows that were held out of every fit.
    pub predictions: Vec<f64>,
    /// Fold of each fitted row, `None` for held-out rows.
    pub fold_of_row: Vec<Option<usize>>,
    pub uncertainty: Option<UncertaintyEstimates>,
    pub scores: ScoreVector,
}

/// Combine predictions, responses and (when required) uncertainties into
/// the requested score.
pub fn compute_score(
    params: &ScoringParams,
    y: &[f64],
    yhat: &[f64],
    unc: Option<&UncertaintyEstimates>,
) -> Result<ScoreVector> {
    let need = || unc.ok_or_else(|| Error::config(format!("{} score needs uncertainty estimates", params.method)));
    match params.method {
        ScoreMethod::Residual => scores::residual_score(y, yhat),
        ScoreMethod::Arithmetic => scores::arithmetic_score(&scores::residual_score(y, yhat)?, need()?),
        ScoreMethod::Geometric => scores::geometric_score(&scores::residual_score(y, yhat)?, need()?),
        ScoreMethod::RelativeResidual => scores::relative_residual(y, yhat),
        ScoreMethod::MarginalDensity => scores::marginal_density_score(y),
        ScoreMethod::Lof => scores::lof_score(y, yhat, params.lof_k),
        ScoreMethod::Outre => scores::outre_score(y, yhat, params.outre_k),
        ScoreMethod::Discretized => scores::discretized_score(y, yhat, scores::DISCRETIZED_BINS),
    }
}

/// Score every row of `ds`.
pub fn score_dataset(reg: &dyn Regressor, ds: &Dataset, params: &ScoringParams, seed: u64) -> Result<ScoredRows> {
    let all: Vec<usize> = (0..ds.n()).collect();
    score_with_holdout(reg, ds, &all, params, seed)
}

/// Cross-fit on the rows listed in `fit_rows` and score every row of `ds`.
/// Rows outside `fit_rows` are scored by averaging the fold models, and
/// their uncertainty comes from the same bootstrap and residual models.
pub fn score_with_holdout(
    reg: &dyn Regressor,
    ds: &Dataset,
    fit_rows: &[usize],
    params: &ScoringParams,
    seed: u64,
) -> Result<ScoredRows> {
    params.validate()?;
    let n = ds.n();
    let mut in_fit = vec![false; n];
    for &i in fit_rows {
        if i >= n || std::mem::replace(&mut in_fit[i], true) {
            return Err(Error::data(format!("fit row {i} out of range or repeated")));
        }
    }
    let held: Vec<usize> = (0..n).filter(|&i| !in_fit[i]).collect();
    let x_fit = ds.features().select(Axis(0), fit_rows);
    let y = ds.response();
    let y_fit: Vec<f64> = fit_rows.iter().map(|&i| y[i]).collect();
    let x_held = ds.features().select(Axis(0), &held);
    let extra = (!held.is_empty()).then_some(&x_held);

    let folds = assign_folds(fit_rows.len(), params.folds, seed)?;
    let cf = cross_fit(reg, &x_fit, &y_fit, &folds, seed, extra)?;

    let mut predictions = vec![0.0; n];
    let mut fold_of_row = vec![None; n];
    for (j, &i) in fit_rows.iter().enumerate() {
        predictions[i] = cf.oos.predictions[j];
        fold_of_row[i] = Some(cf.oos.fold_of_row[j]);
    }
    for (j, &i) in held.iter().enumerate() {
        predictions[i] = cf.extra[j];
    }

    let unc = if params.method.needs_uncertainty() {
        let epi = uncertainty::epistemic_at(reg, &x_fit, &y_fit, ds.features(), params.bootstrap, seed)?;
        let targets = uncertainty::abs_residuals(&y_fit, &cf.oos.predictions);
        let (ale_fit, ale_held) = uncertainty::aleatoric_cross(reg, &x_fit, &targets, params.folds, seed, extra)?;
        let mut ale = vec![0.0; n];
        for (j, &i) in fit_rows.iter().enumerate() {
            ale[i] = ale_fit[j];
        }
        for (j, &i) in held.iter().enumerate() {
            ale[i] = ale_held[j];
        }
        Some(UncertaintyEstimates::from_raw(epi, ale, params.bootstrap)?)
    } else {
        None
    };

    let scores = compute_score(params, y, &predictions, unc.as_ref())?;
    Ok(ScoredRows {
        predictions,
        fold_of_row,
        uncertainty: unc,
        scores,
    })
}

/// Predictions and uncertainties for a batch of rows under a
/// [`FittedScorer`]; independent of the responses.
#[derive(Debug, Clone)]
pub struct ScoreParts {
    pub predictions: Vec<f64>,
    pub uncertainty: Option<UncertaintyEstimates>,
}

/// Score machinery fit once on a training set.
///
/// Holds the main model, the `B` bootstrap models and the residual model.
/// The residual model is trained on absolute out-of-sample residuals of the
/// training rows. Floors for the uncertainty estimates are fixed from the
/// training rows, so every later batch is floored identically.
pub struct FittedScorer {
    main: FittedModel,
    bootstrap: Vec<FittedModel>,
    residual: Option<FittedModel>,
    floors: (f64, f64),
    params: ScoringParams,
}

impl FittedScorer {
    /// Only row-wise methods are accepted: their score for a row depends on
    /// that row alone, so calibration and test scores stay exchangeable.
    pub fn fit(reg: &dyn Regressor, train: &Dataset, params: &ScoringParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if !params.method.is_row_wise() {
            return Err(Error::config(format!(
                "{} score depends on the whole batch and cannot be used here",
                params.method
            )));
        }
        Self::fit_parts(reg, train, params, params.method.needs_uncertainty(), seed)
    }

    /// Fit the uncertainty models regardless of the configured method, so
    /// one fit can serve every row-wise method.
    pub fn fit_all(reg: &dyn Regressor, train: &Dataset, params: &ScoringParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if params.bootstrap < 2 {
            return Err(Error::config("bootstrap must be at least 2"));
        }
        Self::fit_parts(reg, train, params, true, seed)
    }

    fn fit_parts(reg: &dyn Regressor, train: &Dataset, params: &ScoringParams, with_unc: bool, seed: u64) -> Result<Self> {
        let x = train.features();
        let y = train.response();
        let main = fit(reg, x, y, seed::derive(seed, &[seed::TAG_FIT]))?;
        if !with_unc {
            return Ok(Self {
                main,
                bootstrap: Vec::new(),
                residual: None,
                floors: (1e-12, 1e-12),
                params: *params,
            });
        }
        let bootstrap: Vec<FittedModel> = bootstrap_resamples(train.n(), params.bootstrap, seed)
            .par_iter()
            .enumerate()
            .map(|(r, idx)| {
                let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                fit(reg, &x.select(Axis(0), idx), &yb, seed::derive(seed, &[seed::TAG_BOOTSTRAP, r as u64]))
            })
            .collect::<Result<_>>()?;
        let folds = assign_folds(train.n(), params.folds, seed)?;
        let oos = cross_fit(reg, x, y, &folds, seed, None)?.oos;
        let targets = uncertainty::abs_residuals(y, &oos.predictions);
        let residual = fit(residual_regressor(reg), x, &targets, seed::derive(seed, &[seed::TAG_ALEATORIC]))?;
        let mut scorer = Self {
            main,
            bootstrap,
            residual: Some(residual),
            floors: (1e-12, 1e-12),
            params: *params,
        };
        let (epi, ale) = scorer.raw_uncertainty(x)?;
        scorer.floors = (floor_for(&epi), floor_for(&ale));
        Ok(scorer)
    }

    pub fn params(&self) -> &ScoringParams {
        &self.params
    }

    fn raw_uncertainty(&self, x: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let residual = self.residual.as_ref().ok_or_else(|| Error::config("scorer was fit without uncertainty models"))?;
        let preds: Vec<Vec<f64>> = self.bootstrap.iter().map(|m| m.predict(x)).collect::<Result<_>>()?;
        let b = preds.len() as f64;
        let epi = (0..x.nrows())
            .map(|i| {
                let mean = preds.iter().map(|p| p[i]).sum::<f64>() / b;
                (preds.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>() / (b - 1.0)).sqrt()
            })
            .collect();
        let ale = residual.predict(x)?.into_iter().map(|v| v.max(0.0)).collect();
        Ok((epi, ale))
    }

    /// Predictions and (when fitted) floored uncertainties at `x`.
    pub fn parts(&self, x: &Array2<f64>) -> Result<ScoreParts> {
        let predictions = self.main.predict(x)?;
        let uncertainty = match self.residual {
            Some(_) => {
                let (epi, ale) = self.raw_uncertainty(x)?;
                Some(UncertaintyEstimates::with_floors(epi, ale, self.bootstrap.len(), self.floors)?)
            }
            None => None,
        };
        Ok(ScoreParts {
            predictions,
            uncertainty,
        })
    }

    /// Score responses `y` for rows whose parts were computed earlier.
    pub fn score_parts(&self, parts: &ScoreParts, y: &[f64], method: ScoreMethod) -> Result<ScoreVector> {
        if !method.is_row_wise() {
            return Err(Error::config(format!("{method} score is not row-wise")));
        }
        let params = ScoringParams { method, ..self.params };
        compute_score(&params, y, &parts.predictions, parts.uncertainty.as_ref())
    }

    /// Score the rows of `ds` with the configured method.
    pub fn score(&self, ds: &Dataset) -> Result<ScoreVector> {
        self.score_parts(&self.parts(ds.features())?, ds.response(), self.params.method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::RegressorSpec;

    fn fixture(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (3 + j)) % 17) as f64 / 4.0);
        let y = (0..n).map(|i| 1.5 * x[[i, 0]] - 0.5 * x[[i, 1]] + ((i * 7) % 5) as f64 * 0.1).collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn residual_score_uses_oos_predictions() {
        let ds = fixture(40);
        let reg = RegressorSpec::linear();
        let s = score_dataset(&reg, &ds, &ScoringParams::with_method(ScoreMethod::Residual), 5).unwrap();
        let oos = crate::models::oos_predict(&reg, &ds, 5, 5).unwrap();
        assert_eq!(s.predictions, oos.predictions);
        assert!(s.uncertainty.is_none());
        for i in 0..40 {
            assert_eq!(s.scores.values[i], (ds.response()[i] - oos.predictions[i]).abs());
        }
    }

    #[test]
    fn holdout_rows_get_averaged_predictions() {
        let ds = fixture(40);
        let reg = RegressorSpec::linear();
        let fit_rows: Vec<usize> = (0..40).filter(|i| i % 8 != 0).collect();
        let s = score_with_holdout(&reg, &ds, &fit_rows, &ScoringParams::default(), 1).unwrap();
        assert_eq!(s.scores.len(), 40);
        assert!(s.fold_of_row.iter().enumerate().all(|(i, f)| f.is_none() == (i % 8 == 0)));
        assert!(s.uncertainty.unwrap().epistemic().iter().all(|&u| u > 0.0));
    }

    #[test]
    fn fitted_scorer_is_batch_independent() {
        let ds = fixture(60);
        let train = ds.subset(&(0..40).collect::<Vec<_>>());
        let test = ds.subset(&(40..60).collect::<Vec<_>>());
        let reg = RegressorSpec::linear();
        let scorer = FittedScorer::fit(&reg, &train, &ScoringParams::default(), 9).unwrap();
        let whole = scorer.score(&test).unwrap();
        let first = scorer.score(&test.subset(&[0, 1, 2])).unwrap();
        assert_eq!(&whole.values[..3], &first.values[..]);
    }

    #[test]
    fn fitted_scorer_rejects_batch_methods() {
        let ds = fixture(30);
        let p = ScoringParams::with_method(ScoreMethod::Lof);
        assert!(FittedScorer::fit(&RegressorSpec::linear(), &ds, &p, 0).is_err());
    }
}
