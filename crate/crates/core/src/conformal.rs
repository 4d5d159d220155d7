//! Split-conformal outlier detection with Benjamini–Hochberg selection.
//!
//! Scores are fit on a training split, evaluated on a calibration split of
//! presumed-clean rows and on the test rows. A test row's p-value is the
//! fraction of calibration scores at least as large as its own (with the
//! usual `+1` correction), so large scores give small p-values.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Regressor;
use crate::pipeline::{FittedScorer, ScoringParams};
use crate::scores::ScoreMethod;

/// `(1 + #{cal ≥ t}) / (n_cal + 1)` for each test score `t`.
pub fn conformal_pvalues(cal: &[f64], test: &[f64]) -> Result<Vec<f64>> {
    if cal.is_empty() {
        return Err(Error::data("calibration set is empty"));
    }
    if cal.iter().chain(test).any(|v| !v.is_finite()) {
        return Err(Error::numerical("conformal scores must be finite"));
    }
    let mut sorted = cal.to_vec();
    sorted.sort_by(f64::total_cmp);
    let denom = (cal.len() + 1) as f64;
    Ok(test
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&c| c < t);
            (1 + cal.len() - below) as f64 / denom
        })
        .collect())
}

/// Benjamini–Hochberg step-up at level `alpha`. Returns rejected indices in
/// ascending order.
pub fn bh_procedure(pvalues: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if pvalues.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::numerical("p-values must lie in [0, 1]"));
    }
    let m = pvalues.len();
    if alpha == 0.0 {
        return Ok(Vec::new());
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = (1..=m).rev().find(|&i| sorted[i - 1] <= i as f64 * alpha / m as f64);
    Ok(match cutoff {
        Some(i) => {
            let threshold = sorted[i - 1];
            (0..m).filter(|&j| pvalues[j] <= threshold).collect()
        }
        None => Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalOutcome {
    pub pvalues: Vec<f64>,
    pub rejected: Vec<usize>,
    pub alpha: f64,
    pub method: ScoreMethod,
    pub calibration_size: usize,
    pub test_scores: Vec<f64>,
}

/// Fit scores on `train`, calibrate on `cal`, test `test`.
pub fn conformal_detect(
    reg: &dyn Regressor,
    train: &Dataset,
    cal: &Dataset,
    test: &Dataset,
    params: &ScoringParams,
    alpha: f64,
    seed: u64,
) -> Result<ConformalOutcome> {
    if train.d() != cal.d() || train.d() != test.d() {
        return Err(Error::data("train, calibration and test splits have different feature counts"));
    }
    let scorer = FittedScorer::fit(reg, train, params, seed)?;
    let cal_scores = scorer.score(cal)?;
    let test_scores = scorer.score(test)?;
    let pvalues = conformal_pvalues(&cal_scores.values, &test_scores.values)?;
    let rejected = bh_procedure(&pvalues, alpha)?;
    Ok(ConformalOutcome {
        pvalues,
        rejected,
        alpha,
        method: params.method,
        calibration_size: cal.n(),
        test_scores: test_scores.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pvalue_examples() {
        let cal = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(conformal_pvalues(&cal, &[5.0, 0.0]).unwrap(), vec![0.2, 1.0]);
        // A tie counts as at least as large.
        assert_eq!(conformal_pvalues(&cal, &[4.0]).unwrap(), vec![0.4]);
        assert!(conformal_pvalues(&[], &[1.0]).is_err());
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_procedure(&[0.01, 0.02, 0.5], 0.1).unwrap(), vec![0, 1]);
        assert!(bh_procedure(&[1.0; 5], 0.1).unwrap().is_empty());
        assert!(bh_procedure(&[0.01, 0.5], 0.0).unwrap().is_empty());
        assert!(bh_procedure(&[0.1], 1.5).is_err());
        // Step-up: p_(2) fails its threshold but p_(3) passes, so all three go.
        assert_eq!(bh_procedure(&[0.04, 0.07, 0.08], 0.1).unwrap(), vec![0, 1, 2]);
    }
}
