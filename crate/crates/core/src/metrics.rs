//! Ranking and detection metrics.
//!
//! All ranking metrics treat larger scores as more suspicious. Where a
//! metric needs a total order, equal scores are ordered by row index.

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{fit, oos_predict, Regressor};
use crate::scores::ranking;
use crate::seed;

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::data(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::numerical(format!("score at row {i} is not finite")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::data("AUROC needs both positive and negative labels"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the Mann-Whitney U, accumulated in integers so ties stay exact.
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_u += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(twice_u as f64 / (2 * pos as u64 * neg as u64) as f64)
}

/// Average precision: mean over positives of the precision at the
/// positive's rank.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::data("AUPRC needs at least one positive label"));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in ranking(scores).iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Precision among the top `k` divided by the overall positive rate.
pub fn lift_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    let n = labels.len();
    if k < 1 || k > n {
        return Err(Error::config(format!("lift cut-off k = {k} outside 1..={n}")));
    }
    if pos == 0 {
        return Err(Error::data("lift needs at least one positive label"));
    }
    let top = ranking(scores).iter().take(k).filter(|&&i| labels[i]).count();
    Ok((top as f64 / k as f64) / (pos as f64 / n as f64))
}

/// `(false discovery proportion, power)` of a rejection set against the
/// true error mask. An empty rejection set has FDP 0.
pub fn fdr_power(rejected: &[usize], truth: &[bool]) -> Result<(f64, f64)> {
    let errors = truth.iter().filter(|&&t| t).count();
    if errors == 0 {
        return Err(Error::data("power is undefined without true errors"));
    }
    let mut seen = vec![false; truth.len()];
    let (mut true_hits, mut false_hits) = (0usize, 0usize);
    for &i in rejected {
        if i >= truth.len() {
            return Err(Error::data(format!("rejected index {i} out of range")));
        }
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        if truth[i] {
            true_hits += 1;
        } else {
            false_hits += 1;
        }
    }
    let total = true_hits + false_hits;
    Ok((false_hits as f64 / total.max(1) as f64, true_hits as f64 / errors as f64))
}

/// Rows whose given value deviates from the true value by more than
/// `threshold`.
pub fn error_mask(given: &[f64], truth: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if given.len() != truth.len() {
        return Err(Error::data("given and true responses differ in length"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::config("deviation threshold must be non-negative"));
    }
    Ok(given.iter().zip(truth).map(|(g, t)| (g - t).abs() > threshold).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "folds")]
pub enum LooMode {
    /// Refit once per row.
    ExactLoo,
    /// Substitute K-fold out-of-sample predictions.
    KfoldApprox(usize),
}

/// `Σ (ŷ₋ᵢ − yᵢ)²` over all rows.
pub fn loo_prediction_error(reg: &dyn Regressor, ds: &Dataset, mode: LooMode, seed: u64) -> Result<f64> {
    let n = ds.n();
    if n < 3 {
        return Err(Error::data("prediction error needs at least 3 rows"));
    }
    let y = ds.response();
    let preds: Vec<f64> = match mode {
        LooMode::KfoldApprox(k) => oos_predict(reg, ds, k, seed)?.predictions,
        LooMode::ExactLoo => (0..n)
            .into_par_iter()
            .map(|i| {
                let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let x = ds.features().select(Axis(0), &keep);
                let yt: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
                let m = fit(reg, &x, &yt, seed::derive(seed, &[seed::TAG_FIT, i as u64]))?;
                Ok(m.predict(&ds.features().select(Axis(0), &[i]))?[0])
            })
            .collect::<Result<_>>()?,
    };
    Ok(preds.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum())
}

/// Metrics for one score vector or detection run. Absent entries did not
/// apply in context.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub lift_at_num_errors: Option<f64>,
    pub lift_at_100: Option<f64>,
    pub fdr: Option<f64>,
    pub power: Option<f64>,
    pub prediction_error: Option<f64>,
    pub prediction_error_mode: Option<LooMode>,
}

/// AUROC, AUPRC, lift at the true error count and lift at 100 (omitted when
/// there are fewer than 100 rows).
pub fn ranking_report(scores: &[f64], labels: &[bool]) -> Result<MetricReport> {
    let errors = labels.iter().filter(|&&l| l).count();
    Ok(MetricReport {
        auroc: Some(auroc(scores, labels)?),
        auprc: Some(auprc(scores, labels)?),
        lift_at_num_errors: Some(lift_at_k(scores, labels, errors)?),
        lift_at_100: if labels.len() >= 100 {
            Some(lift_at_k(scores, labels, 100)?)
        } else {
            None
        },
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::RegressorSpec;
    use ndarray::Array2;

    fn b(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2], &b(&[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.2, 0.9, 0.8], &b(&[1, 1, 0, 0])).unwrap(), 0.0);
        assert_eq!(auroc(&[0.5, 0.5], &b(&[1, 0])).unwrap(), 0.5);
        assert!(auroc(&[0.1, 0.2], &b(&[1, 1])).is_err());
    }

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&[3.0, 2.0, 1.0, 0.0], &b(&[1, 1, 0, 0])).unwrap(), 1.0);
        // Single positive ranked last of 5: precision 1/5.
        assert!((auprc(&[5.0, 4.0, 3.0, 2.0, 1.0], &b(&[0, 0, 0, 0, 1])).unwrap() - 0.2).abs() < 1e-15);
        assert!(auprc(&[1.0], &b(&[0])).is_err());
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_at_k(&[4.0, 1.0, 2.0, 3.0], &b(&[1, 0, 0, 0]), 1).unwrap(), 4.0);
        assert_eq!(lift_at_k(&[4.0, 1.0, 2.0, 3.0], &b(&[0, 1, 0, 1]), 4).unwrap(), 1.0);
        assert!(lift_at_k(&[1.0, 2.0], &b(&[1, 0]), 0).is_err());
        assert!(lift_at_k(&[1.0, 2.0], &b(&[1, 0]), 3).is_err());
    }

    #[test]
    fn fdr_power_examples() {
        let mut truth = vec![false; 10];
        truth[2] = true;
        assert_eq!(fdr_power(&[2], &truth).unwrap(), (0.0, 1.0));
        assert_eq!(fdr_power(&[], &truth).unwrap(), (0.0, 0.0));
        let all: Vec<usize> = (0..10).collect();
        let (fdr, power) = fdr_power(&all, &truth).unwrap();
        assert!((fdr - 0.9).abs() < 1e-15);
        assert_eq!(power, 1.0);
        assert!(fdr_power(&[1], &[false, false]).is_err());
    }

    #[test]
    fn mean_predictor_loo_closed_form() {
        // A family that ignores covariates and predicts the training mean.
        let n = 50;
        let y: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let ds = Dataset::new(Array2::zeros((n, 1)), y.clone()).unwrap();
        // Linear family on a constant covariate reduces to the mean.
        let ep = loo_prediction_error(&RegressorSpec::linear(), &ds, LooMode::ExactLoo, 0).unwrap();
        let total: f64 = y.iter().sum();
        let expect: f64 = y
            .iter()
            .map(|&yi| {
                let loo_mean = (total - yi) / (n - 1) as f64;
                (loo_mean - yi).powi(2)
            })
            .sum();
        assert!((ep - expect).abs() < 1e-9 * expect.max(1.0));
    }

    #[test]
    fn exact_loo_equals_n_fold() {
        let n = 12;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 2)) % 7) as f64);
        let y: Vec<f64> = (0..n).map(|i| x[[i, 0]] * 1.5 - x[[i, 1]] + (i % 3) as f64).collect();
        let ds = Dataset::new(x, y).unwrap();
        let spec = RegressorSpec::linear();
        let exact = loo_prediction_error(&spec, &ds, LooMode::ExactLoo, 3).unwrap();
        let kfold = loo_prediction_error(&spec, &ds, LooMode::KfoldApprox(n), 3).unwrap();
        assert!((exact - kfold).abs() < 1e-9 * exact);
        assert!(loo_prediction_error(&spec, &ds.subset(&[0, 1]), LooMode::ExactLoo, 0).is_err());
    }

    #[test]
    fn error_mask_threshold() {
        assert_eq!(error_mask(&[1.0, 2.0, 3.0], &[1.0, 2.5, 0.0], 0.4).unwrap(), vec![false, true, true]);
        assert!(error_mask(&[1.0], &[1.0], -1.0).is_err());
    }
}
