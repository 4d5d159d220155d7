//! Model-agnostic baseline scores used for comparison.

use super::{check_len, ScoreMethod, ScoreVector};
use crate::error::{Error, Result};

pub const RELATIVE_EPSILON: f64 = 1e-6;
pub const DISCRETIZED_BINS: usize = 10;

/// `1 - exp(-|y - ŷ| / (|y| + 1e-6))`.
pub fn relative_residual(y: &[f64], yhat: &[f64]) -> Result<ScoreVector> {
    check_len(y.len(), yhat.len())?;
    let values = y
        .iter()
        .zip(yhat)
        .map(|(&a, &b)| 1.0 - (-(a - b).abs() / (a.abs() + RELATIVE_EPSILON)).exp())
        .collect();
    ScoreVector::new(ScoreMethod::RelativeResidual, values)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, using
/// the standard deviation alone when the IQR is zero.
pub(crate) fn silverman_bandwidth(y: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 2 {
        return Err(Error::data("density estimate needs at least 2 values"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::data("response has zero variance; density is degenerate"));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Negative log of a Gaussian kernel density estimate of the marginal
/// response, evaluated at each observed value.
pub fn marginal_density_score(y: &[f64]) -> Result<ScoreVector> {
    let h = silverman_bandwidth(y)?;
    let n = y.len() as f64;
    let log_norm = (n * h * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let values = y
        .iter()
        .map(|&yi| {
            let exps: Vec<f64> = y.iter().map(|&yj| -0.5 * ((yi - yj) / h).powi(2)).collect();
            let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_density = m + exps.iter().map(|e| (e - m).exp()).sum::<f64>().ln() - log_norm;
            -log_density
        })
        .collect();
    ScoreVector::new(ScoreMethod::MarginalDensity, values)
}

/// Self-confidence complement after recasting the response into equal-width
/// bins over its range. Bin probabilities are proportional to
/// `exp(-|ŷ - centre|)`.
pub fn discretized_score(y: &[f64], yhat: &[f64], bins: usize) -> Result<ScoreVector> {
    check_len(y.len(), yhat.len())?;
    if bins == 0 {
        return Err(Error::config("need at least one bin"));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::data("response has zero range; cannot discretize"));
    }
    let width = range / bins as f64;
    let centres: Vec<f64> = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    let values = y
        .iter()
        .zip(yhat)
        .map(|(&yi, &pi)| {
            let own = (((yi - lo) / width).floor() as usize).min(bins - 1);
            let logits: Vec<f64> = centres.iter().map(|c| -(pi - c).abs()).collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            1.0 - (logits[own] - m).exp() / z
        })
        .collect();
    ScoreVector::new(ScoreMethod::Discretized, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn relative_residual_examples() {
        assert_eq!(relative_residual(&[0.0], &[0.0]).unwrap().values, vec![0.0]);
        let v = relative_residual(&[1.0], &[0.0]).unwrap().values[0];
        assert!((1.0 - v - 0.367_879).abs() < 1e-6);
        assert!((1.0 - v - (-1.0 / (1.0 + 1e-6f64)).exp()).abs() < 1e-15);
    }

    #[test]
    fn relative_residual_is_scale_free() {
        let y = [1.0, -2.0, 3.5];
        let yhat = [0.5, -1.0, 4.0];
        let a = relative_residual(&y, &yhat).unwrap();
        let b = relative_residual(&y.map(|v| v * 7.0), &yhat.map(|v| v * 7.0)).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            // Only the epsilon breaks exact homogeneity.
            assert!((p - q).abs() < 1e-6);
        }
    }

    // Direct KDE: -log( (1/(n h)) Σ φ((y_i - y_j)/h) ).
    fn kde_oracle(y: &[f64], h: f64) -> Vec<f64> {
        let n = y.len() as f64;
        y.iter()
            .map(|&a| {
                let dens: f64 = y
                    .iter()
                    .map(|&b| (-0.5 * ((a - b) / h).powi(2)).exp() / (2.0 * std::f64::consts::PI).sqrt())
                    .sum::<f64>()
                    / (n * h);
                -dens.ln()
            })
            .collect()
    }

    #[test]
    fn density_max_scores_above_median() {
        let mut rng = crate::seed::rng(2024);
        let y: Vec<f64> = (0..201).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = marginal_density_score(&y).unwrap();
        let oracle = kde_oracle(&y, silverman_bandwidth(&y).unwrap());
        for (a, b) in s.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        let mut sorted: Vec<usize> = (0..y.len()).collect();
        sorted.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
        let (imax, imed) = (sorted[200], sorted[100]);
        assert!(s.values[imax] > s.values[imed]);
    }

    #[test]
    fn density_symmetric_under_negation() {
        let y = [-2.0, -0.5, 0.1, 0.7, 1.9, 3.0];
        let neg = y.map(|v| -v);
        let a = marginal_density_score(&y).unwrap();
        let b = marginal_density_score(&neg).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_mass_point_is_least_suspicious() {
        let y = [0.0, 0.0, 0.0, 1.0, 2.5];
        let s = marginal_density_score(&y).unwrap();
        let oracle = kde_oracle(&y, silverman_bandwidth(&y).unwrap());
        let argmin = |v: &[f64]| (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert_eq!(y[argmin(&s.values)], 0.0);
        assert_eq!(y[argmin(&oracle)], 0.0);
    }

    #[test]
    fn density_degenerate_inputs() {
        assert!(marginal_density_score(&[1.0]).is_err());
        assert!(marginal_density_score(&[2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn discretized_own_bin_is_best() {
        // Range [0, 10], bin k has centre k + 0.5.
        let y: Vec<f64> = (0..=10).map(f64::from).collect();
        let row = 3; // y = 3 lies in bin 3 (centre 3.5)
        let mut best = f64::INFINITY;
        let mut own = f64::NAN;
        for k in 0..10 {
            let mut yhat = y.clone();
            yhat[row] = k as f64 + 0.5;
            let v = discretized_score(&y, &yhat, DISCRETIZED_BINS).unwrap().values[row];
            if k == 3 {
                own = v;
            }
            best = best.min(v);
        }
        assert_eq!(own, best);
    }

    #[test]
    fn discretized_far_prediction_is_near_uniform() {
        // Narrow range: centres 0.0005..0.0095, prediction far to the right.
        let y: Vec<f64> = (0..=10).map(|i| i as f64 * 0.001).collect();
        let yhat = vec![100.0; y.len()];
        let s = discretized_score(&y, &yhat, DISCRETIZED_BINS).unwrap();
        // Oracle: p_k ∝ exp(-(100 - c_k)).
        let centres: Vec<f64> = (0..10).map(|k| (k as f64 + 0.5) * 0.001).collect();
        let w: Vec<f64> = centres.iter().map(|c| (-(100.0 - c)).exp()).collect();
        let z: f64 = w.iter().sum();
        for (i, &yi) in y.iter().enumerate() {
            let bin = ((yi / 0.001).floor() as usize).min(9);
            let p = w[bin] / z;
            assert!((s.values[i] - (1.0 - p)).abs() < 1e-12);
            assert!((p - 0.1).abs() < 1e-3);
        }
    }

    #[test]
    fn discretized_zero_range_rejected() {
        assert!(discretized_score(&[1.0, 1.0], &[0.0, 0.0], 10).is_err());
    }
}
