//! Independent oracles: closed forms, brute-force definitions and
//! distributional checks of the generators.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use veracity::metrics::{loo_prediction_error, LooMode};
use veracity::scores::{arithmetic_score, geometric_score, residual_score};
use veracity::simbench::{corollary1_probability, gen_setting1, gen_setting2, setting1_mean, Noise, Setting2, DIM};
use veracity::uncertainty::UncertaintyEstimates;
use veracity::{Dataset, RegressorSpec};

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value at level 0.001.
fn ks_critical(n: usize) -> f64 {
    (-0.5 * (0.001f64 / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

#[test]
fn setting1_covariates_follow_the_mixture() {
    let ds = gen_setting1(4000, Noise::default(), 11).unwrap();
    let cdf = |x: f64| {
        if x < -1.5 {
            0.0
        } else if x < -0.5 {
            0.1 * (x + 1.5)
        } else if x < 1.5 {
            0.1 + 0.45 * (x + 0.5)
        } else {
            1.0
        }
    };
    for j in 0..DIM {
        let mut col = ds.features().column(j).to_vec();
        let d = ks_statistic(&mut col, cdf);
        assert!(d < ks_critical(col.len()), "column {j}: D = {d}");
    }
}

#[test]
fn setting1_noise_is_gaussian_with_variance_one_half() {
    let ds = gen_setting1(6000, Noise::default(), 12).unwrap();
    // Below x1 = 0.5 the two branches coincide, so y - mean is pure noise.
    let mut eps: Vec<f64> = (0..ds.n())
        .filter(|&i| ds.features()[[i, 0]] < 0.5)
        .map(|i| ds.response()[i] - setting1_mean(ds.features()[[i, 0]]))
        .collect();
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let d = ks_statistic(&mut eps, |v| normal.cdf(v));
    assert!(d < ks_critical(eps.len()), "D = {d}");
}

#[test]
fn setting2_marginals() {
    let coef = Setting2::draw(3);
    let ds = coef.generate(4000, Noise::default(), 13).unwrap();
    let mut x0 = ds.features().column(2).to_vec();
    let d = ks_statistic(&mut x0, |v| ((v + 1.5) / 3.0).clamp(0.0, 1.0));
    assert!(d < ks_critical(x0.len()), "covariate D = {d}");

    let mut eps: Vec<f64> = (0..ds.n())
        .map(|i| ds.response()[i] - (0..DIM).map(|j| coef.beta[j] * ds.features()[[i, j]]).sum::<f64>())
        .collect();
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let d = ks_statistic(&mut eps, |v| normal.cdf(v));
    assert!(d < ks_critical(eps.len()), "noise D = {d}");
    assert!(coef.beta.iter().all(|b| b.abs() == 1.0));
    let again = gen_setting2(50, Noise::default(), 8).unwrap();
    assert_eq!(again.response(), gen_setting2(50, Noise::default(), 8).unwrap().response());
}

/// `P(|e| < |e' + a|)` by Simpson's rule over `e ≥ 0`; the integrand is even
/// in `e`.
fn shift_probability_quadrature(a: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let steps = 20_000;
    let h = 9.0 / steps as f64;
    let f = |e: f64| {
        let inside = n.cdf(e - a) - n.cdf(-e - a);
        2.0 * (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt() * (1.0 - inside)
    };
    let weight = |s: usize| match s {
        0 => 1.0,
        _ if s == steps => 1.0,
        _ if s % 2 == 1 => 4.0,
        _ => 2.0,
    };
    (0..=steps).map(|s| weight(s) * f(s as f64 * h)).sum::<f64>() * h / 3.0
}

#[test]
fn shift_probability_matches_quadrature() {
    for a in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let est = corollary1_probability(a, 400_000, 77).unwrap();
        let exact = shift_probability_quadrature(a);
        assert!(
            (est.estimate - exact).abs() <= 4.0 * est.std_error.max(1e-4),
            "a = {a}: {} vs {exact}",
            est.estimate
        );
    }
    let half = shift_probability_quadrature(0.0);
    assert!((half - 0.5).abs() < 1e-9, "{half}");
}

fn random_linear_data(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0));
    let y = (0..n)
        .map(|i| 1.5 + (0..d).map(|j| (j as f64 - 1.0) * x[[i, j]]).sum::<f64>() + rng.random_range(-1.0..1.0))
        .collect();
    Dataset::new(x, y).unwrap()
}

#[test]
fn linear_leave_one_out_matches_the_hat_matrix() {
    for seed in 0..4 {
        let ds = random_linear_data(30, 3, seed);
        let (n, d) = ds.features().dim();
        let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { ds.features()[[i, j - 1]] });
        let gram_inv = (design.transpose() * &design).try_inverse().unwrap();
        let hat = &design * gram_inv * design.transpose();
        let y = nalgebra::DVector::from_column_slice(ds.response());
        let resid = &y - &hat * &y;
        let oracle: f64 = (0..n).map(|i| (resid[i] / (1.0 - hat[(i, i)])).powi(2)).sum();
        let got = loo_prediction_error(&RegressorSpec::linear(), &ds, LooMode::ExactLoo, 0).unwrap();
        assert!((got - oracle).abs() <= 1e-8 * oracle, "{got} vs {oracle}");
    }
}

#[test]
fn mean_predictor_leave_one_out_closed_form() {
    let ds = random_linear_data(25, 2, 9);
    let n = ds.n();
    let y = ds.response();
    let mean = y.iter().sum::<f64>() / n as f64;
    let oracle: f64 = y
        .iter()
        .map(|&v| ((n as f64 * mean - v) / (n as f64 - 1.0) - v).powi(2))
        .sum();
    // k-NN with k = n - 1 averages every other row.
    let reg = RegressorSpec::knn(n - 1).unwrap();
    let got = loo_prediction_error(&reg, &ds, LooMode::ExactLoo, 0).unwrap();
    assert!((got - oracle).abs() <= 1e-9 * oracle);
}

#[test]
fn rescaled_scores_hand_arithmetic() {
    let sr = residual_score(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
    let unc = UncertaintyEstimates::with_floors(vec![1.0, 0.5, 4.0], vec![1.0, 0.5, 5.0], 20, (1e-12, 1e-12)).unwrap();
    assert_eq!(arithmetic_score(&sr, &unc).unwrap().values, vec![0.5, 2.0, 3.0 / 9.0]);
    assert_eq!(geometric_score(&sr, &unc).unwrap().values, vec![1.0, 4.0, 3.0 / 20f64.sqrt()]);
}
