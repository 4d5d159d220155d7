use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{rows_of, Predictor};
use crate::error::{Error, Result};

/// Ordinary least squares with intercept. A rank-deficient design falls back
/// to ridge with `lambda = 1e-8 * trace(XᵀX) / d` on centred columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig;

const SINGULAR_RATIO: f64 = 1e-12;

impl LinearConfig {
    pub(crate) fn fit(&self, x: &Array2<f64>, y: &[f64]) -> Result<Box<dyn Predictor>> {
        let (n, d) = x.dim();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let x_mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
        let xc = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - x_mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

        let mut gram = xc.transpose() * &xc;
        let rhs = xc.transpose() * yc;
        let trace = gram.trace();
        let coef = if d == 0 || trace <= 0.0 {
            DVector::zeros(d)
        } else {
            let eig = gram.clone().symmetric_eigen();
            let max = eig.eigenvalues.max();
            let min = eig.eigenvalues.min();
            if min <= SINGULAR_RATIO * max {
                let lambda = 1e-8 * trace / d as f64;
                for j in 0..d {
                    gram[(j, j)] += lambda;
                }
            }
            match gram.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => return Err(Error::numerical("least-squares system is not positive definite")),
            }
        };
        let coef: Vec<f64> = coef.iter().copied().collect();
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::numerical("non-finite least-squares coefficients"));
        }
        let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
        Ok(Box::new(Linear { intercept, coef }))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub(crate) intercept: f64,
    pub(crate) coef: Vec<f64>,
}

impl Predictor for Linear {
    fn n_features(&self) -> usize {
        self.coef.len()
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(rows_of(x)
            .map(|r| self.intercept + r.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}
