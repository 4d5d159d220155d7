use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{rows_of, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 10 }
    }
}

impl KnnConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k-nearest-neighbors needs k >= 1"));
        }
        Ok(())
    }

    pub(crate) fn fit(&self, x: &Array2<f64>, y: &[f64]) -> Box<dyn Predictor> {
        Box::new(Knn {
            k: self.k,
            x: x.clone(),
            y: y.to_vec(),
        })
    }
}

/// Mean response of the `k` nearest training rows (Euclidean); equal
/// distances are resolved by training-row order.
pub(crate) struct Knn {
    k: usize,
    x: Array2<f64>,
    y: Vec<f64>,
}

impl Predictor for Knn {
    fn n_features(&self) -> usize {
        self.x.ncols()
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        Ok(rows_of(x)
            .map(|q| {
                dist.clear();
                dist.extend(self.x.rows().into_iter().enumerate().map(|(i, r)| {
                    let d2: f64 = r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, i)
                }));
                let k = self.k.min(dist.len());
                dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                dist[..k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / k as f64
            })
            .collect())
    }
}
