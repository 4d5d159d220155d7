use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::hist::{fit_binned, Binned};
use super::tree::RegressionTree;
use super::{rows_of, Predictor};
use crate::error::{Error, Result};

/// Gradient-boosted regression trees with squared loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Quantile bins per feature for split search.
    pub max_bins: usize,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            max_bins: 32,
        }
    }
}

impl BoostingConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("boosting needs at least one round"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("max_depth must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(2..=256).contains(&self.max_bins) {
            return Err(Error::config("max_bins must lie in 2..=256"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn train(&self, x: &Array2<f64>, y: &[f64], _fit_seed: u64) -> Boosted {
        let n = y.len();
        let binned = Binned::new(x, self.max_bins);
        let base = y.iter().sum::<f64>() / n as f64;
        let mut current = vec![base; n];
        let mut residual = vec![0.0; n];
        let mut trees = Vec::with_capacity(self.rounds);
        for _ in 0..self.rounds {
            for i in 0..n {
                residual[i] = y[i] - current[i];
            }
            let (tree, fitted) = fit_binned(&binned, &residual, self.max_depth, self.min_samples_leaf);
            for (c, f) in current.iter_mut().zip(&fitted) {
                *c += self.learning_rate * f;
            }
            let done = tree.leaf_count() == 1;
            trees.push(tree);
            if done {
                // Residuals are constant; later rounds would repeat this stump.
                break;
            }
        }
        Boosted {
            base,
            learning_rate: self.learning_rate,
            trees,
            n_features: x.ncols(),
        }
    }
}

pub(crate) struct Boosted {
    base: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
    n_features: usize,
}

impl Boosted {
    pub(crate) fn predict_with(&self, x: &Array2<f64>, rounds: usize) -> Vec<f64> {
        let used = &self.trees[..rounds.min(self.trees.len())];
        rows_of(x)
            .map(|row| self.base + self.learning_rate * used.iter().map(|t| t.predict_row(&row)).sum::<f64>())
            .collect()
    }
}

impl Predictor for Boosted {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_with(x, self.trees.len()))
    }
}
