use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Columns, RegressionTree, TreeParams};
use super::{rows_of, Predictor};
use crate::error::{Error, Result};
use crate::seed;

/// Bagged CART trees with per-split feature subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    /// `None` means grow until leaves are pure or hit `min_samples_leaf`.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features tried per split; `None` is `ceil(sqrt(d))`.
    pub max_features: Option<f64>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::config("random forest needs at least one tree"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        if let Some(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config("max_features must be in (0, 1]"));
            }
        }
        if self.max_depth == Some(0) {
            return Err(Error::config("max_depth must be at least 1"));
        }
        Ok(())
    }

    fn features_per_split(&self, d: usize) -> usize {
        match self.max_features {
            Some(f) => ((f * d as f64).ceil() as usize).clamp(1, d.max(1)),
            None => ((d as f64).sqrt().ceil() as usize).max(1),
        }
    }

    pub(crate) fn train(&self, x: &Array2<f64>, y: &[f64], fit_seed: u64) -> Forest {
        let n = y.len();
        let cols = Columns::new(x);
        let params = TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: 2,
            max_features: self.features_per_split(x.ncols()),
        };
        let trees: Vec<RegressionTree> = (0..self.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng_for(fit_seed, &[t as u64]);
                let rows: Vec<usize> = if self.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(&cols, y, &rows, params, &mut rng)
            })
            .collect();
        Forest {
            trees,
            n_features: x.ncols(),
        }
    }
}

pub(crate) struct Forest {
    trees: Vec<RegressionTree>,
    n_features: usize,
}

impl Forest {
    /// Prediction using only the first `count` trees.
    pub(crate) fn predict_with(&self, x: &Array2<f64>, count: usize) -> Vec<f64> {
        let used = &self.trees[..count.min(self.trees.len())];
        rows_of(x)
            .map(|row| used.iter().map(|t| t.predict_row(&row)).sum::<f64>() / used.len() as f64)
            .collect()
    }
}

impl Predictor for Forest {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_with(x, self.trees.len()))
    }
}
