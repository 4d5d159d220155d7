//! K-fold cross-fitting.
//!
//! Every training row gets a prediction from the model trained on the other
//! K-1 folds. Rows outside the training set (for example rows removed by the
//! filter) get the mean of the K fold models' predictions, since no fold
//! claims them.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, Regressor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of_row: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    /// Use an explicit assignment; every fold in `0..k` must be non-empty.
    pub fn from_vec(fold_of_row: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::config("need at least 2 folds"));
        }
        let mut seen = vec![false; k];
        for &f in &fold_of_row {
            if f >= k {
                return Err(Error::config(format!("fold index {f} outside 0..{k}")));
            }
            seen[f] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("every fold must contain at least one row"));
        }
        Ok(Self { fold_of_row, k })
    }

    pub fn fold_of_row(&self) -> &[usize] {
        &self.fold_of_row
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of_row.len()
    }

    /// Rows (held-out, training) for fold `f`.
    pub fn rows(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&i| self.fold_of_row[i] == f)
    }
}

/// Seeded shuffle, then contiguous chunks; the first `n % k` folds take one
/// extra row, so sizes differ by at most one.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    if n < k {
        return Err(Error::data(format!("{n} rows cannot fill {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng_for(seed, &[seed::TAG_FOLDS]));
    let (base, extra) = (n / k, n % k);
    let mut fold_of_row = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &perm[pos..pos + size] {
            fold_of_row[row] = f;
        }
        pos += size;
    }
    FoldAssignment::from_vec(fold_of_row, k)
}

/// Out-of-sample predictions for every row of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosPrediction {
    pub predictions: Vec<f64>,
    pub fold_of_row: Vec<usize>,
    pub fold_count: usize,
}

#[derive(Debug, Clone)]
pub struct CrossFit {
    pub oos: OosPrediction,
    /// Mean fold-model prediction for each row of the extra matrix.
    pub extra: Vec<f64>,
}

/// Cross-fit `reg` on `(x, y)` with the given folds. When `extra` is given,
/// those rows are predicted by every fold model and averaged.
pub fn cross_fit(
    reg: &dyn Regressor,
    x: &Array2<f64>,
    y: &[f64],
    folds: &FoldAssignment,
    seed: u64,
    extra: Option<&Array2<f64>>,
) -> Result<CrossFit> {
    let n = y.len();
    if x.nrows() != n || folds.n() != n {
        return Err(Error::data("features, response and folds disagree on row count"));
    }
    let per_fold: Vec<(Vec<usize>, Vec<f64>, Vec<f64>)> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let (held, train) = folds.rows(f);
            let xt = x.select(Axis(0), &train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit(reg, &xt, &yt, seed::derive(seed, &[seed::TAG_FIT, f as u64]))?;
            let held_pred = model.predict(&x.select(Axis(0), &held))?;
            let extra_pred = match extra {
                Some(e) => model.predict(e)?,
                None => Vec::new(),
            };
            Ok((held, held_pred, extra_pred))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![0.0; n];
    let m = extra.map_or(0, |e| e.nrows());
    let mut extra_sum = vec![0.0; m];
    for (held, pred, ext) in &per_fold {
        for (&i, &p) in held.iter().zip(pred) {
            predictions[i] = p;
        }
        for (s, e) in extra_sum.iter_mut().zip(ext) {
            *s += e;
        }
    }
    let k = folds.k() as f64;
    Ok(CrossFit {
        oos: OosPrediction {
            predictions,
            fold_of_row: folds.fold_of_row().to_vec(),
            fold_count: folds.k(),
        },
        extra: extra_sum.into_iter().map(|s| s / k).collect(),
    })
}

/// K-fold out-of-sample predictions for every row of `ds`.
pub fn oos_predict(reg: &dyn Regressor, ds: &Dataset, k: usize, seed: u64) -> Result<OosPrediction> {
    let folds = assign_folds(ds.n(), k, seed)?;
    Ok(cross_fit(reg, ds.features(), ds.response(), &folds, seed, None)?.oos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::RegressorSpec;

    fn col(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn one_nn_across_explicit_folds() {
        let x = col(&[0.0, 1.0, 10.0, 11.0]);
        let y = vec![0.0, 1.0, 10.0, 11.0];
        let folds = FoldAssignment::from_vec(vec![0, 0, 1, 1], 2).unwrap();
        let cf = cross_fit(&RegressorSpec::knn(1).unwrap(), &x, &y, &folds, 0, None).unwrap();
        assert_eq!(cf.oos.predictions, vec![10.0, 10.0, 1.0, 1.0]);
    }

    #[test]
    fn fold_sizes_balanced_and_exact() {
        for (n, k) in [(10, 3), (7, 7), (101, 5), (2, 2)] {
            let f = assign_folds(n, k, 42).unwrap();
            let mut sizes = vec![0usize; k];
            for &g in f.fold_of_row() {
                assert!(g < k);
                sizes[g] += 1;
            }
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn infeasible_folds_rejected() {
        assert!(assign_folds(3, 5, 0).is_err());
        assert!(assign_folds(10, 1, 0).is_err());
        assert!(FoldAssignment::from_vec(vec![0, 0, 0], 2).is_err());
    }

    #[test]
    fn constant_response_oos() {
        let ds = Dataset::new(Array2::from_shape_fn((20, 2), |(i, j)| (i + j) as f64), vec![4.5; 20]).unwrap();
        for spec in [RegressorSpec::linear(), RegressorSpec::knn(3).unwrap()] {
            let oos = oos_predict(&spec, &ds, 5, 1).unwrap();
            assert!(oos.predictions.iter().all(|p| (p - 4.5).abs() < 1e-9));
        }
    }

    #[test]
    fn extra_rows_average_fold_models() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = vec![0.0, 0.0, 4.0, 4.0];
        let folds = FoldAssignment::from_vec(vec![0, 1, 0, 1], 2).unwrap();
        let cf = cross_fit(&RegressorSpec::knn(1).unwrap(), &x, &y, &folds, 0, Some(&col(&[2.0]))).unwrap();
        // Fold 0 model trains on x=1,3 -> nearest to 2 is x=1 (tie, first row) -> 0.
        // Fold 1 model trains on x=0,2 -> exact match -> 4.
        assert_eq!(cf.extra, vec![2.0]);
    }
}
