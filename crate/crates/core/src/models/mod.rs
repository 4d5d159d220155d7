//! Pluggable regressors and the K-fold out-of-sample prediction engine.
//!
//! Everything downstream (uncertainty, scores, filtering, conformal
//! detection) is written against the [`Regressor`] trait, so any model can be
//! plugged in. [`RegressorSpec`] is the built-in implementation covering the
//! families the command line exposes.

mod boosting;
pub mod cv;
pub mod external;
mod forest;
mod hist;
mod knn;
mod linear;
mod tree;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use boosting::BoostingConfig;
pub use cv::{assign_folds, cross_fit, oos_predict, CrossFit, FoldAssignment, OosPrediction};
pub use external::ExternalConfig;
pub use forest::ForestConfig;
pub use knn::KnnConfig;
pub use linear::LinearConfig;

use crate::error::{Error, Result};
use crate::seed;

/// A fitted model.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>>;
}

/// A model family that can be trained. `fit` must be a pure function of its
/// arguments so that cross-fitting and bootstrapping are reproducible.
pub trait Regressor: Send + Sync {
    fn name(&self) -> String;

    /// Smallest training set the family accepts.
    fn min_train_rows(&self) -> usize {
        1
    }

    fn fit(&self, x: &Array2<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>>;

    /// Model that regresses absolute residuals for the aleatoric estimate.
    /// `None` means the model itself.
    fn residual_model(&self) -> Option<&dyn Regressor> {
        None
    }
}

/// The regressor used for residual sizes: `reg`'s own choice, else `reg`.
pub fn residual_regressor(reg: &dyn Regressor) -> &dyn Regressor {
    reg.residual_model().unwrap_or(reg)
}

pub(crate) fn rows_of(x: &Array2<f64>) -> impl Iterator<Item = Vec<f64>> + '_ {
    x.rows().into_iter().map(|r| r.to_vec())
}

/// Built-in family plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelConfig {
    LinearLeastSquares,
    KNearestNeighbors(KnnConfig),
    RandomForest(ForestConfig),
    GradientBoostedTrees(BoostingConfig),
    External(ExternalConfig),
}

impl ModelConfig {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelConfig::LinearLeastSquares => "linear-least-squares",
            ModelConfig::KNearestNeighbors(_) => "k-nearest-neighbors",
            ModelConfig::RandomForest(_) => "random-forest",
            ModelConfig::GradientBoostedTrees(_) => "gradient-boosted-trees",
            ModelConfig::External(_) => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub model: ModelConfig,
    pub seed: u64,
    /// Separate configuration for the residual-size regressor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Box<RegressorSpec>>,
}

fn parse_param<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(format!("bad value '{raw}' for hyperparameter '{key}'")))
}

fn parse_depth(key: &str, raw: &str) -> Result<Option<usize>> {
    match raw {
        "none" | "None" | "" => Ok(None),
        _ => parse_param(key, raw).map(Some),
    }
}

impl RegressorSpec {
    pub fn new(model: ModelConfig, seed: u64) -> Result<Self> {
        let spec = Self { model, seed, residual: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        Self { model: ModelConfig::LinearLeastSquares, seed: 0, residual: None }
    }

    pub fn knn(k: usize) -> Result<Self> {
        Self::new(ModelConfig::KNearestNeighbors(KnnConfig { k }), 0)
    }

    pub fn random_forest(cfg: ForestConfig, seed: u64) -> Result<Self> {
        Self::new(ModelConfig::RandomForest(cfg), seed)
    }

    pub fn boosting(cfg: BoostingConfig, seed: u64) -> Result<Self> {
        Self::new(ModelConfig::GradientBoostedTrees(cfg), seed)
    }

    pub fn external(command: impl Into<String>) -> Result<Self> {
        Self::new(ModelConfig::External(ExternalConfig { command: command.into() }), 0)
    }

    /// Use `residual` to regress absolute residuals instead of `self`.
    pub fn with_residual_model(mut self, residual: RegressorSpec) -> Result<Self> {
        residual.validate()?;
        self.residual = Some(Box::new(residual));
        Ok(self)
    }

    /// Build from a family name and string hyperparameters, as given on the
    /// command line. Unknown keys are rejected.
    pub fn from_params(family: &str, params: &BTreeMap<String, String>, seed: u64) -> Result<Self> {
        let unknown = |k: &str| Err(Error::config(format!("unknown hyperparameter '{k}' for family '{family}'")));
        let model = match family {
            "linear" | "linear-least-squares" | "ols" => {
                if let Some(k) = params.keys().next() {
                    return unknown(k);
                }
                ModelConfig::LinearLeastSquares
            }
            "knn" | "k-nearest-neighbors" => {
                let mut c = KnnConfig::default();
                for (k, v) in params {
                    match k.as_str() {
                        "k" => c.k = parse_param(k, v)?,
                        _ => return unknown(k),
                    }
                }
                ModelConfig::KNearestNeighbors(c)
            }
            "rf" | "random-forest" => {
                let mut c = ForestConfig::default();
                for (k, v) in params {
                    match k.as_str() {
                        "trees" => c.trees = parse_param(k, v)?,
                        "max_depth" => c.max_depth = parse_depth(k, v)?,
                        "min_samples_leaf" => c.min_samples_leaf = parse_param(k, v)?,
                        "max_features" => c.max_features = Some(parse_param(k, v)?),
                        "bootstrap" => c.bootstrap = parse_param(k, v)?,
                        _ => return unknown(k),
                    }
                }
                ModelConfig::RandomForest(c)
            }
            "gbt" | "gbm" | "gradient-boosted-trees" => {
                let mut c = BoostingConfig::default();
                for (k, v) in params {
                    match k.as_str() {
                        "rounds" => c.rounds = parse_param(k, v)?,
                        "max_depth" => c.max_depth = parse_param(k, v)?,
                        "learning_rate" => c.learning_rate = parse_param(k, v)?,
                        "min_samples_leaf" => c.min_samples_leaf = parse_param(k, v)?,
                        "max_bins" => c.max_bins = parse_param(k, v)?,
                        _ => return unknown(k),
                    }
                }
                ModelConfig::GradientBoostedTrees(c)
            }
            "external" => {
                let mut command = None;
                for (k, v) in params {
                    match k.as_str() {
                        "command" => command = Some(v.clone()),
                        _ => return unknown(k),
                    }
                }
                let command = command.ok_or_else(|| Error::config("external family needs command=<shell command>"))?;
                ModelConfig::External(ExternalConfig { command })
            }
            other => return Err(Error::config(format!("unknown model family '{other}'"))),
        };
        Self::new(model, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.residual {
            r.validate()?;
        }
        match &self.model {
            ModelConfig::LinearLeastSquares => Ok(()),
            ModelConfig::KNearestNeighbors(c) => c.validate(),
            ModelConfig::RandomForest(c) => c.validate(),
            ModelConfig::GradientBoostedTrees(c) => c.validate(),
            ModelConfig::External(c) => c.validate(),
        }
    }
}

impl Regressor for RegressorSpec {
    fn name(&self) -> String {
        self.model.family_name().to_string()
    }

    fn min_train_rows(&self) -> usize {
        match &self.model {
            ModelConfig::KNearestNeighbors(c) => c.k,
            _ => 1,
        }
    }

    fn fit(&self, x: &Array2<f64>, y: &[f64], fit_seed: u64) -> Result<Box<dyn Predictor>> {
        self.validate()?;
        let s = seed::derive(self.seed, &[seed::TAG_FIT, fit_seed]);
        Ok(match &self.model {
            ModelConfig::LinearLeastSquares => LinearConfig.fit(x, y)?,
            ModelConfig::KNearestNeighbors(c) => c.fit(x, y),
            ModelConfig::RandomForest(c) => Box::new(c.train(x, y, s)),
            ModelConfig::GradientBoostedTrees(c) => Box::new(c.train(x, y, s)),
            ModelConfig::External(c) => c.fit(x, y, s),
        })
    }

    fn residual_model(&self) -> Option<&dyn Regressor> {
        self.residual.as_deref().map(|r| r as &dyn Regressor)
    }
}

/// A trained model plus a fingerprint of the rows it was trained on.
pub struct FittedModel {
    predictor: Box<dyn Predictor>,
    fingerprint: u64,
}

impl std::fmt::Debug for FittedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedModel")
            .field("n_features", &self.predictor.n_features())
            .field("fingerprint", &format_args!("{:016x}", self.fingerprint))
            .finish()
    }
}

/// FNV-1a over the bit patterns of the training data.
fn fingerprint(x: &Array2<f64>, y: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x.iter().chain(y) {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

impl FittedModel {
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn n_features(&self) -> usize {
        self.predictor.n_features()
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        if x.ncols() != self.predictor.n_features() {
            return Err(Error::data(format!(
                "model trained on {} features, got {}",
                self.predictor.n_features(),
                x.ncols()
            )));
        }
        let out = self.predictor.predict(x)?;
        if out.len() != x.nrows() {
            return Err(Error::numerical("predictor returned the wrong number of values"));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("predictor returned a non-finite value"));
        }
        Ok(out)
    }
}

/// Train `reg` on `(x, y)`.
pub fn fit(reg: &dyn Regressor, x: &Array2<f64>, y: &[f64], seed: u64) -> Result<FittedModel> {
    if x.nrows() != y.len() {
        return Err(Error::data(format!(
            "feature matrix has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < reg.min_train_rows().max(1) {
        return Err(Error::data(format!(
            "{} needs at least {} training rows, got {}",
            reg.name(),
            reg.min_train_rows().max(1),
            y.len()
        )));
    }
    Ok(FittedModel {
        predictor: reg.fit(x, y, seed)?,
        fingerprint: fingerprint(x, y),
    })
}
