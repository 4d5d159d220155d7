//! Iterative removal of the worst-scored rows, with the removal level picked
//! by out-of-sample R² over the whole dataset.
//!
//! For each candidate level `k` (a percentage), the `⌈k·n/100⌉` rows with
//! the highest current scores are set aside, the model is cross-fit on the
//! rest, and R² is computed over all `n` rows. Rows that were set aside are
//! predicted by the average of the fold models. The level with the largest
//! R² wins; ties go to the smaller level.
//!
//! In [`FilterMode::Iterative`] the scores used at level `k` are the ones
//! produced by the fit at the previous level, so uncertainties and scores
//! are refreshed as the data gets cleaner. [`FilterMode::FrozenScores`]
//! ranks every level by the initial scores and evaluates levels in
//! parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Regressor;
use crate::pipeline::{score_with_holdout, ScoredRows, ScoringParams};
use crate::scores::{ranking, ScoreMethod, ScoreVector};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    Iterative,
    FrozenScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSearch {
    /// Every integer percentage `1..=K_err`.
    Full,
    /// Every `step`-th percentage, then the neighbours of the best one.
    CoarseToFine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub scoring: ScoringParams,
    /// Largest percentage of rows that may be removed.
    pub max_error_percent: usize,
    pub mode: FilterMode,
    pub search: GridSearch,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            scoring: ScoringParams::default(),
            max_error_percent: 20,
            mode: FilterMode::Iterative,
            search: GridSearch::Full,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        if !(1..=50).contains(&self.max_error_percent) {
            return Err(Error::config(format!(
                "max error percent must be in 1..=50, got {}",
                self.max_error_percent
            )));
        }
        Ok(())
    }

    /// Seed of the fit that produces scores at level `k` (0 = no removal).
    pub fn level_seed(&self, k: usize) -> u64 {
        seed::derive(self.seed, &[seed::TAG_FILTER, k as u64])
    }
}

/// Rows removed at level `k` percent out of `n`.
pub fn removal_count(n: usize, k: usize) -> usize {
    (k * n).div_ceil(100)
}

/// `1 - Σ(y - ŷ)² / Σ(y - ȳ)²` over every row.
pub fn r2_full(y: &[f64], predictions: &[f64]) -> Result<f64> {
    if y.len() != predictions.len() {
        return Err(Error::data(format!("{} predictions for {} rows", predictions.len(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::data("R² of an empty dataset"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(tss > 0.0) {
        return Err(Error::numerical("response has zero variance; R² is undefined"));
    }
    let rss: f64 = y.iter().zip(predictions).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - rss / tss)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSnapshot {
    /// Level whose fit produced these scores; 0 is the unfiltered fit.
    pub level: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterOutcome {
    /// Selected percentage.
    pub k_star: usize,
    /// Removed row indices, most suspicious first.
    pub removed: Vec<usize>,
    pub removed_ids: Vec<String>,
    /// `(k, R²)` for every evaluated level, ascending in `k`.
    pub r2_trace: Vec<(usize, f64)>,
    /// Score vectors in evaluation order, starting with the unfiltered one.
    pub snapshots: Vec<ScoreSnapshot>,
    /// Scores from the unfiltered fit.
    pub initial_scores: ScoreVector,
    /// Scores from the fit at `k_star`, covering every row.
    pub final_scores: ScoreVector,
    pub method: ScoreMethod,
    pub mode: FilterMode,
    pub search: GridSearch,
    /// Fold seed used at each evaluated level.
    pub level_seeds: Vec<(usize, u64)>,
}

impl FilterOutcome {
    /// Indices of rows kept, in row order.
    pub fn retained(&self, n: usize) -> Vec<usize> {
        let mut keep = vec![true; n];
        for &i in &self.removed {
            keep[i] = false;
        }
        (0..n).filter(|&i| keep[i]).collect()
    }

    pub fn removed_fraction(&self, n: usize) -> f64 {
        self.removed.len() as f64 / n as f64
    }
}

struct Level {
    k: usize,
    removed: Vec<usize>,
    r2: f64,
    fit: ScoredRows,
}

fn evaluate_level(reg: &dyn Regressor, ds: &Dataset, cfg: &FilterConfig, k: usize, ranks: &[f64]) -> Result<Level> {
    let n = ds.n();
    let removed: Vec<usize> = ranking(ranks).into_iter().take(removal_count(n, k)).collect();
    let mut keep = vec![true; n];
    for &i in &removed {
        keep[i] = false;
    }
    let fit_rows: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let fit = score_with_holdout(reg, ds, &fit_rows, &cfg.scoring, cfg.level_seed(k))?;
    let r2 = r2_full(ds.response(), &fit.predictions)?;
    if !r2.is_finite() {
        return Err(Error::numerical(format!("R² at level {k} is not finite")));
    }
    Ok(Level { k, removed, r2, fit })
}

fn coarse_step(kerr: usize) -> usize {
    ((kerr as f64).sqrt().round() as usize).max(1)
}

/// Run the filter on `ds`.
pub fn filter_errors(reg: &dyn Regressor, ds: &Dataset, cfg: &FilterConfig) -> Result<FilterOutcome> {
    cfg.validate()?;
    let n = ds.n();
    let kerr = cfg.max_error_percent;
    let kept_min = n - removal_count(n, kerr).min(n);
    let k_folds = cfg.scoring.folds;
    if kept_min < k_folds || kept_min < 2 * k_folds.max(reg.min_train_rows()) {
        return Err(Error::data(format!(
            "{n} rows leave {kept_min} after removing {kerr}%, too few for {k_folds}-fold cross-fitting"
        )));
    }
    let mean = ds.response().iter().sum::<f64>() / n as f64;
    if ds.response().iter().all(|&v| v == mean) {
        return Err(Error::numerical("response has zero variance; R² is undefined"));
    }

    let all: Vec<usize> = (0..n).collect();
    let initial = score_with_holdout(reg, ds, &all, &cfg.scoring, cfg.level_seed(0))?;
    let mut snapshots = vec![ScoreSnapshot {
        level: 0,
        values: initial.scores.values.clone(),
    }];

    let coarse: Vec<usize> = match cfg.search {
        GridSearch::Full => (1..=kerr).collect(),
        GridSearch::CoarseToFine => {
            let step = coarse_step(kerr);
            let mut c: Vec<usize> = (1..=kerr).filter(|k| k % step == 0).collect();
            if c.last() != Some(&kerr) {
                c.push(kerr);
            }
            c
        }
    };

    let mut levels: Vec<Level> = Vec::new();
    let run = |ks: &[usize], levels: &mut Vec<Level>, snapshots: &mut Vec<ScoreSnapshot>| -> Result<()> {
        match cfg.mode {
            FilterMode::FrozenScores => {
                let got: Vec<Level> = ks
                    .par_iter()
                    .map(|&k| evaluate_level(reg, ds, cfg, k, &initial.scores.values))
                    .collect::<Result<_>>()?;
                levels.extend(got);
            }
            FilterMode::Iterative => {
                for &k in ks {
                    // Scores from the closest already-evaluated smaller level.
                    let prev = levels
                        .iter()
                        .filter(|l| l.k < k)
                        .max_by_key(|l| l.k)
                        .map_or(&initial.scores.values, |l| &l.fit.scores.values);
                    let level = evaluate_level(reg, ds, cfg, k, prev)?;
                    snapshots.push(ScoreSnapshot {
                        level: k,
                        values: level.fit.scores.values.clone(),
                    });
                    levels.push(level);
                }
            }
        }
        Ok(())
    };
    run(&coarse, &mut levels, &mut snapshots)?;

    if cfg.search == GridSearch::CoarseToFine {
        let best = best_level(&levels);
        let step = coarse_step(kerr);
        let fine: Vec<usize> = (best.saturating_sub(step - 1).max(1)..=(best + step - 1).min(kerr))
            .filter(|k| !levels.iter().any(|l| l.k == *k))
            .collect();
        run(&fine, &mut levels, &mut snapshots)?;
    }

    levels.sort_by_key(|l| l.k);
    let k_star = best_level(&levels);
    let chosen = levels.iter().find(|l| l.k == k_star).expect("selected level was evaluated");
    Ok(FilterOutcome {
        k_star,
        removed: chosen.removed.clone(),
        removed_ids: chosen.removed.iter().map(|&i| ds.row_ids()[i].clone()).collect(),
        r2_trace: levels.iter().map(|l| (l.k, l.r2)).collect(),
        snapshots,
        initial_scores: initial.scores.clone(),
        final_scores: chosen.fit.scores.clone(),
        method: cfg.scoring.method,
        mode: cfg.mode,
        search: cfg.search,
        level_seeds: std::iter::once(0)
            .chain(levels.iter().map(|l| l.k))
            .map(|k| (k, cfg.level_seed(k)))
            .collect(),
    })
}

/// Level with the largest R², smallest level on ties.
fn best_level(levels: &[Level]) -> usize {
    let mut best: Option<&Level> = None;
    for l in levels {
        best = match best {
            Some(b) if l.r2 < b.r2 || (l.r2 == b.r2 && l.k > b.k) => Some(b),
            _ => Some(l),
        };
    }
    best.map_or(1, |b| b.k)
}
