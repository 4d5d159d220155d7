//! Synthetic benchmark generators and Monte-Carlo experiment drivers.
//!
//! Two data-generating settings are provided:
//!
//! * **Setting 1** (heteroscedastic, nonparametric): five covariates from
//!   the mixture `0.1·U(-1.5,-0.5) + 0.9·U(-0.5,1.5)`; the response depends
//!   on `x₁` only, through `f(x) = (x-1)²(x+1)` and a bimodal split
//!   `±g(x)`, `g(x) = 2·sqrt(x-0.5)` for `x ≥ 0.5`. The sparse left region
//!   carries epistemic uncertainty and the bimodal right region aleatoric
//!   uncertainty.
//! * **Setting 2** (linear): `y = βᵀx + ε`, `x ~ U(-1.5,1.5)⁵`, `β ∈ {±1}⁵`.
//!
//! The noise level `0.5` is read as a variance by default;
//! [`NoiseReading::StdDev`] reads it as a standard deviation instead.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ndarray::Array2;

use crate::conformal::{bh_procedure, conformal_pvalues};
use crate::data::{inject_corruption, CorruptionSpec, Dataset};
use crate::error::{Error, Result};
use crate::filter::{filter_errors, FilterConfig, FilterMode, GridSearch};
use crate::metrics::{auprc, auroc, fdr_power};
use crate::models::RegressorSpec;
use crate::pipeline::{FittedScorer, ScoringParams};
use crate::scores::ScoreMethod;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseReading {
    Variance,
    StdDev,
}

impl std::fmt::Display for NoiseReading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseReading::Variance => "variance",
            NoiseReading::StdDev => "std-dev",
        })
    }
}

/// Gaussian noise level and how to read it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub level: f64,
    pub reading: NoiseReading,
}

impl Default for Noise {
    fn default() -> Self {
        Self {
            level: 0.5,
            reading: NoiseReading::Variance,
        }
    }
}

impl Noise {
    pub fn std_dev(&self) -> f64 {
        match self.reading {
            NoiseReading::Variance => self.level.sqrt(),
            NoiseReading::StdDev => self.level,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::config(format!("noise level must be finite and non-negative, got {}", self.level)));
        }
        Ok(())
    }
}

pub const DIM: usize = 5;

pub fn setting1_mean(x: f64) -> f64 {
    (x - 1.0) * (x - 1.0) * (x + 1.0)
}

pub fn setting1_split(x: f64) -> f64 {
    if x >= 0.5 {
        2.0 * (x - 0.5).sqrt()
    } else {
        0.0
    }
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::config(format!("invalid noise: {e}")))
}

/// Draw `n` rows of Setting 1.
pub fn gen_setting1(n: usize, noise: Noise, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::config("sample size must be at least 1"));
    }
    noise.validate()?;
    let eps = normal(noise.std_dev())?;
    let mut rng = seed::rng(seed);
    let mut x = Array2::zeros((n, DIM));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..DIM {
            x[[i, j]] = if rng.random::<f64>() < 0.1 {
                rng.random_range(-1.5..-0.5)
            } else {
                rng.random_range(-0.5..1.5)
            };
        }
        let x1 = x[[i, 0]];
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        y.push(setting1_mean(x1) + sign * setting1_split(x1) + eps.sample(&mut rng));
    }
    Dataset::new(x, y)
}

/// Setting 2 with a fixed coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting2 {
    pub beta: [f64; DIM],
}

impl Setting2 {
    /// Coefficients with independent random signs.
    pub fn draw(seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut beta = [0.0; DIM];
        for b in &mut beta {
            *b = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        Self { beta }
    }

    pub fn generate(&self, n: usize, noise: Noise, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::config("sample size must be at least 1"));
        }
        noise.validate()?;
        let sd = noise.std_dev();
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_simple_fn((n, DIM), || rng.random_range(-1.5..1.5));
        let y = (0..n)
            .map(|i| {
                let signal: f64 = (0..DIM).map(|j| self.beta[j] * x[[i, j]]).sum();
                let e: f64 = StandardNormal.sample(&mut rng);
                signal + sd * e
            })
            .collect();
        Dataset::new(x, y)
    }
}

/// Draw `n` rows of Setting 2; the coefficients come from the same seed.
pub fn gen_setting2(n: usize, noise: Noise, seed: u64) -> Result<Dataset> {
    Setting2::draw(seed::derive(seed, &[0xBE7A])).generate(n, noise, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Setting {
    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            _ => Err(Error::config(format!("setting must be 1 or 2, got {k}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Setting::One => 1,
            Setting::Two => 2,
        }
    }

    /// Draw `n` rows; in Setting 2 the coefficients are drawn per call from
    /// `seed` so every split of one run shares them when generated together.
    pub fn generate(self, n: usize, noise: Noise, seed: u64) -> Result<Dataset> {
        match self {
            Setting::One => gen_setting1(n, noise, seed),
            Setting::Two => gen_setting2(n, noise, seed),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub setting: Setting,
    /// Rows per split.
    pub n: usize,
    pub fraction: f64,
    pub strengths: Vec<f64>,
    pub runs: usize,
    pub regressor: RegressorSpec,
    pub methods: Vec<ScoreMethod>,
    pub bootstrap: usize,
    pub folds: usize,
    pub alpha: f64,
    pub max_error_percent: usize,
    pub filter_mode: FilterMode,
    pub filter_search: GridSearch,
    pub noise: Noise,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(setting: Setting, regressor: RegressorSpec) -> Self {
        Self {
            setting,
            n: 200,
            fraction: 0.1,
            strengths: vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            runs: 50,
            regressor,
            methods: vec![ScoreMethod::Residual, ScoreMethod::Arithmetic, ScoreMethod::Geometric],
            bootstrap: 20,
            folds: 5,
            alpha: 0.1,
            max_error_percent: 20,
            filter_mode: FilterMode::Iterative,
            filter_search: GridSearch::Full,
            noise: Noise::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if self.n < 2 * self.folds {
            return Err(Error::config(format!("n = {} too small for {} folds", self.n, self.folds)));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::config("corruption fraction must lie in [0, 1]"));
        }
        if self.strengths.is_empty() || self.strengths.iter().any(|&a| a == 0.0 || !a.is_finite()) {
            return Err(Error::config("strengths must be non-empty, finite and nonzero"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one score method is required"));
        }
        self.noise.validate()?;
        self.regressor.validate()
    }

    fn scoring(&self, method: ScoreMethod) -> ScoringParams {
        ScoringParams {
            method,
            bootstrap: self.bootstrap,
            folds: self.folds,
            ..ScoringParams::default()
        }
    }

    /// Seed of Monte-Carlo replicate `run`.
    pub fn run_seed(&self, run: usize) -> u64 {
        seed::derive(self.seed, &[seed::TAG_RUN, run as u64])
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Mean and standard deviation across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    fn of(v: &[f64]) -> Self {
        let (mean, sd) = mean_sd(v);
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalRun {
    pub run: usize,
    pub method: ScoreMethod,
    pub strength: f64,
    pub fdr: f64,
    pub power: f64,
    pub auroc: f64,
    pub auprc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalCell {
    pub method: ScoreMethod,
    pub strength: f64,
    pub fdr: Stat,
    pub power: Stat,
    pub auroc: Stat,
    pub auprc: Stat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalTable {
    pub setting: u8,
    pub contaminated: bool,
    pub noise: Noise,
    pub runs: usize,
    pub cells: Vec<ConformalCell>,
    pub per_run: Vec<ConformalRun>,
}

impl ConformalTable {
    pub fn cell(&self, method: ScoreMethod, strength: f64) -> Option<&ConformalCell> {
        self.cells.iter().find(|c| c.method == method && c.strength == strength)
    }
}

/// Draw train, calibration and test sets of one run from one pooled sample so
/// that Setting 2's coefficients are shared.
fn draw_splits(cfg: &SimConfig, run_seed: u64) -> Result<[Dataset; 3]> {
    let pooled = cfg.setting.generate(3 * cfg.n, cfg.noise, seed::derive(run_seed, &[1]))?;
    let part = |s: usize| pooled.subset(&(s * cfg.n..(s + 1) * cfg.n).collect::<Vec<_>>());
    Ok([part(0), part(1), part(2)])
}

fn corrupt(ds: &Dataset, fraction: f64, strength: f64, seed: u64) -> Result<(Dataset, Vec<bool>)> {
    inject_corruption(ds, &CorruptionSpec { fraction, strength, seed })
}

fn one_conformal_run(cfg: &SimConfig, contaminated: bool, run: usize) -> Result<Vec<ConformalRun>> {
    let rs = cfg.run_seed(run);
    let [train, cal, test] = draw_splits(cfg, rs)?;
    // Rows picked for corruption do not depend on the strength.
    let mask_seed = |split: u64| seed::derive(rs, &[seed::TAG_CORRUPT, split]);
    let base = cfg.scoring(ScoreMethod::Arithmetic);
    let needs_unc = cfg.methods.iter().any(|m| m.needs_uncertainty());
    let fit = |train: &Dataset| -> Result<FittedScorer> {
        if needs_unc {
            FittedScorer::fit_all(&cfg.regressor, train, &base, seed::derive(rs, &[2]))
        } else {
            FittedScorer::fit(&cfg.regressor, train, &cfg.scoring(ScoreMethod::Residual), seed::derive(rs, &[2]))
        }
    };
    for m in &cfg.methods {
        if !m.is_row_wise() {
            return Err(Error::config(format!("{m} score cannot be used for conformal detection")));
        }
    }

    let clean_scorer = if contaminated { None } else { Some(fit(&train)?) };
    let clean_cal = match &clean_scorer {
        Some(s) => Some(s.parts(cal.features())?),
        None => None,
    };
    let mut out = Vec::new();
    for &a in &cfg.strengths {
        let (test_c, truth) = corrupt(&test, cfg.fraction, a, mask_seed(3))?;
        let (scorer_owned, cal_set);
        let (scorer, cal_parts) = if contaminated {
            let (train_c, _) = corrupt(&train, cfg.fraction, a, mask_seed(1))?;
            let (cal_c, _) = corrupt(&cal, cfg.fraction, a, mask_seed(2))?;
            scorer_owned = fit(&train_c)?;
            let parts = scorer_owned.parts(cal_c.features())?;
            cal_set = cal_c;
            (&scorer_owned, parts)
        } else {
            cal_set = cal.clone();
            (clean_scorer.as_ref().expect("fit above"), clean_cal.clone().expect("computed above"))
        };
        let test_parts = scorer.parts(test_c.features())?;
        for &method in &cfg.methods {
            let cal_scores = scorer.score_parts(&cal_parts, cal_set.response(), method)?;
            let test_scores = scorer.score_parts(&test_parts, test_c.response(), method)?;
            let p = conformal_pvalues(&cal_scores.values, &test_scores.values)?;
            let rejected = bh_procedure(&p, cfg.alpha)?;
            let (fdr, power) = fdr_power(&rejected, &truth)?;
            out.push(ConformalRun {
                run,
                method,
                strength: a,
                fdr,
                power,
                auroc: auroc(&test_scores.values, &truth)?,
                auprc: auprc(&test_scores.values, &truth)?,
            });
        }
    }
    Ok(out)
}

/// Monte-Carlo conformal detection study. With `contaminated`, the training
/// and calibration splits carry the same corruption as the test split.
pub fn run_conformal_experiment(cfg: &SimConfig, contaminated: bool) -> Result<ConformalTable> {
    cfg.validate()?;
    if cfg.fraction == 0.0 {
        return Err(Error::config("power needs a positive corruption fraction"));
    }
    let per_run: Vec<ConformalRun> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| one_conformal_run(cfg, contaminated, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &a in &cfg.strengths {
            let rows: Vec<&ConformalRun> = per_run.iter().filter(|r| r.method == method && r.strength == a).collect();
            let col = |f: fn(&ConformalRun) -> f64| Stat::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            cells.push(ConformalCell {
                method,
                strength: a,
                fdr: col(|r| r.fdr),
                power: col(|r| r.power),
                auroc: col(|r| r.auroc),
                auprc: col(|r| r.auprc),
            });
        }
    }
    Ok(ConformalTable {
        setting: cfg.setting.number(),
        contaminated,
        noise: cfg.noise,
        runs: cfg.runs,
        cells,
        per_run,
    })
}

/// Empirical `P(p ≤ α)` for benign test rows with a clean calibration set,
/// one value per run and per `alpha`.
pub fn conformal_validity(cfg: &SimConfig, method: ScoreMethod, alphas: &[f64]) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let rs = cfg.run_seed(run);
            let [train, cal, test] = draw_splits(cfg, rs)?;
            let scorer = FittedScorer::fit(&cfg.regressor, &train, &cfg.scoring(method), seed::derive(rs, &[2]))?;
            let p = conformal_pvalues(&scorer.score(&cal)?.values, &scorer.score(&test)?.values)?;
            Ok(alphas
                .iter()
                .map(|&a| p.iter().filter(|&&v| v <= a).count() as f64 / p.len() as f64)
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRun {
    pub run: usize,
    pub method: ScoreMethod,
    pub strength: f64,
    pub k_star: usize,
    pub auprc_before: f64,
    pub auprc_after: f64,
    pub removed_fraction: f64,
    /// Share of corrupted rows among the retained ones.
    pub error_fraction_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterCell {
    pub method: ScoreMethod,
    pub strength: f64,
    pub auprc_before: Stat,
    pub auprc_after: Stat,
    pub removed_fraction: Stat,
    pub error_fraction_after: Stat,
    /// Share of runs where AUPRC strictly improved.
    pub improved_share: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterTable {
    pub setting: u8,
    pub noise: Noise,
    pub runs: usize,
    pub mode: FilterMode,
    pub search: GridSearch,
    pub cells: Vec<FilterCell>,
    pub per_run: Vec<FilterRun>,
}

impl FilterTable {
    pub fn cell(&self, method: ScoreMethod, strength: f64) -> Option<&FilterCell> {
        self.cells.iter().find(|c| c.method == method && c.strength == strength)
    }
}

fn one_filter_run(cfg: &SimConfig, run: usize) -> Result<Vec<FilterRun>> {
    let rs = cfg.run_seed(run);
    let clean = cfg.setting.generate(cfg.n, cfg.noise, seed::derive(rs, &[1]))?;
    let mut out = Vec::new();
    for &a in &cfg.strengths {
        let (ds, truth) = corrupt(&clean, cfg.fraction, a, seed::derive(rs, &[seed::TAG_CORRUPT]))?;
        for &method in &cfg.methods {
            let fc = FilterConfig {
                scoring: cfg.scoring(method),
                max_error_percent: cfg.max_error_percent,
                mode: cfg.filter_mode,
                search: cfg.filter_search,
                seed: seed::derive(rs, &[3]),
            };
            let outcome = filter_errors(&cfg.regressor, &ds, &fc)?;
            let retained = outcome.retained(ds.n());
            let bad_left = retained.iter().filter(|&&i| truth[i]).count();
            out.push(FilterRun {
                run,
                method,
                strength: a,
                k_star: outcome.k_star,
                auprc_before: auprc(&outcome.initial_scores.values, &truth)?,
                auprc_after: auprc(&outcome.final_scores.values, &truth)?,
                removed_fraction: outcome.removed_fraction(ds.n()),
                error_fraction_after: bad_left as f64 / retained.len() as f64,
            });
        }
    }
    Ok(out)
}

/// Monte-Carlo filtering study on one setting.
pub fn run_filter_experiment(cfg: &SimConfig) -> Result<FilterTable> {
    cfg.validate()?;
    if cfg.fraction == 0.0 {
        return Err(Error::config("AUPRC needs a positive corruption fraction"));
    }
    let per_run: Vec<FilterRun> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| one_filter_run(cfg, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &a in &cfg.strengths {
            let rows: Vec<&FilterRun> = per_run.iter().filter(|r| r.method == method && r.strength == a).collect();
            let col = |f: fn(&FilterRun) -> f64| Stat::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            cells.push(FilterCell {
                method,
                strength: a,
                auprc_before: col(|r| r.auprc_before),
                auprc_after: col(|r| r.auprc_after),
                removed_fraction: col(|r| r.removed_fraction),
                error_fraction_after: col(|r| r.error_fraction_after),
                improved_share: rows.iter().filter(|r| r.auprc_after > r.auprc_before).count() as f64 / rows.len() as f64,
            });
        }
    }
    Ok(FilterTable {
        setting: cfg.setting.number(),
        noise: cfg.noise,
        runs: cfg.runs,
        mode: cfg.filter_mode,
        search: cfg.filter_search,
        cells,
        per_run,
    })
}

/// Monte-Carlo estimate of `P(|ε| < |ε' + a|)` for independent standard
/// normals, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub strength: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub fn corollary1_probability(a: f64, samples: usize, seed: u64) -> Result<ProbabilityEstimate> {
    if samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    if !a.is_finite() {
        return Err(Error::config("strength must be finite"));
    }
    const CHUNK: usize = 1 << 16;
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng_for(seed, &[c as u64]);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .filter(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let e2: f64 = StandardNormal.sample(&mut rng);
                    e.abs() < (e2 + a).abs()
                })
                .count()
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(ProbabilityEstimate {
        strength: a,
        estimate: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting1_shape_helpers() {
        assert_eq!(setting1_split(0.2), 0.0);
        assert_eq!(setting1_split(1.5), 2.0);
        assert_eq!(setting1_mean(1.0), 0.0);
        assert_eq!(setting1_mean(-1.0), 0.0);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_setting1(50, Noise::default(), 4).unwrap();
        let b = gen_setting1(50, Noise::default(), 4).unwrap();
        assert_eq!(a.response(), b.response());
        assert_eq!(a.features(), b.features());
        let c = gen_setting2(50, Noise::default(), 4).unwrap();
        assert_eq!(c.response(), gen_setting2(50, Noise::default(), 4).unwrap().response());
        assert_ne!(a.response(), gen_setting1(50, Noise::default(), 5).unwrap().response());
    }

    #[test]
    fn beta_is_signs() {
        for s in 0..20 {
            assert!(Setting2::draw(s).beta.iter().all(|b| b.abs() == 1.0));
        }
    }

    #[test]
    fn noise_readings() {
        assert!((Noise::default().std_dev() - 0.5f64.sqrt()).abs() < 1e-15);
        let sd = Noise {
            level: 0.5,
            reading: NoiseReading::StdDev,
        };
        assert_eq!(sd.std_dev(), 0.5);
    }

    #[test]
    fn noiseless_setting2_is_exactly_linear() {
        let s2 = Setting2::draw(3);
        let ds = s2
            .generate(40, Noise { level: 0.0, reading: NoiseReading::Variance }, 1)
            .unwrap();
        for i in 0..40 {
            let fit: f64 = (0..DIM).map(|j| s2.beta[j] * ds.features()[[i, j]]).sum();
            assert_eq!(ds.response()[i], fit);
        }
    }

    #[test]
    fn probability_estimate_symmetry() {
        let p = corollary1_probability(1.0, 100_000, 1).unwrap();
        let q = corollary1_probability(-1.0, 100_000, 2).unwrap();
        let se = (p.std_error.powi(2) + q.std_error.powi(2)).sqrt();
        assert!((p.estimate - q.estimate).abs() < 3.0 * se);
    }
}
