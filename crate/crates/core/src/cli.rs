//! Command-line front end. [`run`] executes a parsed [`Cli`]; the binary only
//! parses arguments and maps errors to exit codes.
//!
//! Each subcommand writes `manifest.json` into the output directory before
//! doing any work, then its own result files next to it.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::conformal::conformal_detect;
use crate::data::{load_csv, split, write_csv, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::filter::{filter_errors, FilterConfig, FilterMode, GridSearch};
use crate::metrics::{error_mask, loo_prediction_error, ranking_report, LooMode};
use crate::models::RegressorSpec;
use crate::pipeline::{compute_score, score_dataset, ScoringParams};
use crate::report::{self, Format, Manifest};
use crate::scores::ScoreMethod;
use crate::seed;
use crate::simbench::{
    conformal_validity, corollary1_probability, run_conformal_experiment, run_filter_experiment, Noise, NoiseReading,
    Setting, SimConfig,
};

/// Parse a kebab-case enum through its serde representation.
fn parse_kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<ScoreMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "veracity", version, about = "Score, filter and test regression responses for recording errors")]
pub struct Cli {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (defaults to the available cores). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Format of per-row and per-run outputs.
    #[arg(long, global = true, default_value = "json", value_parser = parse_format)]
    pub format: Format,

    /// Output directory.
    #[arg(long, global = true, env = "VERACITY_OUT_DIR", default_value = "veracity-out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every row of a dataset.
    Score(ScoreCmd),
    /// Remove the worst-scored rows at the level chosen by out-of-sample R².
    Filter(FilterCmd),
    /// Conformal p-values and Benjamini-Hochberg selection on a test split.
    Conformal(ConformalCmd),
    /// Run a synthetic benchmark study.
    Simulate(SimulateCmd),
    /// Ranking metrics of scores against a column of true responses.
    Evaluate(EvaluateCmd),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column.
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Column holding true responses, used only for evaluation.
    #[arg(long)]
    pub true_column: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Regressor family: linear, knn, rf, gbt or external.
    #[arg(long, default_value = "rf")]
    pub model: String,
    /// Family hyperparameter as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Family of the regressor fit to absolute residuals (defaults to --model
    /// with the same hyperparameters).
    #[arg(long)]
    pub residual_model: Option<String>,
    /// Hyperparameter of the residual regressor; repeatable.
    #[arg(long = "residual-param", value_name = "KEY=VALUE", requires = "residual_model")]
    pub residual_params: Vec<String>,
}

fn param_map(params: &[String]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::config(format!("parameter '{p}' is not key=value")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl ModelArgs {
    fn spec(&self, seed: u64) -> Result<RegressorSpec> {
        let spec = RegressorSpec::from_params(&self.model, &param_map(&self.params)?, seed)?;
        match &self.residual_model {
            Some(family) => {
                let residual = RegressorSpec::from_params(family, &param_map(&self.residual_params)?, seed)?;
                spec.with_residual_model(residual)
            }
            None => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoringArgs {
    /// Bootstrap replicates for epistemic uncertainty.
    #[arg(long, default_value_t = 20)]
    pub bootstrap: usize,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 20)]
    pub lof_k: usize,
    #[arg(long, default_value_t = 10)]
    pub outre_k: usize,
}

impl ScoringArgs {
    fn params(&self, method: ScoreMethod) -> ScoringParams {
        ScoringParams {
            method,
            bootstrap: self.bootstrap,
            folds: self.folds,
            lof_k: self.lof_k,
            outre_k: self.outre_k,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Score methods, comma separated (r, a, g, rel, density, lof, outre, disc).
    #[arg(long, value_delimiter = ',', default_value = "a", value_parser = parse_method)]
    pub method: Vec<ScoreMethod>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, default_value = "a", value_parser = parse_method)]
    pub score: ScoreMethod,
    /// Largest removal percentage considered.
    #[arg(long, default_value_t = 20)]
    pub kerr: usize,
    /// iterative or frozen-scores.
    #[arg(long, default_value = "iterative", value_parser = parse_kebab::<FilterMode>)]
    pub mode: FilterMode,
    /// full or coarse-to-fine.
    #[arg(long, default_value = "full", value_parser = parse_kebab::<GridSearch>)]
    pub search: GridSearch,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConformalCmd {
    /// Single dataset to split into train, calibration and test parts.
    #[arg(long, conflicts_with_all = ["train", "cal", "test"])]
    pub data: Option<PathBuf>,
    /// Train, calibration and test fractions used with --data.
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.3,0.3")]
    pub split: Vec<f64>,
    #[arg(long, requires_all = ["cal", "test"])]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub cal: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, default_value = "a", value_parser = parse_method)]
    pub score: ScoreMethod,
    /// Target false discovery rate.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Clean train and calibration splits.
    Conformal,
    /// Train and calibration carry the same corruption as the test split.
    Contaminated,
    Filter,
    /// Benign-only test rows; empirical P(p <= alpha).
    Validity,
    /// Monte-Carlo probability that a shifted residual exceeds a clean one.
    ShiftProbability,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateCmd {
    #[arg(long, default_value = "conformal", value_parser = parse_kebab::<Experiment>)]
    pub experiment: Experiment,
    /// Synthetic setting, 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub setting: u8,
    /// Rows per split.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// Share of corrupted rows.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Corruption shifts, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-3,-2,-1,1,2,3")]
    pub strengths: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "r,a,g", value_parser = parse_method)]
    pub methods: Vec<ScoreMethod>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Levels checked by the validity experiment.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub kerr: usize,
    #[arg(long, default_value = "iterative", value_parser = parse_kebab::<FilterMode>)]
    pub mode: FilterMode,
    #[arg(long, default_value = "full", value_parser = parse_kebab::<GridSearch>)]
    pub search: GridSearch,
    /// Noise level of the generators.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Whether --noise is a variance or a standard deviation.
    #[arg(long, default_value = "variance", value_parser = parse_kebab::<NoiseReading>)]
    pub noise_reading: NoiseReading,
    /// Draws per strength for the shift-probability experiment.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionError {
    None,
    Exact,
    Kfold,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, value_delimiter = ',', default_value = "r,a,g", value_parser = parse_method)]
    pub method: Vec<ScoreMethod>,
    /// A row is a true error when |true - given| exceeds this.
    #[arg(long)]
    pub threshold: f64,
    /// Also report the summed squared out-of-sample error: none, exact
    /// (leave-one-out refits) or kfold.
    #[arg(long, default_value = "none", value_parser = parse_kebab::<PredictionError>)]
    pub prediction_error: PredictionError,
}

/// Flat per-method evaluation row.
#[derive(Debug, Clone, Serialize)]
struct EvaluationRecord {
    method: ScoreMethod,
    rows: usize,
    true_errors: usize,
    threshold: f64,
    auroc: Option<f64>,
    auprc: Option<f64>,
    lift_at_num_errors: Option<f64>,
    lift_at_100: Option<f64>,
    prediction_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct TraceRecord {
    k: usize,
    r2: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ProbabilityRecord {
    strength: f64,
    estimate: f64,
    std_error: f64,
    samples: usize,
}

#[derive(Debug, Clone, Serialize)]
struct ValidityRecord {
    alpha: f64,
    mean_rejection_rate: f64,
    bound: f64,
}

struct Ctx<'a> {
    cli: &'a Cli,
    threads: usize,
}

impl Ctx<'_> {
    fn manifest(&self, sub: &str, params: serde_json::Value) -> Manifest {
        Manifest::new(sub, self.cli.seed, self.threads, self.cli.format, params)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }
}

fn load(d: &DataArgs) -> Result<Dataset> {
    load_csv(&d.data, &d.target, d.true_column.as_deref())
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) => return Err(Error::config("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    // A second call in the same process keeps the first pool; results do not
    // depend on the thread count, so that is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let ctx = Ctx { cli, threads };
    match &cli.command {
        Command::Score(c) => cmd_score(&ctx, c),
        Command::Filter(c) => cmd_filter(&ctx, c),
        Command::Conformal(c) => cmd_conformal(&ctx, c),
        Command::Simulate(c) => cmd_simulate(&ctx, c),
        Command::Evaluate(c) => cmd_evaluate(&ctx, c),
    }
}

/// Fit once and derive every requested score from the same predictions.
fn score_all(
    reg: &RegressorSpec,
    ds: &Dataset,
    args: &ScoringArgs,
    methods: &[ScoreMethod],
    seed: u64,
) -> Result<Vec<crate::scores::ScoreVector>> {
    let base = if methods.iter().any(|m| m.needs_uncertainty()) {
        ScoreMethod::Arithmetic
    } else {
        ScoreMethod::Residual
    };
    for &m in methods {
        args.params(m).validate()?;
    }
    let rows = score_dataset(reg, ds, &args.params(base), seed)?;
    methods
        .iter()
        .map(|&m| compute_score(&args.params(m), ds.response(), &rows.predictions, rows.uncertainty.as_ref()))
        .collect()
}

fn cmd_score(ctx: &Ctx, c: &ScoreCmd) -> Result<()> {
    let seed = ctx.cli.seed;
    let reg = c.model.spec(seed)?;
    let mut m = ctx.manifest("score", json!({ "args": c, "regressor": reg }));
    m.derived_seeds.insert("scoring".into(), seed);
    m.write(&ctx.cli.out)?;

    let ds = load(&c.data)?;
    let mut all = Vec::new();
    for sv in score_all(&reg, &ds, &c.scoring, &c.method, seed)? {
        all.extend(report::score_records(&ds, &sv)?);
    }
    report::write_records(&ctx.out("scores"), ctx.cli.format, &all)?;
    Ok(())
}

fn cmd_filter(ctx: &Ctx, c: &FilterCmd) -> Result<()> {
    let seed = ctx.cli.seed;
    let reg = c.model.spec(seed)?;
    let cfg = FilterConfig {
        scoring: c.scoring.params(c.score),
        max_error_percent: c.kerr,
        mode: c.mode,
        search: c.search,
        seed,
    };
    cfg.validate()?;
    let mut m = ctx.manifest("filter", json!({ "args": c, "regressor": reg, "config": cfg }));
    m.derived_seeds.insert("initial".into(), cfg.level_seed(0));
    for k in 1..=c.kerr {
        m.derived_seeds.insert(format!("level_{k:02}"), cfg.level_seed(k));
    }
    m.write(&ctx.cli.out)?;

    let ds = load(&c.data)?;
    let outcome = filter_errors(&reg, &ds, &cfg)?;
    report::write_json(&ctx.out("filter.json"), &outcome)?;
    let trace: Vec<TraceRecord> = outcome.r2_trace.iter().map(|&(k, r2)| TraceRecord { k, r2 }).collect();
    report::write_records(&ctx.out("r2_trace"), ctx.cli.format, &trace)?;
    write_csv(&ds.subset(&outcome.retained(ds.n())), ctx.out("cleaned.csv"))?;
    Ok(())
}

fn cmd_conformal(ctx: &Ctx, c: &ConformalCmd) -> Result<()> {
    let seed = ctx.cli.seed;
    let reg = c.model.spec(seed)?;
    let params = c.scoring.params(c.score);
    params.validate()?;
    if !c.score.is_row_wise() {
        return Err(Error::config(format!("{} score cannot be used for conformal detection", c.score)));
    }
    let split_seed = seed::derive(seed, &[seed::TAG_SPLIT]);
    let mut m = ctx.manifest("conformal", json!({ "args": c, "regressor": reg, "scoring": params }));
    m.derived_seeds.insert("split".into(), split_seed);
    m.derived_seeds.insert("scoring".into(), seed);
    m.write(&ctx.cli.out)?;

    let (train, cal, test) = match (&c.data, &c.train, &c.cal, &c.test) {
        (Some(path), None, None, None) => {
            let [a, b, t] = c.split[..] else {
                return Err(Error::config("--split needs three fractions"));
            };
            let ds = load_csv(path, &c.target, None)?;
            let s = split(
                &ds,
                &SplitSpec {
                    train: a,
                    calibration: b,
                    test: t,
                    seed: split_seed,
                },
            )?;
            (s.train, s.calibration, s.test)
        }
        (None, Some(tr), Some(ca), Some(te)) => (
            load_csv(tr, &c.target, None)?,
            load_csv(ca, &c.target, None)?,
            load_csv(te, &c.target, None)?,
        ),
        _ => return Err(Error::config("give either --data or all of --train, --cal and --test")),
    };
    let outcome = conformal_detect(&reg, &train, &cal, &test, &params, c.alpha, seed)?;
    report::write_records(&ctx.out("pvalues"), ctx.cli.format, &report::pvalue_records(&test, &outcome))?;
    let rejected_ids: Vec<&str> = outcome.rejected.iter().map(|&i| test.row_ids()[i].as_str()).collect();
    report::write_json(
        &ctx.out("conformal.json"),
        &json!({
            "method": outcome.method,
            "alpha": outcome.alpha,
            "calibration_size": outcome.calibration_size,
            "test_size": test.n(),
            "rejected": rejected_ids,
        }),
    )?;
    Ok(())
}

fn write_table<T: Serialize>(ctx: &Ctx, rows: &[T]) -> Result<()> {
    report::write_records(&ctx.out("table"), Format::Csv, rows)?;
    report::write_records(&ctx.out("table"), Format::Json, rows)?;
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, c: &SimulateCmd) -> Result<()> {
    let seed = ctx.cli.seed;
    let noise = Noise {
        level: c.noise,
        reading: c.noise_reading,
    };
    if c.experiment == Experiment::ShiftProbability {
        let mut m = ctx.manifest("simulate", json!({ "args": c }));
        for i in 0..c.strengths.len() {
            m.derived_seeds.insert(format!("strength_{i}"), seed::derive(seed, &[seed::TAG_RUN, i as u64]));
        }
        m.write(&ctx.cli.out)?;
        let rows = c
            .strengths
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let e = corollary1_probability(a, c.samples, seed::derive(seed, &[seed::TAG_RUN, i as u64]))?;
                Ok(ProbabilityRecord {
                    strength: e.strength,
                    estimate: e.estimate,
                    std_error: e.std_error,
                    samples: e.samples,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return write_table(ctx, &rows);
    }

    let reg = c.model.spec(seed)?;
    let cfg = SimConfig {
        setting: Setting::from_number(c.setting)?,
        n: c.n,
        fraction: c.fraction,
        strengths: c.strengths.clone(),
        runs: c.runs,
        regressor: reg,
        methods: c.methods.clone(),
        bootstrap: c.bootstrap,
        folds: c.folds,
        alpha: c.alpha,
        max_error_percent: c.kerr,
        filter_mode: c.mode,
        filter_search: c.search,
        noise,
        seed,
    };
    cfg.validate()?;
    let mut m = ctx.manifest("simulate", json!({ "args": c, "config": cfg }));
    for r in 0..cfg.runs {
        m.derived_seeds.insert(format!("run_{r:04}"), cfg.run_seed(r));
    }
    m.write(&ctx.cli.out)?;

    match c.experiment {
        Experiment::Conformal | Experiment::Contaminated => {
            let t = run_conformal_experiment(&cfg, c.experiment == Experiment::Contaminated)?;
            write_table(ctx, &report::conformal_rows(&t))?;
            report::write_records(&ctx.out("runs"), ctx.cli.format, &t.per_run)?;
        }
        Experiment::Filter => {
            let t = run_filter_experiment(&cfg)?;
            write_table(ctx, &report::filter_rows(&t))?;
            report::write_records(&ctx.out("runs"), ctx.cli.format, &t.per_run)?;
        }
        Experiment::Validity => {
            let method = cfg.methods[0];
            let rates = conformal_validity(&cfg, method, &c.alphas)?;
            let bound = 3.0 / (cfg.n as f64).sqrt();
            let rows: Vec<ValidityRecord> = c
                .alphas
                .iter()
                .enumerate()
                .map(|(j, &alpha)| ValidityRecord {
                    alpha,
                    mean_rejection_rate: rates.iter().map(|r| r[j]).sum::<f64>() / rates.len() as f64,
                    bound: alpha + bound,
                })
                .collect();
            write_table(ctx, &rows)?;
        }
        Experiment::ShiftProbability => unreachable!("handled above"),
    }
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, c: &EvaluateCmd) -> Result<()> {
    let seed = ctx.cli.seed;
    let reg = c.model.spec(seed)?;
    if c.data.true_column.is_none() {
        return Err(Error::config("evaluate needs --true-column"));
    }
    let mut m = ctx.manifest("evaluate", json!({ "args": c, "regressor": reg }));
    m.derived_seeds.insert("scoring".into(), seed);
    m.derived_seeds.insert("prediction_error".into(), seed::derive(seed, &[seed::TAG_FIT]));
    m.write(&ctx.cli.out)?;

    let ds = load(&c.data)?;
    let truth = ds
        .evaluation_truth()
        .ok_or_else(|| Error::data("true column missing from the dataset"))?;
    let labels = error_mask(ds.response(), truth, c.threshold)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::data(format!(
            "no row deviates from its true value by more than {}",
            c.threshold
        )));
    }
    let pe = match c.prediction_error {
        PredictionError::None => None,
        PredictionError::Exact => Some(LooMode::ExactLoo),
        PredictionError::Kfold => Some(LooMode::KfoldApprox(c.scoring.folds)),
    };
    let pe_value = match pe {
        Some(mode) => Some(loo_prediction_error(&reg, &ds, mode, seed::derive(seed, &[seed::TAG_FIT]))?),
        None => None,
    };
    let mut records = Vec::new();
    for sv in score_all(&reg, &ds, &c.scoring, &c.method, seed)? {
        let r = ranking_report(&sv.values, &labels)?;
        records.push(EvaluationRecord {
            method: sv.method,
            rows: ds.n(),
            true_errors: positives,
            threshold: c.threshold,
            auroc: r.auroc,
            auprc: r.auprc,
            lift_at_num_errors: r.lift_at_num_errors,
            lift_at_100: r.lift_at_100,
            prediction_error: pe_value,
        });
    }
    report::write_records(&ctx.out("evaluation"), ctx.cli.format, &records)?;
    Ok(())
}

/// Parse `args` (including the program name) and run.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::config(e.to_string()))?;
    run(&cli)
}
