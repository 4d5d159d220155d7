//! Evaluate scores against known true responses, then measure how much
//! filtering lowers the leave-one-out prediction error.
//!
//! True errors are rows whose recorded value deviates from the true one by
//! more than an explicit threshold.

use veracity::filter::{filter_errors, FilterConfig, GridSearch};
use veracity::metrics::{error_mask, loo_prediction_error, ranking_report, LooMode};
use veracity::models::{BoostingConfig, ForestConfig};
use veracity::pipeline::{score_dataset, ScoringParams};
use veracity::simbench::{Noise, Setting};
use veracity::{inject_corruption, CorruptionSpec, RegressorSpec, ScoreMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = Setting::Two.generate(200, Noise::default(), 17)?;
    let (ds, _) = inject_corruption(&clean, &CorruptionSpec { fraction: 0.1, strength: 3.0, seed: 17 })?;
    let truth = ds.evaluation_truth().expect("injection records the true response");
    let labels = error_mask(ds.response(), truth, 1.0)?;
    let smooth = ForestConfig { min_samples_leaf: 40, ..Default::default() };
    let reg = RegressorSpec::boosting(BoostingConfig::default(), 0)?
        .with_residual_model(RegressorSpec::random_forest(smooth, 0)?)?;

    let before = loo_prediction_error(&reg, &clean, LooMode::KfoldApprox(10), 1)?;
    println!("reference: prediction error of the uncorrupted data {before:.1}");
    let corrupted = loo_prediction_error(&reg, &ds, LooMode::KfoldApprox(10), 1)?;
    println!("prediction error of the recorded data {corrupted:.1}\n");

    for method in [ScoreMethod::Residual, ScoreMethod::Arithmetic, ScoreMethod::Geometric] {
        let params = ScoringParams::with_method(method);
        let scores = score_dataset(&reg, &ds, &params, 2)?.scores;
        let r = ranking_report(&scores.values, &labels)?;
        let cfg = FilterConfig { scoring: params, search: GridSearch::CoarseToFine, seed: 2, ..Default::default() };
        let out = filter_errors(&reg, &ds, &cfg)?;
        let kept = ds.subset(&out.retained(ds.n()));
        let after = loo_prediction_error(&reg, &kept, LooMode::KfoldApprox(10), 1)?;
        println!(
            "{:>10}: AUROC {:.3} AUPRC {:.3} lift@#err {:.2} lift@100 {:.2} | k*={:>2}%  error after filtering {:.1}",
            method.name(),
            r.auroc.unwrap_or(f64::NAN),
            r.auprc.unwrap_or(f64::NAN),
            r.lift_at_num_errors.unwrap_or(f64::NAN),
            r.lift_at_100.unwrap_or(f64::NAN),
            out.k_star,
            after
        );
    }
    Ok(())
}
