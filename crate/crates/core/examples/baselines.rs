//! Compare the uncertainty-rescaled scores with the baseline detectors on
//! one corrupted dataset.

use veracity::metrics::{auprc, auroc};
use veracity::models::ForestConfig;
use veracity::pipeline::{compute_score, score_dataset, ScoringParams};
use veracity::simbench::{Noise, Setting};
use veracity::{inject_corruption, CorruptionSpec, RegressorSpec, ScoreMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = Setting::One.generate(300, Noise::default(), 9)?;
    let (ds, truth) = inject_corruption(&clean, &CorruptionSpec { fraction: 0.1, strength: -2.0, seed: 9 })?;
    let reg = RegressorSpec::random_forest(ForestConfig::default(), 0)?;
    let rows = score_dataset(&reg, &ds, &ScoringParams::with_method(ScoreMethod::Arithmetic), 9)?;

    println!("{:>18} {:>7} {:>7}  orientation", "method", "AUROC", "AUPRC");
    for method in ScoreMethod::ALL {
        let s = compute_score(
            &ScoringParams::with_method(method),
            ds.response(),
            &rows.predictions,
            rows.uncertainty.as_ref(),
        )?;
        println!(
            "{:>18} {:>7.3} {:>7.3}  {}",
            method.name(),
            auroc(&s.values, &truth)?,
            auprc(&s.values, &truth)?,
            method.orientation()
        );
    }
    Ok(())
}
