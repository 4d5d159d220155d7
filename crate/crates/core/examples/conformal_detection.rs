//! Split-conformal detection with false discovery rate control.
//!
//! Scores are fit on a clean training split and calibrated on a clean
//! calibration split; a test split with 10% shifted responses is then
//! screened at a target FDR of 10%.
//!
//! The residual-size model is a forest with large leaves. A fully grown
//! forest memorises `|y - ŷ|` on its own training rows and its aleatoric
//! estimates become too noisy to separate shifted rows from noisy ones.
//!
//! ```text
//! cargo run --release --example conformal_detection -- [seed]
//! ```
//!
//! With 200 calibration rows the smallest attainable p-value is 1/201, so
//! BH at 10% needs about ten test rows beyond every calibration score before
//! it rejects anything. Some seeds therefore show no rejections at all.

use veracity::conformal::conformal_detect;
use veracity::metrics::fdr_power;
use veracity::models::ForestConfig;
use veracity::pipeline::ScoringParams;
use veracity::simbench::{Noise, Setting};
use veracity::{inject_corruption, CorruptionSpec, RegressorSpec, ScoreMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let pooled = Setting::One.generate(600, Noise::default(), seed)?;
    let part = |s: usize| pooled.subset(&(s * 200..(s + 1) * 200).collect::<Vec<_>>());
    let (train, cal) = (part(0), part(1));
    let (test, truth) = inject_corruption(&part(2), &CorruptionSpec { fraction: 0.1, strength: -3.0, seed })?;
    let smooth = ForestConfig { min_samples_leaf: 40, ..Default::default() };
    let reg = RegressorSpec::random_forest(ForestConfig::default(), 0)?
        .with_residual_model(RegressorSpec::random_forest(smooth, 0)?)?;

    println!("{:>12} {:>9} {:>7} {:>7}", "score", "rejected", "FDP", "power");
    for method in [ScoreMethod::Residual, ScoreMethod::Arithmetic, ScoreMethod::Geometric] {
        let out = conformal_detect(&reg, &train, &cal, &test, &ScoringParams::with_method(method), 0.1, 5)?;
        let (fdp, power) = fdr_power(&out.rejected, &truth)?;
        println!("{:>12} {:>9} {:>7.3} {:>7.3}", method.name(), out.rejected.len(), fdp, power);
    }
    Ok(())
}
