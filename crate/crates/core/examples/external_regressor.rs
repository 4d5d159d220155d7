//! Use a model that runs outside the process.
//!
//! The external family writes `train.csv` and `predict.csv` into a scratch
//! directory, runs a shell command there and reads back `predictions.csv`.
//! The command below is a one-nearest-neighbour regressor in awk, so the
//! example needs nothing beyond a POSIX shell.

use veracity::metrics::auroc;
use veracity::pipeline::{score_dataset, ScoringParams};
use veracity::simbench::{Noise, Setting};
use veracity::{inject_corruption, CorruptionSpec, RegressorSpec, ScoreMethod};

const NEAREST_NEIGHBOUR: &str = r#"awk -F, '
FNR == 1 { next }
FILENAME == "train.csv" { n++; for (j = 1; j < NF; j++) x[n, j] = $j; y[n] = $NF; d = NF - 1; next }
{
  best = -1
  for (i = 1; i <= n; i++) {
    s = 0
    for (j = 1; j <= d; j++) { t = $j - x[i, j]; s += t * t }
    if (best < 0 || s < best) { best = s; pick = y[i] }
  }
  printf "%.17g\n", pick
}' train.csv predict.csv > predictions.csv"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = Setting::Two.generate(60, Noise::default(), 4)?;
    let (ds, truth) = inject_corruption(&clean, &CorruptionSpec { fraction: 0.1, strength: 3.0, seed: 4 })?;
    let reg = RegressorSpec::external(NEAREST_NEIGHBOUR)?;
    let rows = score_dataset(&reg, &ds, &ScoringParams::with_method(ScoreMethod::Residual), 0)?;
    println!("external 1-NN residual score: AUROC {:.3}", auroc(&rows.scores.values, &truth)?);
    Ok(())
}
