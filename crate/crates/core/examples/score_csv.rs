//! Score the rows of a CSV file and print the most suspicious ones.
//!
//! ```text
//! cargo run --release --example score_csv -- [data.csv] [target-column]
//! ```
//!
//! Without arguments a corrupted synthetic dataset is written to a temporary
//! directory and scored instead.

use veracity::data::write_csv;
use veracity::models::ForestConfig;
use veracity::pipeline::{compute_score, score_dataset, ScoringParams};
use veracity::simbench::{Noise, Setting};
use veracity::{inject_corruption, load_csv, CorruptionSpec, RegressorSpec, ScoreMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tmp = tempfile::tempdir()?;
    let (path, target) = match args.as_slice() {
        [path, target, ..] => (path.into(), target.clone()),
        [path] => (path.into(), "y".to_string()),
        [] => {
            let clean = Setting::Two.generate(200, Noise::default(), 7)?;
            let (ds, _) = inject_corruption(&clean, &CorruptionSpec { fraction: 0.1, strength: -3.0, seed: 7 })?;
            let path = tmp.path().join("synthetic.csv");
            write_csv(&ds, &path)?;
            println!("no input given; wrote {}", path.display());
            (path, "y".to_string())
        }
    };

    let ds = load_csv(&path, &target, None)?;
    let reg = RegressorSpec::random_forest(ForestConfig::default(), 0)?;
    // One cross-fit provides predictions and both uncertainty estimates;
    // every score is a cheap function of those.
    let rows = score_dataset(&reg, &ds, &ScoringParams::with_method(ScoreMethod::Arithmetic), 0)?;
    let unc = rows.uncertainty.as_ref();

    let methods = [ScoreMethod::Residual, ScoreMethod::Arithmetic, ScoreMethod::Geometric];
    let scores: Vec<_> = methods
        .iter()
        .map(|&m| compute_score(&ScoringParams::with_method(m), ds.response(), &rows.predictions, unc))
        .collect::<Result<_, _>>()?;

    println!("{} rows, {} features, target '{}'", ds.n(), ds.d(), ds.target_name());
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "row", "y", "S_r", "S_a", "S_g");
    for &i in scores[1].ranking().iter().take(10) {
        println!(
            "{:>6} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            ds.row_ids()[i],
            ds.response()[i],
            scores[0].values[i],
            scores[1].values[i],
            scores[2].values[i]
        );
    }
    Ok(())
}
