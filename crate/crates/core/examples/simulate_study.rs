//! A small Monte-Carlo study in the style of the benchmark tables.
//!
//! ```text
//! cargo run --release --example simulate_study -- [runs]
//! ```

use veracity::models::ForestConfig;
use veracity::simbench::{run_conformal_experiment, Setting, SimConfig};
use veracity::RegressorSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map(|r| r.parse()).transpose()?.unwrap_or(5);
    let smooth = ForestConfig { trees: 50, min_samples_leaf: 40, ..Default::default() };
    let reg = RegressorSpec::random_forest(ForestConfig { trees: 50, ..Default::default() }, 0)?
        .with_residual_model(RegressorSpec::random_forest(smooth, 0)?)?;
    let mut cfg = SimConfig::new(Setting::One, reg);
    cfg.runs = runs;
    cfg.strengths = vec![-3.0, 3.0];

    for contaminated in [false, true] {
        let table = run_conformal_experiment(&cfg, contaminated)?;
        println!(
            "\nsetting {}, {} train/calibration, {} runs",
            table.setting,
            if contaminated { "contaminated" } else { "clean" },
            table.runs
        );
        println!("{:>12} {:>5} {:>15} {:>15} {:>15}", "score", "a", "FDR", "power", "AUPRC");
        for c in &table.cells {
            println!(
                "{:>12} {:>5} {:>7.2} ({:.2}) {:>7.2} ({:.2}) {:>7.2} ({:.2})",
                c.method.name(),
                c.strength,
                c.fdr.mean,
                c.fdr.sd,
                c.power.mean,
                c.power.sd,
                c.auprc.mean,
                c.auprc.sd
            );
        }
    }
    Ok(())
}
