//! Show how the two uncertainty estimates track the data.
//!
//! In the first synthetic setting the response splits into two branches
//! once `x1 > 0.5`, so the noise level grows with `x1`, and few rows have
//! `x1 < -0.5`. The aleatoric estimate should rise on the right and the
//! epistemic estimate should be largest on the sparse left.

use veracity::models::{oos_predict, ForestConfig};
use veracity::simbench::{Noise, Setting};
use veracity::uncertainty::estimate;
use veracity::RegressorSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = Setting::One.generate(400, Noise::default(), 11)?;
    let reg = RegressorSpec::random_forest(ForestConfig::default(), 0)?;
    let oos = oos_predict(&reg, &ds, 5, 1)?;
    let unc = estimate(&reg, &ds, &oos, 20, 5, 2)?;

    let edges = [-1.5, -0.5, 0.0, 0.5, 1.0, 1.5];
    println!("{:>14} {:>6} {:>12} {:>12}", "x1 bin", "rows", "mean u_hat", "mean s_hat");
    for w in edges.windows(2) {
        let rows: Vec<usize> = (0..ds.n())
            .filter(|&i| (w[0]..w[1]).contains(&ds.features()[[i, 0]]))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mean = |v: &[f64]| rows.iter().map(|&i| v[i]).sum::<f64>() / rows.len() as f64;
        println!(
            "[{:>5.1}, {:>4.1}) {:>6} {:>12.4} {:>12.4}",
            w[0],
            w[1],
            rows.len(),
            mean(unc.epistemic()),
            mean(unc.aleatoric())
        );
    }
    let (ef, af) = unc.floors();
    let floored = unc.floor_applied().iter().filter(|&&f| f).count();
    println!("floors: epistemic {ef:.2e}, aleatoric {af:.2e}; {floored} rows floored");
    Ok(())
}
