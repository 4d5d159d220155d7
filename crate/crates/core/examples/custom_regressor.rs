//! Plug a user-defined model into the scoring pipeline.
//!
//! Anything implementing [`Regressor`] works: here a Nadaraya-Watson kernel
//! smoother with a Gaussian kernel on standardised covariates.

use ndarray::Array2;
use veracity::metrics::auroc;
use veracity::models::Predictor;
use veracity::pipeline::{score_dataset, ScoringParams};
use veracity::simbench::{Noise, Setting};
use veracity::{inject_corruption, CorruptionSpec, Regressor, Result, ScoreMethod};

struct KernelSmoother {
    bandwidth: f64,
}

struct Fitted {
    x: Array2<f64>,
    y: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    bandwidth: f64,
}

impl Regressor for KernelSmoother {
    fn name(&self) -> String {
        format!("kernel-smoother(h={})", self.bandwidth)
    }

    fn fit(&self, x: &Array2<f64>, y: &[f64], _seed: u64) -> Result<Box<dyn Predictor>> {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let sd = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt().max(1e-12))
            .collect();
        Ok(Box::new(Fitted { x: x.clone(), y: y.to_vec(), mean, sd, bandwidth: self.bandwidth }))
    }
}

impl Predictor for Fitted {
    fn n_features(&self) -> usize {
        self.x.ncols()
    }

    fn predict(&self, q: &Array2<f64>) -> Result<Vec<f64>> {
        let z = |v: f64, j: usize| (v - self.mean[j]) / self.sd[j];
        Ok(q.rows()
            .into_iter()
            .map(|row| {
                let (mut num, mut den) = (0.0, 0.0);
                for (i, train) in self.x.rows().into_iter().enumerate() {
                    let d2: f64 = (0..row.len()).map(|j| (z(row[j], j) - z(train[j], j)).powi(2)).sum();
                    let w = (-0.5 * d2 / (self.bandwidth * self.bandwidth)).exp();
                    num += w * self.y[i];
                    den += w;
                }
                if den > 0.0 { num / den } else { self.y.iter().sum::<f64>() / self.y.len() as f64 }
            })
            .collect())
    }
}

fn main() -> std::result::Result<(), Box<dyn std::error::Error>> {
    let clean = Setting::Two.generate(200, Noise::default(), 5)?;
    let (ds, truth) = inject_corruption(&clean, &CorruptionSpec { fraction: 0.1, strength: 3.0, seed: 5 })?;
    let reg = KernelSmoother { bandwidth: 0.8 };
    for method in [ScoreMethod::Residual, ScoreMethod::Arithmetic] {
        let rows = score_dataset(&reg, &ds, &ScoringParams::with_method(method), 1)?;
        println!("{} with {}: AUROC {:.3}", method.name(), reg.name(), auroc(&rows.scores.values, &truth)?);
    }
    Ok(())
}
