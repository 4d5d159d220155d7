//! Veracity scores.
//!
//! All methods share one orientation: a larger value means the recorded
//! response is more likely to be wrong. Baselines whose natural form is
//! "high = benign" are flipped when constructed; [`ScoreMethod::orientation`]
//! documents each conversion.
//!
//! The uncertainty-aware scores rescale the absolute residual by the
//! arithmetic or geometric combination of epistemic (`u`) and aleatoric
//! (`s`) uncertainty:
//!
//! ```text
//! arithmetic = |y - ŷ| / (u + s)
//! geometric  = |y - ŷ| / sqrt(u * s)
//! ```

mod baselines;
mod neighbors;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{discretized_score, marginal_density_score, relative_residual, DISCRETIZED_BINS, RELATIVE_EPSILON};
pub use neighbors::{lof_score, outre_score};

use crate::error::{Error, Result};
use crate::uncertainty::UncertaintyEstimates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    Residual,
    Arithmetic,
    Geometric,
    RelativeResidual,
    MarginalDensity,
    Lof,
    Outre,
    Discretized,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 8] = [
        ScoreMethod::Residual,
        ScoreMethod::Arithmetic,
        ScoreMethod::Geometric,
        ScoreMethod::RelativeResidual,
        ScoreMethod::MarginalDensity,
        ScoreMethod::Lof,
        ScoreMethod::Outre,
        ScoreMethod::Discretized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::Residual => "residual",
            ScoreMethod::Arithmetic => "arithmetic",
            ScoreMethod::Geometric => "geometric",
            ScoreMethod::RelativeResidual => "relative-residual",
            ScoreMethod::MarginalDensity => "marginal-density",
            ScoreMethod::Lof => "lof",
            ScoreMethod::Outre => "outre",
            ScoreMethod::Discretized => "discretized",
        }
    }

    /// How the raw statistic was turned into "higher = more suspicious".
    pub fn orientation(self) -> &'static str {
        match self {
            ScoreMethod::Residual | ScoreMethod::Arithmetic | ScoreMethod::Geometric => "as-is",
            ScoreMethod::RelativeResidual => "1 - exp(-|y-yhat|/(|y|+eps))",
            ScoreMethod::MarginalDensity => "-log density",
            ScoreMethod::Lof => "as-is (LOF > 1 is outlying)",
            ScoreMethod::Outre => "mean k-NN distance (not inverted)",
            ScoreMethod::Discretized => "1 - self-confidence",
        }
    }

    /// Needs epistemic/aleatoric estimates.
    pub fn needs_uncertainty(self) -> bool {
        matches!(self, ScoreMethod::Arithmetic | ScoreMethod::Geometric)
    }

    /// Score of a row depends only on that row (and fitted models), so the
    /// method can score calibration and test rows independently.
    pub fn is_row_wise(self) -> bool {
        matches!(
            self,
            ScoreMethod::Residual | ScoreMethod::Arithmetic | ScoreMethod::Geometric | ScoreMethod::RelativeResidual
        )
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "r" | "residual" => ScoreMethod::Residual,
            "a" | "arithmetic" => ScoreMethod::Arithmetic,
            "g" | "geometric" => ScoreMethod::Geometric,
            "rel" | "relative" | "relative-residual" => ScoreMethod::RelativeResidual,
            "density" | "marginal-density" => ScoreMethod::MarginalDensity,
            "lof" => ScoreMethod::Lof,
            "outre" => ScoreMethod::Outre,
            "disc" | "discretized" => ScoreMethod::Discretized,
            other => return Err(Error::config(format!("unknown score method '{other}'"))),
        })
    }
}

/// Per-row scores, larger = more suspicious.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub method: ScoreMethod,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub(crate) fn new(method: ScoreMethod, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("{method} score is not finite at row {i}")));
        }
        Ok(Self { method, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row indices from most to least suspicious; equal scores keep row
    /// order.
    pub fn ranking(&self) -> Vec<usize> {
        ranking(&self.values)
    }

    /// 1-based rank of each row under [`ranking`](Self::ranking).
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.len()];
        for (r, i) in self.ranking().into_iter().enumerate() {
            ranks[i] = r + 1;
        }
        ranks
    }
}

/// Indices sorted by descending score, stable on ties.
pub fn ranking(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::data(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// `|y - ŷ|`.
pub fn residual_score(y: &[f64], yhat: &[f64]) -> Result<ScoreVector> {
    check_len(y.len(), yhat.len())?;
    ScoreVector::new(ScoreMethod::Residual, y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect())
}

fn rescale(
    sr: &ScoreVector,
    u: &UncertaintyEstimates,
    method: ScoreMethod,
    denom: impl Fn(f64, f64) -> f64,
) -> Result<ScoreVector> {
    if sr.method != ScoreMethod::Residual {
        return Err(Error::config(format!("{method} score rescales residual scores, got {}", sr.method)));
    }
    check_len(sr.len(), u.len())?;
    let values = sr
        .values
        .iter()
        .zip(u.epistemic().iter().zip(u.aleatoric()))
        .map(|(&r, (&e, &a))| {
            let d = denom(e, a);
            if d > 0.0 && d.is_finite() {
                Ok(r / d)
            } else {
                Err(Error::numerical(format!("non-positive {method} denominator {d}")))
            }
        })
        .collect::<Result<_>>()?;
    ScoreVector::new(method, values)
}

/// Residual over `u + s`.
pub fn arithmetic_score(sr: &ScoreVector, u: &UncertaintyEstimates) -> Result<ScoreVector> {
    rescale(sr, u, ScoreMethod::Arithmetic, |e, a| e + a)
}

/// Residual over `sqrt(u * s)`.
pub fn geometric_score(sr: &ScoreVector, u: &UncertaintyEstimates) -> Result<ScoreVector> {
    rescale(sr, u, ScoreMethod::Geometric, |e, a| (e * a).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unc(u: Vec<f64>, s: Vec<f64>) -> UncertaintyEstimates {
        UncertaintyEstimates::from_raw(u, s, 2).unwrap()
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_score(&[1.0, 2.0], &[1.0, 2.0]).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(residual_score(&[1.0, -1.0], &[0.0, 0.0]).unwrap().values, vec![1.0, 1.0]);
        assert!(residual_score(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn arithmetic_examples() {
        let sr = residual_score(&[1.0], &[0.0]).unwrap();
        assert_eq!(arithmetic_score(&sr, &unc(vec![1.0], vec![1.0])).unwrap().values, vec![0.5]);
        let zero = residual_score(&[3.0], &[3.0]).unwrap();
        assert_eq!(arithmetic_score(&zero, &unc(vec![1.0], vec![1.0])).unwrap().values, vec![0.0]);
        // Residual (1, 2) over denominators (2, 1).
        let sr = residual_score(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let s = arithmetic_score(&sr, &unc(vec![1.0, 0.5], vec![1.0, 0.5])).unwrap();
        assert_eq!(s.values, vec![0.5, 2.0]);
    }

    #[test]
    fn geometric_examples() {
        let sr = residual_score(&[1.0], &[0.0]).unwrap();
        assert_eq!(geometric_score(&sr, &unc(vec![4.0], vec![1.0])).unwrap().values, vec![0.5]);
        let sr = residual_score(&[3.0], &[0.0]).unwrap();
        let u = unc(vec![1.5], vec![1.5]);
        let g = geometric_score(&sr, &u).unwrap().values[0];
        let a = arithmetic_score(&sr, &u).unwrap().values[0];
        assert!((g - 3.0 / 1.5).abs() < 1e-15);
        assert!((a - 3.0 / 3.0).abs() < 1e-15);
        assert!((g - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn rescaling_requires_residual_input() {
        let u = unc(vec![1.0], vec![1.0]);
        let a = arithmetic_score(&residual_score(&[1.0], &[0.0]).unwrap(), &u).unwrap();
        assert!(matches!(geometric_score(&a, &u), Err(Error::Config(_))));
    }

    #[test]
    fn method_names_round_trip() {
        for m in ScoreMethod::ALL {
            assert_eq!(m.name().parse::<ScoreMethod>().unwrap(), m);
        }
        assert!("bogus".parse::<ScoreMethod>().is_err());
    }

    #[test]
    fn ranks_stable_on_ties() {
        let s = ScoreVector::new(ScoreMethod::Residual, vec![1.0, 3.0, 1.0, 3.0]).unwrap();
        assert_eq!(s.ranking(), vec![1, 3, 0, 2]);
        assert_eq!(s.ranks(), vec![3, 1, 4, 2]);
    }

    proptest! {
        #[test]
        fn residual_translation_invariant(
            pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..30),
            c in -1e3..1e3f64,
        ) {
            let (y, yhat): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = residual_score(&y, &yhat).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let hs: Vec<f64> = yhat.iter().map(|v| v + c).collect();
            let b = residual_score(&ys, &hs).unwrap();
            for (p, q) in a.values.iter().zip(&b.values) {
                prop_assert!((p - q).abs() <= 1e-9);
            }
        }

        #[test]
        fn rescaled_scores_permutation_equivariant(
            rows in prop::collection::vec((0.0..10f64, 0.01..5f64, 0.01..5f64), 2..20),
            rot in 0usize..20,
        ) {
            let n = rows.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let r: Vec<f64> = rows.iter().map(|t| t.0).collect();
            let sr = residual_score(&r, &vec![0.0; n]).unwrap();
            let u = UncertaintyEstimates::from_raw(rows.iter().map(|t| t.1).collect(), rows.iter().map(|t| t.2).collect(), 2).unwrap();
            let a = arithmetic_score(&sr, &u).unwrap();
            let pr: Vec<f64> = perm.iter().map(|&i| r[i]).collect();
            let psr = residual_score(&pr, &vec![0.0; n]).unwrap();
            let pa = arithmetic_score(&psr, &u.subset(&perm)).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert_eq!(pa.values[j], a.values[i]);
            }
        }
    }
}
