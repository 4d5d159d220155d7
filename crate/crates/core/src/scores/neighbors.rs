//! Neighbour-based baselines in the two-dimensional (residual, response)
//! plane. Both axes are z-scored first; an axis with zero spread collapses
//! to zero.

use super::{check_len, ScoreMethod, ScoreVector};
use crate::error::{Error, Result};

/// Reachability distances below this are raised to it, so coincident
/// points keep a finite local density.
const MIN_REACH: f64 = 1e-12;

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

pub(crate) fn embed(y: &[f64], yhat: &[f64]) -> Vec<[f64; 2]> {
    let resid: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect();
    zscore(&resid).into_iter().zip(zscore(y)).map(|(r, v)| [r, v]).collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// The `k` nearest other points of each point as (distance, index), closest
/// first, equal distances in index order.
fn knn(points: &[[f64; 2]], k: usize) -> Vec<Vec<(f64, usize)>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &q)| (dist(p, q), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d
        })
        .collect()
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("neighbour count must be at least 1"));
    }
    if n <= k {
        return Err(Error::data(format!("need more than k = {k} rows, got {n}")));
    }
    Ok(())
}

pub(crate) fn lof_points(points: &[[f64; 2]], k: usize) -> Result<Vec<f64>> {
    check_k(points.len(), k)?;
    let nn = knn(points, k);
    let k_distance: Vec<f64> = nn.iter().map(|v| v[k - 1].0).collect();
    let lrd: Vec<f64> = nn
        .iter()
        .map(|v| {
            let mean_reach = v
                .iter()
                .map(|&(d, j)| d.max(k_distance[j]).max(MIN_REACH))
                .sum::<f64>()
                / v.len() as f64;
            1.0 / mean_reach
        })
        .collect();
    Ok(nn
        .iter()
        .enumerate()
        .map(|(i, v)| v.iter().map(|&(_, j)| lrd[j]).sum::<f64>() / (v.len() as f64 * lrd[i]))
        .collect())
}

/// Local outlier factor with `k` neighbours. An all-identical cloud gets
/// LOF 1 everywhere.
pub fn lof_score(y: &[f64], yhat: &[f64], k: usize) -> Result<ScoreVector> {
    check_len(y.len(), yhat.len())?;
    ScoreVector::new(ScoreMethod::Lof, lof_points(&embed(y, yhat), k)?)
}

pub(crate) fn outre_points(points: &[[f64; 2]], k: usize) -> Result<Vec<f64>> {
    check_k(points.len(), k)?;
    Ok(knn(points, k)
        .iter()
        .map(|v| v.iter().map(|p| p.0).sum::<f64>() / k as f64)
        .collect())
}

/// Mean distance to the `k` nearest neighbours.
pub fn outre_score(y: &[f64], yhat: &[f64], k: usize) -> Result<ScoreVector> {
    check_len(y.len(), yhat.len())?;
    ScoreVector::new(ScoreMethod::Outre, outre_points(&embed(y, yhat), k)?)
}
