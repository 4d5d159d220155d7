//! CART regression tree used by the forest and boosting families.

use ndarray::Array2;
use rand::seq::index;

use crate::seed::Rng;

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Features examined per split; sampled without replacement when smaller
    /// than the column count.
    pub max_features: usize,
}

#[derive(Debug, Clone)]
pub(super) enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct RegressionTree {
    nodes: Vec<Node>,
}

/// Column-major copy of a feature matrix together with, per column, the
/// row order that sorts it. Sorting happens once per fit; each tree then
/// partitions these orders instead of re-sorting at every node.
pub(crate) struct Columns {
    cols: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
}

impl Columns {
    pub fn new(x: &Array2<f64>) -> Self {
        let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let sorted = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                idx
            })
            .collect();
        Self { cols, sorted }
    }

    fn len(&self) -> usize {
        self.cols.len()
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    n_left: usize,
}

/// Grows one tree. Node `[start, end)` owns that slice of every per-feature
/// order; each slice lists the node's samples sorted by that feature.
struct Builder<'a> {
    cols: &'a Columns,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    fitted: Vec<f64>,
}

impl Builder<'_> {
    fn grow(&mut self, start: usize, end: usize, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let m = end - start;
        let mean = self.order[0][start..end].iter().map(|&i| self.y[i as usize]).sum::<f64>() / m as f64;
        self.nodes.push(Node::Leaf(mean));
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let split = if depth_ok && m >= self.params.min_samples_split.max(2) {
            self.best_split(start, end, rng)
        } else {
            None
        };
        let Some(best) = split else {
            for &i in &self.order[0][start..end] {
                self.fitted[i as usize] = mean;
            }
            return id;
        };
        self.partition(start, end, &best);
        let mid = start + best.n_left;
        let left = self.grow(start, mid, depth + 1, rng);
        let right = self.grow(mid, end, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, start: usize, end: usize, rng: &mut Rng) -> Option<BestSplit> {
        let m = end - start;
        let d = self.cols.len();
        let leaf = self.params.min_samples_leaf.max(1);
        if m < 2 * leaf || d == 0 {
            return None;
        }
        let rows = &self.order[0][start..end];
        let first = self.y[rows[0] as usize];
        if rows.iter().all(|&i| self.y[i as usize] == first) {
            return None;
        }
        let total: f64 = rows.iter().map(|&i| self.y[i as usize]).sum();
        let features: Vec<usize> = if self.params.max_features >= d {
            (0..d).collect()
        } else {
            index::sample(rng, d, self.params.max_features.max(1)).into_vec()
        };

        let parent = total * total / m as f64;
        let mut best: Option<(usize, f64, f64, usize)> = None;
        for &f in &features {
            let col = &self.cols.cols[f];
            let sorted = &self.order[f][start..end];
            let mut left_sum = 0.0;
            for pos in 0..m - 1 {
                left_sum += self.y[sorted[pos] as usize];
                let n_left = pos + 1;
                if n_left < leaf || m - n_left < leaf {
                    continue;
                }
                let lo = col[sorted[pos] as usize];
                let hi = col[sorted[pos + 1] as usize];
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                // SSE reduction up to the constant term.
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (m - n_left) as f64 - parent;
                if best.is_none_or(|b| gain > b.2) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, gain, n_left));
                }
            }
        }
        let (feature, threshold, gain, n_left) = best?;
        if !(gain > 1e-12 * parent.abs().max(1e-300)) {
            return None;
        }
        Some(BestSplit {
            feature,
            threshold,
            n_left,
        })
    }

    /// Stable partition of every order slice into left then right.
    fn partition(&mut self, start: usize, end: usize, best: &BestSplit) {
        let col = &self.cols.cols[best.feature];
        for &i in &self.order[best.feature][start..end] {
            self.goes_left[i as usize] = col[i as usize] <= best.threshold;
        }
        for f in 0..self.order.len() {
            if f == best.feature {
                continue;
            }
            let slice = &mut self.order[f][start..end];
            self.scratch.clear();
            let mut w = 0;
            for r in 0..slice.len() {
                let i = slice[r];
                if self.goes_left[i as usize] {
                    slice[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            slice[w..].copy_from_slice(&self.scratch);
        }
    }
}

impl RegressionTree {
    pub(super) fn from_nodes(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    /// Fit on `rows` of `cols`; rows may repeat (bootstrap samples).
    pub fn fit(cols: &Columns, y: &[f64], rows: &[usize], params: TreeParams, rng: &mut Rng) -> Self {
        Self::fit_in_sample(cols, y, rows, params, rng).0
    }

    /// Fit and also return the fitted value of every sampled row (indexed by
    /// row; unsampled rows hold 0).
    pub fn fit_in_sample(
        cols: &Columns,
        y: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: &mut Rng,
    ) -> (Self, Vec<f64>) {
        let n = y.len();
        let mut count = vec![0u32; n];
        for &r in rows {
            count[r] += 1;
        }
        let order: Vec<Vec<u32>> = if cols.len() == 0 {
            vec![rows.iter().map(|&r| r as u32).collect()]
        } else {
            cols.sorted
                .iter()
                .map(|s| {
                    let mut o = Vec::with_capacity(rows.len());
                    for &i in s {
                        for _ in 0..count[i as usize] {
                            o.push(i);
                        }
                    }
                    o
                })
                .collect()
        };
        let mut b = Builder {
            cols,
            y,
            params,
            nodes: Vec::new(),
            order,
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(rows.len()),
            fitted: vec![0.0; n],
        };
        if !rows.is_empty() {
            b.grow(0, rows.len(), 0, rng);
        }
        (Self { nodes: b.nodes }, b.fitted)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}
