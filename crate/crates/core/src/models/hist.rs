//! Histogram tree builder for boosting. Each feature is cut once into at
//! most `max_bins` quantile bins; split search then scans bin totals
//! instead of sorted rows. Thresholds are stored as raw feature values, so
//! the resulting tree predicts on unbinned data.

use ndarray::Array2;

use super::tree::{Node, RegressionTree};

pub(crate) struct Binned {
    /// Per feature, the bin of every row.
    bins: Vec<Vec<u8>>,
    /// Per feature, the upper edge of every bin but the last. A row falls in
    /// bin `b` or lower exactly when its value is `<= edges[b]`.
    edges: Vec<Vec<f64>>,
}

impl Binned {
    pub fn new(x: &Array2<f64>, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, 256);
        let (bins, edges) = x
            .columns()
            .into_iter()
            .map(|c| {
                let edges = cut_points(&c.to_vec(), max_bins);
                let bins = c.iter().map(|&v| edges.partition_point(|&e| e < v) as u8).collect();
                (bins, edges)
            })
            .unzip();
        Self { bins, edges }
    }
}

fn cut_points(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in &sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let midpoint = |lo: f64, hi: f64| {
        let m = lo + (hi - lo) / 2.0;
        if m >= hi { lo } else { m }
    };
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }
    let n = values.len();
    let mut edges = Vec::with_capacity(max_bins - 1);
    let mut seen = 0usize;
    for (i, w) in distinct.windows(2).enumerate() {
        seen += w[0].1;
        let remaining_values = distinct.len() - i - 1;
        let remaining_bins = max_bins - 1 - edges.len();
        if remaining_bins == 0 {
            break;
        }
        // Close a bin once it holds its quota, or when every later value
        // needs a bin of its own.
        let quota = (edges.len() + 1) * n / max_bins;
        if seen >= quota || remaining_values <= remaining_bins {
            edges.push(midpoint(w[0].0, w[1].0));
        }
    }
    edges
}

struct Builder<'a> {
    data: &'a Binned,
    y: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    rows: Vec<u32>,
    scratch: Vec<u32>,
    fitted: Vec<f64>,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl Builder<'_> {
    fn grow(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        let m = end - start;
        let total: f64 = self.rows[start..end].iter().map(|&i| self.y[i as usize]).sum();
        let mean = total / m as f64;
        self.nodes.push(Node::Leaf(mean));
        let split = if depth < self.max_depth { self.best_split(start, end, total) } else { None };
        let Some((feature, bin)) = split else {
            for &i in &self.rows[start..end] {
                self.fitted[i as usize] = mean;
            }
            return id;
        };
        let col = &self.data.bins[feature];
        self.scratch.clear();
        let mut w = start;
        for r in start..end {
            let i = self.rows[r];
            if col[i as usize] <= bin {
                self.rows[w] = i;
                w += 1;
            } else {
                self.scratch.push(i);
            }
        }
        self.rows[w..end].copy_from_slice(&self.scratch);
        let left = self.grow(start, w, depth + 1);
        let right = self.grow(w, end, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: self.data.edges[feature][bin as usize],
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, start: usize, end: usize, total: f64) -> Option<(usize, u8)> {
        let m = end - start;
        if m < 2 * self.min_leaf {
            return None;
        }
        let parent = total * total / m as f64;
        let mut best: Option<(usize, u8, f64)> = None;
        for f in 0..self.data.bins.len() {
            let nb = self.data.edges[f].len() + 1;
            if nb < 2 {
                continue;
            }
            self.sum[..nb].fill(0.0);
            self.count[..nb].fill(0);
            let col = &self.data.bins[f];
            for &i in &self.rows[start..end] {
                let b = col[i as usize] as usize;
                self.sum[b] += self.y[i as usize];
                self.count[b] += 1;
            }
            let (mut left_sum, mut n_left) = (0.0, 0usize);
            for b in 0..nb - 1 {
                if self.count[b] == 0 {
                    continue;
                }
                left_sum += self.sum[b];
                n_left += self.count[b] as usize;
                if n_left < self.min_leaf {
                    continue;
                }
                if m - n_left < self.min_leaf {
                    break;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (m - n_left) as f64 - parent;
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, b as u8, gain));
                }
            }
        }
        let (f, b, gain) = best?;
        (gain > 1e-12 * parent.abs().max(1e-300)).then_some((f, b))
    }
}

/// Fit a depth-limited tree on every row and return it together with the
/// in-sample fitted values.
pub(crate) fn fit_binned(data: &Binned, y: &[f64], max_depth: usize, min_leaf: usize) -> (RegressionTree, Vec<f64>) {
    let n = y.len();
    let mut b = Builder {
        data,
        y,
        max_depth,
        min_leaf: min_leaf.max(1),
        nodes: Vec::new(),
        rows: (0..n as u32).collect(),
        scratch: Vec::with_capacity(n),
        fitted: vec![0.0; n],
        sum: vec![0.0; 256],
        count: vec![0; 256],
    };
    if n > 0 {
        b.grow(0, n, 0);
    }
    (RegressionTree::from_nodes(b.nodes), b.fitted)
}
