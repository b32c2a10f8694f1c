//! CART trees with squared-error splitting.
//!
//! For 0/1 targets the squared-error reduction is proportional to the Gini
//! reduction, so the same builder serves classification and regression. Leaves
//! store the mean target of their samples.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Borrowed training table: row-major `x` with `dim` columns, targets `y`.
pub struct TrainingView<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub dim: usize,
}

impl TrainingView<'_> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row * self.dim + feature]
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Tree {
    /// Grow a tree on the sample indices `samples` (duplicates allowed).
    pub fn fit(data: &TrainingView<'_>, samples: Vec<usize>, params: &TreeParams, rng: &mut Rng) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut features: Vec<usize> = (0..data.dim).collect();
        let mut samples = samples;
        tree.grow(data, &mut samples, 0, params, &mut features, rng);
        tree
    }

    fn grow(
        &mut self,
        data: &TrainingView<'_>,
        samples: &mut [usize],
        depth: usize,
        params: &TreeParams,
        features: &mut [usize],
        rng: &mut Rng,
    ) -> u32 {
        let idx = self.nodes.len() as u32;
        let n = samples.len() as f64;
        let sum: f64 = samples.iter().map(|&s| data.y[s]).sum();
        let mean = sum / n;
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: mean,
        });

        let pure = samples.iter().all(|&s| data.y[s] == data.y[samples[0]]);
        let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || samples.len() < 2 * params.min_leaf {
            return idx;
        }

        let Some(split) = best_split(data, samples, params, features, rng) else {
            return idx;
        };
        if split.gain <= 1e-12 {
            return idx;
        }

        // Partition in place: left side first.
        let mut lo = 0;
        for i in 0..samples.len() {
            if data.value(samples[i], split.feature) <= split.threshold {
                samples.swap(lo, i);
                lo += 1;
            }
        }
        let (left_s, right_s) = samples.split_at_mut(lo);
        let left = self.grow(data, left_s, depth + 1, params, features, rng);
        let right = self.grow(data, right_s, depth + 1, params, features, rng);
        let node = &mut self.nodes[idx as usize];
        node.feature = split.feature as u32;
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        idx
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Evaluate `features_per_split` random features; if none of them admits a
/// valid split, keep drawing from the remaining ones.
fn best_split(
    data: &TrainingView<'_>,
    samples: &[usize],
    params: &TreeParams,
    features: &mut [usize],
    rng: &mut Rng,
) -> Option<Split> {
    features.shuffle(rng);
    let mut order: Vec<usize> = samples.to_vec();
    let n = samples.len();
    let total_sum: f64 = samples.iter().map(|&s| data.y[s]).sum();
    let total_sq: f64 = samples.iter().map(|&s| data.y[s] * data.y[s]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<Split> = None;
    for (tried, &f) in features.iter().enumerate() {
        if tried >= params.features_per_split && best.is_some() {
            break;
        }
        order.sort_unstable_by(|&a, &b| data.value(a, f).total_cmp(&data.value(b, f)));
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 0..n - 1 {
            let y = data.y[order[i]];
            left_sum += y;
            left_sq += y * y;
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < params.min_leaf || n_right < params.min_leaf {
                continue;
            }
            let v = data.value(order[i], f);
            let v_next = data.value(order[i + 1], f);
            if v_next <= v {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            let gain = parent_sse - sse;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = 0.5 * (v + v_next);
                if threshold >= v_next {
                    threshold = v;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Bootstrap resample of `0..n`.
pub fn bootstrap(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}
