use rayon::prelude::*;

use super::tree::{bootstrap, Tree, TrainingView, TreeParams};
use crate::rng::{derive_seed, seeded_rng};

/// A bag of trees. Tree `i` is grown from `derive_seed(seed, i)`, so the
/// result does not depend on how rayon schedules the work.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn fit(view: &TrainingView<'_>, n_trees: usize, params: &TreeParams, use_bootstrap: bool, seed: u64) -> Self {
        let n = view.y.len();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeded_rng(derive_seed(seed, i as u64));
                let samples = if use_bootstrap {
                    bootstrap(n, &mut rng)
                } else {
                    (0..n).collect()
                };
                Tree::fit(view, samples, params, &mut rng)
            })
            .collect();
        TreeEnsemble { trees }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Per-tree leaf means for one input.
    pub fn outputs<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.trees.iter().map(move |t| t.predict(x))
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.outputs(x).sum::<f64>() / self.trees.len() as f64
    }
}

/// Mean and population variance of the per-tree values.
pub fn mean_and_variance(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for v in values {
        n += 1;
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    (mean, (sq / n as f64 - mean * mean).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_is_seed_deterministic() {
        let x: Vec<f64> = (0..60).map(|i| f64::from(i) * 0.37 % 5.0).collect();
        let y: Vec<f64> = (0..30).map(|i| f64::from(i % 3 == 0)).collect();
        let view = TrainingView { x: &x, y: &y, dim: 2 };
        let p = TreeParams {
            max_depth: None,
            min_leaf: 1,
            features_per_split: 1,
        };
        let a = TreeEnsemble::fit(&view, 16, &p, true, 9);
        let b = TreeEnsemble::fit(&view, 16, &p, true, 9);
        assert_eq!(a, b);
        let c = TreeEnsemble::fit(&view, 16, &p, true, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn variance_of_votes() {
        let (m, v) = mean_and_variance([1.0, 1.0, 1.0, 0.0].into_iter());
        assert_eq!(m, 0.75);
        assert!((v - 0.1875).abs() < 1e-15);
        let (m, v) = mean_and_variance([1.0; 5].into_iter());
        assert_eq!((m, v), (1.0, 0.0));
    }
}
