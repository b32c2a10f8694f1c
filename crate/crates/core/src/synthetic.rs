//! Synthetic imbalanced datasets: Gaussian legitimate traffic plus frauds
//! concentrated in a few tight clusters.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datapool::{Dataset, FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredFraudSpec {
    pub n_samples: usize,
    pub dimension: usize,
    pub positive_fraction: f64,
    pub n_clusters: usize,
    /// Distance of each fraud cluster centre from the origin.
    pub separation: f64,
    /// Standard deviation of each fraud cluster.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for ClusteredFraudSpec {
    fn default() -> Self {
        ClusteredFraudSpec {
            n_samples: 5000,
            dimension: 5,
            positive_fraction: 0.05,
            n_clusters: 3,
            separation: 3.0,
            cluster_spread: 0.5,
            seed: 0,
        }
    }
}

impl ClusteredFraudSpec {
    pub fn n_positives(&self) -> usize {
        (self.positive_fraction * self.n_samples as f64).round() as usize
    }
}

/// Legitimate rows ~ N(0, I). Frauds are split evenly across clusters whose
/// centres sit at random directions, `separation` from the origin. Row order
/// is shuffled so that row ids carry no label information.
pub fn clustered_frauds(spec: &ClusteredFraudSpec) -> Result<Dataset> {
    if spec.n_samples == 0 || spec.dimension == 0 || spec.n_clusters == 0 {
        return Err(Error::InvalidConfig("synthetic spec needs rows, dimensions and clusters".into()));
    }
    let n_pos = spec.n_positives();
    if n_pos == 0 || n_pos >= spec.n_samples {
        return Err(Error::InvalidConfig(format!(
            "positive fraction {} gives a single-class dataset",
            spec.positive_fraction
        )));
    }
    let mut rng = seeded_rng(spec.seed);
    let d = spec.dimension;
    let centres: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|a| a / norm * spec.separation).collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..spec.n_samples).collect();
    order.shuffle(&mut rng);
    let mut values = vec![0.0; spec.n_samples * d];
    let mut labels = vec![Label::Legit; spec.n_samples];
    for (k, &row) in order.iter().enumerate() {
        let out = &mut values[row * d..(row + 1) * d];
        if k < n_pos {
            labels[row] = Label::Fraud;
            let c = &centres[k % spec.n_clusters];
            for (o, ci) in out.iter_mut().zip(c) {
                *o = ci + spec.cluster_spread * rng.sample::<f64, _>(StandardNormal);
            }
        } else {
            for o in out.iter_mut() {
                *o = rng.sample(StandardNormal);
            }
        }
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new("synthetic", FeatureMatrix::new(names, values)?, labels)
}

/// Dataset with exactly `n_pos` positives among `n` rows, placed uniformly at
/// random, features drawn i.i.d. regardless of label.
pub fn uninformative(n: usize, n_pos: usize, dimension: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seeded_rng(seed);
    let mut labels = vec![Label::Legit; n];
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    for &i in idx.iter().take(n_pos) {
        labels[i] = Label::Fraud;
    }
    let values = (0..n * dimension).map(|_| rng.sample(StandardNormal)).collect();
    let names = (0..dimension).map(|j| format!("x{j}")).collect();
    Dataset::new("uninformative", FeatureMatrix::new(names, values)?, labels)
}
