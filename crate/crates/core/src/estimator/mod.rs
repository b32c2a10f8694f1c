//! Class-probability estimators fit on the labeled pool.

mod cv;
pub mod forest;
pub mod logistic;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cv::{cv_select, default_grid, CvSelection};
use forest::{mean_and_variance, TreeEnsemble};
pub use logistic::{LogisticModel, LogisticParams};
use tree::{TrainingView, TreeParams};

use crate::datapool::{FeatureMatrix, PoolState, RowId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    RandomForest,
    Logistic,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::RandomForest => "random_forest",
            EstimatorKind::Logistic => "logistic",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_forest" | "forest" => Ok(EstimatorKind::RandomForest),
            "logistic" => Ok(EstimatorKind::Logistic),
            _ => Err(Error::InvalidConfig(format!("unknown estimator kind `{s}`"))),
        }
    }
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeaturesPerSplit {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, dim: usize) -> usize {
        let k = match self {
            FeaturesPerSplit::Sqrt => (dim as f64).sqrt().floor() as usize,
            FeaturesPerSplit::Log2 => (dim as f64).log2().floor() as usize,
            FeaturesPerSplit::All => dim,
            FeaturesPerSplit::Count(k) => k,
        };
        k.clamp(1, dim.max(1))
    }
}

impl fmt::Display for FeaturesPerSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeaturesPerSplit::Sqrt => f.write_str("sqrt"),
            FeaturesPerSplit::Log2 => f.write_str("log2"),
            FeaturesPerSplit::All => f.write_str("all"),
            FeaturesPerSplit::Count(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for FeaturesPerSplit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(FeaturesPerSplit::Sqrt),
            "log2" => Ok(FeaturesPerSplit::Log2),
            "all" => Ok(FeaturesPerSplit::All),
            _ => s
                .parse()
                .ok()
                .filter(|&k| k > 0)
                .map(FeaturesPerSplit::Count)
                .ok_or_else(|| Error::InvalidConfig(format!("bad features_per_split `{s}`"))),
        }
    }
}

/// How a forest turns per-tree outputs into `p1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteMode {
    /// Fraction of trees whose leaf majority is fraud.
    Hard,
    /// Mean of per-tree leaf fraud frequencies.
    LeafFrequency,
}

impl fmt::Display for VoteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VoteMode::Hard => "hard",
            VoteMode::LeafFrequency => "leaf",
        })
    }
}

impl FromStr for VoteMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(VoteMode::Hard),
            "leaf" | "leaf_frequency" => Ok(VoteMode::LeafFrequency),
            _ => Err(Error::InvalidConfig(format!("unknown vote mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub vote: VoteMode,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: FeaturesPerSplit::Sqrt,
            vote: VoteMode::Hard,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn tree_params(&self, dim: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            features_per_split: self.features_per_split.resolve(dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub forest: ForestParams,
    pub logistic: LogisticParams,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            kind: EstimatorKind::RandomForest,
            forest: ForestParams::default(),
            logistic: LogisticParams::default(),
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn forest(n_trees: usize, seed: u64) -> Self {
        EstimatorConfig {
            forest: ForestParams {
                n_trees,
                ..ForestParams::default()
            },
            seed,
            ..EstimatorConfig::default()
        }
    }

    pub fn logistic(l2_penalty: f64) -> Self {
        EstimatorConfig {
            kind: EstimatorKind::Logistic,
            logistic: LogisticParams {
                l2_penalty,
                ..LogisticParams::default()
            },
            ..EstimatorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.forest.n_trees == 0 {
            return Err(Error::InvalidConfig("estimator.n_trees must be ≥ 1".into()));
        }
        if self.forest.min_leaf == 0 {
            return Err(Error::InvalidConfig("estimator.min_leaf must be ≥ 1".into()));
        }
        if !(self.logistic.l2_penalty >= 0.0) {
            return Err(Error::InvalidConfig("estimator.l2_penalty must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Forest { trees: TreeEnsemble, vote: VoteMode },
    Logistic(LogisticModel),
}

/// A trained `p̂(fraud | x)`. Immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedEstimator {
    config: EstimatorConfig,
    model: Model,
    dim: usize,
    trained_on_step: usize,
}

/// Scores over a list of rows, aligned by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilityScores {
    pub row_ids: Vec<RowId>,
    pub p1: Vec<f64>,
    /// Variance of per-tree votes (zero for logistic models).
    pub dispersion: Vec<f64>,
}

impl ProbabilityScores {
    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }
}

/// Fit on every labeled row of `pool`, in ascending row order.
pub fn fit(pool: &PoolState, features: &FeatureMatrix, config: &EstimatorConfig) -> Result<FittedEstimator> {
    let dim = features.dim();
    let mut x = Vec::with_capacity(pool.n_labeled() * dim);
    let mut y = Vec::with_capacity(pool.n_labeled());
    for (row, label) in pool.labeled() {
        x.extend_from_slice(features.get(row).ok_or(Error::UnknownRow(row))?);
        y.push(label.as_f64());
    }
    fit_xy(&x, &y, dim, config, pool.step())
}

/// Fit on an explicit design matrix with 0/1 targets.
pub fn fit_xy(x: &[f64], y: &[f64], dim: usize, config: &EstimatorConfig, step: usize) -> Result<FittedEstimator> {
    config.validate()?;
    if x.len() != y.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: y.len() * dim,
            found: x.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let model = match config.kind {
        EstimatorKind::RandomForest => {
            let view = TrainingView { x, y, dim };
            let trees = TreeEnsemble::fit(
                &view,
                config.forest.n_trees,
                &config.forest.tree_params(dim),
                config.forest.bootstrap,
                config.seed,
            );
            Model::Forest {
                trees,
                vote: config.forest.vote,
            }
        }
        EstimatorKind::Logistic => Model::Logistic(LogisticModel::fit(x, y, dim, &config.logistic)),
    };
    Ok(FittedEstimator {
        config: *config,
        model,
        dim,
        trained_on_step: step,
    })
}

const PAR_THRESHOLD: usize = 512;

impl FittedEstimator {
    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trained_on_step(&self) -> usize {
        self.trained_on_step
    }

    pub fn logistic_model(&self) -> Option<&LogisticModel> {
        match &self.model {
            Model::Logistic(m) => Some(m),
            Model::Forest { .. } => None,
        }
    }

    /// Number of trees voting fraud, for hard-vote forests.
    pub fn vote_count(&self, x: &[f64]) -> Option<usize> {
        match &self.model {
            Model::Forest {
                trees,
                vote: VoteMode::Hard,
            } => Some(trees.outputs(x).filter(|&v| v >= 0.5).count()),
            _ => None,
        }
    }

    /// `(p1, dispersion)` for one feature vector.
    pub fn predict_one(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        match &self.model {
            Model::Forest { trees, vote } => match vote {
                VoteMode::Hard => mean_and_variance(trees.outputs(x).map(|v| f64::from(v >= 0.5))),
                VoteMode::LeafFrequency => mean_and_variance(trees.outputs(x)),
            },
            Model::Logistic(m) => (m.predict(x), 0.0),
        }
    }

    pub fn predict_scores(&self, features: &FeatureMatrix, rows: &[RowId]) -> Result<ProbabilityScores> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: features.dim(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.0 >= features.n_rows()) {
            return Err(Error::UnknownRow(*r));
        }
        let scored: Vec<(f64, f64)> = if rows.len() >= PAR_THRESHOLD {
            rows.par_iter()
                .map(|&r| self.predict_unchecked(features.row(r)))
                .collect()
        } else {
            rows.iter().map(|&r| self.predict_unchecked(features.row(r))).collect()
        };
        let (p1, dispersion) = scored.into_iter().unzip();
        Ok(ProbabilityScores {
            row_ids: rows.to_vec(),
            p1,
            dispersion,
        })
    }
}

/// Mean binary cross-entropy with probabilities clipped to `[eps, 1 - eps]`.
pub fn cross_entropy(p1: &[f64], y: &[f64], eps: f64) -> f64 {
    let total: f64 = p1
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    total / y.len().max(1) as f64
}

/// Regression forest (mean leaf target), used by LAL.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionForest {
    trees: TreeEnsemble,
    dim: usize,
}

impl RegressionForest {
    pub fn fit(x: &[f64], y: &[f64], dim: usize, params: &ForestParams, seed: u64) -> Result<Self> {
        if y.is_empty() || x.len() != y.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: y.len() * dim,
                found: x.len(),
            });
        }
        let view = TrainingView { x, y, dim };
        let trees = TreeEnsemble::fit(&view, params.n_trees.max(1), &params.tree_params(dim), params.bootstrap, seed);
        Ok(RegressionForest { trees, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.mean(x)
    }
}
