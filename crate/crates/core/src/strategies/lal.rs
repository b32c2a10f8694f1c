//! Learning active learning: a regressor, trained offline on simulated
//! synthetic tasks, predicts how much labeling a row would reduce validation
//! cross-entropy. The strategy queries the row with the largest prediction.
//!
//! Feature vector (one per candidate row):
//!
//! | idx | feature                                                     |
//! |-----|-------------------------------------------------------------|
//! | 0   | labeled-set size                                            |
//! | 1   | positive fraction of the labeled set                        |
//! | 2   | mean `p1` over unlabeled rows                               |
//! | 3   | mean vote dispersion over unlabeled rows                    |
//! | 4   | candidate `p1`                                              |
//! | 5   | candidate vote dispersion                                   |
//! | 6   | distance to nearest labeled fraud / mean of that distance   |
//!
//! The distance is divided by its mean over the unlabeled rows so the
//! regressor transfers across feature scales.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AdviceVector, QueryStrategy, StepContext, StrategyKind};
use crate::datapool::{FeatureMatrix, Label, PoolState, RowId};
use crate::error::{Error, Result};
use crate::estimator::{cross_entropy, fit_xy, EstimatorConfig, ForestParams, ProbabilityScores, RegressionForest};
use crate::rng::{derive_seed, seeded_rng};
use crate::synthetic::{clustered_frauds, ClusteredFraudSpec};

pub const N_FEATURES: usize = 7;
pub type LalFeatures = [f64; N_FEATURES];

const CE_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LalMode {
    /// Labeled sets grow by uniformly random additions.
    Independent,
    /// After the first round, additions are chosen by the regressor trained
    /// so far, so the simulated states resemble the ones met at deployment.
    Iterative,
}

impl fmt::Display for LalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LalMode::Independent => "independent",
            LalMode::Iterative => "iterative",
        })
    }
}

impl FromStr for LalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(LalMode::Independent),
            "iterative" => Ok(LalMode::Iterative),
            _ => Err(Error::InvalidConfig(format!("unknown LAL mode `{s}`"))),
        }
    }
}

/// Synthetic task family and simulation budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LalConfig {
    /// Number of simulated episodes.
    pub budget: usize,
    /// Rows per synthetic task; half form the pool, half the validation set.
    pub task_size: usize,
    pub dimension: usize,
    pub positive_fraction: f64,
    /// Labeled rows at the start of an episode (one fraud, one legit, rest random).
    pub initial_labeled: usize,
    /// States visited per episode.
    pub episode_len: usize,
    /// Random candidates scored per state.
    pub candidates_per_state: usize,
    /// Training rounds in iterative mode.
    pub rounds: usize,
    /// Trees of the forest fit inside simulations.
    pub sim_trees: usize,
    pub regressor_trees: usize,
    pub seed: u64,
}

impl Default for LalConfig {
    fn default() -> Self {
        LalConfig {
            budget: 64,
            task_size: 200,
            dimension: 4,
            positive_fraction: 0.1,
            initial_labeled: 10,
            episode_len: 10,
            candidates_per_state: 4,
            rounds: 3,
            sim_trees: 20,
            regressor_trees: 50,
            seed: 0,
        }
    }
}

impl LalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidConfig("lal.budget must be ≥ 1".into()));
        }
        let half_pos = self.positive_fraction * (self.task_size / 2) as f64;
        if half_pos < 2.0 || self.positive_fraction >= 1.0 {
            return Err(Error::InvalidConfig(
                "lal task family is degenerate: each half of a task needs ≥ 2 frauds and some legit rows".into(),
            ));
        }
        if self.initial_labeled < 2 || self.initial_labeled >= self.task_size / 2 {
            return Err(Error::InvalidConfig("lal.initial_labeled must lie in [2, task_size/2)".into()));
        }
        if self.episode_len == 0 || self.candidates_per_state == 0 || self.rounds == 0 {
            return Err(Error::InvalidConfig("lal episode_len, candidates and rounds must be ≥ 1".into()));
        }
        Ok(())
    }

    fn sim_estimator(&self, seed: u64) -> EstimatorConfig {
        EstimatorConfig::forest(self.sim_trees.max(1), seed)
    }
}

/// Rows of (state + point features) → observed loss improvement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LalTrainingSet {
    pub features: Vec<LalFeatures>,
    pub targets: Vec<f64>,
}

impl LalTrainingSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn extend(&mut self, other: LalTrainingSet) {
        self.features.extend(other.features);
        self.targets.extend(other.targets);
    }
}

/// Anything that predicts the improvement of labeling a row.
pub trait ImprovementModel: Send + Sync {
    fn predict(&self, features: &LalFeatures) -> f64;
}

#[derive(Debug, Clone)]
pub struct LalRegressor {
    forest: RegressionForest,
}

impl ImprovementModel for LalRegressor {
    fn predict(&self, features: &LalFeatures) -> f64 {
        self.forest.predict(features)
    }
}

pub fn fit_regressor(set: &LalTrainingSet, n_trees: usize, seed: u64) -> Result<LalRegressor> {
    if set.is_empty() {
        return Err(Error::Runtime("empty LAL training set".into()));
    }
    let x: Vec<f64> = set.features.iter().flatten().copied().collect();
    let params = ForestParams {
        n_trees: n_trees.max(1),
        min_leaf: 5,
        ..ForestParams::default()
    };
    Ok(LalRegressor {
        forest: RegressionForest::fit(&x, &set.targets, N_FEATURES, &params, seed)?,
    })
}

/// Distance from each of `rows` to the nearest labeled fraud.
fn nearest_fraud_distance(features: &FeatureMatrix, pool: &PoolState, rows: &[RowId]) -> Vec<f64> {
    let frauds: Vec<&[f64]> = pool
        .labeled()
        .filter(|(_, l)| l.is_fraud())
        .map(|(r, _)| features.row(r))
        .collect();
    let dist = |r: &RowId| {
        let x = features.row(*r);
        frauds
            .iter()
            .map(|f| f.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    };
    if rows.len() >= 512 {
        rows.par_iter().map(dist).collect()
    } else {
        rows.iter().map(dist).collect()
    }
}

/// Feature vectors for every scored row (scores must cover the unlabeled pool).
pub fn lal_features(features: &FeatureMatrix, pool: &PoolState, scores: &ProbabilityScores) -> Vec<LalFeatures> {
    let n = scores.len().max(1) as f64;
    let mean_p1 = scores.p1.iter().sum::<f64>() / n;
    let mean_disp = scores.dispersion.iter().sum::<f64>() / n;
    let n_labeled = pool.n_labeled() as f64;
    let pos_frac = pool.labeled_positives() as f64 / n_labeled.max(1.0);

    let dist = nearest_fraud_distance(features, pool, &scores.row_ids);
    let finite: Vec<f64> = dist.iter().copied().filter(|d| d.is_finite()).collect();
    let mean_dist = if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    scores
        .p1
        .iter()
        .zip(&scores.dispersion)
        .zip(&dist)
        .map(|((&p, &d), &dd)| {
            let rel = if !dd.is_finite() {
                // No labeled fraud yet: every row is equally far.
                1.0
            } else if mean_dist > 0.0 {
                dd / mean_dist
            } else {
                0.0
            };
            [n_labeled, pos_frac, mean_p1, mean_disp, p, d, rel]
        })
        .collect()
}

/// Validation cross-entropy before minus after adding one labeled row.
pub fn loss_improvement(
    train_x: &[f64],
    train_y: &[f64],
    candidate: (&[f64], f64),
    val_x: &[f64],
    val_y: &[f64],
    dim: usize,
    config: &EstimatorConfig,
) -> Result<f64> {
    let before = validation_loss(train_x, train_y, val_x, val_y, dim, config)?;
    let mut x = train_x.to_vec();
    x.extend_from_slice(candidate.0);
    let mut y = train_y.to_vec();
    y.push(candidate.1);
    let after = validation_loss(&x, &y, val_x, val_y, dim, config)?;
    Ok(before - after)
}

fn validation_loss(x: &[f64], y: &[f64], val_x: &[f64], val_y: &[f64], dim: usize, cfg: &EstimatorConfig) -> Result<f64> {
    let est = fit_xy(x, y, dim, cfg, 0)?;
    let p: Vec<f64> = val_x
        .chunks_exact(dim)
        .map(|r| est.predict_one(r).map(|(p, _)| p))
        .collect::<Result<_>>()?;
    Ok(cross_entropy(&p, val_y, CE_EPS))
}

struct SimTask {
    features: FeatureMatrix,
    labels: Vec<Label>,
    pool_rows: Vec<RowId>,
    val_x: Vec<f64>,
    val_y: Vec<f64>,
}

fn sample_task(cfg: &LalConfig, rng: &mut crate::rng::Rng) -> Result<SimTask> {
    for _ in 0..32 {
        let spec = ClusteredFraudSpec {
            n_samples: cfg.task_size,
            dimension: cfg.dimension.max(1),
            positive_fraction: cfg.positive_fraction,
            n_clusters: rng.gen_range(1..=3),
            separation: rng.gen_range(1.5..3.5),
            cluster_spread: rng.gen_range(0.4..1.0),
            seed: rng.gen(),
        };
        let ds = clustered_frauds(&spec)?;
        let half = cfg.task_size / 2;
        let labels: Vec<Label> = (0..cfg.task_size).map(|i| ds.labels.get(RowId(i)).unwrap()).collect();
        let pool_pos = labels[..half].iter().filter(|l| l.is_fraud()).count();
        let val_pos = labels[half..].iter().filter(|l| l.is_fraud()).count();
        if pool_pos < 1 || pool_pos == half || val_pos < 1 {
            continue;
        }
        let mut val_x = Vec::new();
        let mut val_y = Vec::new();
        for (i, label) in labels.iter().enumerate().skip(half) {
            val_x.extend_from_slice(ds.features.row(RowId(i)));
            val_y.push(label.as_f64());
        }
        return Ok(SimTask {
            features: ds.features,
            labels,
            pool_rows: (0..half).map(RowId).collect(),
            val_x,
            val_y,
        });
    }
    Err(Error::Runtime("could not draw a two-class synthetic task".into()))
}

fn simulate_episode(
    cfg: &LalConfig,
    guide: Option<&LalRegressor>,
    seed: u64,
) -> Result<LalTrainingSet> {
    let mut rng = seeded_rng(seed);
    let task = sample_task(cfg, &mut rng)?;
    let dim = task.features.dim();
    let est_cfg = cfg.sim_estimator(derive_seed(seed, 1));

    // One fraud, one legit, then random rows.
    let mut order = task.pool_rows.clone();
    order.shuffle(&mut rng);
    let first_pos = *order.iter().find(|r| task.labels[r.0].is_fraud()).expect("pool has a fraud");
    let first_neg = *order.iter().find(|r| !task.labels[r.0].is_fraud()).expect("pool has a legit row");
    let mut labeled = vec![first_pos, first_neg];
    labeled.extend(
        order
            .iter()
            .filter(|r| **r != first_pos && **r != first_neg)
            .take(cfg.initial_labeled - 2),
    );
    let mut pool = PoolState::new(
        labeled.iter().map(|r| (*r, task.labels[r.0])),
        task.pool_rows.iter().copied().filter(|r| !labeled.contains(r)),
    )?;

    let mut out = LalTrainingSet::default();
    for _ in 0..cfg.episode_len {
        if pool.is_exhausted() {
            break;
        }
        let (train_x, train_y): (Vec<f64>, Vec<f64>) = {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (r, l) in pool.labeled() {
                x.extend_from_slice(task.features.row(r));
                y.push(l.as_f64());
            }
            (x, y)
        };
        let est = fit_xy(&train_x, &train_y, dim, &est_cfg, pool.step())?;
        let unl = pool.unlabeled_rows();
        let scores = est.predict_scores(&task.features, &unl)?;
        let feats = lal_features(&task.features, &pool, &scores);
        let base_loss = {
            let p: Vec<f64> = task
                .val_x
                .chunks_exact(dim)
                .map(|r| est.predict_one(r).map(|(p, _)| p))
                .collect::<Result<_>>()?;
            cross_entropy(&p, &task.val_y, CE_EPS)
        };

        let k = cfg.candidates_per_state.min(unl.len());
        let picks = rand::seq::index::sample(&mut rng, unl.len(), k);
        for i in picks.iter() {
            let r = unl[i];
            let mut x = train_x.clone();
            x.extend_from_slice(task.features.row(r));
            let mut y = train_y.clone();
            y.push(task.labels[r.0].as_f64());
            let after = validation_loss(&x, &y, &task.val_x, &task.val_y, dim, &est_cfg)?;
            out.features.push(feats[i]);
            out.targets.push(base_loss - after);
        }

        let next = match guide {
            Some(reg) => {
                let preds: Vec<f64> = feats.iter().map(|f| reg.predict(f)).collect();
                super::first_argmax(&preds).expect("non-empty pool")
            }
            None => rng.gen_range(0..unl.len()),
        };
        let row = unl[next];
        pool = pool.with_label(row, task.labels[row.0])?;
    }
    Ok(out)
}

/// Run the Monte Carlo simulations. Episodes run in parallel from
/// per-episode seeds, so the result depends only on `(mode, config, seed)`.
pub fn build_lal_training_set(mode: LalMode, config: &LalConfig, seed: u64) -> Result<LalTrainingSet> {
    config.validate()?;
    let run_round = |episodes: std::ops::Range<usize>, guide: Option<&LalRegressor>| -> Result<LalTrainingSet> {
        let parts: Vec<LalTrainingSet> = episodes
            .into_par_iter()
            .map(|e| simulate_episode(config, guide, derive_seed(seed, e as u64)))
            .collect::<Result<_>>()?;
        let mut set = LalTrainingSet::default();
        for p in parts {
            set.extend(p);
        }
        Ok(set)
    };
    match mode {
        LalMode::Independent => run_round(0..config.budget, None),
        LalMode::Iterative => {
            let rounds = config.rounds.min(config.budget);
            let per_round = config.budget / rounds;
            let mut set = LalTrainingSet::default();
            let mut guide: Option<LalRegressor> = None;
            for round in 0..rounds {
                let start = round * per_round;
                let end = if round + 1 == rounds { config.budget } else { start + per_round };
                set.extend(run_round(start..end, guide.as_ref())?);
                if round + 1 < rounds {
                    guide = Some(fit_regressor(&set, config.regressor_trees, derive_seed(seed, 1_000_000 + round as u64))?);
                }
            }
            Ok(set)
        }
    }
}

type CacheSlot = Arc<OnceLock<std::result::Result<Arc<LalRegressor>, String>>>;

/// Trained regressor for `(mode, config)`, built once per process.
pub fn trained_regressor(mode: LalMode, config: &LalConfig) -> Result<Arc<LalRegressor>> {
    static CACHE: OnceLock<Mutex<HashMap<String, CacheSlot>>> = OnceLock::new();
    let key = format!("{mode}|{config:?}");
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().expect("LAL cache poisoned");
        Arc::clone(map.entry(key).or_default())
    };
    slot.get_or_init(|| {
        let seed = derive_seed(config.seed, mode as u64);
        build_lal_training_set(mode, config, seed)
            .and_then(|set| fit_regressor(&set, config.regressor_trees, derive_seed(seed, 7)))
            .map(Arc::new)
            .map_err(|e| e.to_string())
    })
    .clone()
    .map_err(Error::Runtime)
}

/// One-hot on the row with the largest predicted improvement.
pub fn advise_lal(model: Option<&dyn ImprovementModel>, ctx: &StepContext<'_>) -> Result<AdviceVector> {
    let model = model.ok_or(Error::RegressorMissing)?;
    if ctx.pool().is_exhausted() {
        return Err(Error::EmptyPool);
    }
    let scored = ctx.current()?;
    let feats = lal_features(ctx.features(), ctx.pool(), &scored.scores);
    let preds: Vec<f64> = feats.iter().map(|f| model.predict(f)).collect();
    AdviceVector::argmax(scored.scores.row_ids.clone(), &preds)
}

pub struct Lal {
    mode: LalMode,
    model: Option<Arc<dyn ImprovementModel>>,
}

impl Lal {
    pub fn trained(mode: LalMode, config: &LalConfig) -> Result<Self> {
        let reg: Arc<dyn ImprovementModel> = trained_regressor(mode, config)?;
        Ok(Lal { mode, model: Some(reg) })
    }

    pub fn with_model(mode: LalMode, model: Option<Arc<dyn ImprovementModel>>) -> Self {
        Lal { mode, model }
    }
}

impl QueryStrategy for Lal {
    fn kind(&self) -> StrategyKind {
        match self.mode {
            LalMode::Independent => StrategyKind::LalIndependent,
            LalMode::Iterative => StrategyKind::LalIterative,
        }
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        advise_lal(self.model.as_deref(), ctx)
    }
}
