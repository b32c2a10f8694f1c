use rand::seq::SliceRandom;

use super::{cross_entropy, fit_xy, EstimatorConfig, EstimatorKind, ForestParams};
use crate::datapool::{FeatureMatrix, PoolState};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

const CE_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub config: EstimatorConfig,
    /// Mean validation cross-entropy per grid entry (empty on fallback).
    pub scores: Vec<f64>,
    /// Stratified folds were impossible; the first grid entry was returned.
    pub fallback: bool,
}

/// Small grid around `base`: trees in {50, 100} × min_leaf in {1, 5} for
/// forests, l2 in {0.1, 1, 10} for logistic models.
pub fn default_grid(base: &EstimatorConfig) -> Vec<EstimatorConfig> {
    match base.kind {
        EstimatorKind::RandomForest => [(50, 1), (50, 5), (100, 1), (100, 5)]
            .into_iter()
            .map(|(n_trees, min_leaf)| EstimatorConfig {
                forest: ForestParams {
                    n_trees,
                    min_leaf,
                    ..base.forest
                },
                ..*base
            })
            .collect(),
        EstimatorKind::Logistic => [0.1, 1.0, 10.0]
            .into_iter()
            .map(|l2| {
                let mut c = *base;
                c.logistic.l2_penalty = l2;
                c
            })
            .collect(),
    }
}

/// Pick the grid entry with the lowest mean validation cross-entropy over
/// stratified folds of the labeled pool. Ties go to the earlier entry.
pub fn cv_select(
    pool: &PoolState,
    features: &FeatureMatrix,
    grid: &[EstimatorConfig],
    k_folds: usize,
    seed: u64,
) -> Result<CvSelection> {
    let first = *grid
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty cross-validation grid".into()))?;
    let dim = features.dim();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (row, label) in pool.labeled() {
        if label.is_fraud() {
            pos.push(row);
        } else {
            neg.push(row);
        }
    }
    if grid.len() == 1 {
        return Ok(CvSelection {
            config: first,
            scores: Vec::new(),
            fallback: false,
        });
    }
    if k_folds < 2 || pos.len() < k_folds || neg.len() < k_folds {
        log::warn!(
            "cross-validation infeasible ({} positives, {} negatives, {k_folds} folds); using first grid entry",
            pos.len(),
            neg.len()
        );
        return Ok(CvSelection {
            config: first,
            scores: Vec::new(),
            fallback: true,
        });
    }

    let mut rng = seeded_rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of = Vec::new();
    for (i, r) in pos.iter().enumerate() {
        fold_of.push((*r, 1.0, i % k_folds));
    }
    for (i, r) in neg.iter().enumerate() {
        fold_of.push((*r, 0.0, i % k_folds));
    }

    let mut scores = Vec::with_capacity(grid.len());
    for cfg in grid {
        let mut total = 0.0;
        for fold in 0..k_folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for &(row, y, f) in &fold_of {
                let x = features.row(row);
                if f == fold {
                    vx.extend_from_slice(x);
                    vy.push(y);
                } else {
                    tx.extend_from_slice(x);
                    ty.push(y);
                }
            }
            let est = fit_xy(&tx, &ty, dim, cfg, pool.step())?;
            let p: Vec<f64> = vx
                .chunks_exact(dim)
                .map(|x| est.predict_one(x).map(|(p, _)| p))
                .collect::<Result<_>>()?;
            total += cross_entropy(&p, &vy, CE_EPS);
        }
        scores.push(total / k_folds as f64);
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s < scores[b] { i } else { b });
    Ok(CvSelection {
        config: grid[best],
        scores,
        fallback: false,
    })
}
