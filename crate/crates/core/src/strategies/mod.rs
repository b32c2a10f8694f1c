//! Query strategies. Each one turns the current pool into an advice vector:
//! a probability distribution over the unlabeled rows.

pub mod albl;
pub mod lal;

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datapool::{FeatureMatrix, Label, PoolState, RowId};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig, FittedEstimator, ProbabilityScores};

pub use albl::{Albl, AlblConfig, ArmKind};
pub use lal::{Lal, LalConfig, LalMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    Base,
    BaseRefit,
    Random,
    Uncertainty,
    LalIndependent,
    LalIterative,
    Albl,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Base,
        StrategyKind::BaseRefit,
        StrategyKind::Random,
        StrategyKind::Uncertainty,
        StrategyKind::LalIndependent,
        StrategyKind::LalIterative,
        StrategyKind::Albl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Base => "base",
            StrategyKind::BaseRefit => "base_refit",
            StrategyKind::Random => "random",
            StrategyKind::Uncertainty => "uncertainty",
            StrategyKind::LalIndependent => "lal_independent",
            StrategyKind::LalIterative => "lal_iterative",
            StrategyKind::Albl => "albl",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "us" => Ok(StrategyKind::Uncertainty),
            _ => StrategyKind::ALL
                .into_iter()
                .find(|k| k.name() == s)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Query distribution over the current unlabeled rows, in ascending row order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdviceVector {
    pub row_ids: Vec<RowId>,
    pub probs: Vec<f64>,
}

impl AdviceVector {
    pub fn uniform(row_ids: Vec<RowId>) -> Result<Self> {
        if row_ids.is_empty() {
            return Err(Error::EmptyPool);
        }
        let p = 1.0 / row_ids.len() as f64;
        let probs = vec![p; row_ids.len()];
        Ok(AdviceVector { row_ids, probs })
    }

    pub fn one_hot(row_ids: Vec<RowId>, index: usize) -> Result<Self> {
        if row_ids.is_empty() {
            return Err(Error::EmptyPool);
        }
        if index >= row_ids.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: row_ids.len(),
            });
        }
        let mut probs = vec![0.0; row_ids.len()];
        probs[index] = 1.0;
        Ok(AdviceVector { row_ids, probs })
    }

    /// One-hot on the first maximum of `values` (lowest row id wins ties).
    pub fn argmax(row_ids: Vec<RowId>, values: &[f64]) -> Result<Self> {
        let idx = first_argmax(values).ok_or(Error::EmptyPool)?;
        AdviceVector::one_hot(row_ids, idx)
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn prob_of(&self, row: RowId) -> f64 {
        self.row_ids
            .binary_search(&row)
            .map_or(0.0, |i| self.probs[i])
    }

    /// The row holding all the mass, if any.
    pub fn hot_row(&self) -> Option<RowId> {
        self.probs
            .iter()
            .position(|&p| p == 1.0)
            .map(|i| self.row_ids[i])
    }

    pub fn validate(&self, pool: &PoolState) -> Result<()> {
        if self.row_ids.len() != self.probs.len() || self.row_ids.len() != pool.n_unlabeled() {
            return Err(Error::Runtime("advice does not cover the unlabeled pool".into()));
        }
        if !self.row_ids.iter().copied().eq(pool.unlabeled()) {
            return Err(Error::Runtime("advice rows differ from the unlabeled pool".into()));
        }
        if self.probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Runtime("advice has a negative probability".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Runtime(format!("advice sums to {total}")));
        }
        Ok(())
    }
}

pub(crate) fn first_argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// An estimator fit on the current labeled pool with its scores over the
/// unlabeled rows.
#[derive(Debug, Clone)]
pub struct ScoredEstimator {
    pub estimator: FittedEstimator,
    pub scores: ProbabilityScores,
}

impl ScoredEstimator {
    pub fn fit(pool: &PoolState, features: &FeatureMatrix, config: &EstimatorConfig) -> Result<Self> {
        let estimator = estimator::fit(pool, features, config)?;
        let scores = estimator.predict_scores(features, &pool.unlabeled_rows())?;
        Ok(ScoredEstimator { estimator, scores })
    }
}

/// Everything a strategy may look at for one decision. The refit estimator is
/// computed lazily, at most once per context, and shared by all strategies.
pub struct StepContext<'a> {
    features: &'a FeatureMatrix,
    pool: &'a PoolState,
    estimator_config: &'a EstimatorConfig,
    current: OnceCell<Arc<ScoredEstimator>>,
}

impl<'a> StepContext<'a> {
    pub fn new(features: &'a FeatureMatrix, pool: &'a PoolState, estimator_config: &'a EstimatorConfig) -> Self {
        StepContext {
            features,
            pool,
            estimator_config,
            current: OnceCell::new(),
        }
    }

    /// Reuse an estimator already fit on this exact pool.
    pub fn with_current(mut self, current: Option<Arc<ScoredEstimator>>) -> Self {
        if let Some(c) = current {
            debug_assert_eq!(c.estimator.trained_on_step(), self.pool.step());
            self.current = OnceCell::from(c);
        }
        self
    }

    pub fn features(&self) -> &'a FeatureMatrix {
        self.features
    }

    pub fn pool(&self) -> &'a PoolState {
        self.pool
    }

    pub fn estimator_config(&self) -> &'a EstimatorConfig {
        self.estimator_config
    }

    pub fn current(&self) -> Result<Arc<ScoredEstimator>> {
        if let Some(c) = self.current.get() {
            return Ok(Arc::clone(c));
        }
        let fitted = Arc::new(ScoredEstimator::fit(self.pool, self.features, self.estimator_config)?);
        let _ = self.current.set(Arc::clone(&fitted));
        Ok(fitted)
    }

    /// The estimator if one was fit during this step.
    pub fn take_current(self) -> Option<Arc<ScoredEstimator>> {
        self.current.into_inner()
    }
}

/// A query strategy `H_t`. Strategies see features and revealed labels only.
pub trait QueryStrategy: Send {
    fn kind(&self) -> StrategyKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Called once with the initial pool, before the first step.
    fn start(&mut self, _ctx: &StepContext<'_>) -> Result<()> {
        Ok(())
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector>;

    /// Called after every answered query with the updated pool.
    fn refresh(&mut self, _ctx: &StepContext<'_>, _queried: RowId, _label: Label) -> Result<()> {
        Ok(())
    }

    /// The classifier this strategy would hand to a pure exploitation phase,
    /// when it differs from a refit on the current pool.
    fn resulting_estimator(&self) -> Option<Arc<FittedEstimator>> {
        None
    }
}

/// Exploitation: one-hot on the highest `p1`.
pub fn greedy_from_scores(scores: &ProbabilityScores) -> Result<AdviceVector> {
    AdviceVector::argmax(scores.row_ids.clone(), &scores.p1)
}

pub fn advise_greedy(est: &FittedEstimator, pool: &PoolState, features: &FeatureMatrix) -> Result<AdviceVector> {
    if pool.is_exhausted() {
        return Err(Error::EmptyPool);
    }
    greedy_from_scores(&est.predict_scores(features, &pool.unlabeled_rows())?)
}

pub fn advise_random(pool: &PoolState) -> Result<AdviceVector> {
    AdviceVector::uniform(pool.unlabeled_rows())
}

/// One-hot on the smallest `|P(1|x) - P(0|x)| = |2 p1 - 1|`.
pub fn uncertainty_from_scores(scores: &ProbabilityScores) -> Result<AdviceVector> {
    let neg_margin: Vec<f64> = scores.p1.iter().map(|p| -(2.0 * p - 1.0).abs()).collect();
    AdviceVector::argmax(scores.row_ids.clone(), &neg_margin)
}

pub fn advise_uncertainty(est: &FittedEstimator, pool: &PoolState, features: &FeatureMatrix) -> Result<AdviceVector> {
    if pool.is_exhausted() {
        return Err(Error::EmptyPool);
    }
    uncertainty_from_scores(&est.predict_scores(features, &pool.unlabeled_rows())?)
}

/// Greedy exploitation with the estimator fit once on the initial pool.
#[derive(Debug, Default)]
pub struct Base {
    frozen: Option<Arc<FittedEstimator>>,
    /// `p1` by row id, scored once at fit time.
    p1_by_row: Vec<f64>,
}

impl Base {
    pub fn new() -> Self {
        Base::default()
    }

    pub fn frozen_estimator(&self) -> Option<&Arc<FittedEstimator>> {
        self.frozen.as_ref()
    }

    fn ensure_fit(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        if self.frozen.is_some() {
            return Ok(());
        }
        let scored = ctx.current()?;
        let mut p1_by_row = vec![f64::NEG_INFINITY; ctx.features().n_rows()];
        for (r, p) in scored.scores.row_ids.iter().zip(&scored.scores.p1) {
            p1_by_row[r.0] = *p;
        }
        self.p1_by_row = p1_by_row;
        self.frozen = Some(Arc::new(scored.estimator.clone()));
        Ok(())
    }
}

impl QueryStrategy for Base {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Base
    }

    fn start(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        self.ensure_fit(ctx)
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        self.ensure_fit(ctx)?;
        let rows = ctx.pool().unlabeled_rows();
        let values: Vec<f64> = rows.iter().map(|r| self.p1_by_row[r.0]).collect();
        AdviceVector::argmax(rows, &values)
    }

    fn resulting_estimator(&self) -> Option<Arc<FittedEstimator>> {
        self.frozen.clone()
    }
}

/// Greedy exploitation with an estimator refit on every step's labeled pool.
#[derive(Debug, Default)]
pub struct BaseRefit {
    last_fit_step: Option<usize>,
}

impl BaseRefit {
    pub fn new() -> Self {
        BaseRefit::default()
    }

    pub fn last_fit_step(&self) -> Option<usize> {
        self.last_fit_step
    }
}

impl QueryStrategy for BaseRefit {
    fn kind(&self) -> StrategyKind {
        StrategyKind::BaseRefit
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        let scored = ctx.current()?;
        self.last_fit_step = Some(scored.estimator.trained_on_step());
        greedy_from_scores(&scored.scores)
    }
}

#[derive(Debug, Default)]
pub struct RandomStrategy;

impl QueryStrategy for RandomStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Random
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        advise_random(ctx.pool())
    }
}

#[derive(Debug, Default)]
pub struct Uncertainty;

impl QueryStrategy for Uncertainty {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Uncertainty
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        if ctx.pool().is_exhausted() {
            return Err(Error::EmptyPool);
        }
        uncertainty_from_scores(&ctx.current()?.scores)
    }
}

/// Settings the stateful strategies need at construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategySettings {
    pub lal: LalConfig,
    pub albl: AlblConfig,
}

pub fn build_strategy(kind: StrategyKind, settings: &StrategySettings) -> Result<Box<dyn QueryStrategy>> {
    Ok(match kind {
        StrategyKind::Base => Box::new(Base::new()),
        StrategyKind::BaseRefit => Box::new(BaseRefit::new()),
        StrategyKind::Random => Box::new(RandomStrategy),
        StrategyKind::Uncertainty => Box::new(Uncertainty),
        StrategyKind::LalIndependent => Box::new(Lal::trained(LalMode::Independent, &settings.lal)?),
        StrategyKind::LalIterative => Box::new(Lal::trained(LalMode::Iterative, &settings.lal)?),
        StrategyKind::Albl => Box::new(Albl::new(&settings.albl)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<RowId> {
        (0..n).map(RowId).collect()
    }

    fn scores(p1: &[f64]) -> ProbabilityScores {
        ProbabilityScores {
            row_ids: rows(p1.len()),
            p1: p1.to_vec(),
            dispersion: vec![0.0; p1.len()],
        }
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_from_scores(&scores(&[0.1, 0.7, 0.3])).unwrap().hot_row(), Some(RowId(1)));
        assert_eq!(greedy_from_scores(&scores(&[0.4, 0.4])).unwrap().hot_row(), Some(RowId(0)));
        assert_eq!(greedy_from_scores(&scores(&[0.2])).unwrap().hot_row(), Some(RowId(0)));
        assert!(matches!(greedy_from_scores(&scores(&[])), Err(Error::EmptyPool)));
    }

    #[test]
    fn uncertainty_examples() {
        assert_eq!(uncertainty_from_scores(&scores(&[0.9, 0.5, 0.1])).unwrap().hot_row(), Some(RowId(1)));
        assert_eq!(uncertainty_from_scores(&scores(&[0.6, 0.4])).unwrap().hot_row(), Some(RowId(0)));
        assert_eq!(uncertainty_from_scores(&scores(&[1.0, 1.0, 1.0])).unwrap().hot_row(), Some(RowId(0)));
    }

    #[test]
    fn random_examples() {
        let pool = PoolState::new([], rows(4)).unwrap();
        let adv = advise_random(&pool).unwrap();
        assert_eq!(adv.probs, vec![0.25; 4]);
        adv.validate(&pool).unwrap();
        let pool = PoolState::new([], rows(1)).unwrap();
        assert_eq!(advise_random(&pool).unwrap().probs, vec![1.0]);
        let empty = PoolState::new([], []).unwrap();
        assert!(matches!(advise_random(&empty), Err(Error::EmptyPool)));
    }

    #[test]
    fn names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("us".parse::<StrategyKind>().unwrap(), StrategyKind::Uncertainty);
        assert!("svm_margin".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn validate_rejects_bad_mass() {
        let pool = PoolState::new([], rows(2)).unwrap();
        let adv = AdviceVector {
            row_ids: rows(2),
            probs: vec![0.5, 0.6],
        };
        assert!(adv.validate(&pool).is_err());
    }
}
