use std::sync::Arc;
use std::time::Duration;

use rand::Rng as _;

use super::{compute_reward, config_digest, RewardSpec, RunResult, Scenario, StepRecord, EXPLOIT};
use crate::cafda::{sample_query, Cafda, WeightVector};
use crate::config::{PolicyKind, RunConfig};
use crate::datapool::{initial_split, Dataset, FeatureMatrix, Label, PoolState, RowId};
use crate::error::{Error, Result};
use crate::estimator::{cv_select, default_grid, EstimatorConfig, FittedEstimator};
use crate::rng::{derive_seed, seeded_rng, stream, Rng};
use crate::strategies::{build_strategy, AdviceVector, QueryStrategy, ScoredEstimator, StepContext, StrategyKind};

/// The query the engine is waiting on.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub t: usize,
    pub row_id: RowId,
    pub strategy: String,
    pub strategy_index: usize,
    /// Chosen by post-switch exploitation rather than the configured policy.
    pub exploit: bool,
}

enum Policy {
    Solo(Box<dyn QueryStrategy>),
    Mixture(Cafda),
}

/// Frozen post-switch classifier with its `p1` by row id.
type Exploiter = (Arc<FittedEstimator>, Vec<f64>);

/// A run driven one query at a time: [`propose`](RunEngine::propose) picks
/// the next row, [`resolve`](RunEngine::resolve) takes its label. The oracle
/// may answer at any pace; simulated runs and interactive sessions share
/// this loop.
pub struct RunEngine {
    dataset: Arc<Dataset>,
    policy_kind: PolicyKind,
    policy: Policy,
    estimator: EstimatorConfig,
    reward: RewardSpec,
    horizon: usize,
    /// (switch step, refit after switch) in scenario 2.
    switch: Option<(usize, bool)>,
    pool: PoolState,
    query_rng: Rng,
    /// Estimator fit on exactly `pool`, shared by every strategy this step.
    current: Option<Arc<ScoredEstimator>>,
    exploiter: Option<Exploiter>,
    started: bool,
    pending: Option<Proposal>,
    records: Vec<StepRecord>,
    cum_reward: f64,
    truncated: bool,
    digest: String,
    seed: u64,
}

impl RunEngine {
    pub fn new(dataset: Arc<Dataset>, config: &RunConfig, policy_kind: PolicyKind) -> Result<Self> {
        config.validate()?;
        let pool = initial_split(&dataset, &config.effective_split())?;
        Self::with_pool(dataset, config, policy_kind, pool)
    }

    /// Start from a caller-supplied initial pool instead of a random split.
    pub fn with_pool(dataset: Arc<Dataset>, config: &RunConfig, policy_kind: PolicyKind, pool: PoolState) -> Result<Self> {
        config.validate()?;
        if let Some(r) = pool.labeled_rows().into_iter().chain(pool.unlabeled()).find(|r| r.0 >= dataset.n_rows()) {
            return Err(Error::UnknownRow(r));
        }
        if pool.labeled().any(|(r, l)| dataset.labels.get(r) != Some(l)) {
            return Err(Error::InvalidConfig("initial pool disagrees with the dataset labels".into()));
        }
        let mut estimator = config.effective_estimator();
        if config.cv {
            let grid = default_grid(&estimator);
            let chosen = cv_select(&pool, &dataset.features, &grid, config.cv_folds, estimator.seed)?;
            if chosen.fallback {
                log::warn!("too few labeled rows per class for {}-fold CV; using the configured estimator", config.cv_folds);
            }
            estimator = chosen.config;
        }
        let policy = match policy_kind {
            PolicyKind::Solo(kind) => Policy::Solo(build_strategy(kind, &config.settings)?),
            PolicyKind::Cafda => {
                let experts = config
                    .experts
                    .iter()
                    .map(|&k| build_strategy(k, &config.settings))
                    .collect::<Result<Vec<_>>>()?;
                Policy::Mixture(Cafda::new(
                    experts,
                    config.cafda,
                    seeded_rng(derive_seed(config.seed, stream::PICK)),
                )?)
            }
        };
        let switch = (config.scenario == Scenario::SwitchToExploit).then_some((config.switch_step, config.post_switch_refit));
        Ok(RunEngine {
            policy_kind,
            policy,
            estimator,
            reward: config.reward.clone(),
            horizon: config.horizon,
            switch,
            pool,
            query_rng: seeded_rng(derive_seed(config.seed, stream::QUERY)),
            current: None,
            exploiter: None,
            started: false,
            pending: None,
            records: Vec::new(),
            cum_reward: 0.0,
            truncated: false,
            digest: config_digest(config, policy_kind),
            seed: config.seed,
            dataset,
        })
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy_kind
    }

    pub fn pool(&self) -> &PoolState {
        &self.pool
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.dataset.features
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn cum_reward(&self) -> f64 {
        self.cum_reward
    }

    pub fn pending(&self) -> Option<&Proposal> {
        self.pending.as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn estimator_config(&self) -> &EstimatorConfig {
        &self.estimator
    }

    /// Current mixture weights, for CAFDA runs.
    pub fn weights(&self) -> Option<&WeightVector> {
        match &self.policy {
            Policy::Mixture(c) => Some(c.weights()),
            Policy::Solo(_) => None,
        }
    }

    /// No further query will be proposed.
    pub fn is_finished(&self) -> bool {
        self.pending.is_none() && (self.records.len() >= self.horizon || self.pool.is_exhausted())
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    fn in_exploit_phase(&self, t: usize) -> bool {
        matches!(self.switch, Some((s, _)) if t > s)
    }

    /// The next query, or `None` once the horizon is reached or the pool is
    /// empty. Repeated calls return the same proposal until it is resolved.
    pub fn propose(&mut self) -> Result<Option<Proposal>> {
        if let Some(p) = &self.pending {
            return Ok(Some(p.clone()));
        }
        if self.records.len() >= self.horizon {
            return Ok(None);
        }
        if self.pool.is_exhausted() {
            self.truncated = true;
            return Ok(None);
        }
        let t = self.records.len() + 1;
        let ctx = StepContext::new(&self.dataset.features, &self.pool, &self.estimator).with_current(self.current.take());
        let (index, name, advice, exploit) = if self.in_exploit_phase(t) {
            let refit = self.switch.is_some_and(|(_, r)| r);
            let advice = exploit_advice(&mut self.exploiter, &self.policy, &ctx, refit)?;
            (0, EXPLOIT.to_string(), advice, true)
        } else {
            if !self.started {
                match &mut self.policy {
                    Policy::Solo(s) => s.start(&ctx)?,
                    Policy::Mixture(c) => c.start(&ctx)?,
                }
                self.started = true;
            }
            match &mut self.policy {
                Policy::Solo(s) => {
                    let advice = s.advise(&ctx)?;
                    (0, s.name().to_string(), advice, false)
                }
                Policy::Mixture(c) => {
                    let (i, advice) = c.choose(&ctx)?;
                    (i, c.expert(i).name().to_string(), advice, false)
                }
            }
        };
        self.current = ctx.take_current();
        let row_id = sample_query(&advice, self.query_rng.gen())?;
        let proposal = Proposal {
            t,
            row_id,
            strategy: name,
            strategy_index: index,
            exploit,
        };
        self.pending = Some(proposal.clone());
        Ok(Some(proposal))
    }

    /// The classifier that decides post-switch queries, once the switch has happened.
    pub fn exploit_estimator(&self) -> Option<Arc<FittedEstimator>> {
        self.exploiter.as_ref().map(|(est, _)| Arc::clone(est))
    }

    /// `p̂(fraud)` of `row` under an estimator refit on the current pool.
    pub fn estimated_p1(&mut self, row: RowId) -> Result<f64> {
        let current = match &self.current {
            Some(c) => Arc::clone(c),
            None => {
                let c = Arc::new(ScoredEstimator::fit(&self.pool, &self.dataset.features, &self.estimator)?);
                self.current = Some(Arc::clone(&c));
                c
            }
        };
        let x = self.dataset.features.get(row).ok_or(Error::UnknownRow(row))?;
        Ok(current.estimator.predict_one(x)?.0)
    }

    /// Answer the pending query.
    pub fn resolve(&mut self, label: Label) -> Result<StepRecord> {
        let p = self
            .pending
            .clone()
            .ok_or_else(|| Error::Runtime("no pending query to resolve".into()))?;
        let reward = compute_reward(label, &self.reward, &self.dataset.features, p.row_id)?;
        let pool = self.pool.with_label(p.row_id, label)?;
        let mut weights = None;
        if let Policy::Mixture(c) = &mut self.policy {
            if !p.exploit {
                c.reward(p.strategy_index, reward)?;
            }
            if c.n_experts() > 1 {
                weights = Some(c.weights().as_slice().to_vec());
            }
        }
        let ctx = StepContext::new(&self.dataset.features, &pool, &self.estimator);
        if !p.exploit {
            match &mut self.policy {
                Policy::Solo(s) => s.refresh(&ctx, p.row_id, label)?,
                Policy::Mixture(c) => c.refresh(&ctx, p.row_id, label)?,
            }
        }
        self.current = ctx.take_current();
        self.pool = pool;
        self.pending = None;
        self.cum_reward += reward;
        let record = StepRecord {
            t: p.t,
            strategy_index: p.strategy_index,
            strategy: p.strategy,
            row_id: p.row_id,
            label,
            reward,
            cum_reward: self.cum_reward,
            weights,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn into_result(self, duration: Duration) -> RunResult {
        let truncated = self.truncated || (self.records.len() < self.horizon && self.pool.is_exhausted());
        RunResult {
            policy: self.policy_kind,
            seed: self.seed,
            config_digest: self.digest,
            final_labeled: self.pool.labeled_rows(),
            records: self.records,
            duration,
            truncated,
        }
    }
}

/// Argmax of `p1` under the post-switch classifier.
fn exploit_advice(
    exploiter: &mut Option<Exploiter>,
    policy: &Policy,
    ctx: &StepContext<'_>,
    refit: bool,
) -> Result<AdviceVector> {
    let rows = ctx.pool().unlabeled_rows();
    if refit {
        let scored = ctx.current()?;
        return AdviceVector::argmax(rows, &scored.scores.p1);
    }
    if exploiter.is_none() {
        let from_policy = match policy {
            Policy::Solo(s) if s.kind() == StrategyKind::Base => s.resulting_estimator(),
            _ => None,
        };
        let estimator = match from_policy {
            Some(e) => e,
            // Base never started (switch at 0): its frozen estimator is
            // the fit on the initial pool, which is this one.
            None => Arc::new(ctx.current()?.estimator.clone()),
        };
        let scores = estimator.predict_scores(ctx.features(), &rows)?;
        let mut p1_by_row = vec![f64::NEG_INFINITY; ctx.features().n_rows()];
        for (r, p) in scores.row_ids.iter().zip(&scores.p1) {
            p1_by_row[r.0] = *p;
        }
        *exploiter = Some((estimator, p1_by_row));
    }
    let (_, p1_by_row) = exploiter.as_ref().expect("exploiter was just set");
    let values: Vec<f64> = rows.iter().map(|r| p1_by_row[r.0]).collect();
    AdviceVector::argmax(rows, &values)
}
