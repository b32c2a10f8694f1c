//! Active learning by learning: an EXP4.P-style bandit over inner strategies
//! ("arms"). Its internal reward is the importance-weighted accuracy of the
//! current classifier on the rows it has queried.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{advise_random, uncertainty_from_scores, AdviceVector, QueryStrategy, StepContext, StrategyKind};
use crate::datapool::{Label, RowId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArmKind {
    Uncertainty,
    Random,
}

impl fmt::Display for ArmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArmKind::Uncertainty => "uncertainty",
            ArmKind::Random => "random",
        })
    }
}

impl FromStr for ArmKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncertainty" | "us" => Ok(ArmKind::Uncertainty),
            "random" => Ok(ArmKind::Random),
            _ => Err(Error::InvalidConfig(format!("unknown ALBL arm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlblConfig {
    pub arms: Vec<ArmKind>,
    /// Minimum probability of each arm; also sets the learning rate `p_min / 2`.
    pub p_min: f64,
}

impl Default for AlblConfig {
    fn default() -> Self {
        AlblConfig {
            arms: vec![ArmKind::Uncertainty, ArmKind::Random],
            p_min: 0.05,
        }
    }
}

/// Unbiased estimate of the number of correct predictions over the sampling
/// population: each queried row counts `1 / q`, `q` being the probability it
/// had of being queried. Divided by `normalizer`.
pub fn importance_weighted_accuracy(entries: &[(bool, f64)], normalizer: f64) -> f64 {
    entries
        .iter()
        .filter(|(correct, _)| *correct)
        .map(|(_, q)| 1.0 / q)
        .sum::<f64>()
        / normalizer
}

/// Mix arm advices: `sum_k p_k ξ_k`.
pub fn mix_advice(arm_probs: &[f64], advices: &[AdviceVector]) -> Result<AdviceVector> {
    let first = advices.first().ok_or_else(|| Error::InvalidConfig("ALBL needs at least one arm".into()))?;
    let mut probs = vec![0.0; first.len()];
    for (p, adv) in arm_probs.iter().zip(advices) {
        if adv.row_ids != first.row_ids {
            return Err(Error::Runtime("arm advices cover different rows".into()));
        }
        for (acc, q) in probs.iter_mut().zip(&adv.probs) {
            *acc += p * q;
        }
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(AdviceVector {
        row_ids: first.row_ids.clone(),
        probs,
    })
}

struct Pending {
    arm_advices: Vec<AdviceVector>,
    mixed: AdviceVector,
}

pub struct Albl {
    config: AlblConfig,
    weights: Vec<f64>,
    /// (queried row, probability it had under ALBL's mixture).
    queried: Vec<(RowId, f64)>,
    pool_size: Option<usize>,
    pending: Option<Pending>,
}

impl Albl {
    pub fn new(config: &AlblConfig) -> Result<Self> {
        let k = config.arms.len();
        if k == 0 {
            return Err(Error::InvalidConfig("ALBL arm pool is empty".into()));
        }
        if !(config.p_min >= 0.0 && config.p_min * k as f64 <= 1.0) {
            return Err(Error::InvalidConfig("albl.p_min must satisfy 0 ≤ p_min·K ≤ 1".into()));
        }
        Ok(Albl {
            config: config.clone(),
            weights: vec![1.0; k],
            queried: Vec::new(),
            pool_size: None,
            pending: None,
        })
    }

    pub fn with_weights(config: &AlblConfig, weights: Vec<f64>) -> Result<Self> {
        let mut a = Albl::new(config)?;
        if weights.len() != a.weights.len() {
            return Err(Error::InvalidConfig("ALBL weights must match the arm count".into()));
        }
        a.weights = weights;
        Ok(a)
    }

    /// Arm selection probabilities with the `p_min` floor.
    pub fn arm_probabilities(&self) -> Vec<f64> {
        let k = self.weights.len() as f64;
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .map(|w| (1.0 - k * self.config.p_min) * w / total + self.config.p_min)
            .collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn arm_advice(arm: ArmKind, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        match arm {
            ArmKind::Random => advise_random(ctx.pool()),
            ArmKind::Uncertainty => uncertainty_from_scores(&ctx.current()?.scores),
        }
    }
}

impl QueryStrategy for Albl {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Albl
    }

    fn advise(&mut self, ctx: &StepContext<'_>) -> Result<AdviceVector> {
        if ctx.pool().is_exhausted() {
            return Err(Error::EmptyPool);
        }
        self.pool_size.get_or_insert(ctx.pool().n_unlabeled());
        let arm_advices: Vec<AdviceVector> = self
            .config
            .arms
            .iter()
            .map(|&a| Albl::arm_advice(a, ctx))
            .collect::<Result<_>>()?;
        let mixed = mix_advice(&self.arm_probabilities(), &arm_advices)?;
        self.pending = Some(Pending {
            arm_advices,
            mixed: mixed.clone(),
        });
        Ok(mixed)
    }

    /// Bandit update, only for queries drawn from ALBL's own advice.
    fn refresh(&mut self, ctx: &StepContext<'_>, queried: RowId, _label: Label) -> Result<()> {
        let Some(pending) = self.pending.take() else {
            return Ok(());
        };
        let q = pending.mixed.prob_of(queried);
        if q <= 0.0 {
            return Ok(());
        }
        self.queried.push((queried, q));

        let scored = ctx.current()?;
        let pool = ctx.pool();
        let entries: Vec<(bool, f64)> = self
            .queried
            .iter()
            .map(|&(row, q)| {
                let truth = pool.label_of(row).expect("queried rows are labeled");
                let (p1, _) = scored.estimator.predict_one(ctx.features().row(row))?;
                Ok(((p1 >= 0.5) == truth.is_fraud(), q))
            })
            .collect::<Result<_>>()?;
        let normalizer = (self.pool_size.unwrap_or(1) * self.queried.len()) as f64;
        let reward = importance_weighted_accuracy(&entries, normalizer);

        let rate = self.config.p_min / 2.0;
        for (w, adv) in self.weights.iter_mut().zip(&pending.arm_advices) {
            let r_hat = reward * adv.prob_of(queried) / q;
            *w *= (rate * r_hat).exp();
        }
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        if max > 0.0 && max.is_finite() {
            for w in &mut self.weights {
                *w /= max;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapool::PoolState;
    use crate::estimator::EstimatorConfig;
    use crate::rng::seeded_rng;
    use crate::synthetic::uninformative;
    use rand::Rng;

    #[test]
    fn single_random_arm_is_uniform() {
        let ds = uninformative(30, 6, 2, 0).unwrap();
        let labeled: Vec<_> = (0..10).map(|i| (RowId(i), ds.labels.get(RowId(i)).unwrap())).collect();
        let pool = PoolState::new(labeled, (10..30).map(RowId)).unwrap();
        let cfg = EstimatorConfig::forest(3, 0);
        let ctx = StepContext::new(&ds.features, &pool, &cfg);
        let mut albl = Albl::new(&AlblConfig {
            arms: vec![ArmKind::Random],
            p_min: 0.05,
        })
        .unwrap();
        let adv = albl.advise(&ctx).unwrap();
        assert!(adv.probs.iter().all(|p| (p - 0.05).abs() < 1e-15));
    }

    #[test]
    fn equal_weights_split_mass() {
        let rows: Vec<RowId> = (0..4).map(RowId).collect();
        let a = AdviceVector::one_hot(rows.clone(), 1).unwrap();
        let b = AdviceVector::one_hot(rows, 3).unwrap();
        let albl = Albl::with_weights(&AlblConfig::default(), vec![0.5, 0.5]).unwrap();
        let mixed = mix_advice(&albl.arm_probabilities(), &[a, b]).unwrap();
        assert_eq!(mixed.probs, vec![0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn empty_arm_pool_is_rejected() {
        assert!(Albl::new(&AlblConfig { arms: vec![], p_min: 0.1 }).is_err());
    }

    /// Sampling rows with non-uniform probabilities and weighting by `1/q`
    /// recovers the uniform-sampling accuracy in expectation.
    #[test]
    fn importance_weights_are_unbiased() {
        let mut rng = seeded_rng(21);
        let n = 50;
        let correct: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let truth = correct.iter().filter(|c| **c).count() as f64 / n as f64;

        let trials = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..trials {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut j = n - 1;
            for (i, qi) in q.iter().enumerate() {
                acc += qi;
                if u < acc {
                    j = i;
                    break;
                }
            }
            let est = importance_weighted_accuracy(&[(correct[j], q[j])], n as f64);
            sum += est;
            sq += est * est;
        }
        let mean = sum / trials as f64;
        let se = ((sq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!((mean - truth).abs() < 4.0 * se, "mean {mean} truth {truth} se {se}");
    }
}
