//! Adaptive mixing of query strategies.
//!
//! A probability vector `w` over K expert strategies is kept. Each step one
//! expert is drawn from `w`, a row is drawn from that expert's advice, and
//! after the oracle answers, the chosen expert's weight is scaled by `k1`
//! (fraud found) or `k0` (not found) and clamped, all other weights are
//! clamped to `[p_min, p_max]`, and `w` is renormalized.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::datapool::{Label, RowId};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::strategies::{AdviceVector, QueryStrategy, StepContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CafdaConfig {
    pub k0: f64,
    pub k1: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for CafdaConfig {
    fn default() -> Self {
        CafdaConfig {
            k0: 0.8,
            k1: 1.2,
            p_min: 0.001,
            p_max: 0.95,
        }
    }
}

impl CafdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.k0 && self.k0 < 1.0 && self.k1 > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cafda needs 0 < k0 < 1 < k1 (got k0={}, k1={})",
                self.k0, self.k1
            )));
        }
        if !(0.0 < self.p_min && self.p_min < self.p_max && self.p_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cafda needs 0 < p_min < p_max ≤ 1 (got p_min={}, p_max={})",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }
}

/// Probability of picking each expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("weight vector is empty".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("weights sum to {total}")));
        }
        Ok(WeightVector(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn init_weights(k: usize) -> Result<WeightVector> {
    if k == 0 {
        return Err(Error::InvalidConfig("CAFDA needs at least one expert".into()));
    }
    Ok(WeightVector(vec![1.0 / k as f64; k]))
}

/// Inverse CDF over `probs` in index order for a uniform draw `u ∈ [0, 1)`.
/// Rounding slack at the top end goes to the last positive entry.
fn inverse_cdf(probs: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Some(i);
        }
    }
    probs.iter().rposition(|p| *p > 0.0)
}

pub fn pick_strategy(weights: &WeightVector, u: f64) -> usize {
    inverse_cdf(&weights.0, u).expect("weight vectors are non-empty and positive")
}

pub fn sample_query(advice: &AdviceVector, u: f64) -> Result<RowId> {
    inverse_cdf(&advice.probs, u)
        .map(|i| advice.row_ids[i])
        .ok_or(Error::EmptyPool)
}

/// Result of one weight update, with the clamped values before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    pub pre_normalization: Vec<f64>,
    pub weights: WeightVector,
}

/// A reward counts as a success iff it is positive.
pub fn update_weights(weights: &WeightVector, chosen: usize, reward: f64, config: &CafdaConfig) -> Result<WeightUpdate> {
    let k = weights.len();
    if chosen >= k {
        return Err(Error::IndexOutOfRange { index: chosen, len: k });
    }
    let mut w = weights.0.clone();
    if reward > 0.0 {
        w[chosen] = (config.k1 * w[chosen]).min(config.p_max);
    } else {
        w[chosen] = (config.k0 * w[chosen]).max(config.p_min);
    }
    for (j, wj) in w.iter_mut().enumerate() {
        if j != chosen {
            *wj = wj.min(config.p_max).max(config.p_min);
        }
    }
    let total: f64 = w.iter().sum();
    let normalized = w.iter().map(|v| v / total).collect();
    Ok(WeightUpdate {
        pre_normalization: w,
        weights: WeightVector(normalized),
    })
}

/// The mixture: experts, weights, and the RNG used to pick among them.
pub struct Cafda {
    experts: Vec<Box<dyn QueryStrategy>>,
    weights: WeightVector,
    config: CafdaConfig,
    pick_rng: Rng,
}

impl Cafda {
    pub fn new(experts: Vec<Box<dyn QueryStrategy>>, config: CafdaConfig, pick_rng: Rng) -> Result<Self> {
        config.validate()?;
        let weights = init_weights(experts.len())?;
        Ok(Cafda {
            experts,
            weights,
            config,
            pick_rng,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn expert(&self, i: usize) -> &dyn QueryStrategy {
        self.experts[i].as_ref()
    }

    pub fn start(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        self.experts.iter_mut().try_for_each(|e| e.start(ctx))
    }

    /// Draw an expert from `w` and return its advice.
    pub fn choose(&mut self, ctx: &StepContext<'_>) -> Result<(usize, AdviceVector)> {
        let u: f64 = self.pick_rng.gen();
        let i = pick_strategy(&self.weights, u);
        let advice = self.experts[i].advise(ctx)?;
        Ok((i, advice))
    }

    pub fn reward(&mut self, chosen: usize, reward: f64) -> Result<WeightUpdate> {
        let update = update_weights(&self.weights, chosen, reward, &self.config)?;
        self.weights = update.weights.clone();
        Ok(update)
    }

    /// Let every expert see the new labeled pool.
    pub fn refresh(&mut self, ctx: &StepContext<'_>, row: RowId, label: Label) -> Result<()> {
        self.experts.iter_mut().try_for_each(|e| e.refresh(ctx, row, label))
    }
}
