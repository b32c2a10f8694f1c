//! Experiment driver: runs a strategy or the CAFDA mixture against an oracle
//! for a horizon of steps, under either scenario, and aggregates replications.

mod aggregate;
mod engine;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PolicyKind, RunConfig};
use crate::datapool::{Dataset, FeatureMatrix, Label, Oracle, RowId};
use crate::error::{Error, Result};

pub use aggregate::{
    aggregate_curves, aggregate_replications, export_curves, final_summary, log_lines, read_curves, read_log,
    write_log, CurvePoint, CurveTable, FinalSummary,
};
pub use engine::{Proposal, RunEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RewardKind {
    /// 1 per fraud found.
    #[default]
    Unitary,
    /// The fraudulent transaction's amount.
    Monetary,
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardKind::Unitary => "unitary",
            RewardKind::Monetary => "monetary",
        })
    }
}

impl FromStr for RewardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unitary" => Ok(RewardKind::Unitary),
            "monetary" => Ok(RewardKind::Monetary),
            _ => Err(Error::InvalidConfig(format!("unknown reward kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub amount_column: Option<String>,
}

impl RewardSpec {
    pub fn unitary() -> Self {
        RewardSpec::default()
    }

    pub fn monetary(column: &str) -> Self {
        RewardSpec {
            kind: RewardKind::Monetary,
            amount_column: Some(column.to_string()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == RewardKind::Monetary && self.amount_column.is_none() {
            return Err(Error::InvalidConfig("monetary reward needs reward.amount_column".into()));
        }
        Ok(())
    }
}

/// Reward for revealing `label` on `row`. Querying a row amounts to
/// predicting it fraudulent, so only confirmed frauds pay.
pub fn compute_reward(label: Label, spec: &RewardSpec, features: &FeatureMatrix, row: RowId) -> Result<f64> {
    if !label.is_fraud() {
        return Ok(0.0);
    }
    match spec.kind {
        RewardKind::Unitary => Ok(1.0),
        RewardKind::Monetary => {
            let column = spec
                .amount_column
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("monetary reward needs reward.amount_column".into()))?;
            let idx = features
                .column_index(column)
                .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
            let values = features.get(row).ok_or(Error::UnknownRow(row))?;
            let amount = values[idx];
            if amount < 0.0 || !amount.is_finite() {
                return Err(Error::Runtime(format!("row {row}: amount {amount} is not a valid reward")));
            }
            Ok(amount)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scenario {
    /// The strategy queries for the whole horizon.
    #[default]
    Continuous,
    /// The strategy queries for `switch_step` steps, then pure exploitation.
    SwitchToExploit,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Continuous => "1",
            Scenario::SwitchToExploit => "2",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Scenario::Continuous),
            "2" => Ok(Scenario::SwitchToExploit),
            _ => Err(Error::InvalidConfig(format!("scenario must be 1 or 2, got `{s}`"))),
        }
    }
}

/// Strategy name logged for post-switch exploitation steps.
pub const EXPLOIT: &str = "exploit";

/// One answered query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Position of the acting strategy in the expert pool (0 for solo runs).
    #[serde(skip)]
    pub strategy_index: usize,
    pub strategy: String,
    pub row_id: RowId,
    pub label: Label,
    pub reward: f64,
    pub cum_reward: f64,
    /// Mixture weights after this step's update; mixtures of two or more experts only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub policy: PolicyKind,
    pub seed: u64,
    /// SHA-256 of the effective configuration and policy.
    pub config_digest: String,
    pub records: Vec<StepRecord>,
    pub final_labeled: Vec<RowId>,
    pub duration: Duration,
    /// The pool ran out before the horizon.
    pub truncated: bool,
}

impl RunResult {
    pub fn cum_rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cum_reward).collect()
    }

    pub fn final_reward(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_reward)
    }
}

pub fn config_digest(config: &RunConfig, policy: PolicyKind) -> String {
    let mut h = Sha256::new();
    h.update(config.dump().as_bytes());
    h.update(format!("policy = {policy}\n").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Run `policy` to the horizon, asking `oracle` for every label.
pub fn run_with_oracle<O: Oracle + ?Sized>(
    dataset: Arc<Dataset>,
    config: &RunConfig,
    policy: PolicyKind,
    oracle: &mut O,
) -> Result<RunResult> {
    let started = Instant::now();
    let mut engine = RunEngine::new(dataset, config, policy)?;
    while let Some(p) = engine.propose()? {
        let label = oracle.reveal(p.row_id)?;
        engine.resolve(label)?;
    }
    Ok(engine.into_result(started.elapsed()))
}

/// Scenario 1 against the dataset's hidden labels.
pub fn run_scenario1(dataset: Arc<Dataset>, config: &RunConfig, policy: PolicyKind) -> Result<RunResult> {
    if config.scenario != Scenario::Continuous {
        return Err(Error::InvalidConfig("run_scenario1 needs scenario = 1".into()));
    }
    run_simulated(dataset, config, policy)
}

/// Scenario 2 against the dataset's hidden labels.
pub fn run_scenario2(dataset: Arc<Dataset>, config: &RunConfig, policy: PolicyKind) -> Result<RunResult> {
    if config.scenario != Scenario::SwitchToExploit {
        return Err(Error::InvalidConfig("run_scenario2 needs scenario = 2".into()));
    }
    run_simulated(dataset, config, policy)
}

/// Either scenario, as configured, against the dataset's hidden labels.
pub fn run_simulated(dataset: Arc<Dataset>, config: &RunConfig, policy: PolicyKind) -> Result<RunResult> {
    let labels = dataset.labels.clone();
    let mut oracle = &labels;
    run_with_oracle(dataset, config, policy, &mut oracle)
}

/// Seeds of the configured replications: `seed, seed + 1, …`.
pub fn replication_seeds(config: &RunConfig) -> Vec<u64> {
    (0..config.replications as u64).map(|i| config.seed.wrapping_add(i)).collect()
}

/// Independent runs, one per seed, in parallel. Results follow `seeds` order.
pub fn run_replications(
    dataset: Arc<Dataset>,
    config: &RunConfig,
    policy: PolicyKind,
    seeds: &[u64],
) -> Result<Vec<RunResult>> {
    seeds
        .par_iter()
        .map(|&s| run_simulated(Arc::clone(&dataset), &config.with_seed(s), policy))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix() -> FeatureMatrix {
        FeatureMatrix::new(vec!["v".into(), "amount".into()], vec![0.1, 250.0, 0.2, 12.5]).unwrap()
    }

    #[test]
    fn unitary_rewards() {
        let f = matrix();
        assert_eq!(compute_reward(Label::Fraud, &RewardSpec::unitary(), &f, RowId(0)).unwrap(), 1.0);
        assert_eq!(compute_reward(Label::Legit, &RewardSpec::unitary(), &f, RowId(0)).unwrap(), 0.0);
    }

    #[test]
    fn monetary_rewards() {
        let f = matrix();
        let spec = RewardSpec::monetary("amount");
        assert_eq!(compute_reward(Label::Fraud, &spec, &f, RowId(0)).unwrap(), 250.0);
        assert_eq!(compute_reward(Label::Legit, &spec, &f, RowId(0)).unwrap(), 0.0);
        let missing = RewardSpec::monetary("Amount");
        assert!(matches!(
            compute_reward(Label::Fraud, &missing, &f, RowId(1)),
            Err(Error::MissingColumn(_))
        ));
        let no_column = RewardSpec {
            kind: RewardKind::Monetary,
            amount_column: None,
        };
        assert!(no_column.validate().is_err());
    }

    #[test]
    fn step_record_json_keys() {
        let rec = StepRecord {
            t: 1,
            strategy_index: 2,
            strategy: "random".into(),
            row_id: RowId(17),
            label: Label::Fraud,
            reward: 1.0,
            cum_reward: 1.0,
            weights: None,
        };
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"t":1,"strategy":"random","row_id":17,"label":1,"reward":1.0,"cum_reward":1.0}"#
        );
        let with_w = StepRecord {
            weights: Some(vec![0.5, 0.5]),
            ..rec
        };
        assert!(serde_json::to_string(&with_w).unwrap().ends_with(r#""weights":[0.5,0.5]}"#));
    }
}
