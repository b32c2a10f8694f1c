//! Run configuration as flat `key = value` text.
//!
//! Keys are dotted (`cafda.k0 = 0.8`), lists are comma separated, optional
//! values accept `none`, and `#` starts a comment. [`RunConfig::dump`] writes
//! every key, so the dump of an effective configuration re-parses to the same
//! value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cafda::CafdaConfig;
use crate::datapool::{load_dataset, Dataset, SplitConfig};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, EstimatorKind, FeaturesPerSplit, VoteMode};
use crate::harness::{RewardKind, RewardSpec, Scenario};
use crate::rng::{derive_seed, stream};
use crate::strategies::{ArmKind, StrategyKind, StrategySettings};
use crate::synthetic::{clustered_frauds, ClusteredFraudSpec};

/// What drives the queries of one run: a single strategy or the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Solo(StrategyKind),
    Cafda,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Solo(k) => k.name(),
            PolicyKind::Cafda => "cafda",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "cafda" {
            Ok(PolicyKind::Cafda)
        } else {
            s.parse().map(PolicyKind::Solo)
        }
    }
}

/// Every experiment setting. Seeds left as `None` derive from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub label_column: String,
    pub split: SplitConfig,
    pub split_seed: Option<u64>,
    pub estimator: EstimatorConfig,
    pub estimator_seed: Option<u64>,
    /// Pick estimator hyperparameters by k-fold CV on the initial pool.
    pub cv: bool,
    pub cv_folds: usize,
    pub strategies: Vec<PolicyKind>,
    pub cafda: CafdaConfig,
    pub experts: Vec<StrategyKind>,
    pub settings: StrategySettings,
    pub scenario: Scenario,
    pub horizon: usize,
    pub switch_step: usize,
    pub post_switch_refit: bool,
    pub reward: RewardSpec,
    pub seed: u64,
    pub replications: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_path: None,
            label_column: "label".into(),
            split: SplitConfig::default(),
            split_seed: None,
            estimator: EstimatorConfig::default(),
            estimator_seed: None,
            cv: false,
            cv_folds: 3,
            strategies: vec![PolicyKind::Cafda],
            cafda: CafdaConfig::default(),
            experts: vec![
                StrategyKind::Base,
                StrategyKind::BaseRefit,
                StrategyKind::Random,
                StrategyKind::LalIndependent,
                StrategyKind::LalIterative,
            ],
            settings: StrategySettings::default(),
            scenario: Scenario::Continuous,
            horizon: 500,
            switch_step: 100,
            post_switch_refit: false,
            reward: RewardSpec::default(),
            seed: 0,
            replications: 10,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse {value:?}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.eq_ignore_ascii_case("none") || value.is_empty() {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("`{key}`: expected true/false, got {value:?}"))),
    }
}

fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_synthetic(spec: &str) -> Result<ClusteredFraudSpec> {
    let bad = || Error::InvalidConfig(format!("bad synthetic dataset spec `synthetic:{spec}`"));
    let mut parts = spec.split(':');
    let mut out = ClusteredFraudSpec {
        n_samples: parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?,
        ..ClusteredFraudSpec::default()
    };
    if let Some(v) = parts.next() {
        out.seed = v.parse().map_err(|_| bad())?;
    }
    if let Some(v) = parts.next() {
        out.positive_fraction = v.parse().map_err(|_| bad())?;
    }
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(out)
}

impl RunConfig {
    /// Parse a configuration file on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`, got {raw:?}", n + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let lal = &mut self.settings.lal;
        match key {
            "dataset.path" => self.dataset_path = parse_opt(key, v)?,
            "dataset.label_column" => self.label_column = v.to_string(),

            "split.init_fraction" => self.split.init_fraction = parse_value(key, v)?,
            "split.subsample_size" => self.split.subsample_size = parse_opt(key, v)?,
            "split.min_positives" => self.split.min_positives = parse_value(key, v)?,
            "split.min_negatives" => self.split.min_negatives = parse_value(key, v)?,
            "split.max_retries" => self.split.max_retries = parse_value(key, v)?,
            "split.seed" => self.split_seed = parse_opt(key, v)?,

            "estimator.kind" => self.estimator.kind = v.parse::<EstimatorKind>()?,
            "estimator.n_trees" => self.estimator.forest.n_trees = parse_value(key, v)?,
            "estimator.max_depth" => self.estimator.forest.max_depth = parse_opt(key, v)?,
            "estimator.min_leaf" => self.estimator.forest.min_leaf = parse_value(key, v)?,
            "estimator.features_per_split" => {
                self.estimator.forest.features_per_split = v.parse::<FeaturesPerSplit>()?
            }
            "estimator.vote" => self.estimator.forest.vote = v.parse::<VoteMode>()?,
            "estimator.bootstrap" => self.estimator.forest.bootstrap = parse_bool(key, v)?,
            "estimator.l2_penalty" => self.estimator.logistic.l2_penalty = parse_value(key, v)?,
            "estimator.max_iterations" => self.estimator.logistic.max_iterations = parse_value(key, v)?,
            "estimator.tolerance" => self.estimator.logistic.tolerance = parse_value(key, v)?,
            "estimator.seed" => self.estimator_seed = parse_opt(key, v)?,
            "estimator.cv" => self.cv = parse_bool(key, v)?,
            "estimator.cv_folds" => self.cv_folds = parse_value(key, v)?,

            "strategies" => self.strategies = parse_list(v, str::parse)?,

            "cafda.k0" => self.cafda.k0 = parse_value(key, v)?,
            "cafda.k1" => self.cafda.k1 = parse_value(key, v)?,
            "cafda.p_min" => self.cafda.p_min = parse_value(key, v)?,
            "cafda.p_max" => self.cafda.p_max = parse_value(key, v)?,
            "cafda.experts" => self.experts = parse_list(v, str::parse)?,

            "scenario" => self.scenario = v.parse()?,
            "horizon" => self.horizon = parse_value(key, v)?,
            "switch_step" => self.switch_step = parse_value(key, v)?,
            "post_switch_refit" => self.post_switch_refit = parse_bool(key, v)?,

            "reward.kind" => self.reward.kind = v.parse::<RewardKind>()?,
            "reward.amount_column" => self.reward.amount_column = parse_opt(key, v)?,

            "seed" => self.seed = parse_value(key, v)?,
            "replications" => self.replications = parse_value(key, v)?,

            "lal.budget" => lal.budget = parse_value(key, v)?,
            "lal.task_size" => lal.task_size = parse_value(key, v)?,
            "lal.dimension" => lal.dimension = parse_value(key, v)?,
            "lal.positive_fraction" => lal.positive_fraction = parse_value(key, v)?,
            "lal.initial_labeled" => lal.initial_labeled = parse_value(key, v)?,
            "lal.episode_len" => lal.episode_len = parse_value(key, v)?,
            "lal.candidates_per_state" => lal.candidates_per_state = parse_value(key, v)?,
            "lal.rounds" => lal.rounds = parse_value(key, v)?,
            "lal.sim_trees" => lal.sim_trees = parse_value(key, v)?,
            "lal.regressor_trees" => lal.regressor_trees = parse_value(key, v)?,
            "lal.seed" => lal.seed = parse_value(key, v)?,

            "albl.arms" => self.settings.albl.arms = parse_list(v, str::parse::<ArmKind>)?,
            "albl.p_min" => self.settings.albl.p_min = parse_value(key, v)?,

            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Every key with its effective value, one per line.
    pub fn dump(&self) -> String {
        let e = &self.estimator;
        let lal = &self.settings.lal;
        let entries: Vec<(&str, String)> = vec![
            ("dataset.path", opt_str(&self.dataset_path.as_ref().map(|p| p.display().to_string()))),
            ("dataset.label_column", self.label_column.clone()),
            ("split.init_fraction", self.split.init_fraction.to_string()),
            ("split.subsample_size", opt_str(&self.split.subsample_size)),
            ("split.min_positives", self.split.min_positives.to_string()),
            ("split.min_negatives", self.split.min_negatives.to_string()),
            ("split.max_retries", self.split.max_retries.to_string()),
            ("split.seed", opt_str(&self.split_seed)),
            ("estimator.kind", e.kind.to_string()),
            ("estimator.n_trees", e.forest.n_trees.to_string()),
            ("estimator.max_depth", opt_str(&e.forest.max_depth)),
            ("estimator.min_leaf", e.forest.min_leaf.to_string()),
            ("estimator.features_per_split", e.forest.features_per_split.to_string()),
            ("estimator.vote", e.forest.vote.to_string()),
            ("estimator.bootstrap", e.forest.bootstrap.to_string()),
            ("estimator.l2_penalty", e.logistic.l2_penalty.to_string()),
            ("estimator.max_iterations", e.logistic.max_iterations.to_string()),
            ("estimator.tolerance", e.logistic.tolerance.to_string()),
            ("estimator.seed", opt_str(&self.estimator_seed)),
            ("estimator.cv", self.cv.to_string()),
            ("estimator.cv_folds", self.cv_folds.to_string()),
            ("strategies", join(&self.strategies)),
            ("cafda.k0", self.cafda.k0.to_string()),
            ("cafda.k1", self.cafda.k1.to_string()),
            ("cafda.p_min", self.cafda.p_min.to_string()),
            ("cafda.p_max", self.cafda.p_max.to_string()),
            ("cafda.experts", join(&self.experts)),
            ("scenario", self.scenario.to_string()),
            ("horizon", self.horizon.to_string()),
            ("switch_step", self.switch_step.to_string()),
            ("post_switch_refit", self.post_switch_refit.to_string()),
            ("reward.kind", self.reward.kind.to_string()),
            ("reward.amount_column", opt_str(&self.reward.amount_column)),
            ("seed", self.seed.to_string()),
            ("replications", self.replications.to_string()),
            ("lal.budget", lal.budget.to_string()),
            ("lal.task_size", lal.task_size.to_string()),
            ("lal.dimension", lal.dimension.to_string()),
            ("lal.positive_fraction", lal.positive_fraction.to_string()),
            ("lal.initial_labeled", lal.initial_labeled.to_string()),
            ("lal.episode_len", lal.episode_len.to_string()),
            ("lal.candidates_per_state", lal.candidates_per_state.to_string()),
            ("lal.rounds", lal.rounds.to_string()),
            ("lal.sim_trees", lal.sim_trees.to_string()),
            ("lal.regressor_trees", lal.regressor_trees.to_string()),
            ("lal.seed", lal.seed.to_string()),
            ("albl.arms", join(&self.settings.albl.arms)),
            ("albl.p_min", self.settings.albl.p_min.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.estimator.validate()?;
        self.cafda.validate()?;
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("`strategies` is empty".into()));
        }
        if self.strategies.contains(&PolicyKind::Cafda) && self.experts.is_empty() {
            return Err(Error::InvalidConfig("`cafda.experts` is empty".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("`horizon` must be ≥ 1".into()));
        }
        if self.scenario == Scenario::SwitchToExploit && self.switch_step >= self.horizon {
            return Err(Error::InvalidConfig(format!(
                "scenario 2 needs switch_step < horizon (got {} ≥ {})",
                self.switch_step, self.horizon
            )));
        }
        if self.cv && self.cv_folds < 2 {
            return Err(Error::InvalidConfig("`estimator.cv_folds` must be ≥ 2".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("`replications` must be ≥ 1".into()));
        }
        self.reward.validate()?;
        let uses = |k: StrategyKind| {
            self.strategies.contains(&PolicyKind::Solo(k))
                || (self.strategies.contains(&PolicyKind::Cafda) && self.experts.contains(&k))
        };
        if uses(StrategyKind::LalIndependent) || uses(StrategyKind::LalIterative) {
            self.settings.lal.validate()?;
        }
        if uses(StrategyKind::Albl) && self.settings.albl.arms.is_empty() {
            return Err(Error::InvalidConfig("`albl.arms` is empty".into()));
        }
        Ok(())
    }

    /// Split settings with the seed resolved.
    pub fn effective_split(&self) -> SplitConfig {
        SplitConfig {
            seed: self.split_seed.unwrap_or_else(|| derive_seed(self.seed, stream::SPLIT)),
            ..self.split.clone()
        }
    }

    /// Estimator settings with the seed resolved.
    pub fn effective_estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            seed: self.estimator_seed.unwrap_or_else(|| derive_seed(self.seed, stream::ESTIMATOR)),
            ..self.estimator
        }
    }

    /// Load the configured dataset. `synthetic:N[:SEED[:FRACTION]]` generates
    /// a clustered-fraud task instead of reading a file.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self
            .dataset_path
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("`dataset.path` is not set".into()))?;
        let text = path.to_string_lossy();
        match text.strip_prefix("synthetic:") {
            Some(spec) => parse_synthetic(spec).and_then(|s| clustered_frauds(&s)),
            None => load_dataset(path, &self.label_column),
        }
    }

    /// Copy with another master seed; explicit sub-seeds are kept.
    pub fn with_seed(&self, seed: u64) -> Self {
        RunConfig { seed, ..self.clone() }
    }
}
