use std::collections::HashSet;
use std::sync::Arc;

use cafda_core::config::{PolicyKind, RunConfig};
use cafda_core::datapool::{Dataset, FeatureMatrix, HiddenLabels, Label, RowId};
use cafda_core::estimator;
use cafda_core::harness::{
    aggregate_replications, log_lines, run_replications, run_scenario1, run_scenario2, run_simulated, RunEngine,
    EXPLOIT,
};
use cafda_core::strategies::StrategyKind;
use cafda_core::synthetic::{clustered_frauds, ClusteredFraudSpec};

fn config(text: &str) -> RunConfig {
    RunConfig::from_text(text).unwrap()
}

fn synthetic(n: usize, seed: u64) -> Arc<Dataset> {
    Arc::new(
        clustered_frauds(&ClusteredFraudSpec {
            n_samples: n,
            seed,
            ..ClusteredFraudSpec::default()
        })
        .unwrap(),
    )
}

const SMALL: &str = "split.init_fraction = 0.05\nestimator.n_trees = 30\nlal.budget = 16\n";

fn all_policies() -> Vec<PolicyKind> {
    StrategyKind::ALL
        .into_iter()
        .map(PolicyKind::Solo)
        .chain([PolicyKind::Cafda])
        .collect()
}

#[test]
fn exhausting_the_pool_finds_every_hidden_positive() {
    let ds = synthetic(300, 1);
    let mut cfg = config(SMALL);
    let n_unlabeled = 300 - 15;
    cfg.horizon = n_unlabeled;
    for policy in all_policies() {
        let res = run_scenario1(Arc::clone(&ds), &cfg, policy).unwrap();
        let engine = RunEngine::new(Arc::clone(&ds), &cfg, policy).unwrap();
        let hidden = ds.labels.count_positives(engine.pool().unlabeled_rows().iter());
        assert_eq!(res.records.len(), n_unlabeled, "{policy}");
        assert_eq!(res.final_reward(), hidden as f64, "{policy}");
        assert!(!res.truncated);
        let distinct: HashSet<RowId> = res.records.iter().map(|r| r.row_id).collect();
        assert_eq!(distinct.len(), n_unlabeled, "{policy}: a row was queried twice");
        assert!(res.records.windows(2).all(|w| w[1].cum_reward >= w[0].cum_reward));
        assert_eq!(res.final_labeled.len(), 300);
    }
}

#[test]
fn horizon_past_the_pool_truncates() {
    let ds = synthetic(200, 2);
    let cfg = config(&format!("{SMALL}horizon = 1000"));
    let res = run_scenario1(ds, &cfg, PolicyKind::Solo(StrategyKind::Random)).unwrap();
    assert!(res.truncated);
    assert_eq!(res.records.len(), 190);
}

#[test]
fn same_seed_gives_identical_logs() {
    let ds = synthetic(400, 3);
    let cfg = config(&format!("{SMALL}horizon = 40\nseed = 3"));
    let a = run_scenario1(Arc::clone(&ds), &cfg, PolicyKind::Cafda).unwrap();
    let b = run_scenario1(Arc::clone(&ds), &cfg, PolicyKind::Cafda).unwrap();
    assert_eq!(log_lines(&a.records), log_lines(&b.records));
    assert_eq!(a.config_digest, b.config_digest);
    let c = run_scenario1(ds, &cfg.with_seed(7), PolicyKind::Cafda).unwrap();
    assert_ne!(log_lines(&a.records), log_lines(&c.records));
    assert_ne!(a.config_digest, c.config_digest);
}

#[test]
fn single_expert_mixture_matches_solo_run() {
    let ds = synthetic(500, 4);
    for kind in [StrategyKind::BaseRefit, StrategyKind::Random, StrategyKind::Uncertainty] {
        for seed in 0..2 {
            let cfg = config(&format!("{SMALL}horizon = 30\nseed = {seed}\ncafda.experts = {kind}"));
            let solo = run_scenario1(Arc::clone(&ds), &cfg, PolicyKind::Solo(kind)).unwrap();
            let mix = run_scenario1(Arc::clone(&ds), &cfg, PolicyKind::Cafda).unwrap();
            assert_eq!(log_lines(&solo.records), log_lines(&mix.records), "{kind} seed {seed}");
        }
    }
}

#[test]
fn mixture_logs_weights_that_stay_normalized() {
    let ds = synthetic(400, 5);
    let cfg = config(&format!("{SMALL}horizon = 30\ncafda.experts = base_refit, random, uncertainty"));
    let res = run_scenario1(ds, &cfg, PolicyKind::Cafda).unwrap();
    for r in &res.records {
        let w = r.weights.as_ref().expect("weights logged");
        assert_eq!(w.len(), 3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w.iter().all(|v| *v > 0.0));
    }
}

/// Independent recomputation of the post-switch rule from the frozen estimator.
#[test]
fn after_the_switch_every_query_is_the_argmax() {
    let ds = synthetic(2000, 6);
    let cfg = config("scenario = 2\nswitch_step = 100\nhorizon = 130\nestimator.n_trees = 30\n");
    let mut engine = RunEngine::new(Arc::clone(&ds), &cfg, PolicyKind::Solo(StrategyKind::Random)).unwrap();
    let mut pool_at_switch = None;
    while let Some(p) = engine.propose().unwrap() {
        if p.t == 101 {
            pool_at_switch = Some(engine.pool().clone());
        }
        if p.t > 100 {
            assert!(p.exploit);
            assert_eq!(p.strategy, EXPLOIT);
            let est = engine.exploit_estimator().unwrap();
            let mut best = (f64::NEG_INFINITY, RowId(usize::MAX));
            for row in engine.pool().unlabeled() {
                let (p1, _) = est.predict_one(ds.features.row(row)).unwrap();
                if p1 > best.0 {
                    best = (p1, row);
                }
            }
            assert_eq!(p.row_id, best.1, "t = {}", p.t);
        } else {
            assert!(!p.exploit);
        }
        let label = ds.labels.label(p.row_id).unwrap();
        engine.resolve(label).unwrap();
    }
    let frozen = engine.exploit_estimator().unwrap();
    let refit = estimator::fit(&pool_at_switch.unwrap(), &ds.features, engine.estimator_config()).unwrap();
    assert_eq!(*frozen, refit);
}

#[test]
fn switch_at_zero_is_pure_exploitation() {
    let ds = synthetic(600, 7);
    let rows = |r: &cafda_core::harness::RunResult| r.records.iter().map(|s| s.row_id).collect::<Vec<_>>();
    let s1 = config(&format!("{SMALL}horizon = 40"));
    let base = run_scenario1(Arc::clone(&ds), &s1, PolicyKind::Solo(StrategyKind::Base)).unwrap();
    let refit = run_scenario1(Arc::clone(&ds), &s1, PolicyKind::Solo(StrategyKind::BaseRefit)).unwrap();

    let frozen_cfg = config(&format!("{SMALL}horizon = 40\nscenario = 2\nswitch_step = 0"));
    let refit_cfg = config(&format!("{SMALL}horizon = 40\nscenario = 2\nswitch_step = 0\npost_switch_refit = true"));
    for policy in [PolicyKind::Solo(StrategyKind::Random), PolicyKind::Cafda] {
        let frozen = run_scenario2(Arc::clone(&ds), &frozen_cfg, policy).unwrap();
        assert_eq!(rows(&frozen), rows(&base), "{policy} frozen");
        let refitted = run_scenario2(Arc::clone(&ds), &refit_cfg, policy).unwrap();
        assert_eq!(rows(&refitted), rows(&refit), "{policy} refit");
        assert_eq!(refitted.cum_rewards(), refit.cum_rewards());
    }
}

#[test]
fn scenario_functions_check_the_scenario() {
    let ds = synthetic(200, 8);
    let s1 = config(SMALL);
    let s2 = config(&format!("{SMALL}scenario = 2\nhorizon = 20\nswitch_step = 5"));
    assert!(run_scenario2(Arc::clone(&ds), &s1, PolicyKind::Cafda).is_err());
    assert!(run_scenario1(ds, &s2, PolicyKind::Cafda).is_err());
}

/// Labels of rows a run never touches must not influence its decisions.
#[test]
fn permuting_unqueried_labels_changes_nothing() {
    let ds = synthetic(500, 9);
    let cfg = config(&format!("{SMALL}horizon = 40\ncafda.experts = base, base_refit, random, uncertainty"));
    let policies = [
        PolicyKind::Solo(StrategyKind::Base),
        PolicyKind::Solo(StrategyKind::BaseRefit),
        PolicyKind::Solo(StrategyKind::Uncertainty),
        PolicyKind::Solo(StrategyKind::Random),
        PolicyKind::Cafda,
    ];
    for policy in policies {
        let first = run_scenario1(Arc::clone(&ds), &cfg, policy).unwrap();
        let engine = RunEngine::new(Arc::clone(&ds), &cfg, policy).unwrap();
        let queried: HashSet<RowId> = first.records.iter().map(|r| r.row_id).collect();
        let untouched: Vec<RowId> = engine.pool().unlabeled().filter(|r| !queried.contains(r)).collect();
        let permuted = Dataset {
            labels: ds.labels.permuted(&untouched, 77),
            ..(*ds).clone()
        };
        assert_ne!(
            (0..500).map(|i| permuted.labels.get(RowId(i))).collect::<Vec<_>>(),
            (0..500).map(|i| ds.labels.get(RowId(i))).collect::<Vec<_>>()
        );
        let permuted = Arc::new(permuted);
        assert_eq!(
            RunEngine::new(Arc::clone(&permuted), &cfg, policy).unwrap().pool(),
            engine.pool(),
            "initial split changed"
        );
        let second = run_scenario1(permuted, &cfg, policy).unwrap();
        assert_eq!(log_lines(&first.records), log_lines(&second.records), "{policy}");
    }
}

#[test]
fn base_first_query_is_the_top_ranked_fraud() {
    let ds = Arc::new(
        clustered_frauds(&ClusteredFraudSpec {
            n_samples: 1000,
            separation: 8.0,
            cluster_spread: 0.3,
            seed: 10,
            ..ClusteredFraudSpec::default()
        })
        .unwrap(),
    );
    let cfg = config(&format!("{SMALL}horizon = 5"));
    let engine = RunEngine::new(Arc::clone(&ds), &cfg, PolicyKind::Solo(StrategyKind::Base)).unwrap();
    let est = estimator::fit(engine.pool(), &ds.features, engine.estimator_config()).unwrap();
    let (mut best_p, mut best_row) = (f64::NEG_INFINITY, RowId(0));
    for row in engine.pool().unlabeled() {
        let p = est.predict_one(ds.features.row(row)).unwrap().0;
        if p > best_p {
            (best_p, best_row) = (p, row);
        }
    }
    assert_eq!(ds.labels.get(best_row), Some(Label::Fraud));
    let res = run_scenario1(ds, &cfg, PolicyKind::Solo(StrategyKind::Base)).unwrap();
    assert_eq!(res.records[0].row_id, best_row);
    assert_eq!(res.records[0].reward, 1.0);
}

/// A block of legitimate rows shares its feature value with as many frauds,
/// so its leaf stays mixed and it is the most uncertain region; ties go to
/// the lower row ids, which are the legitimate ones. A second, pure fraud
/// cluster is what exploitation should find after the switch.
#[test]
fn uncertainty_prefix_pays_only_after_the_switch() {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        values.push(-(i as f64) / 200.0);
        labels.push(Label::Legit);
    }
    for label in [Label::Legit, Label::Fraud] {
        for _ in 0..60 {
            values.push(5.0);
            labels.push(label);
        }
    }
    for i in 0..60 {
        values.push(10.0 + i as f64 / 60.0);
        labels.push(Label::Fraud);
    }
    let ds = Arc::new(Dataset::new("planted", FeatureMatrix::new(vec!["x".into()], values).unwrap(), labels).unwrap());
    for seed in 0..4 {
        let cfg = config(&format!(
            "split.init_fraction = 0.1\nestimator.vote = leaf\nscenario = 2\nswitch_step = 10\nhorizon = 30\nseed = {seed}"
        ));
        let res = run_scenario2(Arc::clone(&ds), &cfg, PolicyKind::Solo(StrategyKind::Uncertainty)).unwrap();
        let before: f64 = res.records[..10].iter().map(|r| r.reward).sum();
        let after: f64 = res.records[10..].iter().map(|r| r.reward).sum();
        assert_eq!(before, 0.0, "seed {seed}");
        assert_eq!(after, 20.0, "seed {seed}");
    }
}

#[test]
fn monetary_rewards_sum_fraud_amounts() {
    let base = synthetic(300, 11);
    let dim = base.features.dim();
    let mut names: Vec<String> = base.features.names().to_vec();
    names.push("amount".into());
    let mut values = Vec::new();
    for i in 0..300 {
        let row = base.features.row(RowId(i));
        values.extend_from_slice(row);
        values.push(10.0 + (i % 7) as f64 * 25.0);
    }
    let labels = (0..300).map(|i| base.labels.get(RowId(i)).unwrap()).collect();
    let ds = Arc::new(Dataset::new("priced", FeatureMatrix::new(names, values).unwrap(), labels).unwrap());
    let cfg = config(&format!("{SMALL}horizon = 50\nreward.kind = monetary\nreward.amount_column = amount"));
    let res = run_simulated(Arc::clone(&ds), &cfg, PolicyKind::Solo(StrategyKind::Random)).unwrap();
    let total: f64 = res
        .records
        .iter()
        .filter(|r| r.label == Label::Fraud)
        .map(|r| ds.features.row(r.row_id)[dim])
        .sum();
    assert!(total > 0.0);
    assert_eq!(res.final_reward(), total);
    let missing = config(&format!("{SMALL}horizon = 50\nreward.kind = monetary\nreward.amount_column = Amount"));
    let err = run_simulated(ds, &missing, PolicyKind::Solo(StrategyKind::Random));
    assert!(err.is_err());
}

#[test]
fn identical_replications_aggregate_to_the_single_curve() {
    let ds = synthetic(300, 12);
    let cfg = config(&format!("{SMALL}horizon = 25"));
    let runs = run_replications(ds, &cfg, PolicyKind::Solo(StrategyKind::Random), &[5, 5, 5]).unwrap();
    let table = aggregate_replications("random", &runs).unwrap();
    let single = runs[0].cum_rewards();
    for (p, c) in table.points.iter().zip(&single) {
        assert_eq!(p.mean_cum_reward, *c);
        assert_eq!(p.sd, 0.0);
    }
}

#[test]
fn hidden_labels_are_only_read_through_the_oracle() {
    let ds = synthetic(300, 13);
    let flipped: Vec<Label> = (0..300).map(|_| Label::Legit).collect();
    let cfg = config(&format!("{SMALL}horizon = 10"));
    let mut engine = RunEngine::new(Arc::clone(&ds), &cfg, PolicyKind::Solo(StrategyKind::Random)).unwrap();
    let liar = HiddenLabels::new(flipped);
    while let Some(p) = engine.propose().unwrap() {
        engine.resolve(liar.label(p.row_id).unwrap()).unwrap();
    }
    assert_eq!(engine.cum_reward(), 0.0);
}
