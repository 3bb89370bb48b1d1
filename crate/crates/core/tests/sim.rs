use std::collections::BTreeSet;
use std::path::PathBuf;

use sola_core::agent::Outcome;
use sola_core::config::DomainConfig;
use sola_core::knowledge::FactStatus;
use sola_core::model::{fill_template, ActionId};
use sola_core::sim::{evaluate_forgetting, run_scenario, sweep, RegressionPair, Scenario};
use sola_core::snapshot::{from_snapshot, to_snapshot};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn config() -> DomainConfig {
    DomainConfig::load(&data("smart_home.json")).expect("config loads")
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(&data(&format!("scenarios/{name}.json"))).expect("scenario loads")
}

#[test]
fn learning_curve_converges_and_is_reproducible() {
    let cfg = config();
    let sc = scenario("learning_curve");
    let a = run_scenario(&sc, &cfg, 42).unwrap();
    let b = run_scenario(&sc, &cfg, 42).unwrap();
    assert_eq!(a.metrics.to_jsonl(), b.metrics.to_jsonl());

    let s = a.metrics.summary(50);
    assert_eq!(s.episodes, 200);
    assert_eq!(s.last_window_rate, 1.0);
    let learned = a.metrics.records.iter().filter(|r| r.outcome == Outcome::Learned).count();
    assert!(learned <= 6, "each of the six templates is taught at most once, got {learned}");
    assert!(a.metrics.records.iter().all(|r| r.correct));
}

#[test]
fn different_seeds_differ() {
    let cfg = config();
    let sc = scenario("learning_curve");
    let a = run_scenario(&sc, &cfg, 1).unwrap();
    let b = run_scenario(&sc, &cfg, 2).unwrap();
    assert_ne!(a.metrics.to_jsonl(), b.metrics.to_jsonl());
}

#[test]
fn sweep_matches_individual_runs() {
    let cfg = config();
    let sc = scenario("learning_curve");
    let seeds = [3, 4, 5];
    let logs = sweep(&sc, &cfg, &seeds);
    for (seed, log) in seeds.iter().zip(logs) {
        let single = run_scenario(&sc, &cfg, *seed).unwrap().metrics;
        assert_eq!(log.unwrap(), single);
    }
}

#[test]
fn metrics_log_round_trips() {
    let cfg = config();
    let run = run_scenario(&scenario("learning_curve"), &cfg, 9).unwrap();
    let text = run.metrics.to_jsonl();
    let back = sola_core::sim::MetricsLog::from_jsonl(&text).unwrap();
    assert_eq!(back, run.metrics);
}

#[test]
fn snapshot_of_end_state_round_trips() {
    let cfg = config();
    let run = run_scenario(&scenario("learning_curve"), &cfg, 42).unwrap();
    let rules = cfg.knowledge_rules().unwrap();
    let (text, header) = to_snapshot(run.agent.state(), &rules);
    let (state, loaded) = from_snapshot(&text).unwrap();
    assert_eq!(&state, run.agent.state());
    assert_eq!(loaded, header);
    assert_eq!(to_snapshot(&state, &rules).0, text);
}

#[test]
fn demonstration_teaches_gibberish() {
    let cfg = config();
    let run = run_scenario(&scenario("demo"), &cfg, 5).unwrap();
    let r = &run.metrics.records;
    assert!(r[0].demonstrated);
    assert_eq!(r[0].outcome, Outcome::Demonstrated);
    assert!(r[0].correct);
    assert!(r[1].first_try_success, "the demonstrated wording now grounds with a new room");
}

#[test]
fn knowledge_scenario_stays_clean() {
    let cfg = config();
    let run = run_scenario(&scenario("knowledge"), &cfg, 8).unwrap();
    let kb = &run.agent.state().kb;
    let status = |text: &str| kb.facts().iter().find(|f| f.text() == text).map(|f| f.status);
    assert!(status("forest gump is a movie").is_some());
    assert!(status("tom hanks performed in forest gump").is_some());
    assert_eq!(status("us capital city washington dc"), Some(FactStatus::Verified));
    assert_ne!(status("spain capital city lisbon"), Some(FactStatus::Verified));
    assert_eq!(run.metrics.summary(50).contamination_rate, 0.0);
    assert_eq!(run.metrics.records[1].outcome, Outcome::Deferred);
}

#[test]
fn task_arrival_installs_domain_mid_run() {
    let cfg = config();
    let run = run_scenario(&scenario("forgetting"), &cfg, 6).unwrap();
    let r = &run.metrics.records;
    assert!(r[100].store_size >= r[99].store_size + 10);
    let climate: ActionId = "RaiseTemperature".into();
    assert!(run.agent.state().store.commands().iter().any(|c| c.action_id == climate));
}

fn regression_pairs(cfg: &DomainConfig) -> Vec<RegressionPair> {
    let rooms = ["kitchen", "bedroom", "hall", "bathroom", "office"];
    let mut pairs = Vec::new();
    for action in ["SwitchOffLight", "SwitchOnLight"] {
        for t in &cfg.grammars[&ActionId::from(action)].templates {
            for room in rooms {
                pairs.push(RegressionPair { command: fill_template(t, |_| room.to_string()), expected: action.into() });
            }
        }
    }
    pairs
}

#[test]
fn adding_a_domain_leaves_similarities_unchanged() {
    let cfg = config();
    let mut run = run_scenario(&scenario("learning_curve"), &cfg, 42).unwrap();
    let pairs = regression_pairs(&cfg);
    let settings = cfg.agent.clone();
    let before = evaluate_forgetting(&run.agent.state().store, &pairs, &settings, None);
    assert!(before.results.iter().all(|r| r.chosen.as_ref() == Some(&r.expected)));

    let added = run.agent.install_domain(&cfg, &"climate".into()).unwrap();
    assert_eq!(added.len(), 10);
    let after = evaluate_forgetting(&run.agent.state().store, &pairs, &settings, Some(&before));
    assert!(after.changed.is_empty());
    for (b, a) in before.results.iter().zip(&after.results) {
        assert_eq!(b.own, a.own);
    }
    let ids: BTreeSet<_> = added.into_iter().collect();
    assert!(after.results.iter().all(|r| r.own.keys().all(|k| !ids.contains(k))));
}

#[test]
fn learning_curve_holds_across_seeds() {
    let cfg = config();
    let sc = scenario("learning_curve");
    let seeds: Vec<u64> = (100..124).collect();
    for (seed, log) in seeds.iter().zip(sweep(&sc, &cfg, &seeds)) {
        let log = log.unwrap();
        assert_eq!(log.summary(50).last_window_rate, 1.0, "seed {seed}");
        assert!(log.records.iter().filter(|r| r.outcome == Outcome::Learned).count() <= 6, "seed {seed}");
    }
}
