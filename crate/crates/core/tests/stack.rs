mod common;

use std::collections::BTreeMap;

use common::{agreed_order, antichain_of_size, correct_sequences, decided_per_instance};
use kbo_core::checker::{check_all, report_jsonl, Status, Suite, Verdict};
use kbo_core::fuzz::{FuzzTemplate, WorkloadKind};
use kbo_core::objects::OraclePolicy;
use kbo_core::sim::FAIRNESS_WINDOW;
use kbo_core::trace::{EventKind, Outcome};
use kbo_core::{run, ProcessId, ScenarioConfig, Trace};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (1usize..=5, any::<u64>(), 0u64..3, 0u64..2, 1usize..=4).prop_flat_map(|(n, seed, w, pol, msgs)| {
        (1..=n).prop_map(move |k| {
            let mut t = FuzzTemplate::new(n, k);
            t.workload = [WorkloadKind::Broadcast, WorkloadKind::Propose, WorkloadKind::Mixed][w as usize];
            t.oracle_policy = if pol == 0 { OraclePolicy::FirstKAdversarial } else { OraclePolicy::FirstOne };
            t.max_messages = msgs;
            t.base_seed = seed;
            t.scenario(seed % 7)
        })
    })
}

fn failures(vs: &[Verdict]) -> Vec<&Verdict> {
    vs.iter().filter(|v| v.failed()).collect()
}

fn toml(body: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(body).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_runs_satisfy_every_property(cfg in scenario()) {
        let trace = run(&cfg).unwrap();
        prop_assert!(trace.is_quiescent());
        let vs = check_all(&trace, &Suite::ALL);
        prop_assert!(failures(&vs).is_empty(), "{:?}", failures(&vs));

        let (_, rel) = agreed_order(&correct_sequences(&trace));
        prop_assert!(antichain_of_size(&rel, cfg.k + 1).is_none());
        for values in decided_per_instance(&trace).values() {
            prop_assert!(values.len() <= cfg.k);
        }
    }

    #[test]
    fn traces_are_well_formed(cfg in scenario()) {
        let trace = run(&cfg).unwrap();
        prop_assert!(trace.events.windows(2).all(|w| w[0].step < w[1].step));
        let mut crashed = BTreeMap::new();
        for e in &trace.events {
            prop_assert!(!crashed.contains_key(&e.pid), "event from crashed {}", e.pid);
            if let EventKind::Crash { tick } = e.kind {
                crashed.insert(e.pid, tick);
            }
        }
        prop_assert!(trace.footer.max_wait < FAIRNESS_WINDOW * cfg.n as u64);
        prop_assert!(trace.footer.ticks <= cfg.step_budget);
    }

    #[test]
    fn runs_are_deterministic_and_round_trip(cfg in scenario()) {
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        let text = a.to_jsonl();
        prop_assert_eq!(&text, &b.to_jsonl());
        let back = Trace::from_jsonl(&text).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(report_jsonl(&check_all(&back, &Suite::ALL)), report_jsonl(&check_all(&a, &Suite::ALL)));
        prop_assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn k1_sequences_are_identical(mut cfg in scenario()) {
        cfg.k = 1;
        let trace = run(&cfg).unwrap();
        let seqs = correct_sequences(&trace);
        prop_assert!(seqs.windows(2).all(|w| w[0] == w[1]));
    }
}

const THREE: &str = r#"
version = 1
n = 3
k = 2
seed = 11
schedule_policy = "seeded-random"
step_budget = 100000
workload = [
    [{ broadcast = "a" }, { propose = { instance = 0, value = "x" } }],
    [{ broadcast = "b" }, { propose = { instance = 0, value = "y" } }],
    [{ broadcast = "c" }, { propose = { instance = 0, value = "z" } }],
]
"#;

#[test]
fn survivor_of_early_crashes_still_delivers_and_decides() {
    let cfg = toml(&format!("{THREE}\ncrash_plan = [{{ pid = 2, step = 0 }}, {{ pid = 3, step = 0 }}]"));
    let trace = run(&cfg).unwrap();
    assert!(trace.is_quiescent());
    assert_eq!(trace.faulty().into_iter().collect::<Vec<_>>(), vec![ProcessId::new(2), ProcessId::new(3)]);
    let p1 = &trace.deliveries()[0];
    assert_eq!(p1.len(), 2);
    assert!(p1.iter().all(|m| m.sender == ProcessId::new(1)));
    let decided = decided_per_instance(&trace);
    assert_eq!(decided[&0].iter().collect::<Vec<_>>(), vec!["x"]);
    assert!(failures(&check_all(&trace, &Suite::ALL)).is_empty());
}

#[test]
fn crashes_mid_run_keep_every_property() {
    for tick in [1, 5, 12, 30, 60] {
        for seed in 0..20 {
            let cfg = toml(&format!("{}\ncrash_plan = [{{ pid = 1, step = {tick} }}]", THREE.replace("seed = 11", &format!("seed = {seed}"))));
            let trace = run(&cfg).unwrap();
            assert!(trace.is_quiescent());
            let vs = check_all(&trace, &Suite::ALL);
            assert!(failures(&vs).is_empty(), "tick {tick} seed {seed}: {:?}", failures(&vs));
        }
    }
}

#[test]
fn budget_exhaustion_skips_liveness() {
    let cfg = toml(&format!("{}\ncrash_plan = []", THREE.replace("step_budget = 100000", "step_budget = 7")));
    let trace = run(&cfg).unwrap();
    assert_eq!(trace.outcome(), Outcome::BudgetExhausted);
    assert_eq!(trace.footer.ticks, 7);
    let vs = check_all(&trace, &Suite::ALL);
    assert!(failures(&vs).is_empty());
    for v in vs.iter().filter(|v| v.property.contains("Termination") || v.property == "RoundSync") {
        assert_eq!(v.status, Status::NotEvaluated, "{}", v.property);
    }
}

#[test]
fn crash_after_quiescence_is_recorded_but_harmless() {
    let cfg = toml(&format!("{THREE}\ncrash_plan = [{{ pid = 3, step = 99999 }}]"));
    let trace = run(&cfg).unwrap();
    assert!(trace.is_quiescent());
    assert!(failures(&check_all(&trace, &Suite::ALL)).is_empty());
}
