//! Seeded scenario generation and batch checking.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{check_all, Status, Suite, Verdict};
use crate::model::{ProcessId, Value};
use crate::objects::OraclePolicy;
use crate::rng::{derive, SplitMix64};
use crate::scenario::{ConfigError, CrashAt, ScenarioConfig, SchedulePolicy, WorkItem, SCENARIO_VERSION};
use crate::sim;
use crate::trace::{Outcome, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadKind {
    Broadcast,
    Propose,
    #[default]
    Mixed,
}

/// What to generate. Crash counts cycle through `0..=max_crashes` over the
/// seeds; everything else is drawn from the seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzTemplate {
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_max_messages")]
    pub max_messages: usize,
    /// Defaults to `n - 1`.
    #[serde(default)]
    pub max_crashes: Option<usize>,
    #[serde(default)]
    pub workload: WorkloadKind,
    #[serde(default)]
    pub oracle_policy: OraclePolicy,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    #[serde(default, with = "crate::scenario::seed_repr")]
    pub base_seed: u64,
}

fn default_max_messages() -> usize {
    4
}

fn default_budget() -> u64 {
    200_000
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("max_crashes = {max} must be below n = {n}")]
    TooManyCrashes { max: usize, n: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl FuzzTemplate {
    pub fn new(n: usize, k: usize) -> Self {
        FuzzTemplate {
            n,
            k,
            max_messages: default_max_messages(),
            max_crashes: None,
            workload: WorkloadKind::Mixed,
            oracle_policy: OraclePolicy::default(),
            step_budget: default_budget(),
            base_seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let t: FuzzTemplate = toml::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        if let Some(max) = self.max_crashes {
            if max >= self.n.max(1) {
                return Err(TemplateError::TooManyCrashes { max, n: self.n });
            }
        }
        self.scenario(0).validate()?;
        Ok(())
    }

    pub fn max_crashes(&self) -> usize {
        self.max_crashes.unwrap_or(self.n.saturating_sub(1))
    }

    /// The `i`-th generated scenario.
    pub fn scenario(&self, i: u64) -> ScenarioConfig {
        let seed = self.base_seed.wrapping_add(i);
        let mut rng = SplitMix64::new(derive(seed, &[2]));
        let n = self.n;
        let workload = ProcessId::all(n)
            .map(|pid| {
                let count = rng.between(1, self.max_messages.max(1));
                let mut instance = rng.below(2) as u64;
                (0..count)
                    .map(|j| {
                        let propose = match self.workload {
                            WorkloadKind::Broadcast => false,
                            WorkloadKind::Propose => true,
                            WorkloadKind::Mixed => rng.chance(1, 2),
                        };
                        let value = Value::new(format!("v{}.{j}", pid.get()));
                        if propose {
                            let item = WorkItem::Propose { instance, value };
                            instance += 1 + rng.below(2) as u64;
                            item
                        } else {
                            WorkItem::Broadcast(value)
                        }
                    })
                    .collect()
            })
            .collect();
        let crashes = (i % (self.max_crashes() as u64 + 1)) as usize;
        let mut pids: Vec<ProcessId> = ProcessId::all(n).collect();
        rng.shuffle(&mut pids);
        let horizon = 30 * n * self.max_messages.max(1);
        let mut crash_plan: Vec<CrashAt> = pids[..crashes.min(n.saturating_sub(1))]
            .iter()
            .map(|&pid| CrashAt { pid, step: rng.between(0, horizon) as u64 })
            .collect();
        crash_plan.sort_by_key(|c| (c.step, c.pid));
        ScenarioConfig {
            version: SCENARIO_VERSION,
            n,
            k: self.k,
            seed,
            schedule_policy: SchedulePolicy::SeededRandom,
            crash_plan,
            workload,
            step_budget: self.step_budget,
            oracle_policy: self.oracle_policy,
        }
    }
}

/// The outcome of one generated scenario.
#[derive(Clone, Debug)]
pub struct SeedResult {
    pub index: u64,
    pub seed: u64,
    /// The trace and its verdicts, or the simulator error.
    pub result: Result<(Trace, Vec<Verdict>), String>,
}

impl SeedResult {
    pub fn failed(&self) -> bool {
        match &self.result {
            Ok((_, vs)) => vs.iter().any(Verdict::failed),
            Err(_) => true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub not_evaluated: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: usize,
    pub quiescent: usize,
    pub budget_exhausted: usize,
    /// Number of runs per number of crash events that actually occurred.
    pub crashes: BTreeMap<usize, usize>,
    pub properties: BTreeMap<String, Counts>,
    pub failing_seeds: Vec<u64>,
    pub errors: Vec<String>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.failing_seeds.is_empty() && self.errors.is_empty()
    }

    pub fn add(&mut self, r: &SeedResult) {
        self.seeds += 1;
        match &r.result {
            Err(e) => {
                self.errors.push(format!("seed {}: {e}", r.seed));
                self.failing_seeds.push(r.seed);
            }
            Ok((trace, verdicts)) => {
                match trace.outcome() {
                    Outcome::Quiescent => self.quiescent += 1,
                    Outcome::BudgetExhausted => self.budget_exhausted += 1,
                }
                *self.crashes.entry(trace.faulty().len()).or_default() += 1;
                for v in verdicts {
                    let c = self.properties.entry(v.property.clone()).or_default();
                    match v.status {
                        Status::Pass => c.pass += 1,
                        Status::Fail => c.fail += 1,
                        Status::NotEvaluated => c.not_evaluated += 1,
                    }
                }
                if r.failed() {
                    self.failing_seeds.push(r.seed);
                }
            }
        }
    }
}

/// Run and check `seeds` generated scenarios in parallel. Results come back
/// in seed order.
pub fn fuzz(template: &FuzzTemplate, seeds: u64, suites: &[Suite]) -> (Summary, Vec<SeedResult>) {
    let results: Vec<SeedResult> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let cfg = template.scenario(i);
            let result = sim::run(&cfg)
                .map(|trace| {
                    let verdicts = check_all(&trace, suites);
                    (trace, verdicts)
                })
                .map_err(|e| e.to_string());
            SeedResult { index: i, seed: cfg.seed, result }
        })
        .collect();
    let mut summary = Summary::default();
    for r in &results {
        summary.add(r);
    }
    (summary, results)
}
