//! Scenario files: everything a run depends on.
//!
//! ```toml
//! version = 1
//! n = 3
//! k = 2
//! seed = 7
//! step_budget = 5000
//! oracle_policy = "first-k-adversarial"
//! schedule_policy = "seeded-random"      # or "round-robin", or { scripted = ["p1", "p2.bg"] }
//! crash_plan = [{ pid = 2, step = 40 }]
//! workload = [
//!     [{ broadcast = "x" }, { propose = { instance = 0, value = "a" } }],
//!     [{ broadcast = "y" }],
//!     [],
//! ]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ProcessId, Value};
use crate::objects::OraclePolicy;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub n: usize,
    pub k: usize,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub schedule_policy: SchedulePolicy,
    #[serde(default)]
    pub crash_plan: Vec<CrashAt>,
    pub workload: Vec<Vec<WorkItem>>,
    pub step_budget: u64,
    #[serde(default)]
    pub oracle_policy: OraclePolicy,
}

/// Seeds as integers, or as decimal or `0x` strings. TOML integers are
/// signed 64-bit, so seeds above `i64::MAX` are written as strings.
pub mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        if i64::try_from(*seed).is_ok() {
            s.serialize_u64(*seed)
        } else {
            s.serialize_str(&seed.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Str(s) => {
                let parsed = match s.strip_prefix("0x") {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => s.parse(),
                };
                parsed.map_err(|_| de::Error::custom(format!("invalid seed `{s}`")))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulePolicy {
    SeededRandom,
    RoundRobin,
    /// Steps to take in order. An entry names a process (`"p2"`), optionally
    /// restricted to its operation lane (`"p2.fg"`) or its background task
    /// (`"p2.bg"`). Entries that are not enabled when reached are skipped;
    /// after the script the run continues round-robin.
    Scripted(Vec<ScriptEntry>),
}

/// Crash `pid` just before scheduler tick `step`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashAt {
    pub pid: ProcessId,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkItem {
    /// `kbo_broadcast(value)`.
    Broadcast(Value),
    /// `propose(instance, value)`.
    Propose { instance: u64, value: Value },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lane {
    /// The process's broadcast/propose operations.
    Foreground,
    /// Background task T.
    Background,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScriptEntry {
    pub pid: ProcessId,
    pub lane: Option<Lane>,
}

impl fmt::Display for ScriptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lane {
            None => write!(f, "{}", self.pid),
            Some(Lane::Foreground) => write!(f, "{}.fg", self.pid),
            Some(Lane::Background) => write!(f, "{}.bg", self.pid),
        }
    }
}

impl FromStr for ScriptEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, lane) = match s.split_once('.') {
            None => (s, None),
            Some((p, "fg")) => (p, Some(Lane::Foreground)),
            Some((p, "bg")) => (p, Some(Lane::Background)),
            Some(_) => return Err(format!("bad lane in script entry `{s}`")),
        };
        let id: u32 = p
            .strip_prefix('p')
            .and_then(|d| d.parse().ok())
            .filter(|&d| d >= 1)
            .ok_or_else(|| format!("bad process in script entry `{s}`"))?;
        Ok(ScriptEntry { pid: ProcessId::new(id), lane })
    }
}

impl Serialize for ScriptEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScriptEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported scenario version {0} (expected {SCENARIO_VERSION})")]
    Version(u32),
    #[error("n must be at least 1")]
    NoProcesses,
    #[error("k = {k} outside 1..=n (n = {n})")]
    KOutOfRange { k: usize, n: usize },
    #[error("step_budget must be positive")]
    ZeroBudget,
    #[error("crash_plan names {0} more than once")]
    DoubleCrash(ProcessId),
    #[error("{what} names {pid}, but n = {n}")]
    UnknownProcess { what: &'static str, pid: ProcessId, n: usize },
    #[error("workload lists {got} processes, expected n = {n}")]
    WorkloadLength { got: usize, n: usize },
    #[error("{pid} proposes to instance {instance} after instance {last}; instances must increase")]
    NonIncreasingInstance { pid: ProcessId, instance: u64, last: u64 },
    #[error("oracle policy echo requires k = n (k = {k}, n = {n})")]
    EchoNeedsKEqualsN { k: usize, n: usize },
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n;
        if self.version != SCENARIO_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        if n == 0 {
            return Err(ConfigError::NoProcesses);
        }
        if self.k == 0 || self.k > n {
            return Err(ConfigError::KOutOfRange { k: self.k, n });
        }
        if self.step_budget == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        if self.oracle_policy == OraclePolicy::Echo && self.k != n {
            return Err(ConfigError::EchoNeedsKEqualsN { k: self.k, n });
        }
        let known = |what, pid: ProcessId| {
            if pid.index() < n {
                Ok(())
            } else {
                Err(ConfigError::UnknownProcess { what, pid, n })
            }
        };
        let mut crashed = BTreeMap::new();
        for c in &self.crash_plan {
            known("crash_plan", c.pid)?;
            if crashed.insert(c.pid, c.step).is_some() {
                return Err(ConfigError::DoubleCrash(c.pid));
            }
        }
        if let SchedulePolicy::Scripted(entries) = &self.schedule_policy {
            for e in entries {
                known("schedule script", e.pid)?;
            }
        }
        if self.workload.len() != n {
            return Err(ConfigError::WorkloadLength { got: self.workload.len(), n });
        }
        for (i, items) in self.workload.iter().enumerate() {
            let pid = ProcessId::from_index(i);
            let mut last = None;
            for item in items {
                if let WorkItem::Propose { instance, .. } = item {
                    if let Some(last) = last.filter(|&l| *instance <= l) {
                        return Err(ConfigError::NonIncreasingInstance { pid, instance: *instance, last });
                    }
                    last = Some(*instance);
                }
            }
        }
        Ok(())
    }

    pub fn crash_tick(&self, pid: ProcessId) -> Option<u64> {
        self.crash_plan.iter().find(|c| c.pid == pid).map(|c| c.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = 1
n = 3
k = 2
seed = 7
step_budget = 5000
oracle_policy = "first-k-adversarial"
schedule_policy = { scripted = ["p1", "p2.bg", "p3.fg"] }
crash_plan = [{ pid = 2, step = 40 }]
workload = [
    [{ broadcast = "x" }, { propose = { instance = 0, value = "a" } }],
    [{ broadcast = "y" }],
    [],
]
"#;

    #[test]
    fn parses_documented_sample() {
        let cfg = ScenarioConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.crash_tick(ProcessId::new(2)), Some(40));
        let SchedulePolicy::Scripted(s) = &cfg.schedule_policy else { panic!() };
        assert_eq!(s[1], ScriptEntry { pid: ProcessId::new(2), lane: Some(Lane::Background) });
        assert_eq!(
            cfg.workload[0][1],
            WorkItem::Propose { instance: 0, value: Value::new("a") }
        );
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn large_seeds_round_trip() {
        let mut cfg = ScenarioConfig::from_toml(SAMPLE).unwrap();
        cfg.seed = u64::MAX - 3;
        let text = cfg.to_toml();
        assert!(text.contains("seed = \"18446744073709551612\""));
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
        let hex = SAMPLE.replace("seed = 7", "seed = \"0xff\"");
        assert_eq!(ScenarioConfig::from_toml(&hex).unwrap().seed, 255);
        assert!(ScenarioConfig::from_toml(&SAMPLE.replace("seed = 7", "seed = \"x\"")).is_err());
    }

    #[test]
    fn k_zero_is_rejected() {
        let bad = SAMPLE.replace("k = 2", "k = 0");
        assert!(matches!(ScenarioConfig::from_toml(&bad), Err(ConfigError::KOutOfRange { k: 0, n: 3 })));
    }

    #[test]
    fn invariants_are_named() {
        let cases = [
            (SAMPLE.replace("step_budget = 5000", "step_budget = 0"), "step_budget"),
            (SAMPLE.replace("{ pid = 2, step = 40 }", "{ pid = 2, step = 40 }, { pid = 2, step = 3 }"), "more than once"),
            (SAMPLE.replace("k = 2", "k = 4"), "outside"),
            (SAMPLE.replace("\"first-k-adversarial\"", "\"echo\""), "echo"),
            (SAMPLE.replace("[{ broadcast = \"y\" }]", "[{ propose = { instance = 3, value = \"b\" } }, { propose = { instance = 3, value = \"c\" } }]"), "must increase"),
            (SAMPLE.replace("    [],\n", ""), "workload"),
        ];
        for (text, needle) in cases {
            let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
            assert!(err.contains(needle), "`{err}` lacks `{needle}`");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let bad = SAMPLE.replace("n = 3", "n = \"three\"");
        let err = ScenarioConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = format!("{SAMPLE}\nextra = 1\n");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
    }
}
