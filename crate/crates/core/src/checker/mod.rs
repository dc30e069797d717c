//! Offline trace verification.
//!
//! Each suite reads a [`Trace`] and yields one [`Verdict`] per property.
//! Suites never stop at the first failure. Liveness properties are only
//! evaluated on quiescent traces.

mod k2s;
mod kbo;
mod kscd;
mod ksa;
mod order;
pub mod poset;
mod roundsync;
mod snapshot;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{MessageId, ProcessId};
use crate::trace::Trace;

pub use k2s::k2s_instance_verdicts;
pub use order::{build_order, decompose_trace, DecomposeError, DeliveryOrder, Order, Scope};
pub use poset::{decompose_channels, BoundViolation, Channels, Poset, PosetError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotEvaluated,
}

/// The smallest part of the trace that shows a failure.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub messages: Vec<MessageId>,
    pub processes: Vec<ProcessId>,
    /// `step` values of the events involved.
    pub events: Vec<u64>,
    pub detail: String,
}

impl Witness {
    pub fn detail(detail: impl Into<String>) -> Self {
        Witness { detail: detail.into(), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn pass(property: &str) -> Self {
        Verdict { property: property.into(), status: Status::Pass, witness: None }
    }

    pub fn fail(property: &str, witness: Witness) -> Self {
        Verdict { property: property.into(), status: Status::Fail, witness: Some(witness) }
    }

    pub fn not_evaluated(property: &str, why: &str) -> Self {
        Verdict { property: property.into(), status: Status::NotEvaluated, witness: Some(Witness::detail(why)) }
    }

    pub fn from_result(property: &str, r: Result<(), Witness>) -> Self {
        match r {
            Ok(()) => Verdict::pass(property),
            Err(w) => Verdict::fail(property, w),
        }
    }

    /// A liveness property: evaluated only when the run is quiescent.
    fn liveness(property: &str, trace: &Trace, check: impl FnOnce() -> Result<(), Witness>) -> Self {
        if trace.is_quiescent() {
            Verdict::from_result(property, check())
        } else {
            Verdict::not_evaluated(property, "run not quiescent")
        }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Kbo,
    Kscd,
    K2s,
    Snapshot,
    Ksa,
    RoundSync,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Kbo, Suite::Kscd, Suite::K2s, Suite::Snapshot, Suite::Ksa, Suite::RoundSync];

    /// Parse a comma-separated list; `all` selects every suite.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>, UnknownSuite> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            if name == "all" {
                out.extend(Suite::ALL);
            } else {
                out.push(name.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown suite `{0}` (expected kbo, kscd, k2s, snapshot, ksa, roundsync or all)")]
pub struct UnknownSuite(pub String);

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "kbo" => Suite::Kbo,
            "kscd" => Suite::Kscd,
            "k2s" => Suite::K2s,
            "snapshot" => Suite::Snapshot,
            "ksa" => Suite::Ksa,
            "roundsync" => Suite::RoundSync,
            _ => return Err(UnknownSuite(s.to_owned())),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Kbo => "kbo",
            Suite::Kscd => "kscd",
            Suite::K2s => "k2s",
            Suite::Snapshot => "snapshot",
            Suite::Ksa => "ksa",
            Suite::RoundSync => "roundsync",
        })
    }
}

/// Evaluate the selected suites.
pub fn check_all(trace: &Trace, suites: &[Suite]) -> Vec<Verdict> {
    let mut out = Vec::new();
    for suite in suites {
        match suite {
            Suite::Kbo => out.extend(kbo::check(trace)),
            Suite::Kscd => out.extend(kscd::check(trace)),
            Suite::K2s => out.extend(k2s::check(trace)),
            Suite::Snapshot => out.extend(snapshot::check(trace)),
            Suite::Ksa => out.extend(ksa::check(trace)),
            Suite::RoundSync => out.push(roundsync::check(trace)),
        }
    }
    out
}

/// One JSON record per line.
pub fn report_jsonl(verdicts: &[Verdict]) -> String {
    verdicts.iter().map(|v| serde_json::to_string(v).expect("verdict serializes") + "\n").collect()
}

pub fn any_failed(verdicts: &[Verdict]) -> bool {
    verdicts.iter().any(Verdict::failed)
}

fn join<T: fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = xs.into_iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", v.join(", "))
}
