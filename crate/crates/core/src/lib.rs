//! A deterministic simulator and trace checker for the k-BO-broadcast stack:
//! repeated k-set agreement over k-BO-broadcast, over k-SCD-broadcast, over
//! K2S objects built from a k-set agreement oracle and one-shot snapshots.
//!
//! [`sim::run`] executes a [`scenario::ScenarioConfig`] and returns a
//! [`trace::Trace`]; [`checker::check_all`] verifies it.

pub mod checker;
pub mod fuzz;
pub mod golden;
pub mod k2s;
pub mod kbo;
pub mod ksa;
pub mod kscd;
pub mod model;
pub mod objects;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use model::{MessageId, ProcessId, Value};
pub use scenario::ScenarioConfig;
pub use sim::run;
pub use trace::Trace;
