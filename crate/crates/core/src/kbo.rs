//! k-BO-broadcast as a thin layer over k-SCD-broadcast: broadcasting is
//! k-SCD broadcasting, and every delivered set is unpacked into individual
//! deliveries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{MessageId, Value};

/// What a broadcast message carries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Payload {
    /// Application data.
    Data(Value),
    /// A set-agreement proposal `⟨instance, value⟩`.
    Proposal { instance: u64, value: Value },
}

/// A broadcast message. Identity is `(sender, index)`; no two broadcasts
/// share it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub payload: Payload,
}

/// Unpack one delivered set into individual deliveries. The within-set order
/// is the canonical `(sender, index)` order so that every process unpacks a
/// shared set identically.
pub fn on_kscd_deliver(set: &BTreeSet<MessageId>) -> Vec<MessageId> {
    set.iter().copied().collect()
}
