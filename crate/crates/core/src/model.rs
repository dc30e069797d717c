//! Identities shared by every layer of the stack.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A process identity in `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(u32);

impl ProcessId {
    /// Panics if `id` is zero; ids are 1-based.
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "process ids are 1-based");
        ProcessId(id)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based slot of this process in per-process arrays.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(index: usize) -> Self {
        ProcessId(index as u32 + 1)
    }

    /// All ids `p1..=pn`.
    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> + Clone {
        (0..n).map(ProcessId::from_index)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// An opaque value. Ordering is by bytes, which only matters for tie-breaking.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(String);

impl Value {
    pub fn new(v: impl Into<String>) -> Self {
        Value(v.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.to_owned())
    }
}

/// Globally unique message identity: the sender plus the sender's own
/// broadcast counter. The derived ordering (sender, then index) is the
/// canonical order used for every deterministic choice among messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId {
    pub sender: ProcessId,
    pub index: u32,
}

impl MessageId {
    pub fn new(sender: ProcessId, index: u32) -> Self {
        MessageId { sender, index }
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sender.get(), self.index)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed message id `{0}` (expected `<sender>:<index>`)")]
pub struct ParseMessageIdError(String);

impl FromStr for MessageId {
    type Err = ParseMessageIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMessageIdError(s.to_owned());
        let (sender, index) = s.split_once(':').ok_or_else(err)?;
        let sender: u32 = sender.parse().map_err(|_| err())?;
        let index: u32 = index.parse().map_err(|_| err())?;
        if sender == 0 {
            return Err(err());
        }
        Ok(MessageId::new(ProcessId::new(sender), index))
    }
}

impl Serialize for MessageId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MessageId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
