//! Domain vocabulary shared by every stage: transfer records, interaction
//! categories, roles and the period partition of the observation window.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ledger row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferRecord {
    pub sender_id: String,
    pub receiver_id: String,
    pub sender_is_contract: bool,
    pub receiver_is_contract: bool,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
}

impl TransferRecord {
    pub fn new(
        sender_id: impl Into<String>,
        receiver_id: impl Into<String>,
        sender_is_contract: bool,
        receiver_is_contract: bool,
        timestamp: i64,
    ) -> Result<Self> {
        let record = TransferRecord {
            sender_id: sender_id.into(),
            receiver_id: receiver_id.into(),
            sender_is_contract,
            receiver_is_contract,
            timestamp,
        };
        if record.sender_id.is_empty() || record.receiver_id.is_empty() {
            return Err(Error::Domain("account identifiers must be non-empty".into()));
        }
        if record.timestamp < 0 {
            return Err(Error::Domain(format!(
                "negative timestamp {}",
                record.timestamp
            )));
        }
        Ok(record)
    }

    pub fn category(&self) -> InteractionCategory {
        classify(self.sender_is_contract, self.receiver_is_contract)
    }

    /// The account playing `role` in this transfer.
    pub fn account(&self, role: Role) -> &str {
        match role {
            Role::Sender => &self.sender_id,
            Role::Receiver => &self.receiver_id,
        }
    }
}

/// Sender/receiver account-type pair of a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InteractionCategory {
    #[serde(rename = "EOA_EOA")]
    EoaEoa,
    #[serde(rename = "EOA_SC")]
    EoaSc,
    #[serde(rename = "SC_EOA")]
    ScEoa,
    #[serde(rename = "SC_SC")]
    ScSc,
}

impl InteractionCategory {
    /// Fixed reporting order.
    pub const ALL: [InteractionCategory; 4] = [
        InteractionCategory::EoaEoa,
        InteractionCategory::EoaSc,
        InteractionCategory::ScEoa,
        InteractionCategory::ScSc,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionCategory::EoaEoa => "EOA_EOA",
            InteractionCategory::EoaSc => "EOA_SC",
            InteractionCategory::ScEoa => "SC_EOA",
            InteractionCategory::ScSc => "SC_SC",
        }
    }

    /// `(sender_is_contract, receiver_is_contract)`.
    pub fn flags(self) -> (bool, bool) {
        match self {
            InteractionCategory::EoaEoa => (false, false),
            InteractionCategory::EoaSc => (false, true),
            InteractionCategory::ScEoa => (true, false),
            InteractionCategory::ScSc => (true, true),
        }
    }
}

impl fmt::Display for InteractionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InteractionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_uppercase().replace(['-', '–'], "_");
        InteractionCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == normalized)
            .ok_or_else(|| Error::Config(format!("unknown interaction category `{s}`")))
    }
}

/// Maps the contract flags of a transfer to its category.
pub fn classify(sender_is_contract: bool, receiver_is_contract: bool) -> InteractionCategory {
    match (sender_is_contract, receiver_is_contract) {
        (false, false) => InteractionCategory::EoaEoa,
        (false, true) => InteractionCategory::EoaSc,
        (true, false) => InteractionCategory::ScEoa,
        (true, true) => InteractionCategory::ScSc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sender,
    Receiver,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Sender, Role::Receiver];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Sender => "sender",
            Role::Receiver => "receiver",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Left-closed, right-open tiling of `[start_ts, end_ts)` into `k` periods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodPartition {
    boundaries: Vec<i64>,
}

impl PeriodPartition {
    /// Explicit boundaries, e.g. calendar quarter starts. Needs at least two
    /// strictly ascending values.
    pub fn from_boundaries(boundaries: Vec<i64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::Config(
                "a period partition needs at least two boundaries".into(),
            ));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "period boundaries must be strictly ascending: {boundaries:?}"
            )));
        }
        Ok(PeriodPartition { boundaries })
    }

    /// `k` periods of equal duration (up to integer rounding) over
    /// `[start_ts, end_ts)`.
    pub fn equal(start_ts: i64, end_ts: i64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("number of periods must be >= 1".into()));
        }
        let span = end_ts - start_ts;
        if span < k as i64 {
            return Err(Error::Config(format!(
                "span [{start_ts}, {end_ts}) is too short for {k} periods"
            )));
        }
        let boundaries = (0..=k as i64)
            .map(|i| start_ts + ((span as i128 * i as i128) / k as i128) as i64)
            .collect();
        PeriodPartition::from_boundaries(boundaries)
    }

    pub fn start_ts(&self) -> i64 {
        self.boundaries[0]
    }

    pub fn end_ts(&self) -> i64 {
        *self.boundaries.last().unwrap()
    }

    pub fn k(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[i64] {
        &self.boundaries
    }

    /// `[start, end)` of the 1-based `period`.
    pub fn window(&self, period: usize) -> (i64, i64) {
        assert!(period >= 1 && period <= self.k(), "period {period} out of range");
        (self.boundaries[period - 1], self.boundaries[period])
    }

    /// 1-based period index of `ts`, or `None` when `ts` lies outside the span.
    pub fn period_of(&self, ts: i64) -> Option<usize> {
        if ts < self.start_ts() || ts >= self.end_ts() {
            return None;
        }
        // number of boundaries <= ts
        Some(self.boundaries.partition_point(|&b| b <= ts))
    }
}
