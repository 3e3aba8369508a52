//! The bank data model and operation application.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::decision::{DecisionKind, MemoryOperationDecision};
use super::MemoryError;

/// Entry identifier: a monotonic non-negative integer. Rendered as a decimal
/// string on every wire and file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemoryId(pub u64);

impl fmt::Display for MemoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for MemoryId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse::<u64>().map(MemoryId)
    }
}

impl Serialize for MemoryId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for MemoryId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.trim()
            .parse::<u64>()
            .map(MemoryId)
            .map_err(|e| serde::de::Error::custom(format!("invalid memory id {raw:?}: {e}")))
    }
}

/// One stored fact. `history` holds superseded texts, oldest first; its
/// length equals the number of UPDATE operations applied to this entry.
/// Timestamps are logical event indices, not wall-clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub id: MemoryId,
    pub text: String,
    pub created_at: u64,
    pub updated_at: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<String>,
    /// Speaker of the source turn, when the fact came from a dialogue.
    /// Per-participant retrieval needs this attribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

/// What `apply` actually did. `applied` is false only when validation
/// demoted the decision to NOOP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationOutcome {
    pub applied: bool,
    pub kind_applied: DecisionKind,
    pub affected_id: Option<MemoryId>,
    pub bank_size_after: usize,
}

/// Insertion-ordered fact store with a single-writer mutation discipline.
///
/// Invariants: entry ids are pairwise distinct, iteration order is insertion
/// order, and `next_id` never decreases (deleted ids are never reused).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    entries: Vec<MemoryEntry>,
    next_id: u64,
    event_clock: u64,
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a bank from its raw parts. Used by the loader; rejects
    /// duplicate ids and ids at or above `next_id`.
    pub fn from_parts(
        entries: Vec<MemoryEntry>,
        next_id: u64,
        event_clock: u64,
    ) -> Result<Self, MemoryError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.id) {
                return Err(MemoryError::CorruptBank(format!("duplicate id {}", e.id)));
            }
            if e.id.0 >= next_id {
                return Err(MemoryError::CorruptBank(format!(
                    "entry id {} not below next_id {next_id}",
                    e.id
                )));
            }
            if e.updated_at < e.created_at {
                return Err(MemoryError::CorruptBank(format!(
                    "entry {} updated_at precedes created_at",
                    e.id
                )));
            }
        }
        Ok(Self { entries, next_id, event_clock })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn event_clock(&self) -> u64 {
        self.event_clock
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    pub fn get(&self, id: MemoryId) -> Option<&MemoryEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn contains(&self, id: MemoryId) -> bool {
        self.get(id).is_some()
    }

    /// Distinct speakers in first-appearance order.
    pub fn speakers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if let Some(s) = e.speaker.as_deref() {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Applies one decision. With `strict` false (the default for RL
    /// rollouts), invalid decisions are demoted to NOOP and reported via
    /// `applied: false`; with `strict` true they error instead. The event
    /// clock increments on every call, demoted or not.
    pub fn apply(
        &mut self,
        decision: &MemoryOperationDecision,
        strict: bool,
    ) -> Result<OperationOutcome, MemoryError> {
        self.apply_attributed(decision, None, strict)
    }

    /// Like [`MemoryBank::apply`] but attributes an ADDed entry to `speaker`.
    pub fn apply_attributed(
        &mut self,
        decision: &MemoryOperationDecision,
        speaker: Option<&str>,
        strict: bool,
    ) -> Result<OperationOutcome, MemoryError> {
        if let Err(violation) = decision.validate(self) {
            if strict {
                return Err(MemoryError::InvalidDecision(violation));
            }
            log::debug!("demoting invalid {} to NOOP: {violation}", decision.kind);
            self.event_clock += 1;
            return Ok(OperationOutcome {
                applied: false,
                kind_applied: DecisionKind::Noop,
                affected_id: None,
                bank_size_after: self.entries.len(),
            });
        }

        let now = self.event_clock;
        self.event_clock += 1;
        let outcome = match decision.kind {
            DecisionKind::Add => {
                let id = MemoryId(self.next_id);
                self.next_id += 1;
                self.entries.push(MemoryEntry {
                    id,
                    text: decision.new_text.clone().expect("validated"),
                    created_at: now,
                    updated_at: now,
                    history: Vec::new(),
                    speaker: speaker.map(str::to_owned),
                });
                OperationOutcome {
                    applied: true,
                    kind_applied: DecisionKind::Add,
                    affected_id: Some(id),
                    bank_size_after: self.entries.len(),
                }
            }
            DecisionKind::Update => {
                let id = decision.target_id.expect("validated");
                let entry = self
                    .entries
                    .iter_mut()
                    .find(|e| e.id == id)
                    .expect("validated");
                let old = std::mem::replace(
                    &mut entry.text,
                    decision.new_text.clone().expect("validated"),
                );
                entry.history.push(old);
                entry.updated_at = now;
                OperationOutcome {
                    applied: true,
                    kind_applied: DecisionKind::Update,
                    affected_id: Some(id),
                    bank_size_after: self.entries.len(),
                }
            }
            DecisionKind::Delete => {
                let id = decision.target_id.expect("validated");
                self.entries.retain(|e| e.id != id);
                OperationOutcome {
                    applied: true,
                    kind_applied: DecisionKind::Delete,
                    affected_id: Some(id),
                    bank_size_after: self.entries.len(),
                }
            }
            DecisionKind::Noop => OperationOutcome {
                applied: true,
                kind_applied: DecisionKind::Noop,
                affected_id: None,
                bank_size_after: self.entries.len(),
            },
        };
        Ok(outcome)
    }
}
