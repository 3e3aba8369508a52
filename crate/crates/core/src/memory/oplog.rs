//! Append-only operation log. Replaying a persisted log from an empty bank
//! reproduces the final bank exactly, including ids and logical timestamps.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::bank::{MemoryBank, MemoryId};
use super::decision::{DecisionKind, MemoryOperationDecision};
use super::MemoryError;

/// One logged operation, as decided (demotions are re-derived on replay).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub event_clock: u64,
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<MemoryId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

impl LogRecord {
    pub fn from_decision(
        event_clock: u64,
        decision: &MemoryOperationDecision,
        speaker: Option<&str>,
    ) -> Self {
        Self {
            event_clock,
            kind: decision.kind,
            target_id: decision.target_id,
            new_text: decision.new_text.clone(),
            old_text: decision.old_text.clone(),
            speaker: speaker.map(str::to_owned),
        }
    }

    pub fn decision(&self) -> MemoryOperationDecision {
        MemoryOperationDecision {
            kind: self.kind,
            target_id: self.target_id,
            new_text: self.new_text.clone(),
            old_text: self.old_text.clone(),
        }
    }
}

/// Line-delimited writer for [`LogRecord`]s.
pub struct OperationLog<W: Write> {
    dest: W,
}

impl<W: Write> OperationLog<W> {
    pub fn new(dest: W) -> Self {
        Self { dest }
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), MemoryError> {
        let line = serde_json::to_string(record)
            .map_err(|e| MemoryError::CorruptBank(e.to_string()))?;
        writeln!(self.dest, "{line}")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.dest
    }
}

/// Reads a log and replays it against an empty bank.
pub fn replay_log<R: BufRead>(src: &mut R) -> Result<MemoryBank, MemoryError> {
    let mut bank = MemoryBank::new();
    for line in src.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line)
            .map_err(|e| MemoryError::CorruptBank(format!("bad log record: {e}")))?;
        bank.apply_attributed(&record.decision(), record.speaker.as_deref(), false)?;
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_reproduces_final_bank() {
        let decisions = vec![
            MemoryOperationDecision::add("User is a software engineer"),
            MemoryOperationDecision::add("Loves cheese pizza"),
            MemoryOperationDecision::update(MemoryId(1), "Loves cheese and chicken pizza"),
            MemoryOperationDecision::delete(MemoryId(0)),
            MemoryOperationDecision::noop(),
            // Invalid at this point: id 0 was deleted. Demotes on both passes.
            MemoryOperationDecision::update(MemoryId(0), "stale"),
            MemoryOperationDecision::add("Name is John"),
        ];

        let mut bank = MemoryBank::new();
        let mut log = OperationLog::new(Vec::new());
        for d in &decisions {
            log.append(&LogRecord::from_decision(bank.event_clock(), d, None)).unwrap();
            bank.apply(d, false).unwrap();
        }

        let bytes = log.into_inner();
        let replayed = replay_log(&mut bytes.as_slice()).unwrap();
        assert_eq!(replayed, bank);
        assert_eq!(replayed.next_id(), 3);
        assert_eq!(replayed.event_clock(), decisions.len() as u64);
    }
}
