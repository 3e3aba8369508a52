//! Operation decisions and their structural validation.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use super::bank::{MemoryBank, MemoryId};

/// The four memory operations a manager policy can choose from.
///
/// `Noop` corresponds to the `NONE` event label in the manager wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionKind {
    Add,
    Update,
    Delete,
    Noop,
}

impl DecisionKind {
    /// Canonical index order used everywhere logits or tie-breaks are involved.
    pub const ALL: [DecisionKind; 4] = [
        DecisionKind::Add,
        DecisionKind::Update,
        DecisionKind::Delete,
        DecisionKind::Noop,
    ];

    pub fn index(self) -> usize {
        match self {
            DecisionKind::Add => 0,
            DecisionKind::Update => 1,
            DecisionKind::Delete => 2,
            DecisionKind::Noop => 3,
        }
    }

    /// Event label used in the manager output format.
    pub fn event_label(self) -> &'static str {
        match self {
            DecisionKind::Add => "ADD",
            DecisionKind::Update => "UPDATE",
            DecisionKind::Delete => "DELETE",
            DecisionKind::Noop => "NONE",
        }
    }
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionKind::Add => "ADD",
            DecisionKind::Update => "UPDATE",
            DecisionKind::Delete => "DELETE",
            DecisionKind::Noop => "NOOP",
        })
    }
}

/// One manager action against the bank.
///
/// Structural invariants (checked by [`MemoryOperationDecision::validate`]):
/// ADD carries `new_text` and no target; UPDATE carries both target and
/// `new_text`; DELETE carries only a target; NOOP carries neither.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryOperationDecision {
    pub kind: DecisionKind,
    pub target_id: Option<MemoryId>,
    pub new_text: Option<String>,
    /// Echo of the superseded content, populated from `old_memory` fields.
    pub old_text: Option<String>,
}

impl MemoryOperationDecision {
    pub fn add(text: impl Into<String>) -> Self {
        Self {
            kind: DecisionKind::Add,
            target_id: None,
            new_text: Some(text.into()),
            old_text: None,
        }
    }

    pub fn update(target: MemoryId, text: impl Into<String>) -> Self {
        Self {
            kind: DecisionKind::Update,
            target_id: Some(target),
            new_text: Some(text.into()),
            old_text: None,
        }
    }

    pub fn delete(target: MemoryId) -> Self {
        Self {
            kind: DecisionKind::Delete,
            target_id: Some(target),
            new_text: None,
            old_text: None,
        }
    }

    pub fn noop() -> Self {
        Self {
            kind: DecisionKind::Noop,
            target_id: None,
            new_text: None,
            old_text: None,
        }
    }

    pub fn with_old_text(mut self, old: impl Into<String>) -> Self {
        self.old_text = Some(old.into());
        self
    }

    /// Structural + referential validation against a bank.
    pub fn validate(&self, bank: &MemoryBank) -> Result<(), ValidationError> {
        validate_decision(self, bank)
    }
}

/// Why a decision was rejected. Each variant names the violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("{kind} requires field `{field}`")]
    MissingField { kind: DecisionKind, field: &'static str },
    #[error("{kind} forbids field `{field}`")]
    ForbiddenField { kind: DecisionKind, field: &'static str },
    #[error("target id {id} not present in bank")]
    UnknownTarget { id: MemoryId },
    #[error("new_text must be non-empty after trimming")]
    EmptyText,
}

/// Checks that a decision's structural invariants hold and that any
/// `target_id` refers to a live entry in `bank`.
pub fn validate_decision(
    decision: &MemoryOperationDecision,
    bank: &MemoryBank,
) -> Result<(), ValidationError> {
    let kind = decision.kind;
    let require_text = || -> Result<(), ValidationError> {
        match &decision.new_text {
            None => Err(ValidationError::MissingField { kind, field: "new_text" }),
            Some(t) if t.trim().is_empty() => Err(ValidationError::EmptyText),
            Some(_) => Ok(()),
        }
    };
    let forbid_text = || -> Result<(), ValidationError> {
        if decision.new_text.is_some() {
            Err(ValidationError::ForbiddenField { kind, field: "new_text" })
        } else {
            Ok(())
        }
    };
    let require_target = || -> Result<(), ValidationError> {
        match decision.target_id {
            None => Err(ValidationError::MissingField { kind, field: "target_id" }),
            Some(id) if !bank.contains(id) => Err(ValidationError::UnknownTarget { id }),
            Some(_) => Ok(()),
        }
    };
    let forbid_target = || -> Result<(), ValidationError> {
        if decision.target_id.is_some() {
            Err(ValidationError::ForbiddenField { kind, field: "target_id" })
        } else {
            Ok(())
        }
    };

    match kind {
        DecisionKind::Add => {
            require_text()?;
            forbid_target()
        }
        DecisionKind::Update => {
            require_target()?;
            require_text()
        }
        DecisionKind::Delete => {
            require_target()?;
            forbid_text()
        }
        DecisionKind::Noop => {
            forbid_target()?;
            forbid_text()
        }
    }
}
