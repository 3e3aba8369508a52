//! Parsing and rendering of the manager output wire format.
//!
//! The manager emits a single object with key `"memory"` holding a list of
//! records `{id, text, event, old_memory?}`. Event labels are `ADD`,
//! `UPDATE`, `DELETE`, `NONE`. Errors carry the byte offset of the first
//! violation.

use serde::Deserialize;
use serde_json::value::RawValue;

use super::bank::MemoryBank;
use super::decision::{DecisionKind, MemoryOperationDecision};
use super::MemoryError;

#[derive(Deserialize)]
struct RawOutput<'a> {
    #[serde(borrow)]
    memory: Vec<&'a RawValue>,
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    event: Option<String>,
    #[serde(default)]
    old_memory: Option<String>,
}

fn byte_offset(input: &str, raw: &RawValue) -> usize {
    let start = raw.get().as_ptr() as usize;
    let base = input.as_ptr() as usize;
    start.saturating_sub(base).min(input.len())
}

fn offset_of_line_col(input: &str, line: usize, column: usize) -> usize {
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0usize;
    for (i, b) in input.bytes().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(input.len())
}

/// Parses one manager output document into the decision sequence it encodes,
/// in listed order. `NONE` records normalize to NOOP; listed ids are taken
/// as targets only where the operation requires one (UPDATE, DELETE) — ADD
/// ids are assigned by the bank, never by the wire.
///
/// `bank` is accepted for signature symmetry with application but is not
/// consulted: referential checks belong to validation, and callers may parse
/// against a stale snapshot.
pub fn parse_decisions(
    raw: &str,
    _bank: &MemoryBank,
) -> Result<Vec<MemoryOperationDecision>, MemoryError> {
    let output: RawOutput = serde_json::from_str(raw).map_err(|e| {
        let offset = offset_of_line_col(raw, e.line(), e.column());
        if e.is_syntax() || e.is_eof() {
            MemoryError::ParseError { offset, message: e.to_string() }
        } else {
            MemoryError::SchemaError { offset, message: e.to_string() }
        }
    })?;

    let mut decisions = Vec::with_capacity(output.memory.len());
    for raw_record in output.memory {
        let offset = byte_offset(raw, raw_record);
        let record: RawRecord = serde_json::from_str(raw_record.get()).map_err(|e| {
            MemoryError::SchemaError { offset, message: e.to_string() }
        })?;
        let schema_err = |message: String| MemoryError::SchemaError { offset, message };

        let event = record
            .event
            .ok_or_else(|| schema_err("record missing `event`".into()))?;
        let target = |id: &Option<String>| -> Result<_, MemoryError> {
            let raw_id = id
                .as_deref()
                .ok_or_else(|| schema_err(format!("{event} record missing `id`")))?;
            raw_id
                .parse()
                .map_err(|e| schema_err(format!("invalid id {raw_id:?}: {e}")))
        };

        let mut decision = match event.as_str() {
            "ADD" => {
                let text = record
                    .text
                    .ok_or_else(|| schema_err("ADD record missing `text`".into()))?;
                MemoryOperationDecision::add(text)
            }
            "UPDATE" => {
                let id = target(&record.id)?;
                let text = record
                    .text
                    .ok_or_else(|| schema_err("UPDATE record missing `text`".into()))?;
                MemoryOperationDecision::update(id, text)
            }
            "DELETE" => MemoryOperationDecision::delete(target(&record.id)?),
            "NONE" => MemoryOperationDecision::noop(),
            other => {
                return Err(schema_err(format!("unknown event label {other:?}")));
            }
        };
        if let Some(old) = record.old_memory {
            decision = decision.with_old_text(old);
        }
        decisions.push(decision);
    }
    Ok(decisions)
}

/// Renders a decision sequence back into the manager output format.
/// Inverse of [`parse_decisions`] on valid sequences.
pub fn render_decisions(decisions: &[MemoryOperationDecision]) -> String {
    let records: Vec<serde_json::Value> = decisions
        .iter()
        .map(|d| {
            let mut record = serde_json::Map::new();
            if matches!(d.kind, DecisionKind::Update | DecisionKind::Delete) {
                if let Some(id) = d.target_id {
                    record.insert("id".into(), serde_json::Value::String(id.to_string()));
                }
            }
            if let Some(text) = &d.new_text {
                record.insert("text".into(), serde_json::Value::String(text.clone()));
            }
            record.insert(
                "event".into(),
                serde_json::Value::String(d.kind.event_label().to_string()),
            );
            if let Some(old) = &d.old_text {
                record.insert("old_memory".into(), serde_json::Value::String(old.clone()));
            }
            serde_json::Value::Object(record)
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "memory": records }))
        .expect("decision records serialize")
}
