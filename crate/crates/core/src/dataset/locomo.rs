//! Interchange-format corpus loading and the fixed 1:1:8 split.
//!
//! File schema: a top-level JSON list of dialogues, each
//! `{ dialogue_id, sessions: [ { session_id, datetime, turns: [ {turn_id,
//! speaker, text} ] } ], qa: [ {question, answer, category, evidence} ] }`.
//! Adversarial questions carry `category: "adversarial"` and are dropped at
//! load with a count warning, since they lack usable ground truth.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{DatasetError, Dialogue, DialogueTurn, QAPair, QuestionCategory, Session};

#[derive(Debug, Serialize, Deserialize)]
struct FileDialogue {
    dialogue_id: String,
    sessions: Vec<FileSession>,
    #[serde(default)]
    qa: Vec<FileQa>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileSession {
    session_id: String,
    datetime: String,
    turns: Vec<FileTurn>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileTurn {
    turn_id: u32,
    speaker: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileQa {
    question: String,
    answer: String,
    category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evidence: Option<Vec<u32>>,
}

/// Result of a corpus load: parsed dialogues plus the number of adversarial
/// questions dropped.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub dialogues: Vec<Dialogue>,
    pub adversarial_dropped: usize,
}

fn offset_of_line_col(input: &str, line: usize, column: usize) -> usize {
    let mut offset = 0usize;
    for (count, l) in input.split_inclusive('\n').enumerate() {
        if count + 1 == line {
            break;
        }
        offset += l.len();
    }
    (offset + column.saturating_sub(1)).min(input.len())
}

fn parse_category(raw: &str) -> Result<Option<QuestionCategory>, String> {
    match raw {
        "single-hop" => Ok(Some(QuestionCategory::SingleHop)),
        "multi-hop" => Ok(Some(QuestionCategory::MultiHop)),
        "open-domain" => Ok(Some(QuestionCategory::OpenDomain)),
        "temporal" => Ok(Some(QuestionCategory::Temporal)),
        "adversarial" => Ok(None),
        other => Err(format!("unknown question category {other:?}")),
    }
}

/// Parses a corpus from text. `path` is used for error reporting only.
pub fn load_locomo_str(text: &str, path: &str) -> Result<LoadedCorpus, DatasetError> {
    let format_err = |offset: usize, message: String| DatasetError::FormatError {
        path: path.to_string(),
        offset,
        message,
    };
    let raw: Vec<FileDialogue> = serde_json::from_str(text).map_err(|e| {
        format_err(offset_of_line_col(text, e.line(), e.column()), e.to_string())
    })?;

    let mut dialogues = Vec::with_capacity(raw.len());
    let mut dropped = 0usize;
    for file_dialogue in raw {
        let mut seen_turn_ids = std::collections::HashSet::new();
        let mut last_turn_id: Option<u32> = None;
        let sessions: Vec<Session> = file_dialogue
            .sessions
            .into_iter()
            .map(|s| Session {
                turns: s
                    .turns
                    .into_iter()
                    .map(|t| DialogueTurn {
                        turn_id: t.turn_id,
                        speaker: t.speaker,
                        text: t.text,
                        timestamp: s.datetime.clone(),
                        session_id: s.session_id.clone(),
                    })
                    .collect(),
                session_id: s.session_id,
                datetime: s.datetime,
            })
            .collect();
        for turn in sessions.iter().flat_map(|s| s.turns.iter()) {
            if !seen_turn_ids.insert(turn.turn_id) {
                return Err(format_err(
                    0,
                    format!(
                        "dialogue {}: duplicate turn_id {}",
                        file_dialogue.dialogue_id, turn.turn_id
                    ),
                ));
            }
            if let Some(prev) = last_turn_id {
                if turn.turn_id <= prev {
                    return Err(format_err(
                        0,
                        format!(
                            "dialogue {}: turn_id {} out of order",
                            file_dialogue.dialogue_id, turn.turn_id
                        ),
                    ));
                }
            }
            last_turn_id = Some(turn.turn_id);
        }

        let mut qa = Vec::with_capacity(file_dialogue.qa.len());
        for q in file_dialogue.qa {
            match parse_category(&q.category).map_err(|m| format_err(0, m))? {
                Some(category) => qa.push(QAPair {
                    question: q.question,
                    gold_answer: q.answer,
                    category,
                    evidence_turn_ids: q.evidence,
                }),
                None => dropped += 1,
            }
        }
        dialogues.push(Dialogue { dialogue_id: file_dialogue.dialogue_id, sessions, qa });
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} adversarial question(s) from {path}");
    }
    Ok(LoadedCorpus { dialogues, adversarial_dropped: dropped })
}

pub fn load_locomo(path: impl AsRef<Path>) -> Result<LoadedCorpus, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    load_locomo_str(&text, &path.display().to_string())
}

/// Writes dialogues back out in the interchange schema.
pub fn save_corpus(dialogues: &[Dialogue], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let file: Vec<FileDialogue> = dialogues
        .iter()
        .map(|d| FileDialogue {
            dialogue_id: d.dialogue_id.clone(),
            sessions: d
                .sessions
                .iter()
                .map(|s| FileSession {
                    session_id: s.session_id.clone(),
                    datetime: s.datetime.clone(),
                    turns: s
                        .turns
                        .iter()
                        .map(|t| FileTurn {
                            turn_id: t.turn_id,
                            speaker: t.speaker.clone(),
                            text: t.text.clone(),
                        })
                        .collect(),
                })
                .collect(),
            qa: d
                .qa
                .iter()
                .map(|q| FileQa {
                    question: q.question.clone(),
                    answer: q.gold_answer.clone(),
                    category: q.category.as_str().to_string(),
                    evidence: q.evidence_turn_ids.clone(),
                })
                .collect(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| DatasetError::FormatError {
            path: path.as_ref().display().to_string(),
            offset: 0,
            message: e.to_string(),
        })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Fixed split: first dialogue trains, second validates, the rest test.
pub fn split_dataset(
    dialogues: &[Dialogue],
) -> Result<(&[Dialogue], &[Dialogue], &[Dialogue]), DatasetError> {
    if dialogues.len() < 3 {
        return Err(DatasetError::TooFewDialogues(dialogues.len()));
    }
    Ok((&dialogues[0..1], &dialogues[1..2], &dialogues[2..]))
}
