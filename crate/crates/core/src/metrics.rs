//! Evaluation metrics: exact-match normalization, token-level F1, BLEU-1,
//! the judge protocol, and report aggregation.
//!
//! Tokenization contract, fixed and applied uniformly: EM and F1 operate on
//! [`normalize_answer`] output (lowercased, punctuation stripped, articles
//! removed); BLEU-1 operates on raw whitespace tokens because its brevity
//! penalty is length-sensitive.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::dataset::QuestionCategory;
use crate::gateway::{ChatGateway, GatewayError, GatewayRequest, Message};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty score set")]
    EmptyInput,
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(#[from] GatewayError),
    #[error("judge returned no parsable label: {0:?}")]
    JudgeMalformed(String),
}

/// Lowercases, strips punctuation, collapses whitespace, and removes the
/// standalone articles "a", "an", "the".
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let depunct: String = lowered
        .chars()
        .map(|c| if c.is_ascii_punctuation() { ' ' } else { c })
        .collect();
    depunct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalized_tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn multiset(tokens: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Binary exact-match on normalized answers.
pub fn em_reward(pred: &str, gold: &str) -> f64 {
    if normalize_answer(pred) == normalize_answer(gold) {
        1.0
    } else {
        0.0
    }
}

/// Token-level F1 over normalized token multisets. Both empty scores 1;
/// one-sided empty or zero overlap scores 0.
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    let pred_tokens = normalized_tokens(pred);
    let gold_tokens = normalized_tokens(gold);
    if pred_tokens.is_empty() && gold_tokens.is_empty() {
        return 1.0;
    }
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return 0.0;
    }
    let pred_counts = multiset(&pred_tokens);
    let gold_counts = multiset(&gold_tokens);
    let matches: usize = pred_counts
        .iter()
        .map(|(token, &count)| count.min(*gold_counts.get(token).unwrap_or(&0)))
        .sum();
    if matches == 0 {
        return 0.0;
    }
    let precision = matches as f64 / pred_tokens.len() as f64;
    let recall = matches as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Unigram BLEU: clipped unigram precision times the brevity penalty
/// `min(1, exp(1 − |gold|/|pred|))`, over raw whitespace tokens.
pub fn bleu1(pred: &str, gold: &str) -> f64 {
    let pred_tokens: Vec<String> = pred.split_whitespace().map(str::to_owned).collect();
    let gold_tokens: Vec<String> = gold.split_whitespace().map(str::to_owned).collect();
    if pred_tokens.is_empty() {
        return 0.0;
    }
    if gold_tokens.is_empty() {
        return 0.0;
    }
    let gold_counts = multiset(&gold_tokens);
    let pred_counts = multiset(&pred_tokens);
    let clipped: usize = pred_counts
        .iter()
        .map(|(token, &count)| count.min(*gold_counts.get(token).unwrap_or(&0)))
        .sum();
    let precision = clipped as f64 / pred_tokens.len() as f64;
    let brevity = (1.0 - gold_tokens.len() as f64 / pred_tokens.len() as f64).exp().min(1.0);
    precision * brevity
}

/// Judge verdict for one answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JudgeLabel {
    Correct,
    Wrong,
    /// Gateway failed; excluded from judge means, counted separately.
    Unavailable,
}

/// The judge instruction template. Slots: question, gold answer, generated
/// answer.
pub const JUDGE_PROMPT_TEMPLATE: &str = r#"Your task is to label an answer to a question as 'CORRECT' or 'WRONG'.
You will be given the following data:
    (1) a question (posed by one user to another user),
    (2) a 'gold' (ground truth) answer,
    (3) a generated answer,
which you will score as CORRECT or WRONG.

The point of the question is to ask about something one user should know about the other user based on their prior conversations.

The gold answer will usually be a concise and short answer that includes the referenced topic, for example:
Question: Do you remember what I got the last time I went to Hawaii?
Gold answer: A shell necklace

The generated answer might be longer, but you should be generous with your grading — as long as it touches on the same topic as the gold answer, it should be counted as CORRECT.

For time-related questions, the gold answer will be a specific date, month, or year. The generated answer might include relative references (e.g., "last Tuesday"), but you should be generous — if it refers to the same time period as the gold answer, mark it CORRECT, even if the format differs (e.g., "May 7th" vs. "7 May").

Now it's time for the real question:
Question: {question}
Gold answer: {gold_answer}
Generated answer: {generated_answer}

First, provide a short (one sentence) explanation of your reasoning, then finish with CORRECT or WRONG. Do NOT include both CORRECT and WRONG in your response, or it will break the evaluation script.

Return the label in JSON format with the key as "label".
"#;

pub fn render_judge_prompt(question: &str, gold: &str, pred: &str) -> String {
    JUDGE_PROMPT_TEMPLATE
        .replace("{question}", question)
        .replace("{gold_answer}", gold)
        .replace("{generated_answer}", pred)
}

fn parse_judge_label(text: &str) -> Result<JudgeLabel, MetricsError> {
    // Preferred path: a JSON object carrying "label". The judge may prefix
    // free-form reasoning, so scan for the last object that parses.
    for (start, _) in text.match_indices('{') {
        for (end, _) in text[start..].match_indices('}') {
            let candidate = &text[start..=start + end];
            if let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) {
                if let Some(label) = value.get("label").and_then(|v| v.as_str()) {
                    return match label.trim().to_ascii_uppercase().as_str() {
                        "CORRECT" => Ok(JudgeLabel::Correct),
                        "WRONG" => Ok(JudgeLabel::Wrong),
                        other => Err(MetricsError::JudgeMalformed(other.to_string())),
                    };
                }
            }
        }
    }
    // Fallback: a bare final verdict without the JSON wrapper.
    let upper = text.to_ascii_uppercase();
    match (upper.contains("CORRECT"), upper.contains("WRONG")) {
        (true, false) => Ok(JudgeLabel::Correct),
        (false, true) => Ok(JudgeLabel::Wrong),
        _ => Err(MetricsError::JudgeMalformed(text.to_string())),
    }
}

/// Sends the rendered judge prompt at temperature 0 and parses the label.
/// Gateway failures map to `JudgeUnavailable` so callers can record
/// [`JudgeLabel::Unavailable`] and keep scoring.
pub fn llm_judge(
    question: &str,
    gold: &str,
    pred: &str,
    gateway: &dyn ChatGateway,
) -> Result<JudgeLabel, MetricsError> {
    let request = GatewayRequest {
        messages: vec![Message::user(render_judge_prompt(question, gold, pred))],
        temperature: 0.0,
        max_tokens: 2048,
        endpoint_profile: None,
    };
    let response = gateway.chat_complete(&request)?;
    parse_judge_label(&response.text)
}

/// Per-question scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub f1: f64,
    pub bleu1: f64,
    pub judge: Option<JudgeLabel>,
}

/// Aggregate means for one question category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CategoryScores {
    pub count: usize,
    pub f1: f64,
    pub bleu1: f64,
    /// Mean of judged questions only; `None` when nothing was judged.
    pub judge: Option<f64>,
    pub judge_unavailable: usize,
}

/// Per-category and overall score means. The overall row is
/// question-weighted, not category-averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub categories: Vec<(QuestionCategory, CategoryScores)>,
    pub overall: CategoryScores,
    pub seeds: Vec<u64>,
}

fn mean_scores(scores: &[(QuestionCategory, ScoreTriple)]) -> CategoryScores {
    let count = scores.len();
    let f1 = scores.iter().map(|(_, s)| s.f1).sum::<f64>() / count as f64;
    let b1 = scores.iter().map(|(_, s)| s.bleu1).sum::<f64>() / count as f64;
    let judged: Vec<f64> = scores
        .iter()
        .filter_map(|(_, s)| match s.judge {
            Some(JudgeLabel::Correct) => Some(1.0),
            Some(JudgeLabel::Wrong) => Some(0.0),
            _ => None,
        })
        .collect();
    let unavailable = scores
        .iter()
        .filter(|(_, s)| matches!(s.judge, Some(JudgeLabel::Unavailable)))
        .count();
    CategoryScores {
        count,
        f1,
        bleu1: b1,
        judge: if judged.is_empty() {
            None
        } else {
            Some(judged.iter().sum::<f64>() / judged.len() as f64)
        },
        judge_unavailable: unavailable,
    }
}

/// Folds per-question scores into a [`RewardReport`]. Category rows appear
/// in canonical order; categories with no questions are omitted.
pub fn aggregate_report(
    scores: &[(QuestionCategory, ScoreTriple)],
    seed: u64,
) -> Result<RewardReport, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut categories = Vec::new();
    for category in QuestionCategory::ALL {
        let subset: Vec<_> =
            scores.iter().filter(|(c, _)| *c == category).copied().collect();
        if !subset.is_empty() {
            categories.push((category, mean_scores(&subset)));
        }
    }
    Ok(RewardReport { categories, overall: mean_scores(scores), seeds: vec![seed] })
}

/// Averages reports from multiple run seeds, question-count weighted within
/// each category.
pub fn average_reports(reports: &[RewardReport]) -> Result<RewardReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if reports.len() == 1 {
        return Ok(reports[0].clone());
    }
    let n = reports.len() as f64;
    let mut merged = reports[0].clone();
    for (category, scores) in &mut merged.categories {
        let mut f1 = 0.0;
        let mut b1 = 0.0;
        let mut judge_sum = 0.0;
        let mut judge_runs = 0usize;
        for report in reports {
            if let Some((_, s)) = report.categories.iter().find(|(c, _)| c == category) {
                f1 += s.f1;
                b1 += s.bleu1;
                if let Some(j) = s.judge {
                    judge_sum += j;
                    judge_runs += 1;
                }
            }
        }
        scores.f1 = f1 / n;
        scores.bleu1 = b1 / n;
        scores.judge = if judge_runs > 0 { Some(judge_sum / judge_runs as f64) } else { None };
    }
    merged.overall.f1 = reports.iter().map(|r| r.overall.f1).sum::<f64>() / n;
    merged.overall.bleu1 = reports.iter().map(|r| r.overall.bleu1).sum::<f64>() / n;
    let judged: Vec<f64> = reports.iter().filter_map(|r| r.overall.judge).collect();
    merged.overall.judge = if judged.is_empty() {
        None
    } else {
        Some(judged.iter().sum::<f64>() / judged.len() as f64)
    };
    merged.seeds = reports.iter().flat_map(|r| r.seeds.iter().copied()).collect();
    Ok(merged)
}

/// Renders a report as the fixed-layout text table written by `eval`.
pub fn format_report(report: &RewardReport) -> String {
    let mut out = String::new();
    out.push_str("category      count      F1      B1       J\n");
    let row = |name: &str, s: &CategoryScores| {
        format!(
            "{:<12} {:>6}  {:>6.4}  {:>6.4}  {}\n",
            name,
            s.count,
            s.f1,
            s.bleu1,
            match s.judge {
                Some(j) => format!("{j:>6.4}"),
                None => "     -".to_string(),
            }
        )
    };
    for (category, scores) in &report.categories {
        out.push_str(&row(category.as_str(), scores));
    }
    out.push_str(&row("overall", &report.overall));
    if report.overall.judge_unavailable > 0 {
        out.push_str(&format!(
            "note: {} judge call(s) unavailable, excluded from J means\n",
            report.overall.judge_unavailable
        ));
    }
    out.push_str(&format!(
        "seeds: {}\n",
        report.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    ));
    out
}
