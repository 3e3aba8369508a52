//! Fact extraction from dialogue turns.
//!
//! The rule stub keeps corpus construction and tests fully offline: it
//! splits sentences, drops questions and acknowledgements, and rewrites
//! first person to the speaker's name. The LLM-backed extractor delegates
//! the same contract to a gateway.

use serde::{Deserialize, Serialize};

use crate::dataset::DialogueTurn;
use crate::gateway::{ChatGateway, GatewayRequest};
use crate::pipeline::PipelineError;

/// A declarative fact attributed to the speaker of its source turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedFact {
    pub text: String,
    pub source_turn_id: u32,
    pub speaker: String,
}

/// Turn-to-facts contract.
pub trait FactExtractor: Send + Sync {
    fn extract(&self, turn: &DialogueTurn) -> Result<Vec<ExtractedFact>, PipelineError>;
}

const ACK_PREFIXES: &[&str] = &[
    "thanks", "thank you", "that's great", "that's awesome", "that's nice", "that's cool",
    "wow", "cool", "nice", "great", "awesome", "okay", "ok", "sure", "sorry", "haha",
    "yes", "yeah", "no problem", "oh", "congrats", "congratulations", "good to know",
];

const INTERROGATIVES: &[&str] = &[
    "what", "who", "whom", "whose", "when", "where", "why", "how", "do", "does", "did",
    "is", "are", "was", "were", "can", "could", "will", "would", "should", "have", "has",
];

fn word_core(word: &str) -> String {
    word.chars()
        .filter(|c| c.is_alphanumeric() || *c == '\'')
        .collect::<String>()
        .to_lowercase()
}

fn rewrite_first_person(sentence: &str, speaker: &str) -> String {
    let mut out: Vec<String> = Vec::new();
    for word in sentence.split_whitespace() {
        let core = word_core(word);
        let replacement = match core.as_str() {
            "i" => Some(speaker.to_string()),
            "i'm" => Some(format!("{speaker} is")),
            "i've" => Some(format!("{speaker} has")),
            "i'd" => Some(format!("{speaker} would")),
            "i'll" => Some(format!("{speaker} will")),
            "my" | "mine" | "our" => Some(format!("{speaker}'s")),
            "me" | "myself" | "we" | "us" => Some(speaker.to_string()),
            _ => None,
        };
        match replacement {
            Some(r) => {
                // Keep trailing punctuation from the original token.
                let trailing: String =
                    word.chars().rev().take_while(|c| c.is_ascii_punctuation()).collect();
                let trailing: String = trailing.chars().rev().collect();
                out.push(format!("{r}{trailing}"));
            }
            None => out.push(word.to_string()),
        }
    }
    out.join(" ")
}

fn is_question(sentence: &str, terminator: Option<char>) -> bool {
    if terminator == Some('?') {
        return true;
    }
    sentence
        .split_whitespace()
        .next()
        .map(|w| INTERROGATIVES.contains(&word_core(w).as_str()))
        .unwrap_or(false)
}

fn is_acknowledgement(sentence: &str) -> bool {
    let lowered = sentence.to_lowercase();
    let lowered = lowered.trim();
    ACK_PREFIXES.iter().any(|p| lowered.starts_with(p))
        || sentence.split_whitespace().count() <= 2
}

/// Deterministic sentence-rule extractor.
#[derive(Debug, Clone, Default)]
pub struct RuleExtractor;

impl FactExtractor for RuleExtractor {
    fn extract(&self, turn: &DialogueTurn) -> Result<Vec<ExtractedFact>, PipelineError> {
        let mut facts = Vec::new();
        let mut start = 0usize;
        let text = turn.text.as_str();
        let mut sentences: Vec<(String, Option<char>)> = Vec::new();
        for (idx, c) in text.char_indices() {
            if matches!(c, '.' | '!' | '?') {
                let s = text[start..idx].trim();
                if !s.is_empty() {
                    sentences.push((s.to_string(), Some(c)));
                }
                start = idx + c.len_utf8();
            }
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            sentences.push((tail.to_string(), None));
        }

        for (sentence, terminator) in sentences {
            if is_question(&sentence, terminator) || is_acknowledgement(&sentence) {
                continue;
            }
            let rewritten = rewrite_first_person(&sentence, &turn.speaker);
            if rewritten.trim().is_empty() {
                continue;
            }
            facts.push(ExtractedFact {
                text: rewritten,
                source_turn_id: turn.turn_id,
                speaker: turn.speaker.clone(),
            });
        }
        Ok(facts)
    }
}

const EXTRACTION_PROMPT: &str = "Extract the key personal facts from this dialogue turn as short declarative sentences written in third person, one fact per line. Output NONE if the turn carries no facts worth remembering.\n\nSpeaker: {speaker}\nTurn: {text}\n\nFacts:\n";

/// Extractor backed by a chat gateway.
pub struct LlmExtractor<'g> {
    gateway: &'g dyn ChatGateway,
}

impl<'g> LlmExtractor<'g> {
    pub fn new(gateway: &'g dyn ChatGateway) -> Self {
        Self { gateway }
    }

    pub fn render_prompt(turn: &DialogueTurn) -> String {
        EXTRACTION_PROMPT
            .replace("{speaker}", &turn.speaker)
            .replace("{text}", &turn.text)
    }
}

impl FactExtractor for LlmExtractor<'_> {
    fn extract(&self, turn: &DialogueTurn) -> Result<Vec<ExtractedFact>, PipelineError> {
        let request = GatewayRequest::user(Self::render_prompt(turn));
        let response = self
            .gateway
            .chat_complete(&request)
            .map_err(|e| PipelineError::ExtractorUnavailable(e.to_string()))?;
        let facts = response
            .text
            .lines()
            .map(|l| l.trim().trim_start_matches('-').trim())
            .filter(|l| !l.is_empty() && !l.eq_ignore_ascii_case("none"))
            .map(|l| ExtractedFact {
                text: l.to_string(),
                source_turn_id: turn.turn_id,
                speaker: turn.speaker.clone(),
            })
            .collect();
        Ok(facts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(speaker: &str, text: &str) -> DialogueTurn {
        DialogueTurn {
            turn_id: 7,
            speaker: speaker.into(),
            text: text.into(),
            timestamp: "1:24 pm on 25 May, 2023".into(),
            session_id: "s1".into(),
        }
    }

    #[test]
    fn rewrites_first_person_to_speaker() {
        let facts = RuleExtractor
            .extract(&turn(
                "Andrew",
                "It took us a while to decide, but we ended up going with 'Scout' for our pup",
            ))
            .unwrap();
        assert_eq!(facts.len(), 1);
        assert!(facts[0].text.contains("Andrew"), "{}", facts[0].text);
        assert!(facts[0].text.contains("Scout"));
        assert_eq!(facts[0].speaker, "Andrew");
        assert_eq!(facts[0].source_turn_id, 7);
    }

    #[test]
    fn questions_and_acknowledgements_yield_nothing() {
        let facts = RuleExtractor
            .extract(&turn("Audrey", "That's great news! What's the pup's name?"))
            .unwrap();
        assert!(facts.is_empty(), "{facts:?}");
    }

    #[test]
    fn empty_turn_yields_nothing() {
        assert!(RuleExtractor.extract(&turn("A", "")).unwrap().is_empty());
    }

    #[test]
    fn multiple_sentences_yield_multiple_facts() {
        let facts = RuleExtractor
            .extract(&turn("Alice", "My pet is not a hamster anymore. These days my pet is a parrot."))
            .unwrap();
        assert_eq!(facts.len(), 2);
        assert_eq!(facts[0].text, "Alice's pet is not a hamster anymore");
        assert_eq!(facts[1].text, "These days Alice's pet is a parrot");
    }

    #[test]
    fn llm_extractor_parses_lines_and_none() {
        let mut stub = crate::gateway::StubGateway::new();
        let t = turn("Joanna", "I wish I wasn't allergic!");
        stub.script_user_prompt(
            &LlmExtractor::render_prompt(&t),
            "- Joanna is allergic to turtles\n- Joanna wants a pet\n",
        );
        let extractor = LlmExtractor::new(&stub);
        let facts = extractor.extract(&t).unwrap();
        assert_eq!(facts.len(), 2);
        assert_eq!(facts[0].text, "Joanna is allergic to turtles");

        let t2 = turn("Joanna", "Sounds good.");
        let mut stub2 = crate::gateway::StubGateway::new();
        stub2.script_user_prompt(&LlmExtractor::render_prompt(&t2), "NONE");
        assert!(LlmExtractor::new(&stub2).extract(&t2).unwrap().is_empty());
    }
}
