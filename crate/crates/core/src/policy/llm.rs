//! LLM-backed policy implementations. These satisfy the same sampling
//! contracts as the parametric policies but report `log_prob: None`, so the
//! trainers exclude them from importance ratios.

use rand::RngCore;

use super::prompts::{render_answer_prompt, render_manager_prompt};
use super::{AnswerOutcome, AnswerPolicy, ManagerDecision, ManagerPolicy, PolicyError};
use crate::gateway::{ChatGateway, GatewayRequest, Message};
use crate::memory::{parse_decisions, MemoryBank};
use crate::pipeline::ExtractedFact;
use crate::retrieval::RetrievedItem;

/// Memory manager driven by the instruction prompt and a chat gateway.
pub struct LlmManagerPolicy<'g> {
    gateway: &'g dyn ChatGateway,
}

impl<'g> LlmManagerPolicy<'g> {
    pub fn new(gateway: &'g dyn ChatGateway) -> Self {
        Self { gateway }
    }

    pub fn render_prompt(fact: &ExtractedFact, retrieved: &[RetrievedItem]) -> String {
        render_manager_prompt(retrieved, &[fact.text.as_str()])
    }
}

impl ManagerPolicy for LlmManagerPolicy<'_> {
    fn decide(
        &self,
        fact: &ExtractedFact,
        retrieved: &[RetrievedItem],
        temperature: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<ManagerDecision, PolicyError> {
        let request = GatewayRequest {
            messages: vec![Message::user(Self::render_prompt(fact, retrieved))],
            temperature,
            max_tokens: 2048,
            endpoint_profile: None,
        };
        let response = self.gateway.chat_complete(&request)?;
        let decisions = parse_decisions(&response.text, &MemoryBank::new())
            .map_err(|e| PolicyError::MalformedOutput(e.to_string()))?;
        // NONE echoes are dropped: the engine treats unlisted entries as
        // untouched, so explicit NOOPs only pad the event clock.
        let decisions: Vec<_> = decisions
            .into_iter()
            .filter(|d| d.kind != crate::memory::DecisionKind::Noop)
            .collect();
        let decisions = if decisions.is_empty() {
            vec![crate::memory::MemoryOperationDecision::noop()]
        } else {
            decisions
        };
        Ok(ManagerDecision { decisions, log_prob: None, temperature })
    }
}

/// Answer agent driven by the instruction prompt and a chat gateway.
pub struct LlmAnswerPolicy<'g> {
    gateway: &'g dyn ChatGateway,
}

impl<'g> LlmAnswerPolicy<'g> {
    pub fn new(gateway: &'g dyn ChatGateway) -> Self {
        Self { gateway }
    }

    pub fn render_prompt(question: &str, retrieved: &[RetrievedItem]) -> String {
        render_answer_prompt(question, retrieved)
    }

    fn parse_response(
        text: &str,
        retrieved: &[RetrievedItem],
    ) -> Result<AnswerOutcome, PolicyError> {
        let marker = "**Answer:**";
        let answer_at = text
            .rfind(marker)
            .ok_or_else(|| PolicyError::MalformedOutput("missing **Answer:** marker".into()))?;
        let answer = text[answer_at + marker.len()..]
            .trim()
            .lines()
            .next()
            .unwrap_or_default()
            .trim()
            .to_string();
        if answer.is_empty() {
            return Err(PolicyError::MalformedOutput("empty answer".into()));
        }
        // Best-effort attribution of the "selected memories" section back to
        // retrieved ids: a listed line matches an item whose text it contains.
        let selected_section = &text[..answer_at];
        let distilled_ids = retrieved
            .iter()
            .filter(|item| {
                selected_section
                    .lines()
                    .any(|line| line.trim_start().starts_with('-') && line.contains(&item.text))
            })
            .map(|item| item.id)
            .collect();
        Ok(AnswerOutcome { answer, distilled_ids, log_prob: None, temperature: 0.0 })
    }
}

impl AnswerPolicy for LlmAnswerPolicy<'_> {
    fn answer(
        &self,
        question: &str,
        retrieved: &[RetrievedItem],
        temperature: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<AnswerOutcome, PolicyError> {
        let request = GatewayRequest {
            messages: vec![Message::user(Self::render_prompt(question, retrieved))],
            temperature,
            max_tokens: 2048,
            endpoint_profile: None,
        };
        let response = self.gateway.chat_complete(&request)?;
        let mut outcome = Self::parse_response(&response.text, retrieved)?;
        outcome.temperature = temperature;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::StubGateway;
    use crate::memory::{DecisionKind, MemoryId};
    use rand::SeedableRng;

    fn item(id: u64, text: &str, speaker: &str) -> RetrievedItem {
        RetrievedItem {
            id: MemoryId(id),
            score: 0.5,
            text: text.into(),
            speaker: Some(speaker.into()),
            updated_at: id,
        }
    }

    #[test]
    fn llm_manager_parses_scripted_decision_list() {
        let fact = ExtractedFact {
            text: "Name is John".into(),
            source_turn_id: 0,
            speaker: "John".into(),
        };
        let retrieved = vec![item(0, "User is a software engineer", "John")];
        let mut stub = StubGateway::new();
        let request = GatewayRequest {
            messages: vec![Message::user(LlmManagerPolicy::render_prompt(&fact, &retrieved))],
            temperature: 1.0,
            max_tokens: 2048,
            endpoint_profile: None,
        };
        stub.script_request(
            &request,
            r#"{"memory": [
                {"id": "0", "text": "User is a software engineer", "event": "NONE"},
                {"id": "1", "text": "Name is John", "event": "ADD"}
            ]}"#,
        );
        let policy = LlmManagerPolicy::new(&stub);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let decision = policy.decide(&fact, &retrieved, 1.0, &mut rng).unwrap();
        assert_eq!(decision.decisions.len(), 1);
        assert_eq!(decision.decisions[0].kind, DecisionKind::Add);
        assert_eq!(decision.log_prob, None);
    }

    #[test]
    fn llm_answer_parses_marker_and_attributes_memories() {
        let retrieved = vec![
            item(4, "John took pictures at the beach", "John"),
            item(9, "John loves mountaineering magazines", "John"),
        ];
        let response = "**Memories selected as relevant:**\n- John took pictures at the beach\n\n**Answer:** beach\n";
        let outcome = LlmAnswerPolicy::parse_response(response, &retrieved).unwrap();
        assert_eq!(outcome.answer, "beach");
        assert_eq!(outcome.distilled_ids, vec![MemoryId(4)]);
    }
}
