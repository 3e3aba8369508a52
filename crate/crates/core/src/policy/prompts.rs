//! Instruction templates for the LLM-backed policies.
//!
//! Rendering is byte-stable: identical inputs always produce identical
//! prompt text, which stub-mode scripting and the golden-file tests rely
//! on.

use crate::retrieval::RetrievedItem;

/// Manager instructions, part 1: overview plus ADD/UPDATE guidance.
pub const MANAGER_PROMPT_PART1: &str = r#"You are a smart memory manager which controls the memory of a system.
You can perform four operations: (1) add into the memory, (2) update the memory, (3) delete from the memory, and (4) no change.

Based on the above four operations, the memory will change.

Compare newly retrieved facts with the existing memory. For each new fact, decide whether to:
- ADD: Add it to the memory as a new element
- UPDATE: Update an existing memory element
- DELETE: Delete an existing memory element
- NONE: Make no change (if the fact is already present or irrelevant)

1. **Add**: If the retrieved facts contain new information not present in the memory, then you have to add it by generating a new ID in the id field.

- Example:
    Old Memory:
        [
            {"id" : "0", "text" : "User is a software engineer"}
        ]
    Retrieved facts: ["Name is John"]

    New Memory:
        {
            "memory" : [
                {"id" : "0", "text" : "User is a software engineer", "event" : "NONE"},
                {"id" : "1", "text" : "Name is John", "event" : "ADD"}
            ]
        }
2. **Update**: If the retrieved facts contain information that is already present in the memory but the information is totally different, then you have to update it.

If the retrieved fact contains information that conveys the same thing as the memory, keep the version with more detail.

Example (a) – if the memory contains "User likes to play cricket" and the retrieved fact is "Loves to play cricket with friends", then update the memory with the retrieved fact.

Example (b) – if the memory contains "Likes cheese pizza" and the retrieved fact is "Loves cheese pizza", then do NOT update it because they convey the same information.

Important: When updating, keep the same ID and preserve old_memory.

- Example:
    Old Memory:
        [
            {"id" : "0", "text" : "I really like cheese pizza"},
            {"id" : "2", "text" : "User likes to play cricket"}
        ]
    Retrieved facts: ["Loves chicken pizza", "Loves to play cricket with friends"]

    New Memory:
        {
        "memory" : [
            {"id" : "0", "text" : "Loves cheese and chicken pizza", "event" : "UPDATE",
             "old_memory" : "I really like cheese pizza"},
            {"id" : "2", "text" : "Loves to play cricket with friends", "event" : "UPDATE",
             "old_memory" : "User likes to play cricket"}
        ]
        }
"#;

/// Manager instructions, part 2: DELETE and no-change guidance.
pub const MANAGER_PROMPT_PART2: &str = r#"3. **Delete**: If the retrieved facts contain information that contradicts the memory, delete it. When deleting, return the same IDs — do not generate new IDs.

- Example:
    Old Memory:
        [
            {"id" : "1", "text" : "Loves cheese pizza"}
        ]
    Retrieved facts: ["Dislikes cheese pizza"]

    New Memory:
        {
        "memory" : [
            {"id" : "1", "text" : "Loves cheese pizza", "event" : "DELETE"}
        ]
        }

4. **No Change**: If the retrieved facts are already present, make no change.

- Example:
    Old Memory:
        [
            {"id" : "0", "text" : "Name is John"}
        ]
    Retrieved facts: ["Name is John"]

    New Memory:
        {
        "memory" : [
            {"id" : "0", "text" : "Name is John", "event" : "NONE"}
        ]
        }
"#;

/// Fills the manager template with the current retrieval snapshot and the
/// facts under consideration.
pub fn render_manager_prompt(old_memories: &[RetrievedItem], facts: &[&str]) -> String {
    let memory_records: Vec<String> = old_memories
        .iter()
        .map(|m| {
            format!(
                "            {{\"id\" : \"{}\", \"text\" : {}}}",
                m.id,
                serde_json::to_string(&m.text).expect("text serializes")
            )
        })
        .collect();
    let facts_list: Vec<String> = facts
        .iter()
        .map(|f| serde_json::to_string(f).expect("fact serializes"))
        .collect();
    format!(
        "{MANAGER_PROMPT_PART1}\n{MANAGER_PROMPT_PART2}\nOld Memory:\n        [\n{}\n        ]\nRetrieved facts: [{}]\n\nNew Memory:\n",
        memory_records.join(",\n"),
        facts_list.join(", ")
    )
}

/// Answer-agent instructions with per-speaker memory sections.
pub const ANSWER_PROMPT_HEADER: &str = r#"You are an intelligent memory assistant tasked with retrieving accurate information from conversation memories.

# CONTEXT:
You have access to memories from two speakers in a conversation. These memories contain timestamped information that may be relevant to answering the question.

# INSTRUCTIONS:
1. Carefully analyze all provided memories from both speakers
2. Pay special attention to the timestamps to determine the answer
3. If the question asks about a specific event or fact, look for direct evidence
4. If the memories contain contradictory information, prioritize the most recent memory
5. If there is a question about time references (like "last year", "two months ago"), calculate the actual date based on the memory timestamp.
6. Always convert relative time references to specific dates, months, or years.
7. Focus only on the content of the memories. Do not confuse character names
8. The answer should be less than 5-6 words.
9. IMPORTANT: Select memories you found that are useful for answering the questions, and output it before you answer questions.
10. IMPORTANT: Output the final answer after **Answer:**

# APPROACH (Think step by step):
1. Examine all relevant memories
2. Examine the timestamps carefully
3. Look for explicit mentions that answer the question
4. Convert relative references if needed
5. Formulate a concise answer
6. Double-check the answer correctness
7. Ensure the final answer is specific
8. First output the memories that you found are important before you answer questions
"#;

/// Renders the answer prompt. Memories are grouped per speaker in
/// first-appearance order; unattributed memories group under "unknown".
pub fn render_answer_prompt(question: &str, retrieved: &[RetrievedItem]) -> String {
    let mut speakers: Vec<&str> = Vec::new();
    for item in retrieved {
        let speaker = item.speaker.as_deref().unwrap_or("unknown");
        if !speakers.contains(&speaker) {
            speakers.push(speaker);
        }
    }
    let mut out = String::from(ANSWER_PROMPT_HEADER);
    for speaker in speakers {
        out.push_str(&format!("\nMemories for user {speaker}:\n"));
        for item in retrieved {
            if item.speaker.as_deref().unwrap_or("unknown") == speaker {
                out.push_str(&format!("- {}\n", item.text));
            }
        }
    }
    out.push_str(&format!("\nQuestion: {question}\n"));
    out
}
