//! The versioned prompt that elicits an uncertainty score from the judge.
//!
//! The template text is part of the reproducibility surface: annotations are
//! cached under its id, so any change in wording must come with a new id.

/// Identifier recorded in caches and provenance sidecars.
pub const TEMPLATE_ID: &str = "uncertainty-v1";

/// System message: defines the judge's task and the reply format.
pub const SYSTEM_PROMPT: &str = "\
You rate how much inherent uncertainty or ambiguity an instruction admits in \
its space of valid responses. A math exercise with a single correct answer \
has very low uncertainty; an open-ended request for an opinion, a story, or \
advice has high uncertainty. Judge the instruction itself, using the shown \
response only as an example of what was accepted. Reply with a brief \
justification, then a final line of exactly: SCORE: <0-100> \
where 0 means a single acceptable answer and 100 means almost any coherent \
answer is acceptable.";

/// Renders the user message for one sample.
pub fn render_user_prompt(instruction: &str, response: &str) -> String {
    format!("Instruction:\n{instruction}\n\nResponse:\n{response}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_prompt_pins_reply_format() {
        assert!(SYSTEM_PROMPT.contains("SCORE: <0-100>"));
    }

    #[test]
    fn user_prompt_carries_both_fields_verbatim() {
        let prompt = render_user_prompt("weird \"quotes\"", "multi\nline");
        assert!(prompt.contains("weird \"quotes\""));
        assert!(prompt.contains("multi\nline"));
    }
}
