use std::fmt::Write;

use super::slots::{fill_slots, UnresolvedSlot};
use super::{AgentProfile, ReasoningStyle};
use crate::domain::{render_case_summary, Instant, PatientCase, SummaryError};
use crate::rag::RetrievedChunk;

/// Output contract every team agent answers in. The gateway's
/// structured-response parser reads exactly these headings.
pub const OUTPUT_SCHEMA: &str = "\
OUTPUT FORMAT
Answer using exactly these headed sections, in this order:
ASSESSMENT: your assessment from your role's perspective.
DIFFERENTIAL: numbered lines `1. <condition> | <reasoning>`, most likely first.
PLAN: one recommendation per line, each starting with `- `.
CLAIMS: one line per patient-specific fact you relied on, written as
`CLAIM: <Vital|Lab|Medication|HistoryFact>|<name>|<value>` with the value copied exactly from the record.";

/// Replaces [`OUTPUT_SCHEMA`] for agents that speak directly to patients.
pub const PATIENT_FACING_OUTPUT: &str = "\
OUTPUT FORMAT
Write in plain, warm language a patient without medical training can follow. Avoid jargon and \
abbreviations, use short paragraphs, and do not include headings, claim lines or codes.";

const CHAIN_OF_THOUGHT: &str = "\
REASONING
Think step by step. Work through the presenting problem, vital signs, laboratory results, \
medications and history in turn, state each intermediate conclusion, and only then commit to \
your answer.";

const REACT: &str = "\
REASONING
Work in a thought, action, observation loop. Thought: decide what you need to know next. \
Action: look it up in the case record or the reference context. Observation: note what you \
found. Repeat until the evidence supports an answer, then give it.";

pub const NO_REFERENCE_CONTEXT: &str = "NO REFERENCE CONTEXT";

fn reasoning_directive(style: ReasoningStyle) -> &'static str {
    match style {
        ReasoningStyle::ChainOfThought => CHAIN_OF_THOUGHT,
        ReasoningStyle::ReAct => REACT,
    }
}

fn render(profile: &AgentProfile, shared_goals: &str, output: &str) -> Result<String, UnresolvedSlot> {
    fill_slots(&profile.system_prompt_scaffold, |slot| match slot {
        "role_charter" => Some(profile.role_charter.clone()),
        "shared_goals" => Some(shared_goals.to_string()),
        "output_schema" => Some(output.to_string()),
        "reasoning_style" => Some(reasoning_directive(profile.reasoning_style).to_string()),
        "display_name" => Some(profile.display_name.clone()),
        _ => None,
    })
}

/// Renders the profile's scaffold with its charter, the team's shared goals,
/// the reasoning directive and the structured output contract.
pub fn build_system_prompt(profile: &AgentProfile, shared_goals: &str) -> Result<String, UnresolvedSlot> {
    render(profile, shared_goals, OUTPUT_SCHEMA)
}

/// Same scaffold, but with the plain-language output contract.
pub fn build_patient_facing_prompt(profile: &AgentProfile, shared_goals: &str) -> Result<String, UnresolvedSlot> {
    render(profile, shared_goals, PATIENT_FACING_OUTPUT)
}

/// Case summary, then retrieved reference chunks in rank order, then the
/// question.
pub fn build_user_prompt(
    case: &PatientCase,
    question: &str,
    context: &[RetrievedChunk],
    as_of: Instant,
) -> Result<String, SummaryError> {
    let mut out = render_case_summary(case, as_of)?;
    out.push_str("\nREFERENCE CONTEXT:\n");
    if context.is_empty() {
        let _ = writeln!(out, "{NO_REFERENCE_CONTEXT}");
    }
    for hit in context {
        let _ = writeln!(
            out,
            "[{}] source: {} ({}), score {:.3}",
            hit.rank, hit.chunk.chunk_id, hit.chunk.source_title, hit.score
        );
        let _ = writeln!(out, "{}", hit.chunk.text.trim());
    }
    let _ = write!(out, "\nQUESTION:\n{}\n", question.trim());
    Ok(out)
}
