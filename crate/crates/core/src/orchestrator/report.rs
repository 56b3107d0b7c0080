use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{AgentRole, Claim};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Divergence {
    pub topic: String,
    pub positions: BTreeMap<AgentRole, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SynthesisReport {
    pub final_diagnosis: String,
    pub consensus: Vec<String>,
    pub divergence: Vec<Divergence>,
    pub care_plan: Vec<String>,
    pub next_steps: Vec<String>,
    pub contributing_roles: BTreeSet<AgentRole>,
    /// Claims made by the senior physician in the synthesis itself.
    #[serde(default)]
    pub claims: Vec<Claim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind")]
pub enum FlagReason {
    /// No vital, lab or medication of that name in the record.
    NotInRecord,
    /// The record holds a different value; `record_value` is the latest one.
    ValueMismatch { record_value: f64 },
    /// A history fact found neither in the record's narrative nor in the
    /// retrieved reference context.
    UnsupportedByContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VerificationFlag {
    pub claim: Claim,
    pub reason: FlagReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum Verdict {
    Clean,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VerificationReport {
    pub checked: usize,
    pub flags: Vec<VerificationFlag>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum GapCategory {
    Diagnosis,
    Treatment,
    Monitoring,
    /// Also the catch-all for findings that name no category.
    Coordination,
}

impl GapCategory {
    pub const ALL: [GapCategory; 4] =
        [GapCategory::Diagnosis, GapCategory::Treatment, GapCategory::Monitoring, GapCategory::Coordination];

    pub fn parse(s: &str) -> Option<GapCategory> {
        GapCategory::ALL.into_iter().find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for GapCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapCategory::Diagnosis => "Diagnosis",
            GapCategory::Treatment => "Treatment",
            GapCategory::Monitoring => "Monitoring",
            GapCategory::Coordination => "Coordination",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GapFinding {
    pub finding: String,
    pub raised_by: BTreeSet<AgentRole>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GapReport {
    /// Always holds all four categories.
    pub categories: BTreeMap<GapCategory, Vec<GapFinding>>,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum BarrierSource {
    /// Named by the case manager agent.
    Agent,
    /// Added from the record's social history.
    Sdoh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Barrier {
    pub description: String,
    pub source: BarrierSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct DischargeSummary {
    pub text: String,
    pub barriers: Vec<Barrier>,
}
