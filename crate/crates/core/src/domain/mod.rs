//! Shared clinical and consultation types.
//!
//! Everything in here is an immutable value. The interchange document for a
//! [`PatientCase`] is JSON with a top-level `"schema_version": 1` (see
//! [`CaseDocument`]).

mod role;
mod summary;
mod validate;

use std::fmt;

use chrono::{DateTime, Utc};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::orchestrator::{GapReport, SynthesisReport, VerificationReport};

pub use role::{AgentRole, ParseRoleError};
pub use summary::{render_case_summary, sdoh_flags, SummaryError, SUMMARY_BEGIN, SUMMARY_END};
pub use validate::{validate_case, ValidationReport, Violation};

/// Current version of the JSON interchange format.
pub const SCHEMA_VERSION: u32 = 1;

pub type Instant = DateTime<Utc>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct CaseId(pub String);

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CaseId {
    fn from(s: &str) -> Self {
        CaseId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct TranscriptId(pub String);

impl fmt::Display for TranscriptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Body temperature in °C, held at one decimal place.
///
/// Values with a finer resolution are rejected rather than rounded: NEWS2
/// temperature bands are one-decimal closed ranges, so rounding could move a
/// reading across a band edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(i32);

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("temperature {0} has more than one decimal place")]
pub struct TemperaturePrecisionError(pub f64);

impl Temperature {
    pub fn from_celsius(value: f64) -> Result<Self, TemperaturePrecisionError> {
        let tenths = (value * 10.0).round();
        if !value.is_finite() || (value * 10.0 - tenths).abs() > 1e-6 {
            return Err(TemperaturePrecisionError(value));
        }
        Ok(Temperature(tenths as i32))
    }

    pub const fn from_tenths(tenths: i32) -> Self {
        Temperature(tenths)
    }

    pub fn tenths(self) -> i32 {
        self.0
    }

    pub fn celsius(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = TemperaturePrecisionError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Temperature::from_celsius(value)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.celsius()
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.celsius())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum SpO2Scale {
    Scale1,
    /// Hypercapnic respiratory failure target range.
    Scale2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Consciousness {
    Alert,
    /// Includes new confusion.
    Confusion,
    Voice,
    Pain,
    Unresponsive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VitalSigns {
    pub timestamp: Instant,
    pub respiration_rate: u32,
    pub spo2: u32,
    pub on_supplemental_oxygen: bool,
    pub spo2_scale: SpO2Scale,
    pub systolic_bp: u32,
    pub heart_rate: u32,
    pub consciousness: Consciousness,
    #[schemars(with = "f64")]
    pub temperature: Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Sex {
    Female,
    Male,
    Other,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Demographics {
    pub age: u32,
    pub sex: Sex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LabResult {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub timestamp: Instant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MedicationOrder {
    pub name: String,
    pub dose: f64,
    pub dose_unit: String,
    pub route: String,
    pub frequency: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Housing {
    Stable,
    Unstable,
    Homeless,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum SubstanceUse {
    None,
    Active,
    InRecovery,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Insurance {
    Private,
    Medicare,
    Medicaid,
    Uninsured,
    Unknown,
}

/// Social determinants of health. "Not collected" is always an explicit
/// `Unknown`, never an absent field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Sdoh {
    pub housing: Housing,
    pub substance_use: SubstanceUse,
    pub insurance: Insurance,
    pub support: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PatientCase {
    pub case_id: CaseId,
    pub demographics: Demographics,
    pub chief_complaint: String,
    pub history: String,
    pub vitals: Vec<VitalSigns>,
    pub labs: Vec<LabResult>,
    pub medications: Vec<MedicationOrder>,
    #[serde(default)]
    pub current_plan: Option<String>,
    pub sdoh: Sdoh,
}

impl PatientCase {
    /// Most recent vitals observation at or before `as_of`.
    pub fn vitals_as_of(&self, as_of: Instant) -> Option<&VitalSigns> {
        self.vitals.iter().filter(|v| v.timestamp <= as_of).max_by_key(|v| v.timestamp)
    }

    pub fn latest_vitals(&self) -> Option<&VitalSigns> {
        self.vitals.iter().max_by_key(|v| v.timestamp)
    }

    /// Timestamp of the newest observation of any kind in the record.
    pub fn latest_timestamp(&self) -> Option<Instant> {
        self.vitals.iter().map(|v| v.timestamp).chain(self.labs.iter().map(|l| l.timestamp)).max()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed case document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion { found: u32 },
}

/// Versioned interchange wrapper: the case fields flattened next to
/// `schema_version`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CaseDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub case: PatientCase,
}

impl CaseDocument {
    pub fn new(case: PatientCase) -> Self {
        CaseDocument { schema_version: SCHEMA_VERSION, case }
    }

    pub fn from_json(text: &str) -> Result<PatientCase, DocumentError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(mut value: serde_json::Value) -> Result<PatientCase, DocumentError> {
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(DocumentError::UnsupportedVersion { found });
        }
        // `flatten` and `deny_unknown_fields` do not compose, so strip the
        // version key and decode the case strictly.
        if let Some(map) = value.as_object_mut() {
            map.remove("schema_version");
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json(case: &PatientCase) -> String {
        serde_json::to_string_pretty(&CaseDocument::new(case.clone())).expect("case documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DiagnosisItem {
    pub condition: String,
    pub reasoning: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum ClaimSubject {
    Vital,
    Lab,
    Medication,
    HistoryFact,
}

impl ClaimSubject {
    pub const ALL: [ClaimSubject; 4] =
        [ClaimSubject::Vital, ClaimSubject::Lab, ClaimSubject::Medication, ClaimSubject::HistoryFact];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimSubject::Vital => "Vital",
            ClaimSubject::Lab => "Lab",
            ClaimSubject::Medication => "Medication",
            ClaimSubject::HistoryFact => "HistoryFact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        ClaimSubject::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

/// A machine-checkable factual assertion made by an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Claim {
    pub subject: ClaimSubject,
    pub name: String,
    pub asserted_value: String,
    pub numeric_value: Option<f64>,
    pub source_role: AgentRole,
}

impl Claim {
    /// Builds a claim, deriving `numeric_value` from the leading number of
    /// `asserted_value` (so `"1250 mg"` carries `1250.0`).
    pub fn new(subject: ClaimSubject, name: &str, asserted_value: &str, source_role: AgentRole) -> Self {
        let asserted_value = asserted_value.trim().to_string();
        Claim {
            subject,
            name: name.trim().to_string(),
            numeric_value: leading_number(&asserted_value),
            asserted_value,
            source_role,
        }
    }
}

/// Parses a number at the start of `text`, optionally followed by a unit.
pub fn leading_number(text: &str) -> Option<f64> {
    let text = text.trim();
    let end = text
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || ((c == '-' || c == '+') && i == 0)))
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    text[..end].parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum AgentStatus {
    Ok,
    TimedOut,
    Malformed,
    BackendError,
}

/// The four headed sections of an agent's answer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StructuredResponse {
    pub assessment: String,
    /// Most likely first.
    pub differential: Vec<DiagnosisItem>,
    pub plan: Vec<String>,
    pub claims: Vec<Claim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AgentResponse {
    pub role: AgentRole,
    pub sections: StructuredResponse,
    pub latency_ms: u64,
    pub status: AgentStatus,
}

impl AgentResponse {
    pub fn is_ok(&self) -> bool {
        self.status == AgentStatus::Ok
    }

    pub fn failed(role: AgentRole, status: AgentStatus, latency_ms: u64) -> Self {
        AgentResponse { role, sections: StructuredResponse::default(), latency_ms, status }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum ConsultMode {
    TeamAssessment,
    CareGap,
    DifferentialDx,
    TreatmentPlan,
    AntibioticMgmt,
    PharmacyAssessment,
    SpecialistConsult,
    NavigatorExplain,
    DischargeSummary,
}

impl ConsultMode {
    pub const ALL: [ConsultMode; 9] = [
        ConsultMode::TeamAssessment,
        ConsultMode::CareGap,
        ConsultMode::DifferentialDx,
        ConsultMode::TreatmentPlan,
        ConsultMode::AntibioticMgmt,
        ConsultMode::PharmacyAssessment,
        ConsultMode::SpecialistConsult,
        ConsultMode::NavigatorExplain,
        ConsultMode::DischargeSummary,
    ];

    /// The six modes backed by a team template and followed by synthesis.
    pub const TEAM: [ConsultMode; 6] = [
        ConsultMode::TeamAssessment,
        ConsultMode::CareGap,
        ConsultMode::DifferentialDx,
        ConsultMode::TreatmentPlan,
        ConsultMode::AntibioticMgmt,
        ConsultMode::PharmacyAssessment,
    ];

    pub fn is_team_mode(self) -> bool {
        ConsultMode::TEAM.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConsultMode::TeamAssessment => "TeamAssessment",
            ConsultMode::CareGap => "CareGap",
            ConsultMode::DifferentialDx => "DifferentialDx",
            ConsultMode::TreatmentPlan => "TreatmentPlan",
            ConsultMode::AntibioticMgmt => "AntibioticMgmt",
            ConsultMode::PharmacyAssessment => "PharmacyAssessment",
            ConsultMode::SpecialistConsult => "SpecialistConsult",
            ConsultMode::NavigatorExplain => "NavigatorExplain",
            ConsultMode::DischargeSummary => "DischargeSummary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ConsultMode::ALL.into_iter().find(|m| m.as_str() == s.trim())
    }
}

impl fmt::Display for ConsultMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a team round produced no synthesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind")]
pub enum DegradedTeam {
    /// Fewer than two physician agents answered.
    InsufficientQuorum {
        ok_doctors: usize,
    },
    SynthesisFailed {
        detail: String,
    },
}

/// Full record of one consultation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Transcript {
    pub transcript_id: TranscriptId,
    pub case_id: CaseId,
    pub question: String,
    pub mode: ConsultMode,
    pub responses: Vec<AgentResponse>,
    pub synthesis: Option<SynthesisReport>,
    pub verification: Option<VerificationReport>,
    pub gap_report: Option<GapReport>,
    pub created_at: Instant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degraded: Option<DegradedTeam>,
    /// Transcript this one follows up on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<TranscriptId>,
}

impl Transcript {
    pub fn response(&self, role: &AgentRole) -> Option<&AgentResponse> {
        self.responses.iter().find(|r| &r.role == role)
    }

    pub fn ok_roles(&self) -> impl Iterator<Item = &AgentRole> {
        self.responses.iter().filter(|r| r.is_ok()).map(|r| &r.role)
    }
}
