//! Deterministic stand-in for a language model.
//!
//! Each rule is a response template keyed by (role, mode, task). Slots in
//! the template are filled with values read back out of the case summary in
//! the user prompt, so the answers track whatever case is being discussed.
//! A script may carry one fault aimed at one role.

mod facts;
mod script;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;
use std::time::Duration;

use async_trait::async_trait;
use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

pub use facts::{CaseFacts, LabFact, MedFact};

use super::{AgentTask, Completion, CompletionBackend, CompletionRequest, GatewayError};
use crate::domain::{leading_number, AgentRole, ClaimSubject, ConsultMode};
use crate::news::{compute_news, recommendation, RiskBand};
use crate::registry::fill_slots;

/// Rule key. `role` is the role's string form, or `Specialist:*` for any
/// consult specialist.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MockKey {
    pub role: String,
    pub mode: ConsultMode,
    pub task: AgentTask,
}

impl MockKey {
    pub const ANY_SPECIALIST: &'static str = "Specialist:*";

    pub fn new(role: &AgentRole, mode: ConsultMode, task: AgentTask) -> Self {
        MockKey { role: role.to_string(), mode, task }
    }

    pub fn any_specialist(mode: ConsultMode, task: AgentTask) -> Self {
        MockKey { role: Self::ANY_SPECIALIST.to_string(), mode, task }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fault {
    /// Shift the claimed value of the matching claim by `delta`. With no
    /// `name`, the first claim of `subject` is altered; a named claim the
    /// agent would not otherwise make is appended.
    FabricateValue { subject: ClaimSubject, name: Option<String>, delta: f64 },
    /// Never answer; the call fails once `timeout_ms` has elapsed.
    Timeout,
    /// Answer in prose without any section headings.
    MalformedOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub target: AgentRole,
    pub fault: Fault,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad fault spec {0:?}: expected timeout@ROLE, malformed@ROLE or fabricate:SUBJECT:NAME:DELTA@ROLE")]
pub struct ParseFaultError(String);

impl FromStr for FaultInjection {
    type Err = ParseFaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFaultError(s.to_string());
        let (kind, role) = s.rsplit_once('@').ok_or_else(err)?;
        let target: AgentRole = role.parse().map_err(|_| err())?;
        let fault = match kind {
            "timeout" => Fault::Timeout,
            "malformed" => Fault::MalformedOutput,
            _ => {
                let rest = kind.strip_prefix("fabricate:").ok_or_else(err)?;
                let parts: Vec<&str> = rest.split(':').collect();
                let [subject, name, delta] = parts[..] else { return Err(err()) };
                Fault::FabricateValue {
                    subject: ClaimSubject::parse(subject).ok_or_else(err)?,
                    name: Some(name.trim()).filter(|n| !n.is_empty()).map(str::to_string),
                    delta: delta.parse().map_err(|_| err())?,
                }
            }
        };
        Ok(FaultInjection { target, fault })
    }
}

impl fmt::Display for FaultInjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.fault {
            Fault::Timeout => write!(f, "timeout@{}", self.target),
            Fault::MalformedOutput => write!(f, "malformed@{}", self.target),
            Fault::FabricateValue { subject, name, delta } => {
                write!(f, "fabricate:{}:{}:{delta}@{}", subject.as_str(), name.as_deref().unwrap_or(""), self.target)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockScript {
    pub rules: BTreeMap<MockKey, String>,
    pub fault_injection: Option<FaultInjection>,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript { rules: script::default_rules(), fault_injection: None }
    }
}

impl MockScript {
    pub fn with_fault(mut self, fault: FaultInjection) -> Self {
        self.fault_injection = Some(fault);
        self
    }

    pub fn set_rule(&mut self, key: MockKey, template: &str) {
        self.rules.insert(key, template.to_string());
    }

    pub fn rule_for(&self, role: &AgentRole, mode: ConsultMode, task: AgentTask) -> Option<&str> {
        if let Some(t) = self.rules.get(&MockKey::new(role, mode, task)) {
            return Some(t);
        }
        match role {
            AgentRole::Specialist(_) => self.rules.get(&MockKey::any_specialist(mode, task)).map(String::as_str),
            _ => None,
        }
    }

    fn fault_for(&self, role: &AgentRole) -> Option<&Fault> {
        self.fault_injection.as_ref().filter(|f| &f.target == role).map(|f| &f.fault)
    }
}

const MALFORMED_TEXT: &str = "Honestly the patient seems unwell and probably needs more tests and some antibiotics.";

/// The mock is a pure function of (request, script, seed). The reported
/// latency is derived from the seed; actual sleeping is opt-in.
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    seed: u64,
    simulate_latency: bool,
}

impl MockBackend {
    pub fn new(script: MockScript, seed: u64) -> Self {
        MockBackend { script, seed, simulate_latency: false }
    }

    /// Sleep for the reported latency before answering.
    pub fn with_simulated_latency(mut self, on: bool) -> Self {
        self.simulate_latency = on;
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn latency_ms(&self, req: &CompletionRequest) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write(req.role.to_string().as_bytes());
        h.write(req.mode.as_str().as_bytes());
        h.write_u8(req.task as u8);
        250 + h.finish() % 1750
    }

    /// The response text for `req`, ignoring timing faults.
    pub fn render(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        let template =
            self.script.rule_for(&req.role, req.mode, req.task).ok_or_else(|| GatewayError::BackendError {
                status: Some(404),
                message: format!("mock script has no rule for {} / {} / {:?}", req.role, req.mode, req.task),
            })?;
        let fault = self.script.fault_for(&req.role);
        if fault == Some(&Fault::MalformedOutput) {
            return Ok(MALFORMED_TEXT.to_string());
        }
        let facts = CaseFacts::from_prompt(&req.user_prompt);
        let mut claims = record_claims(&req.role, &facts);
        if let Some(Fault::FabricateValue { subject, name, delta }) = fault {
            fabricate(&mut claims, *subject, name.as_deref(), *delta);
        }
        let claim_lines =
            claims.iter().map(|(s, n, v)| format!("CLAIM: {}|{n}|{v}", s.as_str())).collect::<Vec<_>>().join("\n");
        let slots = slot_values(&req.role, &facts, &claim_lines);
        let mut text = fill_slots(template, |s| slots.get(s).cloned()).map_err(|e| GatewayError::BackendError {
            status: Some(500),
            message: format!("mock template slot {{{}}} has no value", e.0),
        })?;
        if matches!(fault, Some(Fault::FabricateValue { .. })) && !template.contains("{claims}") {
            text.push_str("\nCLAIMS:\n");
            text.push_str(&claim_lines);
            text.push('\n');
        }
        Ok(text)
    }
}

#[async_trait]
impl CompletionBackend for MockBackend {
    async fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        if self.script.fault_for(&req.role) == Some(&Fault::Timeout) {
            tokio::time::sleep(Duration::from_millis(req.timeout_ms + 1)).await;
            return Err(GatewayError::Timeout(req.timeout_ms));
        }
        let latency_ms = self.latency_ms(req);
        if self.simulate_latency {
            if latency_ms > req.timeout_ms {
                tokio::time::sleep(Duration::from_millis(req.timeout_ms)).await;
                return Err(GatewayError::Timeout(req.timeout_ms));
            }
            tokio::time::sleep(Duration::from_millis(latency_ms)).await;
        }
        Ok(Completion { text: self.render(req)?, latency_ms })
    }
}

type ClaimTriple = (ClaimSubject, String, String);

/// Claims an agent makes when echoing the record faithfully.
fn record_claims(role: &AgentRole, f: &CaseFacts) -> Vec<ClaimTriple> {
    let mut out: Vec<ClaimTriple> = Vec::new();
    let mut vital = |name: &str| {
        if let Some(v) = f.vitals.get(name) {
            out.push((ClaimSubject::Vital, name.to_string(), v.clone()));
        }
    };
    vital("heart_rate");
    vital("temperature");
    if *role == AgentRole::RiskPrediction {
        vital("respiration_rate");
        vital("spo2");
        vital("systolic_bp");
    }
    if let Some(lab) = f.key_lab() {
        out.push((ClaimSubject::Lab, lab.name.clone(), format!("{} {}", lab.value, lab.unit).trim().to_string()));
    }
    if *role == AgentRole::Pharmacist {
        if let Some(cr) = f.lab("creatinine").filter(|l| Some(*l) != f.key_lab()) {
            out.push((ClaimSubject::Lab, cr.name.clone(), format!("{} {}", cr.value, cr.unit)));
        }
    }
    if let Some(med) = f.medications.first() {
        out.push((ClaimSubject::Medication, med.name.clone(), format!("{} {}", med.dose, med.unit)));
    }
    let history = f.history_first_sentence();
    if !history.is_empty() {
        out.push((ClaimSubject::HistoryFact, "history".into(), history));
    }
    out
}

fn fabricate(claims: &mut Vec<ClaimTriple>, subject: ClaimSubject, name: Option<&str>, delta: f64) {
    let target =
        claims.iter_mut().find(|(s, n, _)| *s == subject && name.is_none_or(|want| n.eq_ignore_ascii_case(want)));
    match target {
        Some((_, _, value)) => *value = shift_value(value, delta),
        None => {
            let value = match subject {
                ClaimSubject::HistoryFact => "Prior aortic valve replacement".to_string(),
                _ => format_number(delta),
            };
            claims.push((subject, name.unwrap_or("fabricated").to_string(), value));
        }
    }
}

/// Adds `delta` to the number at the start of `value`, keeping any unit.
/// Values without a leading number (history facts) are replaced outright.
pub(crate) fn shift_value(value: &str, delta: f64) -> String {
    let Some(n) = leading_number(value) else {
        return "Prior aortic valve replacement".to_string();
    };
    let end = value
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || ((c == '-' || c == '+') && i == 0)))
        .map(|(i, _)| i)
        .unwrap_or(value.len());
    format!("{}{}", format_number(n + delta), &value[end..])
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn band_label(band: RiskBand) -> &'static str {
    match band {
        RiskBand::Low => "low",
        RiskBand::LowMedium => "low-medium",
        RiskBand::Medium => "medium",
        RiskBand::High => "high",
    }
}

/// Leading and alternative diagnosis suggested by the presenting story.
fn working_diagnoses(f: &CaseFacts) -> (&'static str, &'static str) {
    let text = format!("{} {}", f.chief_complaint, f.history).to_lowercase();
    let any = |words: &[&str]| words.iter().any(|w| text.contains(w));
    if any(&["injection drug", "murmur", "endocarditis"]) {
        ("Infective endocarditis with septic pulmonary emboli", "Community-acquired pneumonia with sepsis")
    } else if any(&["cough", "pneumonia", "sputum"]) {
        ("Community-acquired pneumonia with sepsis", "Urinary tract infection with sepsis")
    } else if any(&["urin", "dysuria", "flank"]) {
        ("Urosepsis from pyelonephritis", "Intra-abdominal infection")
    } else {
        ("Sepsis of unclear source", "Viral syndrome")
    }
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Most frequent top-ranked diagnosis among the team's answers, earliest
/// on ties.
fn team_diagnosis(f: &CaseFacts) -> Option<String> {
    let tops: Vec<&str> =
        f.team.iter().filter_map(|(_, r)| r.differential.first()).map(|d| d.condition.as_str()).collect();
    let count = |c: &str| tops.iter().filter(|t| t.eq_ignore_ascii_case(c)).count();
    let best = tops.iter().map(|t| count(t)).max()?;
    tops.iter().find(|t| count(t) == best).map(|t| t.to_string())
}

fn team_plan(f: &CaseFacts) -> String {
    let mut items: Vec<&str> = Vec::new();
    for (_, r) in &f.team {
        if let Some(p) = r.plan.first() {
            if !items.iter().any(|i| i.eq_ignore_ascii_case(p)) {
                items.push(p);
            }
        }
    }
    if items.is_empty() {
        return "- Continue the current plan".into();
    }
    items.iter().take(6).map(|i| format!("- {i}")).collect::<Vec<_>>().join("\n")
}

fn slot_values(role: &AgentRole, f: &CaseFacts, claims: &str) -> BTreeMap<&'static str, String> {
    let (leading, alt) = working_diagnoses(f);
    let news = f.vital_signs().map(|v| compute_news(&v));
    let key_lab = f.key_lab();
    let med = f.medications.first();
    let team_dx = team_diagnosis(f).unwrap_or_else(|| leading.to_string());
    let final_dx = f.final_diagnosis.clone().unwrap_or_else(|| team_dx.clone());
    let specialty = match role {
        AgentRole::Specialist(s) => s.clone(),
        other => other.to_string(),
    };
    let flags = f.sdoh.get("flags").cloned().unwrap_or_else(|| "none".into());

    let mut m = BTreeMap::new();
    m.insert("case_id", f.case_id.clone());
    m.insert("patient", if f.patient.is_empty() { "Patient".into() } else { f.patient.clone() });
    m.insert("cc_lower", lower_first(&f.chief_complaint));
    m.insert("hr", f.vital("heart_rate").to_string());
    m.insert("temp", f.vital("temperature").to_string());
    m.insert("rr", f.vital("respiration_rate").to_string());
    m.insert("sbp", f.vital("systolic_bp").to_string());
    m.insert("spo2", f.vital("spo2").to_string());
    m.insert("spo2_detail", f.spo2_detail.clone());
    m.insert("key_lab_name", key_lab.map(|l| l.name.clone()).unwrap_or_else(|| "no lab".into()));
    m.insert(
        "key_lab_value",
        key_lab.map(|l| format!("{} {}", l.value, l.unit).trim().to_string()).unwrap_or_else(|| "pending".into()),
    );
    m.insert("first_med", med.map(|x| x.name.clone()).unwrap_or_else(|| "empiric antibiotics".into()));
    m.insert("first_med_dose", med.map(|x| format!("{} {}", x.dose, x.unit)).unwrap_or_default());
    m.insert("news_total", news.as_ref().map(|n| n.total.to_string()).unwrap_or_else(|| "unknown".into()));
    m.insert("news_band", news.as_ref().map(|n| band_label(n.band)).unwrap_or("unknown").to_string());
    m.insert(
        "news_response",
        news.as_ref()
            .map(|n| recommendation(n.band).to_string())
            .unwrap_or_else(|| "Record a full set of observations".into()),
    );
    m.insert("leading_dx", leading.to_string());
    m.insert("leading_dx_lower", lower_first(leading));
    m.insert("alt_dx", alt.to_string());
    m.insert("housing", f.sdoh_value("housing").to_string());
    m.insert("substance_use", f.sdoh_value("substance_use").to_string());
    m.insert("insurance", f.sdoh_value("insurance").to_string());
    m.insert("support", f.sdoh_value("support").to_string());
    m.insert("sdoh_flags", flags);
    m.insert("question", f.question.clone());
    m.insert("specialty_lower", specialty.to_lowercase());
    m.insert("specialty", specialty);
    m.insert("team_dx", team_dx);
    m.insert("team_plan", team_plan(f));
    m.insert("final_dx_lower", lower_first(&final_dx));
    m.insert("claims", claims.to_string());
    m
}
