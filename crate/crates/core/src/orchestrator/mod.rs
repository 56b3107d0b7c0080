//! The consultation pipeline: retrieve, fan out to the team, synthesize,
//! verify, and aggregate care gaps; plus the single-agent entry points.

mod consensus;
mod gaps;
mod report;
mod verify;

use std::collections::BTreeSet;
use std::fmt::Write;
use std::hash::Hasher;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use fnv::FnvHasher;
use futures::stream::{self, StreamExt};

use crate::domain::{
    sdoh_flags, validate_case, AgentResponse, AgentRole, AgentStatus, ConsultMode, DegradedTeam, Housing, Instant,
    PatientCase, SubstanceUse, SummaryError, Transcript, TranscriptId, ValidationReport,
};
use crate::gateway::{
    complete_with_retry, default_temperature, parse_structured, render_structured, AgentTask, CompletionRequest,
    GatewayError, SharedBackend,
};
use crate::rag::{RagError, RetrievedChunk, VectorStore};
use crate::registry::{build_patient_facing_prompt, build_user_prompt, AgentProfile, Registry, RegistryError};

pub use consensus::{
    mechanical_consensus, mechanical_divergence, parse_synthesis, DIVERGENCE_TOPIC, SYNTHESIS_HEADINGS,
};
pub use gaps::{aggregate_gaps, categorize, merge_gap_reports};
pub use report::{
    Barrier, BarrierSource, DischargeSummary, Divergence, FlagReason, GapCategory, GapFinding, GapReport,
    SynthesisReport, Verdict, VerificationFlag, VerificationReport,
};
pub use verify::{check_claim, normalize, verify};

pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub Instant);

impl Clock for FixedClock {
    fn now(&self) -> Instant {
        self.0
    }
}

pub trait IdSource: Send + Sync {
    fn next_id(&self, prefix: &str) -> String;
}

/// Reproducible ids: a hash of the seed and a counter.
#[derive(Debug, Default)]
pub struct SeededIds {
    seed: u64,
    counter: AtomicU64,
}

impl SeededIds {
    pub fn new(seed: u64) -> Self {
        SeededIds { seed, counter: AtomicU64::new(0) }
    }
}

impl IdSource for SeededIds {
    fn next_id(&self, prefix: &str) -> String {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write_u64(n);
        format!("{prefix}-{:016x}", h.finish())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    /// Maximum concurrent agent calls.
    pub parallelism: usize,
    pub agent_timeout_ms: u64,
    /// Reference chunks retrieved per consultation.
    pub retrieval_k: usize,
    pub max_tokens: u32,
    /// Feed the senior physician every Ok answer rather than only the
    /// physicians' answers.
    pub synthesis_sees_all_roles: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            parallelism: 5,
            agent_timeout_ms: 30_000,
            retrieval_k: 4,
            max_tokens: 1024,
            synthesis_sees_all_roles: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TeamSelector {
    /// The ten core sepsis agents.
    Core,
    Roles(Vec<AgentRole>),
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("case failed validation: {0:?}")]
    InvalidCase(ValidationReport),
    #[error("no agents available for this consultation")]
    NoAgentsAvailable,
    #[error("unknown agent role {0}")]
    UnknownRole(AgentRole),
    #[error("mode {0} is not a team consultation")]
    UnsupportedMode(ConsultMode),
    #[error("no consult specialist named {0:?}")]
    UnknownSpecialty(String),
    #[error("transcript has no synthesis")]
    MissingSynthesis,
    #[error("synthesis needs at least one Ok response")]
    NothingToSynthesize,
    #[error("senior physician synthesis failed: {0}")]
    SynthesisBackendFailure(String),
    #[error("{role} call failed: {source}")]
    AgentFailed { role: AgentRole, source: GatewayError },
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RagError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

pub struct Orchestrator {
    registry: Arc<Registry>,
    backend: SharedBackend,
    store: Option<Arc<VectorStore>>,
    config: OrchestratorConfig,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdSource>,
}

const SYNTHESIS_QUESTION: &str = "\
Synthesize the team responses below into one recommendation. Verify each fact against the case summary \
and screen for potential hallucinations. Answer under the headings FINAL DIAGNOSIS, CONSENSUS AND \
DIVERGENCE, CARE PLAN and NEXT STEPS, then list the facts you relied on under CLAIMS.";

const NAVIGATOR_QUESTION: &str = "\
Explain the care team's assessment and plan to the patient in understandable language.";

const DISCHARGE_QUESTION: &str = "\
Prepare a discharge planning summary. Answer under the headings DISCHARGE READINESS, BARRIERS, SERVICES \
and FOLLOW-UP, listing one item per line.";

impl Orchestrator {
    pub fn new(registry: Arc<Registry>, backend: SharedBackend) -> Self {
        Orchestrator {
            registry,
            backend,
            store: None,
            config: OrchestratorConfig::default(),
            clock: Arc::new(SystemClock),
            ids: Arc::new(SeededIds::new(rand_seed())),
        }
    }

    pub fn with_store(mut self, store: Arc<VectorStore>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_config(mut self, config: OrchestratorConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ids(mut self, ids: Arc<dyn IdSource>) -> Self {
        self.ids = ids;
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    /// Summary time: the clock, but never earlier than the record's newest
    /// observation.
    fn as_of(&self, case: &PatientCase) -> Instant {
        let now = self.clock.now();
        case.latest_timestamp().map_or(now, |t| t.max(now))
    }

    async fn retrieve(&self, text: &str) -> Result<Vec<RetrievedChunk>, OrchestratorError> {
        let Some(store) = &self.store else { return Ok(Vec::new()) };
        if store.is_empty() || text.trim().is_empty() {
            return Ok(Vec::new());
        }
        Ok(store.query(text, self.config.retrieval_k.max(1)).await?)
    }

    fn request(
        &self,
        role: &AgentRole,
        system: String,
        user: String,
        mode: ConsultMode,
        task: AgentTask,
    ) -> CompletionRequest {
        CompletionRequest {
            system_prompt: system,
            user_prompt: user,
            role: role.clone(),
            max_tokens: self.config.max_tokens,
            temperature: default_temperature(role),
            timeout_ms: self.config.agent_timeout_ms,
            request_id: self.ids.next_id("req"),
            mode,
            task,
        }
    }

    /// One call under the per-agent deadline (retry included).
    async fn call(&self, req: &CompletionRequest) -> Result<crate::gateway::Completion, GatewayError> {
        let budget = Duration::from_millis(req.timeout_ms);
        match tokio::time::timeout(budget, complete_with_retry(self.backend.as_ref(), req)).await {
            Ok(result) => result,
            Err(_) => Err(GatewayError::Timeout(req.timeout_ms)),
        }
    }

    async fn ask_agent(&self, req: CompletionRequest) -> AgentResponse {
        match self.call(&req).await {
            Ok(c) => {
                let (sections, status) = parse_structured(&c.text, &req.role);
                AgentResponse { role: req.role, sections, latency_ms: c.latency_ms, status }
            }
            Err(e) => {
                tracing::warn!(role = %req.role, error = %e, "agent call failed");
                let (status, latency) = match e {
                    GatewayError::Timeout(ms) => (AgentStatus::TimedOut, ms),
                    GatewayError::MalformedResponse(_) => (AgentStatus::Malformed, 0),
                    _ => (AgentStatus::BackendError, 0),
                };
                AgentResponse::failed(req.role, status, latency)
            }
        }
    }

    fn select_team(&self, team: &TeamSelector) -> Result<Vec<&AgentProfile>, OrchestratorError> {
        let profiles = match team {
            TeamSelector::Core => self.registry.core_team(),
            TeamSelector::Roles(roles) => {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for role in roles {
                    let p = self.registry.profile(role).ok_or_else(|| OrchestratorError::UnknownRole(role.clone()))?;
                    if seen.insert(role.clone()) {
                        out.push(p);
                    }
                }
                out
            }
        };
        if profiles.is_empty() {
            return Err(OrchestratorError::NoAgentsAvailable);
        }
        Ok(profiles)
    }

    /// Runs one team round. Per-agent failures are recorded in the
    /// transcript; synthesis needs at least two Ok physician answers.
    pub async fn run_consultation(
        &self,
        case: &PatientCase,
        question: &str,
        mode: ConsultMode,
        team: &TeamSelector,
    ) -> Result<Transcript, OrchestratorError> {
        let report = validate_case(case);
        if !report.is_valid() {
            return Err(OrchestratorError::InvalidCase(report));
        }
        if !mode.is_team_mode() {
            return Err(OrchestratorError::UnsupportedMode(mode));
        }
        let profiles = self.select_team(team)?;
        let template = self.registry.instantiate_template(mode.as_str(), case)?;
        let full_question =
            if question.trim().is_empty() { template.clone() } else { format!("{template}\n\n{}", question.trim()) };
        let as_of = self.as_of(case);
        let retrieval_text =
            format!("{} {} {}", case.chief_complaint, question, self.registry.template(mode.as_str())?.title);
        let context = self.retrieve(&retrieval_text).await?;
        let user_prompt = build_user_prompt(case, &full_question, &context, as_of)?;

        let mut requests = Vec::with_capacity(profiles.len());
        for p in &profiles {
            let system = self.registry.system_prompt(p)?;
            requests.push(self.request(&p.role, system, user_prompt.clone(), mode, AgentTask::Respond));
        }
        let responses: Vec<AgentResponse> = stream::iter(requests)
            .map(|req| self.ask_agent(req))
            .buffered(self.config.parallelism.max(1))
            .collect()
            .await;

        let ok_doctors = responses.iter().filter(|r| r.is_ok() && r.role.is_physician()).count();
        let (synthesis, degraded) = if ok_doctors < 2 {
            (None, Some(DegradedTeam::InsufficientQuorum { ok_doctors }))
        } else {
            match self.synthesize(case, mode, &responses, &context, as_of).await {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(DegradedTeam::SynthesisFailed { detail: e.to_string() })),
            }
        };
        let verification = verify(synthesis.as_ref(), &responses, case, &context);
        let gap_report = (mode == ConsultMode::CareGap).then(|| aggregate_gaps(&responses));
        Ok(Transcript {
            transcript_id: TranscriptId(self.ids.next_id("tr")),
            case_id: case.case_id.clone(),
            question: question.to_string(),
            mode,
            responses,
            synthesis,
            verification: Some(verification),
            gap_report,
            created_at: self.clock.now(),
            degraded,
            parent: None,
        })
    }

    /// Asks the senior physician to merge the Ok answers, then backs the
    /// consensus and divergence with the mechanical computation.
    pub async fn synthesize(
        &self,
        case: &PatientCase,
        mode: ConsultMode,
        responses: &[AgentResponse],
        context: &[RetrievedChunk],
        as_of: Instant,
    ) -> Result<SynthesisReport, OrchestratorError> {
        let included: Vec<&AgentResponse> = responses
            .iter()
            .filter(|r| r.is_ok() && (self.config.synthesis_sees_all_roles || r.role.is_physician()))
            .collect();
        if included.is_empty() {
            return Err(OrchestratorError::NothingToSynthesize);
        }
        let mut user = build_user_prompt(case, SYNTHESIS_QUESTION, context, as_of)?;
        user.push_str("\nTEAM RESPONSES:\n");
        for r in &included {
            let _ = write!(user, "--- {} ---\n{}", r.role, render_structured(&r.sections));
        }
        let senior = self.registry.profile(&AgentRole::SeniorPhysician).ok_or(OrchestratorError::NoAgentsAvailable)?;
        let system = self.registry.system_prompt(senior)?;
        let req = self.request(&senior.role, system, user, mode, AgentTask::Synthesize);
        let completion =
            self.call(&req).await.map_err(|e| OrchestratorError::SynthesisBackendFailure(e.to_string()))?;

        let doctors: Vec<&AgentResponse> = included.iter().copied().filter(|r| r.role.is_physician()).collect();
        // With no physician answer at all, fall back to whoever answered.
        let basis = if doctors.is_empty() { included.clone() } else { doctors };
        let contributing = included.iter().map(|r| r.role.clone()).collect();
        parse_synthesis(&completion.text, &basis, contributing)
            .ok_or_else(|| OrchestratorError::SynthesisBackendFailure("answer has no FINAL DIAGNOSIS section".into()))
    }

    /// A single grounded call to one consult specialist; no synthesis.
    pub async fn consult_specialist(
        &self,
        specialty: &str,
        case: &PatientCase,
        question: &str,
    ) -> Result<Transcript, OrchestratorError> {
        let report = validate_case(case);
        if !report.is_valid() {
            return Err(OrchestratorError::InvalidCase(report));
        }
        let profile = self
            .registry
            .specialist(specialty)
            .ok_or_else(|| OrchestratorError::UnknownSpecialty(specialty.to_string()))?;
        let as_of = self.as_of(case);
        let context = self.retrieve(&format!("{} {} {question}", profile.display_name, case.chief_complaint)).await?;
        let q = if question.trim().is_empty() {
            format!("Provide a {} consult on this patient.", profile.display_name)
        } else {
            question.trim().to_string()
        };
        let user = build_user_prompt(case, &q, &context, as_of)?;
        let system = self.registry.system_prompt(profile)?;
        let response = self
            .ask_agent(self.request(&profile.role, system, user, ConsultMode::SpecialistConsult, AgentTask::Respond))
            .await;
        let responses = vec![response];
        let verification = verify(None, &responses, case, &context);
        Ok(Transcript {
            transcript_id: TranscriptId(self.ids.next_id("tr")),
            case_id: case.case_id.clone(),
            question: question.to_string(),
            mode: ConsultMode::SpecialistConsult,
            responses,
            synthesis: None,
            verification: Some(verification),
            gap_report: None,
            created_at: self.clock.now(),
            degraded: None,
            parent: None,
        })
    }

    async fn support_call(
        &self,
        role: AgentRole,
        case: &PatientCase,
        synthesis: &SynthesisReport,
        question: &str,
        mode: ConsultMode,
        patient_facing: bool,
    ) -> Result<String, OrchestratorError> {
        let profile = self.registry.profile(&role).ok_or(OrchestratorError::NoAgentsAvailable)?;
        let system = if patient_facing {
            build_patient_facing_prompt(profile, self.registry.shared_goals())
                .map_err(|e| RegistryError::UnresolvedSlot { role: role.clone(), slot: e.0 })?
        } else {
            self.registry.system_prompt(profile)?
        };
        let mut user = build_user_prompt(case, question, &[], self.as_of(case))?;
        user.push_str("\nTEAM SYNTHESIS:\n");
        user.push_str(&render_synthesis(synthesis));
        let req = self.request(&role, system, user, mode, AgentTask::Respond);
        self.call(&req).await.map(|c| c.text).map_err(|source| OrchestratorError::AgentFailed { role, source })
    }

    /// Plain-language explanation of a transcript's synthesis for the patient.
    pub async fn navigator_explain(
        &self,
        case: &PatientCase,
        transcript: &Transcript,
    ) -> Result<String, OrchestratorError> {
        let synthesis = transcript.synthesis.as_ref().ok_or(OrchestratorError::MissingSynthesis)?;
        let text = self
            .support_call(
                AgentRole::PatientNavigator,
                case,
                synthesis,
                NAVIGATOR_QUESTION,
                ConsultMode::NavigatorExplain,
                true,
            )
            .await?;
        Ok(strip_claim_lines(&text))
    }

    /// Discharge planning over the most recent synthesized transcript, with
    /// housing and active substance use always listed as barriers.
    pub async fn discharge_summary(
        &self,
        case: &PatientCase,
        transcripts: &[Transcript],
    ) -> Result<DischargeSummary, OrchestratorError> {
        let synthesis = transcripts
            .iter()
            .filter_map(|t| t.synthesis.as_ref().map(|s| (t.created_at, s)))
            .max_by_key(|(at, _)| *at)
            .map(|(_, s)| s)
            .ok_or(OrchestratorError::MissingSynthesis)?;
        let text = self
            .support_call(
                AgentRole::CaseManager,
                case,
                synthesis,
                DISCHARGE_QUESTION,
                ConsultMode::DischargeSummary,
                false,
            )
            .await?;
        Ok(with_sdoh_barriers(case, &text))
    }
}

fn rand_seed() -> u64 {
    let mut h = FnvHasher::default();
    h.write_u128(Utc::now().timestamp_nanos_opt().unwrap_or_default() as u128);
    h.write_u32(std::process::id());
    h.finish()
}

/// Text form of a synthesis used in follow-on prompts.
pub fn render_synthesis(s: &SynthesisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "FINAL DIAGNOSIS: {}", s.final_diagnosis);
    let _ = writeln!(out, "CONSENSUS AND DIVERGENCE:");
    for c in &s.consensus {
        let _ = writeln!(out, "- Consensus: {c}");
    }
    for d in &s.divergence {
        let positions: Vec<String> = d.positions.iter().map(|(r, p)| format!("{r}: {p}")).collect();
        let _ = writeln!(out, "- Divergence on {}: {}", d.topic, positions.join("; "));
    }
    let _ = writeln!(out, "CARE PLAN:");
    for p in &s.care_plan {
        let _ = writeln!(out, "- {p}");
    }
    let _ = writeln!(out, "NEXT STEPS:");
    for p in &s.next_steps {
        let _ = writeln!(out, "- {p}");
    }
    out
}

/// Removes any `CLAIM:` lines and a bare `CLAIMS` heading.
pub fn strip_claim_lines(text: &str) -> String {
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| {
            let t = l.trim_start().to_ascii_uppercase();
            !(t.starts_with("CLAIM:") || t.trim_end() == "CLAIMS:" || t.trim_end() == "CLAIMS")
        })
        .collect();
    let mut out = kept.join("\n").trim_end().to_string();
    out.push('\n');
    out
}

fn sdoh_barriers(case: &PatientCase) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if case.sdoh.housing != Housing::Stable {
        let text = match case.sdoh.housing {
            Housing::Homeless => {
                "Housing: homelessness; arrange shelter, medical respite or supportive housing before discharge"
            }
            Housing::Unstable => "Housing: unstable housing; confirm a safe discharge destination",
            _ => "Housing: not assessed; confirm a safe discharge destination",
        };
        out.push(("housing", text.to_string()));
    }
    if case.sdoh.substance_use == SubstanceUse::Active {
        out.push((
            "substance",
            "Substance use: active; offer addiction medicine consult and linkage to treatment".to_string(),
        ));
    }
    out
}

fn with_sdoh_barriers(case: &PatientCase, agent_text: &str) -> DischargeSummary {
    let sections =
        crate::gateway::split_sections(agent_text, &["BARRIERS", "SERVICES", "FOLLOW-UP", "DISCHARGE READINESS"]);
    let mut barriers: Vec<Barrier> = sections
        .get("BARRIERS")
        .into_iter()
        .flatten()
        .map(|l| crate::gateway::strip_list_marker(l).trim().to_string())
        .filter(|l| !l.is_empty())
        .map(|description| Barrier { description, source: BarrierSource::Agent })
        .collect();
    let mut added = Vec::new();
    for (keyword, text) in sdoh_barriers(case) {
        if !barriers.iter().any(|b| b.description.to_lowercase().contains(keyword)) {
            added.push(text.clone());
            barriers.push(Barrier { description: text, source: BarrierSource::Sdoh });
        }
    }
    let mut text = agent_text.trim_end().to_string();
    if !added.is_empty() {
        text.push_str("\n\nBARRIERS FROM SOCIAL HISTORY:\n");
        for a in &added {
            let _ = writeln!(text, "- {a}");
        }
    }
    let flags = sdoh_flags(case);
    if !flags.is_empty() {
        let _ = write!(text, "\nSDOH FLAGS: {}\n", flags.join(", "));
    }
    if !text.ends_with('\n') {
        text.push('\n');
    }
    DischargeSummary { text, barriers }
}
