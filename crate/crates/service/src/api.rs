//! HTTP surface under `/api/v1`.

use std::collections::BTreeMap;

use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use schemars::{schema_for, JsonSchema};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use matec_core::domain::{AgentStatus, CaseDocument, CaseId, ConsultMode, Instant, TranscriptId, VitalSigns};
use matec_core::news::{compute_news, recommendation, MonitorAlert, NewsResult};
use matec_core::orchestrator::{merge_gap_reports, render_synthesis, DischargeSummary, GapReport};
use matec_core::rag::{RagError, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use matec_core::registry::{PromptTemplate, ReasoningStyle, Team};
use matec_core::stats::{summarize_survey, wilcoxon_one_sample, StatsError, SurveySummary, TestResult};
use matec_core::{AgentRole, TeamSelector, Transcript};

use crate::problem::{ApiError, Problem};
use crate::state::AppState;
use crate::store::{ConsultationStatus, ConsultationView, StoreError, Submission};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct ApiPath<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct ApiQuery<T>(pub T);

type ApiResult<T> = Result<T, ApiError>;

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::CaseNotFound(id) => ApiError::not_found("CaseNotFound", format!("case {id}")),
            StoreError::ConsultationNotFound(id) => {
                ApiError::not_found("ConsultationNotFound", format!("consultation {id}"))
            }
            StoreError::CaseExists(_) => ApiError::new(StatusCode::CONFLICT, "CaseExists", msg),
            StoreError::AlreadyFinished(_) => ApiError::new(StatusCode::CONFLICT, "AlreadyFinished", msg),
            StoreError::Invalid(report) => ApiError::unprocessable("ValidationFailed", msg).detail(report),
            StoreError::Log(_) | StoreError::Encode(_) | StoreError::Decode { .. } => {
                tracing::error!(error = %msg, "persistence failure");
                ApiError::internal(msg)
            }
        }
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        let msg = e.to_string();
        match e {
            RagError::EmptyDocument | RagError::BadChunkParams { .. } | RagError::BadK => {
                ApiError::unprocessable("InvalidDocument", msg)
            }
            RagError::EmptyStore => ApiError::unprocessable("EmptyStore", msg),
            RagError::Embed(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "EmbeddingUnavailable", msg),
            RagError::Persist(_) => ApiError::internal(msg),
        }
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> Self {
        let code = match e {
            StatsError::EmptySample => "EmptySample",
            StatsError::AllZeroDifferences => "AllZeroDifferences",
            StatsError::EmptyQuestion(_) => "EmptyQuestion",
            StatsError::RatingOutOfRange { .. } => "RatingOutOfRange",
            StatsError::Input(_) => "InvalidInput",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CaseCreated {
    pub case_id: CaseId,
    #[serde(default)]
    pub unit_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CaseResponse {
    #[serde(default)]
    pub unit_id: Option<String>,
    pub case: CaseDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CaseListing {
    pub case_id: CaseId,
    #[serde(default)]
    pub unit_id: Option<String>,
    pub vitals: usize,
    pub transcripts: usize,
}

#[derive(Debug, Deserialize)]
pub struct UnitQuery {
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VitalsRequest {
    pub vitals: Vec<VitalSigns>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VitalsAppended {
    pub case_id: CaseId,
    pub observations: usize,
    pub latest: NewsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ConsultationRequest {
    pub case_id: CaseId,
    /// Free-text question, appended to the template when both are given.
    #[serde(default)]
    pub question: Option<String>,
    /// One of the catalog's template ids; it also fixes the mode.
    #[serde(default)]
    pub template_id: Option<String>,
    #[serde(default)]
    pub mode: Option<ConsultMode>,
    /// Role names to consult; the core team when absent.
    #[serde(default)]
    pub team: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FollowupRequest {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ConsultationAccepted {
    pub transcript_id: TranscriptId,
    pub status: ConsultationStatus,
    /// Where to poll.
    pub location: String,
    /// False when an idempotency key matched an earlier submission.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SpecialistRequest {
    pub case_id: CaseId,
    pub specialty: String,
    #[serde(default)]
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AgentSummary {
    pub role: AgentRole,
    pub display_name: String,
    pub team: Team,
    pub reasoning_style: ReasoningStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RiskRequest {
    pub case_id: CaseId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RiskEvaluation {
    pub case_id: CaseId,
    pub observed_at: Instant,
    pub news: NewsResult,
    pub recommendation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocumentRequest {
    #[serde(default)]
    pub doc_id: Option<String>,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocumentIngested {
    pub doc_id: String,
    pub chunks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DigestSource {
    pub case_id: CaseId,
    /// The case's latest care-gap consultation, if it has one.
    #[serde(default)]
    pub transcript_id: Option<TranscriptId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GapDigest {
    pub unit_id: String,
    pub sources: Vec<DigestSource>,
    pub report: GapReport,
    pub recipients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NavigatorExplanation {
    pub transcript_id: TranscriptId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WilcoxonRequest {
    pub samples: Vec<f64>,
    #[serde(default = "neutral")]
    pub mu: f64,
}

fn neutral() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SurveyRequest {
    pub responses: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Health {
    pub status: String,
    pub cases: usize,
    pub consultations: usize,
    pub reference_chunks: usize,
}

/// Published JSON Schemas for every response body, keyed by type name.
pub fn published_schemas() -> BTreeMap<&'static str, Value> {
    fn s<T: JsonSchema>() -> Value {
        serde_json::to_value(schema_for!(T)).expect("schemas serialize")
    }
    BTreeMap::from([
        ("AgentSummaryList", s::<Vec<AgentSummary>>()),
        ("CaseCreated", s::<CaseCreated>()),
        ("CaseListingList", s::<Vec<CaseListing>>()),
        ("CaseResponse", s::<CaseResponse>()),
        ("ConsultationAccepted", s::<ConsultationAccepted>()),
        ("ConsultationView", s::<ConsultationView>()),
        ("DischargeSummary", s::<DischargeSummary>()),
        ("DocumentIngested", s::<DocumentIngested>()),
        ("GapDigest", s::<GapDigest>()),
        ("Health", s::<Health>()),
        ("MonitorAlertList", s::<Vec<MonitorAlert>>()),
        ("NavigatorExplanation", s::<NavigatorExplanation>()),
        ("Problem", s::<Problem>()),
        ("PromptTemplateList", s::<Vec<PromptTemplate>>()),
        ("RiskEvaluation", s::<RiskEvaluation>()),
        ("SurveySummary", s::<SurveySummary>()),
        ("TestResult", s::<TestResult<f64>>()),
        ("Transcript", s::<Transcript>()),
        ("VitalsAppended", s::<VitalsAppended>()),
    ])
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/cases", post(create_case).get(list_cases))
        .route("/cases/{case_id}", get(get_case))
        .route("/cases/{case_id}/vitals", post(append_vitals))
        .route("/cases/{case_id}/discharge-summary", post(discharge_summary))
        .route("/consultations", post(submit_consultation))
        .route("/consultations/{id}", get(get_consultation))
        .route("/consultations/{id}/followup", post(followup))
        .route("/consultations/{id}/navigator", post(navigator))
        .route("/specialist-consults", post(specialist_consult))
        .route("/templates", get(templates))
        .route("/agents", get(agents))
        .route("/risk/evaluate", post(risk_evaluate))
        .route("/risk/{case_id}/alerts", get(alerts))
        .route("/documents", post(ingest_document))
        .route("/units/{unit_id}/gap-digest", get(gap_digest))
        .route("/stats/wilcoxon", post(wilcoxon))
        .route("/stats/survey", post(survey))
        .route("/schemas", get(schemas));
    Router::new().nest("/api/v1", api).fallback(no_route).with_state(state)
}

async fn no_route() -> ApiError {
    ApiError::not_found("NoSuchRoute", "route")
}

async fn health(State(s): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        cases: s.store.case_ids().len(),
        consultations: s.store.consultation_count(),
        reference_chunks: s.references.len(),
    })
}

async fn schemas() -> Json<BTreeMap<&'static str, Value>> {
    Json(published_schemas())
}

fn load_case(s: &AppState, id: &CaseId) -> ApiResult<crate::store::CaseEntry> {
    s.store.case(id).ok_or_else(|| ApiError::not_found("CaseNotFound", format!("case {id}")))
}

async fn create_case(
    State(s): State<AppState>,
    ApiQuery(q): ApiQuery<UnitQuery>,
    ApiJson(body): ApiJson<Value>,
) -> ApiResult<impl IntoResponse> {
    let case = CaseDocument::from_value(body).map_err(|e| ApiError::unprocessable("MalformedCase", e.to_string()))?;
    let case_id = case.case_id.clone();
    let unit_id = q.unit.filter(|u| !u.trim().is_empty());
    s.store.insert_case(case, unit_id.clone())?;
    let location = format!("/api/v1/cases/{case_id}");
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(CaseCreated { case_id, unit_id })))
}

async fn list_cases(State(s): State<AppState>) -> Json<Vec<CaseListing>> {
    let listings = s
        .store
        .case_ids()
        .into_iter()
        .filter_map(|id| {
            let e = s.store.case(&id)?;
            Some(CaseListing {
                transcripts: s.store.transcripts_for_case(&id).len(),
                case_id: id,
                unit_id: e.unit_id,
                vitals: e.case.vitals.len(),
            })
        })
        .collect();
    Json(listings)
}

async fn get_case(State(s): State<AppState>, ApiPath(id): ApiPath<String>) -> ApiResult<Json<CaseResponse>> {
    let e = load_case(&s, &CaseId(id))?;
    Ok(Json(CaseResponse { unit_id: e.unit_id, case: CaseDocument::new(e.case) }))
}

async fn append_vitals(
    State(s): State<AppState>,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<VitalsRequest>,
) -> ApiResult<Json<VitalsAppended>> {
    if req.vitals.is_empty() {
        return Err(ApiError::unprocessable("NoVitals", "at least one observation is required"));
    }
    let case_id = CaseId(id);
    let case = s.store.append_vitals(&case_id, req.vitals)?;
    let latest = compute_news(case.latest_vitals().expect("just appended"));
    Ok(Json(VitalsAppended { case_id, observations: case.vitals.len(), latest }))
}

/// Resolves template, mode and team, rejecting anything the pipeline would.
fn resolve_request(s: &AppState, req: &ConsultationRequest) -> ApiResult<(ConsultMode, Vec<AgentRole>)> {
    let registry = s.orchestrator.registry();
    let from_template = match &req.template_id {
        Some(id) => {
            let t = registry
                .template(id)
                .map_err(|_| ApiError::unprocessable("UnknownTemplate", format!("unknown template {id:?}")))?;
            Some(t.template_id)
        }
        None => None,
    };
    let mode = match (from_template, req.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(ApiError::unprocessable("ConflictingMode", format!("template {a} does not match mode {b}")))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => ConsultMode::TeamAssessment,
    };
    if !mode.is_team_mode() {
        return Err(ApiError::unprocessable("UnsupportedMode", format!("mode {mode} is not a team consultation")));
    }
    let mut team = Vec::new();
    for name in req.team.iter().flatten() {
        match name.parse::<AgentRole>() {
            Ok(role) if registry.profile(&role).is_some() => team.push(role),
            _ => return Err(ApiError::unprocessable("UnknownRole", format!("unknown agent role {name:?}"))),
        }
    }
    if req.team.as_ref().is_some_and(|t| t.is_empty()) {
        return Err(ApiError::unprocessable("NoAgentsAvailable", "team is empty"));
    }
    Ok((mode, team))
}

fn idempotency_key(headers: &HeaderMap) -> ApiResult<Option<String>> {
    match headers.get(IDEMPOTENCY_HEADER) {
        None => Ok(None),
        Some(v) => {
            let key =
                v.to_str().map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "BadIdempotencyKey", "not ASCII"))?;
            let key = key.trim();
            if key.is_empty() || key.len() > 200 {
                return Err(ApiError::new(StatusCode::BAD_REQUEST, "BadIdempotencyKey", "must be 1 to 200 characters"));
            }
            Ok(Some(key.to_string()))
        }
    }
}

fn accepted(s: &AppState, id: TranscriptId, created: bool) -> impl IntoResponse {
    let status = s.store.consultation(&id).map_or(ConsultationStatus::Pending, |v| v.status);
    let location = format!("/api/v1/consultations/{id}");
    let code = if created { StatusCode::ACCEPTED } else { StatusCode::OK };
    (
        code,
        [(header::LOCATION, location.clone())],
        Json(ConsultationAccepted { transcript_id: id, status, location, created }),
    )
}

/// Stores the submission and starts the pipeline in the background.
fn launch(s: &AppState, submission: Submission, prompt: String) -> ApiResult<(TranscriptId, bool)> {
    let (id, created) = s.store.submit(submission.clone())?;
    if created {
        let state = s.clone();
        tokio::spawn(async move {
            let id = submission.transcript_id.clone();
            let worker = tokio::spawn(run_submission(state.clone(), submission, prompt));
            if let Err(e) = worker.await {
                tracing::error!(transcript = %id, error = %e, "consultation task died");
                let _ = state.store.fail(&id, Problem::new("Internal", "consultation task died"));
            }
        });
    }
    Ok((id, created))
}

/// A round in which no agent answered because the backend itself failed.
fn backend_outage(t: &Transcript) -> Option<ApiError> {
    let all_failed = !t.responses.is_empty() && t.responses.iter().all(|r| r.status == AgentStatus::BackendError);
    all_failed.then(|| {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "BackendUnavailable",
            "no agent could reach the completion backend",
        )
        .detail(t.responses.iter().map(|r| r.role.to_string()).collect::<Vec<_>>())
    })
}

async fn run_submission(s: AppState, sub: Submission, prompt: String) {
    let outcome: ApiResult<Transcript> = async {
        let case = load_case(&s, &sub.case_id)?.case;
        let mut t = match (sub.mode, sub.team.first()) {
            (ConsultMode::SpecialistConsult, Some(AgentRole::Specialist(name))) => {
                s.orchestrator.consult_specialist(name, &case, &prompt).await?
            }
            _ => {
                let team = if sub.team.is_empty() { TeamSelector::Core } else { TeamSelector::Roles(sub.team.clone()) };
                s.orchestrator.run_consultation(&case, &prompt, sub.mode, &team).await?
            }
        };
        if let Some(e) = backend_outage(&t) {
            return Err(e);
        }
        t.transcript_id = sub.transcript_id.clone();
        t.question = sub.question.clone();
        t.parent = sub.parent.clone();
        Ok(t)
    }
    .await;
    let stored = match outcome {
        Ok(t) => s.store.complete(t),
        Err(e) => s.store.fail(&sub.transcript_id, e.problem),
    };
    if let Err(e) = stored {
        tracing::error!(transcript = %sub.transcript_id, error = %e, "could not record consultation outcome");
    }
}

async fn submit_consultation(
    State(s): State<AppState>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<ConsultationRequest>,
) -> ApiResult<impl IntoResponse> {
    let key = idempotency_key(&headers)?;
    load_case(&s, &req.case_id)?;
    let (mode, team) = resolve_request(&s, &req)?;
    let question = req.question.clone().unwrap_or_default();
    let submission = Submission {
        transcript_id: TranscriptId(s.ids.next_id("tr")),
        case_id: req.case_id,
        mode,
        question: question.clone(),
        team,
        idempotency_key: key,
        parent: None,
        submitted_at: s.clock.now(),
    };
    let (id, created) = launch(&s, submission, question)?;
    Ok(accepted(&s, id, created))
}

async fn get_consultation(
    State(s): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> ApiResult<Json<ConsultationView>> {
    let id = TranscriptId(id);
    s.store
        .consultation(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("ConsultationNotFound", format!("consultation {id}")))
}

fn completed(s: &AppState, id: &TranscriptId) -> ApiResult<Transcript> {
    let view = s
        .store
        .consultation(id)
        .ok_or_else(|| ApiError::not_found("ConsultationNotFound", format!("consultation {id}")))?;
    view.transcript.ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "NotComplete", format!("consultation {id} is {:?}", view.status))
    })
}

async fn followup(
    State(s): State<AppState>,
    headers: HeaderMap,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<FollowupRequest>,
) -> ApiResult<impl IntoResponse> {
    let key = idempotency_key(&headers)?;
    let parent_id = TranscriptId(id);
    let parent = completed(&s, &parent_id)?;
    let question = req.question.trim().to_string();
    if question.is_empty() {
        return Err(ApiError::unprocessable("EmptyQuestion", "a follow-up needs a question"));
    }
    let parent_sub = s.store.submission(&parent_id).expect("completed consultations have a submission");
    let mut prompt = question.clone();
    if let Some(synthesis) = &parent.synthesis {
        prompt.push_str("\n\nEARLIER IN THIS CONVERSATION THE TEAM CONCLUDED:\n");
        prompt.push_str(&render_synthesis(synthesis));
    }
    let submission = Submission {
        transcript_id: TranscriptId(s.ids.next_id("tr")),
        case_id: parent.case_id.clone(),
        mode: parent.mode,
        question,
        team: parent_sub.team,
        idempotency_key: key,
        parent: Some(parent_id),
        submitted_at: s.clock.now(),
    };
    let (id, created) = launch(&s, submission, prompt)?;
    Ok(accepted(&s, id, created))
}

async fn navigator(State(s): State<AppState>, ApiPath(id): ApiPath<String>) -> ApiResult<Json<NavigatorExplanation>> {
    let id = TranscriptId(id);
    let transcript = completed(&s, &id)?;
    let case = load_case(&s, &transcript.case_id)?.case;
    let text = s.orchestrator.navigator_explain(&case, &transcript).await?;
    Ok(Json(NavigatorExplanation { transcript_id: id, text }))
}

async fn discharge_summary(
    State(s): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> ApiResult<Json<DischargeSummary>> {
    let case_id = CaseId(id);
    let case = load_case(&s, &case_id)?.case;
    let transcripts = s.store.transcripts_for_case(&case_id);
    Ok(Json(s.orchestrator.discharge_summary(&case, &transcripts).await?))
}

async fn specialist_consult(
    State(s): State<AppState>,
    ApiJson(req): ApiJson<SpecialistRequest>,
) -> ApiResult<impl IntoResponse> {
    let case = load_case(&s, &req.case_id)?.case;
    let transcript = s.orchestrator.consult_specialist(&req.specialty, &case, &req.question).await?;
    if let Some(e) = backend_outage(&transcript) {
        return Err(e);
    }
    s.store.complete(transcript.clone())?;
    let location = format!("/api/v1/consultations/{}", transcript.transcript_id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(transcript)))
}

async fn templates(State(s): State<AppState>) -> Json<Vec<PromptTemplate>> {
    Json(s.orchestrator.registry().list_templates().to_vec())
}

async fn agents(State(s): State<AppState>) -> Json<Vec<AgentSummary>> {
    Json(
        s.orchestrator
            .registry()
            .profiles()
            .iter()
            .map(|p| AgentSummary {
                role: p.role.clone(),
                display_name: p.display_name.clone(),
                team: p.team,
                reasoning_style: p.reasoning_style,
            })
            .collect(),
    )
}

async fn risk_evaluate(
    State(s): State<AppState>,
    ApiJson(req): ApiJson<RiskRequest>,
) -> ApiResult<Json<RiskEvaluation>> {
    let case = load_case(&s, &req.case_id)?.case;
    let latest = case
        .latest_vitals()
        .ok_or_else(|| ApiError::unprocessable("NoVitals", format!("case {} has no observations", req.case_id)))?;
    let news = compute_news(latest);
    Ok(Json(RiskEvaluation {
        case_id: req.case_id,
        observed_at: latest.timestamp,
        recommendation: recommendation(news.band).to_string(),
        news,
    }))
}

async fn alerts(State(s): State<AppState>, ApiPath(id): ApiPath<String>) -> ApiResult<Json<Vec<MonitorAlert>>> {
    let id = CaseId(id);
    s.store.alerts(&id).map(Json).ok_or_else(|| ApiError::not_found("CaseNotFound", format!("case {id}")))
}

async fn ingest_document(
    State(s): State<AppState>,
    ApiJson(req): ApiJson<DocumentRequest>,
) -> ApiResult<impl IntoResponse> {
    let doc_id = req.doc_id.filter(|d| !d.trim().is_empty()).unwrap_or_else(|| s.ids.next_id("doc"));
    let chunks = s.references.ingest(&doc_id, &req.title, &req.text, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP).await?;
    Ok((StatusCode::CREATED, Json(DocumentIngested { doc_id, chunks })))
}

async fn gap_digest(State(s): State<AppState>, ApiPath(unit_id): ApiPath<String>) -> ApiResult<Json<GapDigest>> {
    let cases = s.store.unit_cases(&unit_id);
    if cases.is_empty() {
        return Err(ApiError::not_found("UnitNotFound", format!("unit {unit_id}")));
    }
    let mut sources = Vec::new();
    let mut reports = Vec::new();
    for case_id in cases {
        let latest = s.store.transcripts_for_case(&case_id).into_iter().rev().find(|t| t.gap_report.is_some());
        sources.push(DigestSource { case_id, transcript_id: latest.as_ref().map(|t| t.transcript_id.clone()) });
        reports.extend(latest.and_then(|t| t.gap_report));
    }
    Ok(Json(GapDigest {
        unit_id,
        sources,
        report: merge_gap_reports(&reports),
        recipients: s.digest_recipients.clone(),
    }))
}

async fn wilcoxon(ApiJson(req): ApiJson<WilcoxonRequest>) -> ApiResult<Json<TestResult<f64>>> {
    Ok(Json(wilcoxon_one_sample(&req.samples, req.mu)?))
}

async fn survey(ApiJson(req): ApiJson<SurveyRequest>) -> ApiResult<Json<SurveySummary>> {
    Ok(Json(summarize_survey(&req.responses)?))
}
