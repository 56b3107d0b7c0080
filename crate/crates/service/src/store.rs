//! Durable service state: every change is one record in the log, and the
//! in-memory index is rebuilt by replaying the log at startup.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use matec_core::domain::{validate_case, CaseId, ConsultMode, PatientCase, TranscriptId, ValidationReport, VitalSigns};
use matec_core::news::MonitorAlert;
use matec_core::{AgentRole, Transcript};

use crate::log::{LogError, RecordLog};
use crate::problem::Problem;

/// A consultation as accepted, before any agent has answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Submission {
    pub transcript_id: TranscriptId,
    pub case_id: CaseId,
    pub mode: ConsultMode,
    pub question: String,
    /// Explicit team; the core team when empty.
    #[serde(default)]
    pub team: Vec<AgentRole>,
    #[serde(default)]
    pub idempotency_key: Option<String>,
    #[serde(default)]
    pub parent: Option<TranscriptId>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Case {
        case: PatientCase,
        unit_id: Option<String>,
    },
    Vitals {
        case_id: CaseId,
        vitals: Vec<VitalSigns>,
    },
    Submitted {
        submission: Submission,
    },
    /// A finished consultation. Specialist consults are stored directly
    /// without a preceding submission.
    Transcript {
        transcript: Transcript,
    },
    Failed {
        transcript_id: TranscriptId,
        problem: Problem,
    },
    /// One monitor tick's outcome for a case: the vitals evaluated so far
    /// and the alerts raised by the new ones.
    Alerts {
        case_id: CaseId,
        cursor: usize,
        alerts: Vec<MonitorAlert>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ConsultationStatus {
    Pending,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ConsultationView {
    pub transcript_id: TranscriptId,
    pub case_id: CaseId,
    pub mode: ConsultMode,
    pub status: ConsultationStatus,
    pub submitted_at: DateTime<Utc>,
    #[serde(default)]
    pub transcript: Option<Transcript>,
    #[serde(default)]
    pub error: Option<Problem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseEntry {
    pub case: PatientCase,
    pub unit_id: Option<String>,
    /// Number of vitals observations the monitor has evaluated.
    pub monitor_cursor: usize,
    pub alerts: Vec<MonitorAlert>,
}

#[derive(Debug, Clone)]
enum State {
    Pending,
    Complete(Box<Transcript>),
    Failed(Problem),
}

#[derive(Debug, Clone)]
struct Consultation {
    submission: Submission,
    state: State,
}

#[derive(Debug, Default)]
struct Index {
    cases: BTreeMap<CaseId, CaseEntry>,
    consultations: HashMap<TranscriptId, Consultation>,
    /// Consultation ids in submission order.
    order: Vec<TranscriptId>,
    idempotency: HashMap<String, TranscriptId>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("record {index} is not a valid record: {source}")]
    Decode { index: usize, source: serde_json::Error },
    #[error("encoding record: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("case {0} already exists")]
    CaseExists(CaseId),
    #[error("case {0} not found")]
    CaseNotFound(CaseId),
    #[error("consultation {0} not found")]
    ConsultationNotFound(TranscriptId),
    #[error("consultation {0} is already finished")]
    AlreadyFinished(TranscriptId),
    #[error("case failed validation")]
    Invalid(ValidationReport),
}

/// What startup found in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpenReport {
    pub records: usize,
    pub truncated_bytes: u64,
    /// Consultations still pending when the previous process stopped; they
    /// are marked failed.
    pub interrupted: usize,
}

pub struct Store {
    log: Mutex<RecordLog>,
    index: RwLock<Index>,
}

impl Index {
    fn apply(&mut self, record: Record) {
        match record {
            Record::Case { case, unit_id } => {
                let entry = CaseEntry { case, unit_id, monitor_cursor: 0, alerts: Vec::new() };
                self.cases.insert(entry.case.case_id.clone(), entry);
            }
            Record::Vitals { case_id, vitals } => {
                if let Some(e) = self.cases.get_mut(&case_id) {
                    e.case.vitals.extend(vitals);
                }
            }
            Record::Submitted { submission } => {
                if let Some(key) = &submission.idempotency_key {
                    self.idempotency.insert(key.clone(), submission.transcript_id.clone());
                }
                let id = submission.transcript_id.clone();
                if self.consultations.insert(id.clone(), Consultation { submission, state: State::Pending }).is_none() {
                    self.order.push(id);
                }
            }
            Record::Transcript { transcript } => {
                let id = transcript.transcript_id.clone();
                match self.consultations.get_mut(&id) {
                    Some(c) => c.state = State::Complete(Box::new(transcript)),
                    None => {
                        let submission = Submission {
                            transcript_id: id.clone(),
                            case_id: transcript.case_id.clone(),
                            mode: transcript.mode,
                            question: transcript.question.clone(),
                            team: transcript.responses.iter().map(|r| r.role.clone()).collect(),
                            idempotency_key: None,
                            parent: transcript.parent.clone(),
                            submitted_at: transcript.created_at,
                        };
                        let state = State::Complete(Box::new(transcript));
                        self.consultations.insert(id.clone(), Consultation { submission, state });
                        self.order.push(id);
                    }
                }
            }
            Record::Failed { transcript_id, problem } => {
                if let Some(c) = self.consultations.get_mut(&transcript_id) {
                    c.state = State::Failed(problem);
                }
            }
            Record::Alerts { case_id, cursor, alerts } => {
                if let Some(e) = self.cases.get_mut(&case_id) {
                    e.monitor_cursor = cursor;
                    e.alerts.extend(alerts);
                }
            }
        }
    }
}

impl Consultation {
    fn view(&self) -> ConsultationView {
        let s = &self.submission;
        let (status, transcript, error) = match &self.state {
            State::Pending => (ConsultationStatus::Pending, None, None),
            State::Complete(t) => (ConsultationStatus::Complete, Some((**t).clone()), None),
            State::Failed(p) => (ConsultationStatus::Failed, None, Some(p.clone())),
        };
        ConsultationView {
            transcript_id: s.transcript_id.clone(),
            case_id: s.case_id.clone(),
            mode: s.mode,
            status,
            submitted_at: s.submitted_at,
            transcript,
            error,
        }
    }
}

impl Store {
    /// Opens the log at `path`, replays it, and fails any consultation the
    /// previous process left pending.
    pub fn open(path: &Path) -> Result<(Store, OpenReport), StoreError> {
        let (log, recovery) = RecordLog::open(path)?;
        let mut index = Index::default();
        for (i, bytes) in recovery.records.iter().enumerate() {
            let record: Record =
                serde_json::from_slice(bytes).map_err(|source| StoreError::Decode { index: i, source })?;
            index.apply(record);
        }
        let mut report =
            OpenReport { records: recovery.records.len(), truncated_bytes: recovery.truncated_bytes, interrupted: 0 };
        let store = Store { log: Mutex::new(log), index: RwLock::new(index) };
        let pending: Vec<TranscriptId> = {
            let index = store.index.read();
            index.order.iter().filter(|id| matches!(index.consultations[*id].state, State::Pending)).cloned().collect()
        };
        for id in pending {
            let problem = Problem::new("Interrupted", "the service stopped before this consultation finished");
            store.commit(Record::Failed { transcript_id: id, problem })?;
            report.interrupted += 1;
        }
        Ok((store, report))
    }

    /// Appends and applies one record. The log lock is held across both
    /// steps so the index always reflects the log order.
    fn commit(&self, record: Record) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec(&record)?;
        let mut log = self.log.lock();
        log.append(&bytes)?;
        self.index.write().apply(record);
        Ok(())
    }

    pub fn insert_case(&self, case: PatientCase, unit_id: Option<String>) -> Result<(), StoreError> {
        let report = validate_case(&case);
        if !report.is_valid() {
            return Err(StoreError::Invalid(report));
        }
        let id = case.case_id.clone();
        let fresh = |index: &Index| !index.cases.contains_key(&id);
        if self.commit_if(fresh, Record::Case { case, unit_id })? {
            Ok(())
        } else {
            Err(StoreError::CaseExists(id))
        }
    }

    /// Commits `record` only if `check` holds on the index at commit time.
    fn commit_if(&self, check: impl FnOnce(&Index) -> bool, record: Record) -> Result<bool, StoreError> {
        let bytes = serde_json::to_vec(&record)?;
        let mut log = self.log.lock();
        if !check(&self.index.read()) {
            return Ok(false);
        }
        log.append(&bytes)?;
        self.index.write().apply(record);
        Ok(true)
    }

    pub fn case(&self, id: &CaseId) -> Option<CaseEntry> {
        self.index.read().cases.get(id).cloned()
    }

    pub fn case_ids(&self) -> Vec<CaseId> {
        self.index.read().cases.keys().cloned().collect()
    }

    pub fn unit_cases(&self, unit_id: &str) -> Vec<CaseId> {
        let index = self.index.read();
        index.cases.values().filter(|e| e.unit_id.as_deref() == Some(unit_id)).map(|e| e.case.case_id.clone()).collect()
    }

    /// Appends observations to a case. The extended record must still
    /// validate, which includes strictly increasing timestamps.
    pub fn append_vitals(&self, case_id: &CaseId, vitals: Vec<VitalSigns>) -> Result<PatientCase, StoreError> {
        let mut log = self.log.lock();
        let mut case = self.case(case_id).ok_or_else(|| StoreError::CaseNotFound(case_id.clone()))?.case;
        case.vitals.extend(vitals.iter().cloned());
        let report = validate_case(&case);
        if !report.is_valid() {
            return Err(StoreError::Invalid(report));
        }
        let record = Record::Vitals { case_id: case_id.clone(), vitals };
        log.append(&serde_json::to_vec(&record)?)?;
        self.index.write().apply(record);
        Ok(case)
    }

    /// Records a new consultation. With an idempotency key already seen,
    /// nothing is written and the original id comes back with `false`.
    pub fn submit(&self, submission: Submission) -> Result<(TranscriptId, bool), StoreError> {
        let key = submission.idempotency_key.clone();
        let mut log = self.log.lock();
        if let Some(existing) = key.as_ref().and_then(|k| self.index.read().idempotency.get(k).cloned()) {
            return Ok((existing, false));
        }
        if !self.index.read().cases.contains_key(&submission.case_id) {
            return Err(StoreError::CaseNotFound(submission.case_id));
        }
        let id = submission.transcript_id.clone();
        let record = Record::Submitted { submission };
        log.append(&serde_json::to_vec(&record)?)?;
        self.index.write().apply(record);
        Ok((id, true))
    }

    fn finish(&self, id: &TranscriptId, record: Record) -> Result<(), StoreError> {
        let pending = |index: &Index| match index.consultations.get(id) {
            Some(c) => matches!(c.state, State::Pending),
            None => true,
        };
        if self.commit_if(pending, record)? {
            Ok(())
        } else {
            Err(StoreError::AlreadyFinished(id.clone()))
        }
    }

    pub fn complete(&self, transcript: Transcript) -> Result<(), StoreError> {
        let id = transcript.transcript_id.clone();
        self.finish(&id, Record::Transcript { transcript })
    }

    pub fn fail(&self, id: &TranscriptId, problem: Problem) -> Result<(), StoreError> {
        if !self.index.read().consultations.contains_key(id) {
            return Err(StoreError::ConsultationNotFound(id.clone()));
        }
        self.finish(id, Record::Failed { transcript_id: id.clone(), problem })
    }

    pub fn consultation(&self, id: &TranscriptId) -> Option<ConsultationView> {
        self.index.read().consultations.get(id).map(Consultation::view)
    }

    pub fn submission(&self, id: &TranscriptId) -> Option<Submission> {
        self.index.read().consultations.get(id).map(|c| c.submission.clone())
    }

    /// Completed transcripts for a case in submission order.
    pub fn transcripts_for_case(&self, case_id: &CaseId) -> Vec<Transcript> {
        let index = self.index.read();
        index
            .order
            .iter()
            .filter_map(|id| match &index.consultations[id].state {
                State::Complete(t) if &t.case_id == case_id => Some((**t).clone()),
                _ => None,
            })
            .collect()
    }

    pub fn consultation_count(&self) -> usize {
        self.index.read().order.len()
    }

    pub fn record_alerts(&self, case_id: &CaseId, cursor: usize, alerts: Vec<MonitorAlert>) -> Result<(), StoreError> {
        self.commit(Record::Alerts { case_id: case_id.clone(), cursor, alerts })
    }

    pub fn alerts(&self, case_id: &CaseId) -> Option<Vec<MonitorAlert>> {
        self.index.read().cases.get(case_id).map(|e| e.alerts.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use matec_core::fixtures;

    fn submission(id: &str, key: Option<&str>) -> Submission {
        Submission {
            transcript_id: TranscriptId(id.into()),
            case_id: "endocarditis".into(),
            mode: ConsultMode::TeamAssessment,
            question: String::new(),
            team: Vec::new(),
            idempotency_key: key.map(String::from),
            parent: None,
            submitted_at: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn cases_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log");
        {
            let (store, report) = Store::open(&path).unwrap();
            assert_eq!(report, OpenReport::default());
            store.insert_case(fixtures::endocarditis(), Some("4West".into())).unwrap();
            assert!(matches!(store.insert_case(fixtures::endocarditis(), None), Err(StoreError::CaseExists(_))));
        }
        let (store, report) = Store::open(&path).unwrap();
        assert_eq!(report.records, 1);
        assert_eq!(store.unit_cases("4West"), [CaseId::from("endocarditis")]);
        assert_eq!(store.case(&"endocarditis".into()).unwrap().case, fixtures::endocarditis());
    }

    #[test]
    fn vitals_must_move_forward() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = Store::open(&dir.path().join("log")).unwrap();
        let case = fixtures::endocarditis();
        store.insert_case(case.clone(), None).unwrap();
        let stale = case.vitals[0].clone();
        assert!(matches!(store.append_vitals(&case.case_id, vec![stale]), Err(StoreError::Invalid(_))));
        let mut next = case.latest_vitals().unwrap().clone();
        next.timestamp += chrono::Duration::hours(1);
        assert_eq!(store.append_vitals(&case.case_id, vec![next]).unwrap().vitals.len(), 4);
    }

    #[test]
    fn idempotent_submission_and_interrupted_work() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log");
        {
            let (store, _) = Store::open(&path).unwrap();
            store.insert_case(fixtures::endocarditis(), None).unwrap();
            assert_eq!(store.submit(submission("a", Some("k1"))).unwrap(), (TranscriptId("a".into()), true));
            assert_eq!(store.submit(submission("b", Some("k1"))).unwrap(), (TranscriptId("a".into()), false));
            store.submit(submission("c", None)).unwrap();
            store.fail(&TranscriptId("c".into()), Problem::new("BackendUnavailable", "down")).unwrap();
            assert!(store.fail(&TranscriptId("c".into()), Problem::new("x", "y")).is_err());
            assert_eq!(store.consultation_count(), 2);
        }
        let (store, report) = Store::open(&path).unwrap();
        assert_eq!(report.interrupted, 1);
        let a = store.consultation(&TranscriptId("a".into())).unwrap();
        assert_eq!(a.status, ConsultationStatus::Failed);
        assert_eq!(a.error.unwrap().code, "Interrupted");
        assert_eq!(store.submit(submission("d", Some("k1"))).unwrap().0, TranscriptId("a".into()));
        let (_, report) = Store::open(&path).unwrap();
        assert_eq!(report.interrupted, 0);
    }
}
