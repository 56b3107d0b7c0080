#[path = "support/harness.rs"]
mod harness;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use matec_core::domain::{AgentStatus, ClaimSubject, ConsultMode, DegradedTeam};
use matec_core::fixtures;
use matec_core::gateway::{Completion, CompletionBackend, CompletionRequest, GatewayError, MockBackend, MockScript};
use matec_core::orchestrator::{
    BarrierSource, FixedClock, FlagReason, GapCategory, OrchestratorConfig, OrchestratorError, SeededIds, Verdict,
};
use matec_core::registry::Registry;
use matec_core::{AgentRole, Orchestrator, TeamSelector, Transcript};
use proptest::prelude::*;

const GOLDEN: &str = "tests/golden/endocarditis_team_assessment.json";

async fn team_run(script: MockScript, mode: ConsultMode) -> Transcript {
    let case = fixtures::endocarditis();
    let orch = harness::orchestrator(&case, script, 42, OrchestratorConfig::default()).await;
    orch.run_consultation(&case, "", mode, &TeamSelector::Core).await.unwrap()
}

fn script(fault: &str) -> MockScript {
    MockScript::default().with_fault(fault.parse().unwrap())
}

#[tokio::test]
async fn clean_team_assessment_matches_golden() {
    let t = team_run(MockScript::default(), ConsultMode::TeamAssessment).await;
    assert_eq!(t.responses.len(), 10);
    assert!(t.responses.iter().all(|r| r.is_ok()));
    let roles: Vec<_> = t.responses.iter().map(|r| r.role.clone()).collect();
    assert_eq!(roles, AgentRole::CORE_SEPSIS);
    let v = t.verification.as_ref().unwrap();
    assert_eq!(v.verdict, Verdict::Clean, "{:?}", v.flags);
    assert!(v.checked >= 40);
    let s = t.synthesis.as_ref().unwrap();
    assert_eq!(s.contributing_roles.len(), 10);
    assert!(s.final_diagnosis.to_lowercase().contains("endocarditis"));
    assert!(t.degraded.is_none());

    let json = serde_json::to_string_pretty(&t).unwrap();
    if std::env::var_os("MATEC_UPDATE_GOLDEN").is_some() {
        std::fs::write(GOLDEN, &json).unwrap();
    }
    let golden = std::fs::read_to_string(GOLDEN).expect("golden transcript present");
    assert_eq!(json, golden.trim_end());
}

#[tokio::test]
async fn same_seed_same_transcript() {
    let a = team_run(MockScript::default(), ConsultMode::DifferentialDx).await;
    let b = team_run(MockScript::default(), ConsultMode::DifferentialDx).await;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[tokio::test(start_paused = true)]
async fn one_timeout_still_synthesizes() {
    let case = fixtures::endocarditis();
    let config = OrchestratorConfig { agent_timeout_ms: 2_000, ..Default::default() };
    let orch = harness::orchestrator(&case, script("timeout@CriticalCare"), 42, config).await;
    let t = orch.run_consultation(&case, "", ConsultMode::TeamAssessment, &TeamSelector::Core).await.unwrap();
    let cc = t.response(&AgentRole::CriticalCare).unwrap();
    assert_eq!((cc.status, cc.latency_ms), (AgentStatus::TimedOut, 2_000));
    assert_eq!(t.responses.iter().filter(|r| r.is_ok()).count(), 9);
    let s = t.synthesis.expect("synthesis despite one failure");
    assert_eq!(s.contributing_roles.len(), 9);
    assert!(!s.contributing_roles.contains(&AgentRole::CriticalCare));
    assert_eq!(t.verification.unwrap().verdict, Verdict::Clean);
}

#[tokio::test]
async fn malformed_answer_is_recorded_not_fatal() {
    let t = team_run(script("malformed@Nurse"), ConsultMode::TeamAssessment).await;
    assert_eq!(t.response(&AgentRole::Nurse).unwrap().status, AgentStatus::Malformed);
    assert!(t.synthesis.is_some());
}

#[tokio::test]
async fn fabrication_matrix_flags_every_injection() {
    let subjects = [("Vital", "40", 118.0), ("Lab", "2.0", 2.6), ("Medication", "500", 1250.0)];
    let mut caught = 0;
    for role in AgentRole::CORE_SEPSIS {
        for (subject, delta, record) in subjects {
            let fault = format!("fabricate:{subject}::{delta}@{role}");
            let t = team_run(script(&fault), ConsultMode::TeamAssessment).await;
            let v = t.verification.unwrap();
            assert_eq!(v.verdict, Verdict::Flagged, "{fault}");
            assert!(v.flags.iter().all(|f| f.claim.source_role == role), "{fault}: false flag {:?}", v.flags);
            let subject = ClaimSubject::parse(subject).unwrap();
            let hit = v
                .flags
                .iter()
                .any(|f| f.claim.subject == subject && f.reason == FlagReason::ValueMismatch { record_value: record });
            assert!(hit, "{fault}: {:?}", v.flags);
            caught += 1;
        }
    }
    assert_eq!(caught, 30);
}

#[tokio::test]
async fn absent_history_fact_is_unsupported() {
    let t = team_run(script("fabricate:HistoryFact:history:0@Hospitalist"), ConsultMode::TeamAssessment).await;
    let v = t.verification.unwrap();
    assert_eq!(v.flags.len(), 1);
    assert_eq!(v.flags[0].reason, FlagReason::UnsupportedByContext);
}

#[tokio::test]
async fn care_gaps_merge_across_roles() {
    let t = team_run(MockScript::default(), ConsultMode::CareGap).await;
    let report = t.gap_report.unwrap();
    assert_eq!(report.categories.len(), 4);
    let all: Vec<_> = report.categories.values().flatten().collect();
    let lactate = all.iter().find(|f| f.finding.starts_with("Repeat lactate")).unwrap();
    assert_eq!(
        lactate.raised_by,
        BTreeSet::from([AgentRole::EmergencyMedicine, AgentRole::CriticalCare, AgentRole::PatientSafetyQI])
    );
    let cultures: Vec<_> = all.iter().filter(|f| f.finding.contains("blood cultures")).collect();
    assert_eq!(cultures.len(), 1);
    assert_eq!(cultures[0].raised_by.len(), 2);
    assert!(all.iter().all(|f| !f.raised_by.is_empty()));
    assert!(!report.categories[&GapCategory::Monitoring].is_empty());
}

#[tokio::test(start_paused = true)]
async fn losing_the_physicians_degrades_the_team() {
    let case = fixtures::endocarditis();
    let team = TeamSelector::Roles(vec![AgentRole::Hospitalist, AgentRole::Nurse, AgentRole::Pharmacist]);
    let orch = harness::orchestrator(&case, MockScript::default(), 1, OrchestratorConfig::default()).await;
    let t = orch.run_consultation(&case, "", ConsultMode::TeamAssessment, &team).await.unwrap();
    assert_eq!(t.responses.len(), 3);
    assert!(t.synthesis.is_none());
    assert_eq!(t.degraded, Some(DegradedTeam::InsufficientQuorum { ok_doctors: 1 }));
    // Five record claims each, plus the pharmacist's creatinine.
    assert_eq!(t.verification.unwrap().checked, 16);
}

#[tokio::test]
async fn rejects_non_team_modes_and_unknown_roles() {
    let case = fixtures::endocarditis();
    let orch = harness::orchestrator(&case, MockScript::default(), 1, OrchestratorConfig::default()).await;
    let err = orch.run_consultation(&case, "", ConsultMode::NavigatorExplain, &TeamSelector::Core).await;
    assert!(matches!(err, Err(OrchestratorError::UnsupportedMode(_))));
    let team = TeamSelector::Roles(vec![AgentRole::specialist("Astrologist")]);
    let err = orch.run_consultation(&case, "", ConsultMode::TeamAssessment, &team).await;
    assert!(matches!(err, Err(OrchestratorError::UnknownRole(_))));
    let mut bad = case.clone();
    bad.case_id.0.clear();
    let err = orch.run_consultation(&bad, "", ConsultMode::TeamAssessment, &TeamSelector::Core).await;
    assert!(matches!(err, Err(OrchestratorError::InvalidCase(_))));
}

#[tokio::test]
async fn specialist_consult() {
    let case = fixtures::endocarditis();
    let orch = harness::orchestrator(&case, MockScript::default(), 1, OrchestratorConfig::default()).await;
    let t = orch.consult_specialist("cardiologist", &case, "Is surgery indicated?").await.unwrap();
    assert_eq!(t.mode, ConsultMode::SpecialistConsult);
    assert_eq!(t.responses.len(), 1);
    assert_eq!(t.responses[0].role, AgentRole::specialist("Cardiologist"));
    assert!(t.responses[0].is_ok());
    assert!(t.synthesis.is_none());
    assert_eq!(t.verification.unwrap().verdict, Verdict::Clean);
    let err = orch.consult_specialist("Astrologist", &case, "").await;
    assert!(matches!(err, Err(OrchestratorError::UnknownSpecialty(s)) if s == "Astrologist"));
}

#[tokio::test]
async fn navigator_and_discharge_follow_the_synthesis() {
    let case = fixtures::endocarditis();
    let orch = harness::orchestrator(&case, MockScript::default(), 3, OrchestratorConfig::default()).await;
    let t = orch.run_consultation(&case, "", ConsultMode::TeamAssessment, &TeamSelector::Core).await.unwrap();

    let text = orch.navigator_explain(&case, &t).await.unwrap();
    assert!(!text.is_empty());
    assert!(!text.to_uppercase().contains("CLAIM"));

    let summary = orch.discharge_summary(&case, std::slice::from_ref(&t)).await.unwrap();
    let sdoh: Vec<_> = summary.barriers.iter().filter(|b| b.source == BarrierSource::Sdoh).collect();
    assert!(sdoh.iter().any(|b| b.description.to_lowercase().contains("homeless")));
    assert!(sdoh.iter().any(|b| b.description.to_lowercase().contains("substance")));
    assert!(summary.barriers.iter().any(|b| b.source == BarrierSource::Agent));

    let mut bare = t.clone();
    bare.synthesis = None;
    assert!(matches!(orch.navigator_explain(&case, &bare).await, Err(OrchestratorError::MissingSynthesis)));
    assert!(matches!(orch.discharge_summary(&case, &[bare]).await, Err(OrchestratorError::MissingSynthesis)));
    assert!(matches!(orch.discharge_summary(&case, &[]).await, Err(OrchestratorError::MissingSynthesis)));
}

#[tokio::test]
async fn pneumonia_case_runs_clean() {
    let case = fixtures::pneumonia();
    let orch = harness::orchestrator(&case, MockScript::default(), 9, OrchestratorConfig::default()).await;
    let t = orch.run_consultation(&case, "", ConsultMode::TreatmentPlan, &TeamSelector::Core).await.unwrap();
    assert_eq!(t.verification.unwrap().verdict, Verdict::Clean);
    assert!(t.synthesis.unwrap().final_diagnosis.to_lowercase().contains("pneumonia"));
    let summary = orch
        .discharge_summary(
            &case,
            &[orch.run_consultation(&case, "", ConsultMode::TeamAssessment, &TeamSelector::Core).await.unwrap()],
        )
        .await
        .unwrap();
    assert!(!summary.barriers.iter().any(|b| b.description.to_lowercase().contains("homeless")));
}

/// Tracks the largest number of calls in flight at once.
struct Gauge {
    inner: MockBackend,
    now: AtomicUsize,
    peak: AtomicUsize,
}

#[async_trait]
impl CompletionBackend for Gauge {
    async fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(n, Ordering::SeqCst);
        let out = self.inner.complete(req).await;
        self.now.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

#[tokio::test(start_paused = true)]
async fn fan_out_is_bounded_and_concurrent() {
    let case = fixtures::endocarditis();
    let gauge = Arc::new(Gauge {
        inner: MockBackend::new(MockScript::default(), 5).with_simulated_latency(true),
        now: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    });
    let orch = Orchestrator::new(Arc::new(Registry::default_config()), gauge.clone())
        .with_clock(Arc::new(FixedClock(case.latest_timestamp().unwrap())))
        .with_ids(Arc::new(SeededIds::new(5)));
    let started = tokio::time::Instant::now();
    let t = orch.run_consultation(&case, "", ConsultMode::TeamAssessment, &TeamSelector::Core).await.unwrap();
    let elapsed = started.elapsed();
    assert_eq!(gauge.peak.load(Ordering::SeqCst), 5);
    let agents: u64 = t.responses.iter().map(|r| r.latency_ms).sum();
    assert!(t.responses.iter().all(|r| (250..2000).contains(&r.latency_ms)));
    // Two waves of at most 2 s each plus the synthesis call.
    assert!(elapsed < Duration::from_millis(agents), "{elapsed:?} vs sequential {agents} ms");
    assert!(elapsed <= Duration::from_millis(3 * 2000), "{elapsed:?}");
}

fn fault_spec() -> impl Strategy<Value = Option<String>> {
    let role = prop::sample::select(AgentRole::CORE_SEPSIS.to_vec());
    let kind = prop::sample::select(vec![
        "timeout",
        "malformed",
        "fabricate:Vital::40",
        "fabricate:Lab::2",
        "fabricate:Medication::500",
        "fabricate:HistoryFact:history:0",
    ]);
    prop::option::of((kind, role).prop_map(|(k, r)| format!("{k}@{r}")))
}

fn team_spec() -> impl Strategy<Value = Vec<AgentRole>> {
    prop::sample::subsequence(AgentRole::CORE_SEPSIS.to_vec(), 1..=10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pipeline_invariants(
        fault in fault_spec(),
        roles in team_spec(),
        mode in prop::sample::select(ConsultMode::TEAM.to_vec()),
        seed in any::<u64>(),
    ) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_time().start_paused(true).build().unwrap();
        let case = fixtures::endocarditis();
        let script = match &fault {
            Some(f) => MockScript::default().with_fault(f.parse().unwrap()),
            None => MockScript::default(),
        };
        let config = OrchestratorConfig { agent_timeout_ms: 1_000, ..Default::default() };
        let t = rt.block_on(async {
            let orch = harness::orchestrator(&case, script, seed, config).await;
            orch.run_consultation(&case, "", mode, &TeamSelector::Roles(roles.clone())).await.unwrap()
        });

        let got: Vec<_> = t.responses.iter().map(|r| r.role.clone()).collect();
        prop_assert_eq!(&got, &roles);
        prop_assert!(t.synthesis.is_some() != t.degraded.is_some());
        let ok_doctors = t.responses.iter().filter(|r| r.is_ok() && r.role.is_physician()).count();
        if ok_doctors < 2 {
            prop_assert_eq!(t.degraded.clone(), Some(DegradedTeam::InsufficientQuorum { ok_doctors }));
        }
        let ok: BTreeSet<_> = t.responses.iter().filter(|r| r.is_ok()).map(|r| r.role.clone()).collect();
        if let Some(s) = &t.synthesis {
            prop_assert!(s.contributing_roles.is_subset(&ok));
            prop_assert!(!s.final_diagnosis.is_empty());
        }
        let v = t.verification.as_ref().unwrap();
        let claims: usize = t.responses.iter().filter(|r| r.is_ok()).map(|r| r.sections.claims.len()).sum::<usize>()
            + t.synthesis.as_ref().map_or(0, |s| s.claims.len());
        prop_assert_eq!(v.checked, claims);
        prop_assert_eq!(v.verdict == Verdict::Clean, v.flags.is_empty());
        let faulty = fault.as_deref().filter(|f| f.starts_with("fabricate"));
        if faulty.is_none() {
            prop_assert!(v.flags.is_empty(), "false flags {:?}", v.flags);
        }
        for f in &v.flags {
            let suffix = format!("@{}", f.claim.source_role);
            prop_assert!(fault.as_deref().is_some_and(|spec| spec.ends_with(&suffix)), "flag {:?}", f);
        }
        prop_assert_eq!(t.gap_report.is_some(), mode == ConsultMode::CareGap);
        for r in &t.responses {
            if r.status == AgentStatus::TimedOut {
                prop_assert_eq!(r.latency_ms, 1_000);
            }
        }
    }
}
