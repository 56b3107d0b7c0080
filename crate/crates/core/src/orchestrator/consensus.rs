//! Mechanical consensus and divergence over the doctors' differentials, and
//! parsing of the senior physician's synthesis.

use std::collections::{BTreeMap, BTreeSet};

use super::report::{Divergence, SynthesisReport};
use super::verify::normalize;
use crate::domain::{AgentResponse, AgentRole};
use crate::gateway::{parse_claim_line, split_sections, strip_list_marker};

pub const SYNTHESIS_HEADINGS: [&str; 5] =
    ["FINAL DIAGNOSIS", "CONSENSUS AND DIVERGENCE", "CARE PLAN", "NEXT STEPS", "CLAIMS"];

pub const DIVERGENCE_TOPIC: &str = "Most likely diagnosis";

/// Diagnoses shared by enough doctors. With one doctor this is simply that
/// doctor's top diagnosis; with `n >= 2` a diagnosis must appear in at least
/// `max(ceil(n / 2), 2)` differentials. Order follows first appearance.
pub fn mechanical_consensus(doctors: &[&AgentResponse]) -> Vec<String> {
    if doctors.len() <= 1 {
        return doctors.iter().filter_map(|r| r.sections.differential.first()).map(|d| d.condition.clone()).collect();
    }
    let threshold = doctors.len().div_ceil(2).max(2);
    let mut order: Vec<(String, String)> = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in doctors {
        let mut seen = BTreeSet::new();
        for d in &r.sections.differential {
            let key = normalize(&d.condition);
            if key.is_empty() || !seen.insert(key.clone()) {
                continue;
            }
            if !counts.contains_key(&key) {
                order.push((key.clone(), d.condition.clone()));
            }
            *counts.entry(key).or_default() += 1;
        }
    }
    order.into_iter().filter(|(k, _)| counts[k] >= threshold).map(|(_, c)| c).collect()
}

/// One topic when the doctors' top-ranked diagnoses differ.
pub fn mechanical_divergence(doctors: &[&AgentResponse]) -> Vec<Divergence> {
    let positions: BTreeMap<AgentRole, String> = doctors
        .iter()
        .filter_map(|r| r.sections.differential.first().map(|d| (r.role.clone(), d.condition.clone())))
        .collect();
    let distinct: BTreeSet<String> = positions.values().map(|c| normalize(c)).collect();
    if distinct.len() > 1 {
        vec![Divergence { topic: DIVERGENCE_TOPIC.to_string(), positions }]
    } else {
        Vec::new()
    }
}

fn items(lines: Option<&Vec<String>>) -> Vec<String> {
    lines.into_iter().flatten().map(|l| strip_list_marker(l).trim().to_string()).filter(|l| !l.is_empty()).collect()
}

/// Parses the senior physician's answer and backs its consensus and
/// divergence with the mechanical computation. Returns `None` when the
/// answer has no FINAL DIAGNOSIS.
pub fn parse_synthesis(
    text: &str,
    doctors: &[&AgentResponse],
    contributing_roles: BTreeSet<AgentRole>,
) -> Option<SynthesisReport> {
    let sections = split_sections(text, &SYNTHESIS_HEADINGS);
    let final_diagnosis = sections.get("FINAL DIAGNOSIS")?.join(" ").trim().to_string();
    if final_diagnosis.is_empty() {
        return None;
    }
    let mut consensus = Vec::new();
    for item in items(sections.get("CONSENSUS AND DIVERGENCE")) {
        let lower = item.to_lowercase();
        if lower.starts_with("divergence") {
            continue;
        }
        let item = match lower.strip_prefix("consensus:") {
            Some(_) => item["consensus:".len()..].trim().to_string(),
            None => item,
        };
        consensus.push(item);
    }
    for c in mechanical_consensus(doctors) {
        if !consensus.iter().any(|x| normalize(x) == normalize(&c)) {
            consensus.push(c);
        }
    }
    let claims = sections
        .get("CLAIMS")
        .into_iter()
        .flatten()
        .filter_map(|l| parse_claim_line(l, &AgentRole::SeniorPhysician))
        .collect();
    Some(SynthesisReport {
        final_diagnosis,
        consensus,
        divergence: mechanical_divergence(doctors),
        care_plan: items(sections.get("CARE PLAN")),
        next_steps: items(sections.get("NEXT STEPS")),
        contributing_roles,
        claims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentStatus, DiagnosisItem};

    fn doctor(role: AgentRole, dx: &[&str]) -> AgentResponse {
        let mut r = AgentResponse::failed(role, AgentStatus::Ok, 0);
        r.sections.assessment = "a".into();
        r.sections.differential =
            dx.iter().map(|c| DiagnosisItem { condition: c.to_string(), reasoning: String::new() }).collect();
        r
    }

    #[test]
    fn unanimous_top_is_consensus() {
        let rs = [
            doctor(AgentRole::EmergencyMedicine, &["Endocarditis with septic emboli", "Pneumonia"]),
            doctor(AgentRole::Hospitalist, &["endocarditis with septic emboli", "Drug withdrawal"]),
            doctor(AgentRole::InfectiousDisease, &["Endocarditis with septic emboli", "Osteomyelitis"]),
            doctor(AgentRole::CriticalCare, &["Endocarditis with septic emboli.", "Pneumonia"]),
        ];
        let refs: Vec<_> = rs.iter().collect();
        assert_eq!(mechanical_consensus(&refs), ["Endocarditis with septic emboli", "Pneumonia"]);
        assert!(mechanical_divergence(&refs).is_empty());
    }

    #[test]
    fn single_doctor_degenerates() {
        let r = doctor(AgentRole::Hospitalist, &["Pneumonia", "UTI"]);
        assert_eq!(mechanical_consensus(&[&r]), ["Pneumonia"]);
        assert!(mechanical_divergence(&[&r]).is_empty());
    }

    #[test]
    fn disjoint_tops_diverge() {
        let a = doctor(AgentRole::EmergencyMedicine, &["Pneumonia"]);
        let b = doctor(AgentRole::CriticalCare, &["Endocarditis"]);
        let d = mechanical_divergence(&[&a, &b]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].positions.len(), 2);
        assert_eq!(d[0].positions[&AgentRole::CriticalCare], "Endocarditis");
        assert!(mechanical_consensus(&[&a, &b]).is_empty());
    }

    #[test]
    fn parses_and_backfills() {
        let a = doctor(AgentRole::EmergencyMedicine, &["Endocarditis"]);
        let b = doctor(AgentRole::Hospitalist, &["Endocarditis"]);
        let text = "FINAL DIAGNOSIS: Endocarditis\nCONSENSUS AND DIVERGENCE:\n- Consensus: needs echo\n- Divergence: none\nCARE PLAN:\n- cultures\nNEXT STEPS:\n- echo\nCLAIMS:\nCLAIM: Vital|heart_rate|118\n";
        let roles = BTreeSet::from([AgentRole::EmergencyMedicine, AgentRole::Hospitalist]);
        let s = parse_synthesis(text, &[&a, &b], roles).unwrap();
        assert_eq!(s.final_diagnosis, "Endocarditis");
        assert_eq!(s.consensus, ["needs echo", "Endocarditis"]);
        assert_eq!(s.care_plan, ["cultures"]);
        assert_eq!(s.next_steps, ["echo"]);
        assert_eq!(s.claims.len(), 1);
        assert!(parse_synthesis("CARE PLAN:\n- x", &[&a], BTreeSet::new()).is_none());
    }
}
