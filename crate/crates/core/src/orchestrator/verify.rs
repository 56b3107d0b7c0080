//! Record-grounded claim checking.

use crate::domain::{AgentResponse, Claim, ClaimSubject, PatientCase, VitalSigns};
use crate::rag::RetrievedChunk;

use super::report::{FlagReason, SynthesisReport, Verdict, VerificationFlag, VerificationReport};

/// Lowercase alphanumeric words joined by single spaces.
pub fn normalize(s: &str) -> String {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

const VITAL_ALIASES: [(&str, &[&str]); 6] = [
    ("heart_rate", &["heart rate", "hr", "pulse", "pulse rate"]),
    ("respiration_rate", &["respiration rate", "respiratory rate", "rr", "resp rate"]),
    ("spo2", &["spo2", "oxygen saturation", "o2 sat", "sats", "sao2"]),
    ("systolic_bp", &["systolic bp", "systolic blood pressure", "sbp", "systolic", "blood pressure", "bp"]),
    ("temperature", &["temperature", "temp", "t"]),
    ("consciousness", &["consciousness", "avpu", "acvpu", "level of consciousness"]),
];

const LAB_ALIASES: [&[&str]; 6] = [
    &["white blood cell count", "wbc", "white count", "white blood cells", "leukocytes"],
    &["lactate", "lactic acid", "serum lactate"],
    &["creatinine", "cr", "serum creatinine", "creat"],
    &["platelets", "platelet count", "plt"],
    &["hemoglobin", "hgb", "hb", "haemoglobin"],
    &["procalcitonin", "pct"],
];

const MED_ALIASES: [&[&str]; 3] = [
    &["piperacillin tazobactam", "pip tazo", "piperacillin", "zosyn"],
    &["vancomycin", "vanc", "vanco"],
    &["lactated ringer s", "lactated ringers", "ringer s lactate", "lr", "hartmann s solution"],
];

fn vital_field(name: &str) -> Option<&'static str> {
    let n = normalize(name);
    VITAL_ALIASES
        .iter()
        .find(|(field, aliases)| normalize(field) == n || aliases.contains(&n.as_str()))
        .map(|(field, _)| *field)
}

/// True when two names refer to the same thing, directly or via an alias
/// group.
fn same_name(a: &str, b: &str, groups: &[&[&str]]) -> bool {
    let (a, b) = (normalize(a), normalize(b));
    a == b || groups.iter().any(|g| g.contains(&a.as_str()) && g.contains(&b.as_str()))
}

fn within_tolerance(claimed: f64, record: f64) -> bool {
    (claimed - record).abs() <= (0.02 * record.abs()).max(0.1)
}

fn vital_value(v: &VitalSigns, field: &str) -> f64 {
    match field {
        "heart_rate" => f64::from(v.heart_rate),
        "respiration_rate" => f64::from(v.respiration_rate),
        "spo2" => f64::from(v.spo2),
        "systolic_bp" => f64::from(v.systolic_bp),
        "temperature" => v.temperature.celsius(),
        _ => f64::NAN,
    }
}

/// Compares a claimed number against every observation of the item. A
/// claim matching any observation passes, since agents may cite an earlier
/// reading; a mismatch reports the latest value.
fn check_numeric(claim: &Claim, observations: &[f64]) -> Option<FlagReason> {
    let latest = *observations.last()?;
    match claim.numeric_value {
        Some(x) if observations.iter().any(|r| within_tolerance(x, *r)) => None,
        _ => Some(FlagReason::ValueMismatch { record_value: latest }),
    }
}

/// Checks one claim against the record (and, for history facts, the
/// retrieved context). `None` means the claim is supported.
pub fn check_claim(claim: &Claim, case: &PatientCase, context: &[RetrievedChunk]) -> Option<FlagReason> {
    match claim.subject {
        ClaimSubject::Vital => {
            let Some(field) = vital_field(&claim.name) else { return Some(FlagReason::NotInRecord) };
            let mut vitals: Vec<&VitalSigns> = case.vitals.iter().collect();
            vitals.sort_by_key(|v| v.timestamp);
            if vitals.is_empty() {
                return Some(FlagReason::NotInRecord);
            }
            if field == "consciousness" {
                let latest = vitals.last().map(|v| format!("{:?}", v.consciousness)).unwrap_or_default();
                let ok = vitals
                    .iter()
                    .any(|v| format!("{:?}", v.consciousness).eq_ignore_ascii_case(claim.asserted_value.trim()));
                return (!ok).then(|| FlagReason::ValueMismatch { record_value: consciousness_score(&latest) });
            }
            let observations: Vec<f64> = vitals.iter().map(|v| vital_value(v, field)).collect();
            check_numeric(claim, &observations)
        }
        ClaimSubject::Lab => {
            let mut labs: Vec<_> = case.labs.iter().filter(|l| same_name(&l.name, &claim.name, &LAB_ALIASES)).collect();
            if labs.is_empty() {
                return Some(FlagReason::NotInRecord);
            }
            labs.sort_by_key(|l| l.timestamp);
            check_numeric(claim, &labs.iter().map(|l| l.value).collect::<Vec<_>>())
        }
        ClaimSubject::Medication => {
            let meds: Vec<_> =
                case.medications.iter().filter(|m| same_name(&m.name, &claim.name, &MED_ALIASES)).collect();
            if meds.is_empty() {
                return Some(FlagReason::NotInRecord);
            }
            // A claim that names the drug without a dose only asserts the order.
            claim.numeric_value?;
            check_numeric(claim, &meds.iter().map(|m| m.dose).collect::<Vec<_>>())
        }
        ClaimSubject::HistoryFact => {
            let needle = normalize(&claim.asserted_value);
            if needle.is_empty() {
                return Some(FlagReason::UnsupportedByContext);
            }
            let haystacks = [normalize(&case.history), normalize(&case.chief_complaint)];
            let found = haystacks.iter().any(|h| h.contains(&needle))
                || context.iter().any(|c| normalize(&c.chunk.text).contains(&needle));
            (!found).then_some(FlagReason::UnsupportedByContext)
        }
    }
}

/// ACVPU position (0 = Alert) so a consciousness mismatch still reports a number.
fn consciousness_score(level: &str) -> f64 {
    ["Alert", "Confusion", "Voice", "Pain", "Unresponsive"].iter().position(|l| *l == level).unwrap_or(0) as f64
}

/// Checks every claim in the Ok responses and in the synthesis.
pub fn verify(
    synthesis: Option<&SynthesisReport>,
    responses: &[AgentResponse],
    case: &PatientCase,
    context: &[RetrievedChunk],
) -> VerificationReport {
    let claims = responses
        .iter()
        .filter(|r| r.is_ok())
        .flat_map(|r| r.sections.claims.iter())
        .chain(synthesis.into_iter().flat_map(|s| s.claims.iter()));
    let mut checked = 0;
    let mut flags = Vec::new();
    for claim in claims {
        checked += 1;
        if let Some(reason) = check_claim(claim, case, context) {
            flags.push(VerificationFlag { claim: claim.clone(), reason });
        }
    }
    let verdict = if flags.is_empty() { Verdict::Clean } else { Verdict::Flagged };
    VerificationReport { checked, flags, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AgentRole;
    use crate::fixtures;

    fn claim(subject: ClaimSubject, name: &str, value: &str) -> Claim {
        Claim::new(subject, name, value, AgentRole::Hospitalist)
    }

    fn check(c: Claim) -> Option<FlagReason> {
        check_claim(&c, &fixtures::endocarditis(), &[])
    }

    #[test]
    fn echoing_the_record_is_clean() {
        assert_eq!(check(claim(ClaimSubject::Vital, "heart_rate", "118")), None);
        assert_eq!(check(claim(ClaimSubject::Vital, "HR", "118 bpm")), None);
        assert_eq!(check(claim(ClaimSubject::Vital, "temperature", "39.2 C")), None);
        assert_eq!(check(claim(ClaimSubject::Vital, "consciousness", "alert")), None);
        assert_eq!(check(claim(ClaimSubject::Lab, "creatinine", "1.1 mg/dL")), None);
        assert_eq!(check(claim(ClaimSubject::Lab, "WBC", "18.2")), None);
        assert_eq!(check(claim(ClaimSubject::Lab, "lactic acid", "3.1")), None, "earlier reading");
        assert_eq!(check(claim(ClaimSubject::Medication, "vancomycin", "1250 mg")), None);
        assert_eq!(check(claim(ClaimSubject::Medication, "pip-tazo", "4.5 g")), None);
        assert_eq!(check(claim(ClaimSubject::HistoryFact, "history", "injection drug use")), None);
    }

    #[test]
    fn mismatches_report_the_record_value() {
        assert_eq!(
            check(claim(ClaimSubject::Lab, "creatinine", "4.0")),
            Some(FlagReason::ValueMismatch { record_value: 1.1 })
        );
        assert_eq!(
            check(claim(ClaimSubject::Vital, "heart_rate", "158")),
            Some(FlagReason::ValueMismatch { record_value: 118.0 })
        );
        assert_eq!(
            check(claim(ClaimSubject::Lab, "lactate", "4.6 mmol/L")),
            Some(FlagReason::ValueMismatch { record_value: 2.6 })
        );
        assert_eq!(
            check(claim(ClaimSubject::Vital, "heart_rate", "fast")),
            Some(FlagReason::ValueMismatch { record_value: 118.0 })
        );
    }

    #[test]
    fn tolerance_is_two_percent_or_a_tenth() {
        assert!(within_tolerance(1.2, 1.1));
        assert!(!within_tolerance(1.25, 1.1));
        assert!(within_tolerance(1275.0, 1250.0));
        assert!(!within_tolerance(1276.0, 1250.0));
    }

    #[test]
    fn absent_items() {
        assert_eq!(check(claim(ClaimSubject::Medication, "meropenem", "1 g")), Some(FlagReason::NotInRecord));
        assert_eq!(check(claim(ClaimSubject::Lab, "troponin", "0.5")), Some(FlagReason::NotInRecord));
        assert_eq!(check(claim(ClaimSubject::Vital, "pupil size", "3")), Some(FlagReason::NotInRecord));
        assert_eq!(
            check(claim(ClaimSubject::HistoryFact, "history", "Prior aortic valve replacement")),
            Some(FlagReason::UnsupportedByContext)
        );
    }

    #[test]
    fn verdict_tracks_flags() {
        let case = fixtures::endocarditis();
        let mut r = crate::domain::AgentResponse::failed(AgentRole::Nurse, crate::domain::AgentStatus::Ok, 1);
        r.sections.claims = vec![claim(ClaimSubject::Vital, "heart_rate", "118")];
        let report = verify(None, std::slice::from_ref(&r), &case, &[]);
        assert_eq!((report.checked, report.verdict), (1, Verdict::Clean));
        r.sections.claims.push(claim(ClaimSubject::Lab, "creatinine", "4.0"));
        let report = verify(None, std::slice::from_ref(&r), &case, &[]);
        assert_eq!((report.checked, report.verdict, report.flags.len()), (2, Verdict::Flagged, 1));
        r.status = crate::domain::AgentStatus::Malformed;
        assert_eq!(verify(None, &[r], &case, &[]).checked, 0, "only Ok responses count");
    }
}
