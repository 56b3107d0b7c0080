//! The bundled mock script: one response template per (role, mode, task).

use std::collections::BTreeMap;

use super::MockKey;
use crate::domain::{AgentRole, ConsultMode};
use crate::gateway::AgentTask;

struct Voice {
    role: AgentRole,
    assessment: &'static str,
    leading_reason: &'static str,
    alt_reason: &'static str,
    third: &'static str,
    plan: &'static [&'static str],
    /// `(category, finding)` pairs raised in care-gap reviews.
    gaps: &'static [(&'static str, &'static str)],
}

const VOICES: [Voice; 10] = [
    Voice {
        role: AgentRole::EmergencyMedicine,
        assessment: "{patient} with {cc_lower}. Heart rate {hr}/min, temperature {temp} C and systolic pressure {sbp} mmHg meet sepsis criteria at first contact; {key_lab_name} is {key_lab_value}.",
        leading_reason: "fever and tachycardia with the presenting history make this the most likely source",
        alt_reason: "respiratory findings keep a primary lung infection on the list",
        third: "Drug-related or toxic syndrome | tachycardia can be driven by intoxication or withdrawal and must be excluded",
        plan: &[
            "Draw two sets of blood cultures before further antibiotic doses",
            "Give balanced crystalloid boluses and reassess perfusion after each",
            "Start or continue broad-spectrum antibiotics within one hour of recognition",
        ],
        gaps: &[
            ("Diagnosis", "Confirm two sets of blood cultures were drawn before antibiotics"),
            ("Monitoring", "Repeat lactate within 6 hours of the initial measurement"),
        ],
    },
    Voice {
        role: AgentRole::Hospitalist,
        assessment: "{patient} admitted with {cc_lower}. Current heart rate {hr}/min and temperature {temp} C; NEWS2 {news_total} places the patient at {news_band} risk on the ward.",
        leading_reason: "the history and examination findings fit best and explain the systemic response",
        alt_reason: "possible but does not explain all of the findings",
        third: "Acute kidney injury from hypoperfusion | a complication to track rather than a competing diagnosis",
        plan: &[
            "Admit to a monitored bed with escalation criteria documented",
            "Trend {key_lab_name} and renal function daily",
            "Coordinate imaging and consult requests early in the admission",
        ],
        gaps: &[
            ("Monitoring", "Document explicit escalation criteria for the ward team"),
            ("Coordination", "Name a single accountable physician for daily plan updates"),
        ],
    },
    Voice {
        role: AgentRole::InfectiousDisease,
        assessment: "Presentation with {cc_lower}, temperature {temp} C and {key_lab_name} {key_lab_value} indicates a serious bacterial infection; source identification drives antimicrobial choice.",
        leading_reason: "the exposure history and findings point to a bloodstream source",
        alt_reason: "less likely as the sole source but cultures should cover it",
        third: "Skin and soft tissue infection | inspect all access and injection sites",
        plan: &[
            "Continue {first_med} {first_med_dose} pending culture results",
            "Tailor therapy to susceptibilities and plan total duration from the first negative culture",
            "Pursue source control as soon as the source is identified",
        ],
        gaps: &[
            ("Diagnosis", "Confirm two sets of blood cultures were drawn before antibiotics"),
            ("Treatment", "Set a 48 to 72 hour antibiotic review date against culture results"),
        ],
    },
    Voice {
        role: AgentRole::CriticalCare,
        assessment: "Systolic pressure {sbp} mmHg with heart rate {hr}/min and {key_lab_name} {key_lab_value} indicates hypoperfusion risk; respiratory rate {rr}/min with SpO2 {spo2}% needs close watching.",
        leading_reason: "consistent with the source of the septic physiology",
        alt_reason: "would also explain the hypoxemia",
        third: "Septic shock | vasopressor requirement after adequate fluids would confirm it",
        plan: &[
            "Target mean arterial pressure of at least 65 mmHg",
            "Start norepinephrine if hypotension persists after 30 mL/kg of crystalloid",
            "Transfer to the ICU if NEWS2 rises or vasopressors are needed",
        ],
        gaps: &[
            ("Monitoring", "Repeat lactate within 6 hours of the initial measurement"),
            ("Treatment", "Define a vasopressor threshold and ICU transfer trigger"),
        ],
    },
    Voice {
        role: AgentRole::SeniorPhysician,
        assessment: "Reviewing the record: heart rate {hr}/min, temperature {temp} C, {key_lab_name} {key_lab_value}, NEWS2 {news_total} ({news_band}). The working diagnosis is {leading_dx_lower}.",
        leading_reason: "best supported by the record as a whole",
        alt_reason: "remains in the differential until imaging and cultures return",
        third: "Noninfectious inflammatory process | unlikely given the fever curve",
        plan: &[
            "Confirm the working diagnosis with cultures and targeted imaging",
            "Keep one team plan with named owners for each action",
        ],
        gaps: &[("Coordination", "Hold a daily team huddle to reconcile recommendations")],
    },
    Voice {
        role: AgentRole::Nurse,
        assessment: "Heart rate {hr}/min, temperature {temp} C, respiratory rate {rr}/min, SpO2 {spo2}%. NEWS2 {news_total} calls for close observation.",
        leading_reason: "the team's working diagnosis, noted for nursing care planning",
        alt_reason: "noted",
        third: "Dehydration | monitor intake and output",
        plan: &[
            "Record observations at the frequency the NEWS2 band requires",
            "Keep a strict fluid balance chart",
            "Escalate to the physician if NEWS2 rises by two or more points",
        ],
        gaps: &[
            ("Monitoring", "Set observation frequency to match the NEWS2 band"),
            ("Coordination", "Add patient education on warning symptoms to the nursing plan"),
        ],
    },
    Voice {
        role: AgentRole::Pharmacist,
        assessment: "Current orders include {first_med} {first_med_dose}. Dosing must match renal function and the antimicrobial plan.",
        leading_reason: "the regimen should cover this diagnosis",
        alt_reason: "the current regimen also covers this",
        third: "Adverse drug reaction | review new medications for fever or rash",
        plan: &[
            "Check {first_med} dose against weight and renal function",
            "Order therapeutic drug monitoring where applicable",
            "Screen for interactions and plan de-escalation",
        ],
        gaps: &[
            ("Treatment", "Review antimicrobial dosing against current renal function"),
            ("Monitoring", "Schedule therapeutic drug monitoring for {first_med}"),
        ],
    },
    Voice {
        role: AgentRole::SocialWorker,
        assessment: "Social history: housing {housing}, substance use {substance_use}, insurance {insurance}. Support: {support}. Flags: {sdoh_flags}.",
        leading_reason: "medical diagnosis per team; social factors shape the care plan",
        alt_reason: "noted",
        third: "Social barriers to care | housing, substance use and support affect discharge",
        plan: &[
            "Complete a social needs assessment with the patient",
            "Connect the patient with services that match each flagged need",
            "Share findings with the case manager for discharge planning",
        ],
        gaps: &[("Coordination", "Complete a social needs assessment covering housing and substance use")],
    },
    Voice {
        role: AgentRole::PatientSafetyQI,
        assessment: "SEP-1 bundle review: {key_lab_name} measured ({key_lab_value}); cultures, antibiotics, fluids and repeat lactate need documented times.",
        leading_reason: "bundle applies regardless of source",
        alt_reason: "bundle applies",
        third: "Hospital-acquired infection risk | line and catheter days add risk",
        plan: &[
            "Document time zero and each bundle element",
            "Review line necessity daily to prevent bloodstream infection",
            "Add fall and pressure injury precautions",
        ],
        gaps: &[
            ("Monitoring", "Repeat lactate within 6 hours of the initial measurement"),
            ("Coordination", "Document bundle element times for SEP-1 reporting"),
        ],
    },
    Voice {
        role: AgentRole::RiskPrediction,
        assessment: "NEWS2 aggregate {news_total}, {news_band} risk. Drivers: respiratory rate {rr}/min, SpO2 {spo2}% ({spo2_detail}), systolic {sbp} mmHg, heart rate {hr}/min, temperature {temp} C.",
        leading_reason: "score is consistent with the team's working diagnosis",
        alt_reason: "score does not discriminate between sources",
        third: "Clinical deterioration | score trend matters more than a single value",
        plan: &["{news_response}", "Recalculate NEWS2 with every new set of observations"],
        gaps: &[("Monitoring", "Recalculate NEWS2 with every new set of observations")],
    },
];

fn mode_line(mode: ConsultMode) -> Option<&'static str> {
    match mode {
        ConsultMode::DifferentialDx => Some("Confirm or exclude {leading_dx_lower} before narrowing therapy"),
        ConsultMode::AntibioticMgmt => {
            Some("Reassess {first_med} at 48 to 72 hours against culture and susceptibility results")
        }
        ConsultMode::PharmacyAssessment => {
            Some("Review {first_med} {first_med_dose} against renal function and levels")
        }
        ConsultMode::TreatmentPlan => Some("Set long-term follow-up once the acute phase resolves"),
        _ => None,
    }
}

fn respond_template(v: &Voice, mode: ConsultMode) -> String {
    let mut t = format!("ASSESSMENT: {}\nDIFFERENTIAL:\n", v.assessment);
    t.push_str(&format!("1. {{leading_dx}} | {}\n", v.leading_reason));
    t.push_str(&format!("2. {{alt_dx}} | {}\n", v.alt_reason));
    t.push_str(&format!("3. {}\n", v.third));
    t.push_str("PLAN:\n");
    if mode == ConsultMode::CareGap {
        for (category, finding) in v.gaps {
            t.push_str(&format!("- [{category}] {finding}\n"));
        }
    } else {
        if let Some(line) = mode_line(mode) {
            t.push_str(&format!("- {line}\n"));
        }
        for p in v.plan {
            t.push_str(&format!("- {p}\n"));
        }
    }
    t.push_str("CLAIMS:\n{claims}\n");
    t
}

const SYNTHESIS: &str = "\
FINAL DIAGNOSIS: {team_dx}
CONSENSUS AND DIVERGENCE:
- {team_dx}
CARE PLAN:
{team_plan}
NEXT STEPS:
- Reassess vital signs and NEWS2 (currently {news_total}, {news_band} risk) at the required frequency
- Review culture results at 48 to 72 hours and narrow therapy
- Reconvene the team if the patient deteriorates
CLAIMS:
{claims}
";

const SPECIALIST: &str = "\
ASSESSMENT: {specialty} consult for {patient} with {cc_lower}. Heart rate {hr}/min, temperature {temp} C, {key_lab_name} {key_lab_value}. Question addressed in the consult context: {question}
DIFFERENTIAL:
1. {leading_dx} | fits the presentation from a {specialty_lower} perspective
2. {alt_dx} | less likely but not excluded
PLAN:
- {specialty}-directed examination and targeted diagnostics for the question asked
- Communicate recommendations to the primary team with explicit follow-up timing
- Reassess once culture and imaging results return
CLAIMS:
{claims}
";

const NAVIGATOR: &str = "\
You came to the hospital because of {cc_lower}. Your care team believes the most likely cause is {final_dx_lower}.

This means an infection is affecting your whole body. The team is giving you medicine through a drip to fight it, and fluids to support your blood pressure.

Nurses will check your heart rate, breathing and temperature often. Please tell them right away if you feel more short of breath, dizzy or confused.

The team will explain each test result as it comes back, and you can ask questions at any time.
";

const DISCHARGE: &str = "\
DISCHARGE READINESS: Not ready while treatment for {final_dx_lower} continues.
BARRIERS:
- Follow-up: needs a confirmed appointment and transportation to reach it
SERVICES:
- Assess need for home health or outpatient infusion if intravenous antibiotics continue
- Support: {support}
FOLLOW-UP:
- Primary care review within 7 days of discharge
";

/// Every core role answers every mode; the senior physician also
/// synthesizes every team mode; specialists, the navigator and the case
/// manager answer their own modes.
pub fn default_rules() -> BTreeMap<MockKey, String> {
    let mut rules = BTreeMap::new();
    for v in &VOICES {
        for mode in ConsultMode::ALL {
            rules.insert(MockKey::new(&v.role, mode, AgentTask::Respond), respond_template(v, mode));
        }
    }
    for mode in ConsultMode::TEAM {
        rules.insert(MockKey::new(&AgentRole::SeniorPhysician, mode, AgentTask::Synthesize), SYNTHESIS.to_string());
    }
    rules.insert(MockKey::any_specialist(ConsultMode::SpecialistConsult, AgentTask::Respond), SPECIALIST.to_string());
    rules.insert(
        MockKey::new(&AgentRole::PatientNavigator, ConsultMode::NavigatorExplain, AgentTask::Respond),
        NAVIGATOR.to_string(),
    );
    rules.insert(
        MockKey::new(&AgentRole::CaseManager, ConsultMode::DischargeSummary, AgentTask::Respond),
        DISCHARGE.to_string(),
    );
    rules
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_core_role_and_mode_has_a_rule() {
        let rules = default_rules();
        for role in AgentRole::CORE_SEPSIS.iter() {
            for mode in ConsultMode::ALL {
                assert!(rules.contains_key(&MockKey::new(role, mode, AgentTask::Respond)), "{role} {mode}");
            }
        }
        assert_eq!(VOICES.iter().map(|v| v.role.clone()).collect::<Vec<_>>(), AgentRole::CORE_SEPSIS.to_vec());
    }
}
