use std::fmt::Write;

use super::{Housing, Instant, Insurance, PatientCase, SpO2Scale, SubstanceUse};

pub const SUMMARY_BEGIN: &str = "=== CASE SUMMARY ===";
pub const SUMMARY_END: &str = "=== END CASE SUMMARY ===";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummaryError {
    #[error("no vitals recorded at or before {0}")]
    AsOfBeforeAllData(Instant),
}

/// Canonical text rendering of a case, inserted into every agent prompt.
///
/// Sections appear in a fixed order; labs are sorted by timestamp then name.
/// The vitals block shows the latest observation at or before `as_of`.
pub fn render_case_summary(case: &PatientCase, as_of: Instant) -> Result<String, SummaryError> {
    let vitals = case.vitals_as_of(as_of).ok_or(SummaryError::AsOfBeforeAllData(as_of))?;

    let mut out = String::new();
    // Writes to a String cannot fail.
    let _ = writeln!(out, "{SUMMARY_BEGIN}");
    let _ = writeln!(out, "CASE ID: {}", case.case_id);
    let _ = writeln!(out, "AS OF: {}", as_of.to_rfc3339());
    let _ = writeln!(out, "PATIENT: {}-year-old {:?}", case.demographics.age, case.demographics.sex);
    let _ = writeln!(out, "CHIEF COMPLAINT: {}", one_line(&case.chief_complaint));
    let _ = writeln!(out, "HISTORY: {}", one_line(&case.history));

    let _ = writeln!(out, "VITALS ({}):", vitals.timestamp.to_rfc3339());
    let _ = writeln!(out, "  respiration_rate: {} breaths/min", vitals.respiration_rate);
    let scale = match vitals.spo2_scale {
        SpO2Scale::Scale1 => "Scale1",
        SpO2Scale::Scale2 => "Scale2",
    };
    let oxygen = if vitals.on_supplemental_oxygen { "on supplemental oxygen" } else { "on room air" };
    let _ = writeln!(out, "  spo2: {} % ({scale}, {oxygen})", vitals.spo2);
    let _ = writeln!(out, "  systolic_bp: {} mmHg", vitals.systolic_bp);
    let _ = writeln!(out, "  heart_rate: {} beats/min", vitals.heart_rate);
    let _ = writeln!(out, "  consciousness: {:?}", vitals.consciousness);
    let _ = writeln!(out, "  temperature: {} C", vitals.temperature);

    let _ = writeln!(out, "LABS:");
    let mut labs: Vec<_> = case.labs.iter().collect();
    labs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.name.cmp(&b.name)));
    if labs.is_empty() {
        let _ = writeln!(out, "  none recorded");
    }
    for lab in labs {
        let _ = writeln!(
            out,
            "  {}: {} {} @ {}",
            one_line(&lab.name),
            lab.value,
            one_line(&lab.unit),
            lab.timestamp.to_rfc3339()
        );
    }

    let _ = writeln!(out, "MEDICATIONS:");
    if case.medications.is_empty() {
        let _ = writeln!(out, "  none recorded");
    }
    for med in &case.medications {
        let _ = writeln!(
            out,
            "  {}: {} {} {} {}",
            one_line(&med.name),
            med.dose,
            one_line(&med.dose_unit),
            one_line(&med.route),
            one_line(&med.frequency)
        );
    }

    let plan = case.current_plan.as_deref().map(one_line);
    let _ = writeln!(out, "CURRENT PLAN: {}", plan.as_deref().unwrap_or("none recorded"));

    let sdoh = &case.sdoh;
    let _ = writeln!(out, "SDOH:");
    let _ = writeln!(out, "  housing: {:?}", sdoh.housing);
    let _ = writeln!(out, "  substance_use: {:?}", sdoh.substance_use);
    let _ = writeln!(out, "  insurance: {:?}", sdoh.insurance);
    let _ = writeln!(out, "  support: {}", one_line(&sdoh.support));
    let flags = sdoh_flags(case);
    let _ = writeln!(out, "  flags: {}", if flags.is_empty() { "none".to_string() } else { flags.join(", ") });
    let _ = writeln!(out, "{SUMMARY_END}");
    Ok(out)
}

/// Social risk factors worth surfacing to the team.
pub fn sdoh_flags(case: &PatientCase) -> Vec<&'static str> {
    let mut flags = Vec::new();
    match case.sdoh.housing {
        Housing::Homeless => flags.push("homelessness"),
        Housing::Unstable => flags.push("unstable housing"),
        Housing::Unknown => flags.push("housing not assessed"),
        Housing::Stable => {}
    }
    match case.sdoh.substance_use {
        SubstanceUse::Active => flags.push("active substance use"),
        SubstanceUse::InRecovery => flags.push("substance use in recovery"),
        SubstanceUse::Unknown => flags.push("substance use not assessed"),
        SubstanceUse::None => {}
    }
    if case.sdoh.insurance == Insurance::Uninsured {
        flags.push("uninsured");
    }
    flags
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
