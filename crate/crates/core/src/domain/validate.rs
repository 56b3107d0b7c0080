use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::PatientCase;

const MIN_TEMPERATURE_TENTHS: i32 = 200;
const MAX_TEMPERATURE_TENTHS: i32 = 450;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Violation {
    /// Field path, e.g. `vitals[2].spo2`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: String, message: impl Into<String>) {
        self.violations.push(Violation { path, message: message.into() });
    }
}

/// Lists every invariant violation in `case`. An empty report means valid.
pub fn validate_case(case: &PatientCase) -> ValidationReport {
    let mut report = ValidationReport::default();

    if case.case_id.0.trim().is_empty() {
        report.push("case_id".into(), "must be nonempty");
    }

    for (i, v) in case.vitals.iter().enumerate() {
        if v.spo2 > 100 {
            report.push(format!("vitals[{i}].spo2"), format!("{} outside 0..=100", v.spo2));
        }
        let t = v.temperature.tenths();
        if !(MIN_TEMPERATURE_TENTHS..=MAX_TEMPERATURE_TENTHS).contains(&t) {
            report.push(format!("vitals[{i}].temperature"), format!("{} outside 20.0..=45.0", v.temperature));
        }
    }
    for (i, pair) in case.vitals.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            report.push(
                format!("vitals[{}].timestamp", i + 1),
                format!("{} not after previous observation {}", pair[1].timestamp, pair[0].timestamp),
            );
        }
    }

    for (i, lab) in case.labs.iter().enumerate() {
        if lab.name.trim().is_empty() {
            report.push(format!("labs[{i}].name"), "must be nonempty");
        }
        if lab.unit.trim().is_empty() {
            report.push(format!("labs[{i}].unit"), "must be nonempty");
        }
        if !lab.value.is_finite() {
            report.push(format!("labs[{i}].value"), "must be finite");
        }
    }

    for (i, med) in case.medications.iter().enumerate() {
        if med.name.trim().is_empty() {
            report.push(format!("medications[{i}].name"), "must be nonempty");
        }
        if !med.dose.is_finite() || med.dose < 0.0 {
            report.push(format!("medications[{i}].dose"), "must be a finite non-negative number");
        }
    }

    report
}
