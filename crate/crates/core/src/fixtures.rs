//! Built-in demo cases and a small sepsis reference corpus.

use crate::domain::{CaseDocument, PatientCase};

const ENDOCARDITIS: &str = include_str!("../fixtures/endocarditis.json");
const PNEUMONIA: &str = include_str!("../fixtures/pneumonia.json");

const CORPUS: [(&str, &str, &str); 4] = [
    (
        "sepsis-initial-management",
        "Initial management of suspected sepsis",
        include_str!("../fixtures/corpus/sepsis-initial-management.txt"),
    ),
    (
        "infective-endocarditis",
        "Infective endocarditis in people who inject drugs",
        include_str!("../fixtures/corpus/infective-endocarditis.txt"),
    ),
    (
        "early-warning-monitoring",
        "Monitoring acutely ill adults with an early warning score",
        include_str!("../fixtures/corpus/early-warning-monitoring.txt"),
    ),
    (
        "social-needs-discharge",
        "Addressing social needs and discharge barriers",
        include_str!("../fixtures/corpus/social-needs-discharge.txt"),
    ),
];

/// Injection-drug-use endocarditis with septic emboli; homeless, active use.
pub fn endocarditis() -> PatientCase {
    CaseDocument::from_json(ENDOCARDITIS).expect("bundled fixture is valid")
}

/// Community-acquired pneumonia in an older adult with stable housing.
pub fn pneumonia() -> PatientCase {
    CaseDocument::from_json(PNEUMONIA).expect("bundled fixture is valid")
}

pub fn by_name(name: &str) -> Option<PatientCase> {
    match name {
        "endocarditis" => Some(endocarditis()),
        "pneumonia" => Some(pneumonia()),
        _ => None,
    }
}

pub const NAMES: [&str; 2] = ["endocarditis", "pneumonia"];

/// `(doc_id, title, body)` for each reference document.
pub fn corpus() -> impl Iterator<Item = (&'static str, &'static str, &'static str)> {
    CORPUS.into_iter()
}
