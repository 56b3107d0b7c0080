use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use schemars::{json_schema, JsonSchema, Schema, SchemaGenerator};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An agent's clinical role.
///
/// Serialized as a plain string (`"Hospitalist"`, `"Specialist:Nephrologist"`)
/// so roles can key JSON maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentRole {
    EmergencyMedicine,
    Hospitalist,
    InfectiousDisease,
    CriticalCare,
    SeniorPhysician,
    Nurse,
    Pharmacist,
    SocialWorker,
    PatientSafetyQI,
    RiskPrediction,
    PatientNavigator,
    CaseManager,
    Specialist(String),
}

const FIXED: [AgentRole; 12] = [
    AgentRole::EmergencyMedicine,
    AgentRole::Hospitalist,
    AgentRole::InfectiousDisease,
    AgentRole::CriticalCare,
    AgentRole::SeniorPhysician,
    AgentRole::Nurse,
    AgentRole::Pharmacist,
    AgentRole::SocialWorker,
    AgentRole::PatientSafetyQI,
    AgentRole::RiskPrediction,
    AgentRole::PatientNavigator,
    AgentRole::CaseManager,
];

impl AgentRole {
    /// The ten always-consulted sepsis team roles, in fan-out order.
    pub const CORE_SEPSIS: [AgentRole; 10] = [
        AgentRole::EmergencyMedicine,
        AgentRole::Hospitalist,
        AgentRole::InfectiousDisease,
        AgentRole::CriticalCare,
        AgentRole::SeniorPhysician,
        AgentRole::Nurse,
        AgentRole::Pharmacist,
        AgentRole::SocialWorker,
        AgentRole::PatientSafetyQI,
        AgentRole::RiskPrediction,
    ];

    pub fn specialist(name: &str) -> Self {
        AgentRole::Specialist(name.trim().to_string())
    }

    /// Physician agents: the four specialty doctors, the senior physician and
    /// any consulted specialist.
    pub fn is_physician(&self) -> bool {
        matches!(
            self,
            AgentRole::EmergencyMedicine
                | AgentRole::Hospitalist
                | AgentRole::InfectiousDisease
                | AgentRole::CriticalCare
                | AgentRole::SeniorPhysician
                | AgentRole::Specialist(_)
        )
    }

    pub fn key(&self) -> Cow<'_, str> {
        match self {
            AgentRole::EmergencyMedicine => "EmergencyMedicine".into(),
            AgentRole::Hospitalist => "Hospitalist".into(),
            AgentRole::InfectiousDisease => "InfectiousDisease".into(),
            AgentRole::CriticalCare => "CriticalCare".into(),
            AgentRole::SeniorPhysician => "SeniorPhysician".into(),
            AgentRole::Nurse => "Nurse".into(),
            AgentRole::Pharmacist => "Pharmacist".into(),
            AgentRole::SocialWorker => "SocialWorker".into(),
            AgentRole::PatientSafetyQI => "PatientSafetyQI".into(),
            AgentRole::RiskPrediction => "RiskPrediction".into(),
            AgentRole::PatientNavigator => "PatientNavigator".into(),
            AgentRole::CaseManager => "CaseManager".into(),
            AgentRole::Specialist(name) => format!("Specialist:{name}").into(),
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown agent role {0:?}")]
pub struct ParseRoleError(pub String);

impl FromStr for AgentRole {
    type Err = ParseRoleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(name) = s.strip_prefix("Specialist:") {
            if name.trim().is_empty() {
                return Err(ParseRoleError(s.to_string()));
            }
            return Ok(AgentRole::specialist(name));
        }
        FIXED.iter().find(|r| r.key() == s).cloned().ok_or_else(|| ParseRoleError(s.to_string()))
    }
}

impl Serialize for AgentRole {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for AgentRole {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl JsonSchema for AgentRole {
    fn schema_name() -> Cow<'static, str> {
        "AgentRole".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        json_schema!({
            "type": "string",
            "pattern": "^(EmergencyMedicine|Hospitalist|InfectiousDisease|CriticalCare|SeniorPhysician|Nurse|Pharmacist|SocialWorker|PatientSafetyQI|RiskPrediction|PatientNavigator|CaseManager|Specialist:.+)$"
        })
    }
}
