//! Agent profiles, the core sepsis team, the specialist consult roster and
//! the structured question templates.
//!
//! The registry is loaded from a JSON document (see `config/default_roster.json`
//! for the bundled default and `docs/roster-schema.md` for the format) and is
//! read-only afterwards.

mod prompt;
mod slots;

use std::collections::BTreeSet;
use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{AgentRole, ConsultMode, PatientCase};

pub use prompt::{
    build_patient_facing_prompt, build_system_prompt, build_user_prompt, OUTPUT_SCHEMA, PATIENT_FACING_OUTPUT,
};
pub use slots::{fill_slots, UnresolvedSlot};

const DEFAULT_ROSTER: &str = include_str!("../../config/default_roster.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Team {
    CoreSepsis,
    ConsultRoster,
    Support,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum ReasoningStyle {
    ChainOfThought,
    ReAct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AgentProfile {
    pub role: AgentRole,
    pub display_name: String,
    /// Template with `{role_charter}`, `{shared_goals}`, `{output_schema}`
    /// and `{reasoning_style}` slots (plus optional `{display_name}`).
    pub system_prompt_scaffold: String,
    pub role_charter: String,
    pub team: Team,
    pub reasoning_style: ReasoningStyle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub template_id: ConsultMode,
    pub title: String,
    pub body: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("roster config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reading roster config: {0}")]
    Io(#[from] std::io::Error),
    #[error("role {0} is defined more than once")]
    DuplicateRole(AgentRole),
    #[error("core sepsis team must be exactly the ten core roles (missing {missing:?}, unexpected {unexpected:?})")]
    CoreTeamMismatch { missing: Vec<AgentRole>, unexpected: Vec<AgentRole> },
    #[error("profile {0} must not be a specialist; specialists belong in consult_roster")]
    SpecialistOutsideRoster(AgentRole),
    #[error("template catalog: {0}")]
    TemplateCatalog(String),
    #[error("unresolved slot {{{slot}}} in the system prompt for {role}")]
    UnresolvedSlot { role: AgentRole, slot: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub role: AgentRole,
    pub display_name: String,
    pub team: Team,
    pub reasoning_style: ReasoningStyle,
    pub charter: String,
    /// Overrides the document-level scaffold for this profile.
    #[serde(default)]
    pub scaffold: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SpecialistConfig {
    pub name: String,
    /// Name of the discipline, substituted for `{field}` in the charter.
    pub field: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConsultRosterConfig {
    pub reasoning_style: ReasoningStyle,
    /// Shared charter with `{specialty}` and `{field}` slots.
    pub charter: String,
    pub specialists: Vec<SpecialistConfig>,
}

/// On-disk roster document.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegistryConfig {
    pub shared_goals: String,
    pub scaffold: String,
    pub profiles: Vec<ProfileConfig>,
    pub consult_roster: ConsultRosterConfig,
    pub templates: Vec<PromptTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Registry {
    shared_goals: String,
    profiles: Vec<AgentProfile>,
    templates: Vec<PromptTemplate>,
}

impl Registry {
    /// The bundled roster: 10 core agents, 33 specialists, 2 support agents.
    pub fn default_config() -> Registry {
        Registry::from_json(DEFAULT_ROSTER).expect("bundled roster is valid")
    }

    pub fn from_path(path: &Path) -> Result<Registry, RegistryError> {
        Registry::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Registry, RegistryError> {
        Registry::from_config(serde_json::from_str(text)?)
    }

    pub fn from_config(config: RegistryConfig) -> Result<Registry, RegistryError> {
        let mut profiles = Vec::new();
        for p in config.profiles {
            if matches!(p.role, AgentRole::Specialist(_)) {
                return Err(RegistryError::SpecialistOutsideRoster(p.role));
            }
            profiles.push(AgentProfile {
                role: p.role,
                display_name: p.display_name,
                system_prompt_scaffold: p.scaffold.unwrap_or_else(|| config.scaffold.clone()),
                role_charter: p.charter,
                team: p.team,
                reasoning_style: p.reasoning_style,
            });
        }
        let roster = &config.consult_roster;
        for s in &roster.specialists {
            let charter = fill_slots(&roster.charter, |slot| match slot {
                "specialty" => Some(s.name.clone()),
                "field" => Some(s.field.clone()),
                _ => None,
            })
            .map_err(|e| RegistryError::UnresolvedSlot { role: AgentRole::specialist(&s.name), slot: e.0 })?;
            profiles.push(AgentProfile {
                role: AgentRole::specialist(&s.name),
                display_name: s.name.clone(),
                system_prompt_scaffold: config.scaffold.clone(),
                role_charter: charter,
                team: Team::ConsultRoster,
                reasoning_style: roster.reasoning_style,
            });
        }

        let mut seen = BTreeSet::new();
        for p in &profiles {
            if !seen.insert(p.role.clone()) {
                return Err(RegistryError::DuplicateRole(p.role.clone()));
            }
        }

        let core: BTreeSet<AgentRole> =
            profiles.iter().filter(|p| p.team == Team::CoreSepsis).map(|p| p.role.clone()).collect();
        let expected: BTreeSet<AgentRole> = AgentRole::CORE_SEPSIS.iter().cloned().collect();
        if core != expected {
            return Err(RegistryError::CoreTeamMismatch {
                missing: expected.difference(&core).cloned().collect(),
                unexpected: core.difference(&expected).cloned().collect(),
            });
        }

        let ids: BTreeSet<ConsultMode> = config.templates.iter().map(|t| t.template_id).collect();
        if ids.len() != config.templates.len() {
            return Err(RegistryError::TemplateCatalog("duplicate template_id".into()));
        }
        if let Some(t) = config.templates.iter().find(|t| !t.template_id.is_team_mode()) {
            return Err(RegistryError::TemplateCatalog(format!("{} has no team template", t.template_id)));
        }

        let registry = Registry { shared_goals: config.shared_goals, profiles, templates: config.templates };
        for p in &registry.profiles {
            registry.system_prompt(p)?;
        }
        Ok(registry)
    }

    pub fn shared_goals(&self) -> &str {
        &self.shared_goals
    }

    pub fn profiles(&self) -> &[AgentProfile] {
        &self.profiles
    }

    pub fn profile(&self, role: &AgentRole) -> Option<&AgentProfile> {
        self.profiles.iter().find(|p| &p.role == role)
    }

    /// Core team members in canonical fan-out order.
    pub fn core_team(&self) -> Vec<&AgentProfile> {
        AgentRole::CORE_SEPSIS.iter().filter_map(|r| self.profile(r)).collect()
    }

    pub fn team(&self, team: Team) -> impl Iterator<Item = &AgentProfile> {
        self.profiles.iter().filter(move |p| p.team == team)
    }

    /// Looks up a consult specialist by name, ignoring case.
    pub fn specialist(&self, name: &str) -> Option<&AgentProfile> {
        let name = name.trim();
        self.team(Team::ConsultRoster).find(|p| match &p.role {
            AgentRole::Specialist(s) => s.eq_ignore_ascii_case(name),
            _ => false,
        })
    }

    pub fn system_prompt(&self, profile: &AgentProfile) -> Result<String, RegistryError> {
        build_system_prompt(profile, &self.shared_goals)
            .map_err(|e| RegistryError::UnresolvedSlot { role: profile.role.clone(), slot: e.0 })
    }

    pub fn list_templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn template(&self, id: &str) -> Result<&PromptTemplate, RegistryError> {
        let mode = ConsultMode::parse(id).ok_or_else(|| RegistryError::UnknownTemplate(id.to_string()))?;
        self.templates
            .iter()
            .find(|t| t.template_id == mode)
            .ok_or_else(|| RegistryError::UnknownTemplate(id.to_string()))
    }

    /// Template body with case slots filled, followed by a one-line patient
    /// context. Bodies may use `{case_id}`, `{age}`, `{sex}` and
    /// `{chief_complaint}`.
    pub fn instantiate_template(&self, id: &str, case: &PatientCase) -> Result<String, RegistryError> {
        let template = self.template(id)?;
        let age = case.demographics.age.to_string();
        let sex = format!("{:?}", case.demographics.sex).to_lowercase();
        let lookup = |slot: &str| match slot {
            "case_id" => Some(case.case_id.0.clone()),
            "age" => Some(age.clone()),
            "sex" => Some(sex.clone()),
            "chief_complaint" => Some(case.chief_complaint.clone()),
            _ => None,
        };
        let body = fill_slots(&template.body, lookup)
            .map_err(|e| RegistryError::TemplateCatalog(format!("{id}: unresolved slot {{{}}}", e.0)))?;
        Ok(format!(
            "{body}\n\nPatient: {age}-year-old {sex} presenting with {}.",
            case.chief_complaint.trim().trim_end_matches('.')
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn default_shape() {
        let r = Registry::default_config();
        assert_eq!(r.team(Team::CoreSepsis).count(), 10);
        assert_eq!(r.team(Team::ConsultRoster).count(), 33);
        assert_eq!(r.team(Team::Support).count(), 2);
        let core: Vec<_> = r.core_team().into_iter().map(|p| p.role.clone()).collect();
        assert_eq!(core, AgentRole::CORE_SEPSIS);
        for named in ["Nephrologist", "Pulmonologist", "Transplant Infectious Disease", "cardiologist"] {
            assert!(r.specialist(named).is_some(), "{named}");
        }
        assert!(r.specialist("Astrologist").is_none());
    }

    #[test]
    fn default_loads_deterministically() {
        assert_eq!(Registry::default_config(), Registry::default_config());
    }

    #[test]
    fn template_titles() {
        let titles: Vec<_> = Registry::default_config().list_templates().iter().map(|t| t.title.clone()).collect();
        assert_eq!(
            titles,
            [
                "Team Assessment",
                "Care Gap Analysis",
                "Differential Diagnosis Analysis",
                "Treatment Plan",
                "Antibiotic Management",
                "Pharmacy Assessment"
            ]
        );
    }

    #[test]
    fn instantiate_care_gap() {
        let r = Registry::default_config();
        let text = r.instantiate_template("CareGap", &fixtures::endocarditis()).unwrap();
        assert!(text.contains("gaps in the current care plan"));
        assert!(text.contains("34-year-old male"));
        assert!(matches!(
            r.instantiate_template("Horoscope", &fixtures::endocarditis()),
            Err(RegistryError::UnknownTemplate(_))
        ));
        assert!(matches!(
            r.instantiate_template("SpecialistConsult", &fixtures::endocarditis()),
            Err(RegistryError::UnknownTemplate(_))
        ));
    }

    fn config() -> RegistryConfig {
        serde_json::from_str(DEFAULT_ROSTER).unwrap()
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut value: serde_json::Value = serde_json::from_str(DEFAULT_ROSTER).unwrap();
        value["profiles"][0]["temperature"] = serde_json::json!(0.2);
        let err = Registry::from_json(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn rejects_incomplete_core_team() {
        let mut c = config();
        c.profiles.retain(|p| p.role != AgentRole::Nurse);
        match Registry::from_config(c) {
            Err(RegistryError::CoreTeamMismatch { missing, .. }) => assert_eq!(missing, [AgentRole::Nurse]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_and_misplaced_roles() {
        let mut c = config();
        let dup = c.profiles[0].clone();
        c.profiles.push(dup);
        assert!(matches!(Registry::from_config(c), Err(RegistryError::DuplicateRole(_))));

        let mut c = config();
        c.profiles[11].role = AgentRole::specialist("Cardiologist");
        assert!(matches!(Registry::from_config(c), Err(RegistryError::SpecialistOutsideRoster(_))));
    }

    #[test]
    fn rejects_unresolved_scaffold_slot() {
        let mut c = config();
        c.profiles[3].scaffold = Some("{role_charter} {escalation_policy}".into());
        match Registry::from_config(c) {
            Err(RegistryError::UnresolvedSlot { role, slot }) => {
                assert_eq!(role, AgentRole::CriticalCare);
                assert_eq!(slot, "escalation_policy");
            }
            other => panic!("{other:?}"),
        }
    }
}
