use std::collections::BTreeMap;

use crate::domain::{
    AgentRole, Consciousness, SpO2Scale, StructuredResponse, Temperature, VitalSigns, SUMMARY_BEGIN, SUMMARY_END,
};
use crate::gateway::parse::{parse_structured, split_sections};

#[derive(Debug, Clone, PartialEq)]
pub struct LabFact {
    pub name: String,
    pub value: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedFact {
    pub name: String,
    pub dose: String,
    pub unit: String,
    pub route: String,
    pub frequency: String,
}

/// What the mock can read back out of a prompt: the case summary block,
/// the question, and (for synthesis and patient-facing calls) the team's
/// earlier answers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseFacts {
    pub case_id: String,
    pub patient: String,
    pub chief_complaint: String,
    pub history: String,
    /// Raw values keyed by vital name, e.g. `heart_rate -> "118"`.
    pub vitals: BTreeMap<String, String>,
    pub spo2_detail: String,
    /// Latest observation of each lab, in summary order of first appearance.
    pub labs: Vec<LabFact>,
    pub medications: Vec<MedFact>,
    pub current_plan: String,
    pub sdoh: BTreeMap<String, String>,
    pub question: String,
    /// `(role, parsed answer)` for each block under `TEAM RESPONSES:`.
    pub team: Vec<(String, StructuredResponse)>,
    pub final_diagnosis: Option<String>,
}

impl CaseFacts {
    pub fn from_prompt(prompt: &str) -> CaseFacts {
        let mut facts = CaseFacts::default();
        let mut section = "";
        let mut in_summary = false;
        for line in prompt.lines() {
            if line == SUMMARY_BEGIN {
                in_summary = true;
                continue;
            }
            if line == SUMMARY_END {
                in_summary = false;
                continue;
            }
            if !in_summary {
                continue;
            }
            if !line.starts_with("  ") {
                let (head, rest) = line.split_once(':').unwrap_or((line, ""));
                let rest = rest.trim().to_string();
                section = match head {
                    "CASE ID" => {
                        facts.case_id = rest;
                        ""
                    }
                    "PATIENT" => {
                        facts.patient = rest;
                        ""
                    }
                    "CHIEF COMPLAINT" => {
                        facts.chief_complaint = rest;
                        ""
                    }
                    "HISTORY" => {
                        facts.history = rest;
                        ""
                    }
                    "CURRENT PLAN" => {
                        facts.current_plan = rest;
                        ""
                    }
                    h if h.starts_with("VITALS") => "vitals",
                    "LABS" => "labs",
                    "MEDICATIONS" => "meds",
                    "SDOH" => "sdoh",
                    _ => "",
                };
                continue;
            }
            let Some((key, value)) = line.trim().split_once(": ") else { continue };
            match section {
                "vitals" => {
                    let mut words = value.split_whitespace();
                    let number = words.next().unwrap_or_default().to_string();
                    if key == "spo2" {
                        facts.spo2_detail = value.to_string();
                    }
                    facts.vitals.insert(key.to_string(), number);
                }
                "labs" => {
                    let body = value.split(" @ ").next().unwrap_or(value);
                    let (v, unit) = body.split_once(' ').unwrap_or((body, ""));
                    let lab = LabFact { name: key.to_string(), value: v.to_string(), unit: unit.to_string() };
                    match facts.labs.iter_mut().find(|l| l.name == key) {
                        Some(existing) => *existing = lab,
                        None => facts.labs.push(lab),
                    }
                }
                "meds" => {
                    let w: Vec<&str> = value.split_whitespace().collect();
                    if w.len() >= 4 {
                        facts.medications.push(MedFact {
                            name: key.to_string(),
                            dose: w[0].to_string(),
                            unit: w[1].to_string(),
                            route: w[2].to_string(),
                            frequency: w[3..].join(" "),
                        });
                    }
                }
                "sdoh" => {
                    facts.sdoh.insert(key.to_string(), value.to_string());
                }
                _ => {}
            }
        }

        let sections = split_sections(prompt, &["QUESTION", "TEAM RESPONSES", "TEAM SYNTHESIS"]);
        facts.question = sections
            .get("QUESTION")
            .map(|ls| ls.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        if let Some(lines) = sections.get("TEAM RESPONSES") {
            facts.team = team_blocks(lines);
        }
        if let Some(lines) = sections.get("TEAM SYNTHESIS") {
            facts.final_diagnosis =
                lines.iter().find_map(|l| l.trim().strip_prefix("FINAL DIAGNOSIS:")).map(|s| s.trim().to_string());
        }
        facts
    }

    pub fn vital(&self, name: &str) -> &str {
        self.vitals.get(name).map(String::as_str).unwrap_or("unknown")
    }

    /// Rebuilds the vital-sign observation shown in the summary.
    pub fn vital_signs(&self) -> Option<VitalSigns> {
        let num = |k: &str| self.vitals.get(k)?.parse::<u32>().ok();
        let consciousness: Consciousness =
            serde_json::from_value(serde_json::Value::String(self.vitals.get("consciousness")?.clone())).ok()?;
        let temperature = Temperature::from_celsius(self.vitals.get("temperature")?.parse().ok()?).ok()?;
        Some(VitalSigns {
            timestamp: chrono::DateTime::UNIX_EPOCH,
            respiration_rate: num("respiration_rate")?,
            spo2: num("spo2")?,
            on_supplemental_oxygen: self.spo2_detail.contains("supplemental oxygen"),
            spo2_scale: if self.spo2_detail.contains("Scale2") { SpO2Scale::Scale2 } else { SpO2Scale::Scale1 },
            systolic_bp: num("systolic_bp")?,
            heart_rate: num("heart_rate")?,
            consciousness,
            temperature,
        })
    }

    /// Lactate if measured, otherwise the first lab in the summary.
    pub fn key_lab(&self) -> Option<&LabFact> {
        self.labs.iter().find(|l| l.name.eq_ignore_ascii_case("lactate")).or_else(|| self.labs.first())
    }

    pub fn lab(&self, name: &str) -> Option<&LabFact> {
        self.labs.iter().find(|l| l.name.eq_ignore_ascii_case(name))
    }

    pub fn history_first_sentence(&self) -> String {
        let h = self.history.trim();
        let end = h.find(". ").map(|i| i + 1).unwrap_or(h.len());
        h[..end].trim_end_matches('.').to_string()
    }

    pub fn sdoh_value(&self, key: &str) -> &str {
        self.sdoh.get(key).map(String::as_str).unwrap_or("Unknown")
    }
}

fn team_blocks(lines: &[String]) -> Vec<(String, StructuredResponse)> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    for line in lines {
        let t = line.trim();
        if let Some(role) = t.strip_prefix("--- ").and_then(|r| r.strip_suffix(" ---")) {
            blocks.push((role.to_string(), String::new()));
        } else if let Some((_, body)) = blocks.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    blocks
        .into_iter()
        .map(|(role, body)| {
            let parsed_role: AgentRole = role.parse().unwrap_or(AgentRole::SeniorPhysician);
            (role, parse_structured(&body, &parsed_role).0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::render_case_summary;
    use crate::fixtures;
    use crate::news::compute_news;

    #[test]
    fn reads_back_the_case_summary() {
        let case = fixtures::endocarditis();
        let as_of = case.latest_timestamp().unwrap();
        let prompt = format!("{}\nQUESTION:\nWhat next?\n", render_case_summary(&case, as_of).unwrap());
        let f = CaseFacts::from_prompt(&prompt);
        assert_eq!(f.case_id, "endocarditis");
        assert_eq!(f.vital("heart_rate"), "118");
        assert_eq!(f.vital("temperature"), "39.2");
        assert_eq!(f.key_lab().unwrap().value, "2.6", "latest lactate wins");
        assert_eq!(f.lab("creatinine").unwrap().unit, "mg/dL");
        assert_eq!(f.medications[0].name, "vancomycin");
        assert_eq!(f.medications[0].dose, "1250");
        assert_eq!(f.medications[2].name, "lactated ringer's");
        assert_eq!(f.sdoh_value("housing"), "Homeless");
        assert_eq!(f.question, "What next?");
        assert_eq!(f.history_first_sentence(), "Injection drug use with heroin");
        let rebuilt = f.vital_signs().unwrap();
        assert_eq!(compute_news(&rebuilt), compute_news(case.latest_vitals().unwrap()));
    }
}
