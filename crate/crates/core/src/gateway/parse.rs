use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::LazyLock;

use regex::Regex;

use crate::domain::{AgentRole, AgentStatus, Claim, ClaimSubject, DiagnosisItem, StructuredResponse};

pub const RESPONSE_HEADINGS: [&str; 4] = ["ASSESSMENT", "DIFFERENTIAL", "PLAN", "CLAIMS"];

static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:\d+[.)]|[-*•])\s*").unwrap());

/// Splits `text` into sections introduced by any of `headings` (matched
/// case-insensitively, optionally decorated with markdown `#` or `**`, and
/// followed by `:` or end of line). Text after the colon on the heading line
/// becomes the section's first line. Text before the first heading is
/// dropped. A repeated heading appends to the earlier section.
pub fn split_sections(text: &str, headings: &[&str]) -> BTreeMap<String, Vec<String>> {
    let alternatives = headings.iter().map(|h| regex::escape(h)).collect::<Vec<_>>().join("|");
    let re = Regex::new(&format!(r"(?i)^\s*(?:#{{1,6}}\s*)?\**\s*({alternatives})\s*\**\s*(?::|$)\s*\**\s*(.*)$"))
        .expect("heading regex");
    let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        if let Some(caps) = re.captures(line) {
            let name = caps[1].to_uppercase();
            let rest = caps[2].trim().to_string();
            let entry = sections.entry(name.clone()).or_default();
            if !rest.is_empty() {
                entry.push(rest);
            }
            current = Some(name);
        } else if let Some(name) = &current {
            sections.get_mut(name).expect("current section exists").push(line.to_string());
        }
    }
    sections
}

/// Removes a leading `1.`, `2)`, `-`, `*` or bullet.
pub fn strip_list_marker(line: &str) -> &str {
    match LIST_MARKER.find(line) {
        Some(m) => &line[m.end()..],
        None => line.trim_start(),
    }
}

pub fn parse_differential_line(line: &str) -> Option<DiagnosisItem> {
    let body = strip_list_marker(line).trim();
    if body.is_empty() {
        return None;
    }
    let (condition, reasoning) = if let Some((c, r)) = body.split_once('|') {
        (c, r)
    } else if let Some((c, r)) = body.split_once(" - ") {
        (c, r)
    } else if let Some((c, r)) = body.split_once(": ") {
        (c, r)
    } else {
        (body, "")
    };
    let condition = condition.trim();
    if condition.is_empty() {
        return None;
    }
    Some(DiagnosisItem { condition: condition.to_string(), reasoning: reasoning.trim().to_string() })
}

/// Parses `CLAIM: <subject>|<name>|<value>`. The `CLAIM:` prefix may be
/// omitted; anything else that does not fit the grammar is ignored.
pub fn parse_claim_line(line: &str, role: &AgentRole) -> Option<Claim> {
    let mut body = strip_list_marker(line).trim();
    if body.len() >= 6 && body[..6].eq_ignore_ascii_case("CLAIM:") {
        body = &body[6..];
    }
    let mut parts = body.splitn(3, '|');
    let subject = ClaimSubject::parse(parts.next()?)?;
    let name = parts.next()?.trim();
    let value = parts.next()?.trim();
    if name.is_empty() || value.is_empty() {
        return None;
    }
    Some(Claim::new(subject, name, value, role.clone()))
}

fn list_items(lines: Option<&Vec<String>>) -> Vec<String> {
    lines.into_iter().flatten().map(|l| strip_list_marker(l).trim().to_string()).filter(|l| !l.is_empty()).collect()
}

fn paragraph(lines: Option<&Vec<String>>) -> String {
    lines.map(|ls| ls.join("\n").trim().to_string()).unwrap_or_default()
}

/// Tolerant parse of an agent answer. A missing ASSESSMENT makes the result
/// `Malformed`; any other missing section is simply empty.
pub fn parse_structured(text: &str, role: &AgentRole) -> (StructuredResponse, AgentStatus) {
    let sections = split_sections(text, &RESPONSE_HEADINGS);
    let response = StructuredResponse {
        assessment: paragraph(sections.get("ASSESSMENT")),
        differential: sections
            .get("DIFFERENTIAL")
            .into_iter()
            .flatten()
            .filter_map(|l| parse_differential_line(l))
            .collect(),
        plan: list_items(sections.get("PLAN")),
        claims: sections.get("CLAIMS").into_iter().flatten().filter_map(|l| parse_claim_line(l, role)).collect(),
    };
    let status = if response.assessment.is_empty() { AgentStatus::Malformed } else { AgentStatus::Ok };
    (response, status)
}

/// Canonical rendering that [`parse_structured`] reads back unchanged.
pub fn render_structured(r: &StructuredResponse) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ASSESSMENT: {}", r.assessment);
    let _ = writeln!(out, "DIFFERENTIAL:");
    for (i, d) in r.differential.iter().enumerate() {
        let _ = writeln!(out, "{}. {} | {}", i + 1, d.condition, d.reasoning);
    }
    let _ = writeln!(out, "PLAN:");
    for p in &r.plan {
        let _ = writeln!(out, "- {p}");
    }
    let _ = writeln!(out, "CLAIMS:");
    for c in &r.claims {
        let _ = writeln!(out, "{}", render_claim(c));
    }
    out
}

pub fn render_claim(c: &Claim) -> String {
    format!("CLAIM: {}|{}|{}", c.subject.as_str(), c.name, c.asserted_value)
}
