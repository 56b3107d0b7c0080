use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::report::{GapCategory, GapFinding, GapReport};
use super::verify::normalize;
use crate::domain::{AgentResponse, AgentRole};

static TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\[([A-Za-z ]+)\]|([A-Za-z]+)\s*:)\s*(.+)$").unwrap());

/// Splits `[Category] finding` or `Category: finding`. Anything else is a
/// Coordination finding.
pub fn categorize(item: &str) -> (GapCategory, String) {
    if let Some(caps) = TAG.captures(item) {
        let tag = caps.get(1).or(caps.get(2)).map(|m| m.as_str()).unwrap_or_default();
        if let Some(cat) = GapCategory::parse(tag) {
            return (cat, caps[3].trim().to_string());
        }
    }
    (GapCategory::Coordination, item.trim().to_string())
}

fn add_finding(
    categories: &mut BTreeMap<GapCategory, Vec<GapFinding>>,
    cat: GapCategory,
    finding: &str,
    raised_by: impl IntoIterator<Item = AgentRole>,
) {
    let list = categories.entry(cat).or_default();
    let key = normalize(finding);
    match list.iter_mut().find(|f| normalize(&f.finding) == key) {
        Some(existing) => existing.raised_by.extend(raised_by),
        None => list.push(GapFinding { finding: finding.to_string(), raised_by: raised_by.into_iter().collect() }),
    }
}

fn empty_categories() -> BTreeMap<GapCategory, Vec<GapFinding>> {
    GapCategory::ALL.into_iter().map(|c| (c, Vec::new())).collect()
}

fn report(categories: BTreeMap<GapCategory, Vec<GapFinding>>) -> GapReport {
    let count = |c: GapCategory| categories[&c].len();
    let total: usize = categories.values().map(Vec::len).sum();
    let shared = categories.values().flatten().filter(|f| f.raised_by.len() > 1).count();
    let summary = format!(
        "{total} findings: {} diagnosis, {} treatment, {} monitoring, {} coordination; {shared} raised by more than one role.",
        count(GapCategory::Diagnosis),
        count(GapCategory::Treatment),
        count(GapCategory::Monitoring),
        count(GapCategory::Coordination),
    );
    GapReport { categories, summary }
}

/// Collects plan items from Ok responses into the four categories, merging
/// findings whose normalized text matches and keeping every role that
/// raised them.
pub fn aggregate_gaps(responses: &[AgentResponse]) -> GapReport {
    let mut categories = empty_categories();
    for r in responses.iter().filter(|r| r.is_ok()) {
        for item in &r.sections.plan {
            let (cat, finding) = categorize(item);
            if !finding.is_empty() {
                add_finding(&mut categories, cat, &finding, [r.role.clone()]);
            }
        }
    }
    report(categories)
}

/// Merges several reports (e.g. one per patient on a unit) category by
/// category with the same deduplication as [`aggregate_gaps`].
pub fn merge_gap_reports<'a>(reports: impl IntoIterator<Item = &'a GapReport>) -> GapReport {
    let mut categories = empty_categories();
    for r in reports {
        for (cat, findings) in &r.categories {
            for f in findings {
                add_finding(&mut categories, *cat, &f.finding, f.raised_by.iter().cloned());
            }
        }
    }
    report(categories)
}
