use std::sync::LazyLock;

use regex::{Captures, Regex};

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unresolved slot {{{0}}}")]
pub struct UnresolvedSlot(pub String);

/// Replaces every `{slot}` in `template` with `lookup(slot)`. Values are not
/// re-scanned, so a filled value may itself contain braces.
pub fn fill_slots<F>(template: &str, lookup: F) -> Result<String, UnresolvedSlot>
where
    F: Fn(&str) -> Option<String>,
{
    let mut missing = None;
    let out = SLOT.replace_all(template, |caps: &Captures<'_>| {
        let name = &caps[1];
        match lookup(name) {
            Some(v) => v,
            None => {
                missing.get_or_insert_with(|| name.to_string());
                String::new()
            }
        }
    });
    match missing {
        Some(name) => Err(UnresolvedSlot(name)),
        None => Ok(out.into_owned()),
    }
}
