//! Dotted-path overrides for scenario settings (`--set weights.w3=0`).

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Applies one `key.path=value` override to a defaults-completed scenario
/// tree. Every path segment must name an existing setting (or a list index in
/// range), so typos fail loudly instead of planting ignored keys. The value
/// parses as JSON, falling back to a bare string.
pub fn apply(tree: &mut Value, setting: &str) -> Result<()> {
    let (path, raw) = setting
        .split_once('=')
        .with_context(|| format!("override {setting:?} is missing '='"))?;
    let new: Value = serde_json::from_str(raw.trim())
        .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cursor = tree;
    let mut walked = String::new();
    for seg in path.split('.') {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(seg);
        cursor = match cursor {
            Value::Object(map) => map
                .get_mut(seg)
                .with_context(|| format!("unknown setting {walked:?}"))?,
            Value::Array(items) => {
                let len = items.len();
                let idx: usize = seg
                    .parse()
                    .with_context(|| format!("{walked:?}: expected a list index"))?;
                items
                    .get_mut(idx)
                    .with_context(|| format!("{walked:?}: index past the {len} entries"))?
            }
            _ => bail!("{walked:?} has no sub-settings"),
        };
    }
    *cursor = new;
    Ok(())
}
