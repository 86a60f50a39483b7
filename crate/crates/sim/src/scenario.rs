//! Scenario files: JSON objects whose keys are `ScenarioConfig` field names.
//!
//! A file only needs the keys it changes. Nested objects (`traffic`,
//! `bs_array`, `ue_array`) merge key by key, and unknown keys are errors.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hbf_core::engine::ScenarioConfig;
use serde_json::Value;

/// Applies the keys of `json` on top of `base`.
pub fn layered(base: &ScenarioConfig, json: &str) -> Result<ScenarioConfig> {
    let patch: Value = serde_json::from_str(json).context("scenario file is not valid JSON")?;
    if !patch.is_object() {
        bail!("scenario file must hold a JSON object");
    }
    let mut merged = serde_json::to_value(base)?;
    merge(&mut merged, patch);
    let cfg: ScenarioConfig = serde_json::from_value(merged)?;
    Ok(cfg)
}

/// Reads a scenario file on top of `base`.
pub fn load(path: &Path, base: &ScenarioConfig) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    layered(base, &text).with_context(|| format!("in {}", path.display()))
}

fn merge(dst: &mut Value, patch: Value) {
    match (dst, patch) {
        (Value::Object(d), Value::Object(p)) => {
            for (k, v) in p {
                match d.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (d, p) => *d = p,
    }
}
