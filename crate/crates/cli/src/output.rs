use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat};
use serde_json::Value;

const SIGNIFICANT_DIGITS: usize = 6;

/// Rounds a float to six significant digits. Rounding is idempotent, so a
/// document written with it re-serializes to the same bytes.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Applies [`round_sig`] to every non-integer number in the document.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = round_sig(n.as_f64().unwrap_or_default());
            serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn render(value: Value) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&canonicalize(value))?;
    text.push('\n');
    Ok(text)
}

/// Writes the rendered document to `path`, or to stdout when absent.
pub fn emit(value: Value, path: Option<&Path>) -> Result<()> {
    let text = render(value)?;
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Unix seconds as an RFC 3339 UTC string with millisecond precision.
pub fn iso(unix_seconds: f64) -> String {
    let millis = (unix_seconds * 1000.0).round() as i64;
    DateTime::from_timestamp_millis(millis)
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| unix_seconds.to_string())
}
