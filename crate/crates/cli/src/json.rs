//! Canonical JSON: sorted keys, floats at 12 significant digits.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{Map, Number, Value};

/// Round to 12 significant digits; non-finite values have no JSON form.
pub fn round12(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    Some(if r == 0.0 { 0.0 } else { r })
}

pub fn number(x: f64) -> Value {
    round12(x)
        .and_then(Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

/// Rewrite every float in `value`. Object keys are already sorted since
/// `serde_json::Map` is ordered.
pub fn canonical(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => number(n.as_f64().expect("f64 number")),
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

pub fn to_canonical<T: Serialize>(value: &T) -> anyhow::Result<Value> {
    Ok(canonical(serde_json::to_value(value)?))
}

pub fn render(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write(path: &Path, value: &Value) -> anyhow::Result<()> {
    std::fs::write(path, render(value)).with_context(|| format!("writing {}", path.display()))
}

pub fn object<I, K>(entries: I) -> Value
where
    I: IntoIterator<Item = (K, Value)>,
    K: Into<String>,
{
    Value::Object(entries.into_iter().map(|(k, v)| (k.into(), v)).collect::<Map<_, _>>())
}
