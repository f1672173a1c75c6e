//! Deterministic JSON output: sorted keys, two-space indentation, floats in
//! scientific notation with 17 significant digits.

use std::fmt::Write as _;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().expect("finite number"));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            // serde_json's default map is ordered by key; sort anyway so the
            // output does not depend on that feature flag
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// SHA-256 of the canonical form of the effective config, as lowercase hex.
pub fn config_hash(config: &Value) -> String {
    Sha256::digest(canonical_json(config).as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Serializes `value` and merges its fields into `report`; non-objects go under `key`.
pub fn merge<T: serde::Serialize>(report: &mut Map<String, Value>, key: &str, value: &T) {
    match serde_json::to_value(value).expect("report types serialize") {
        Value::Object(m) => report.extend(m),
        other => {
            report.insert(key.to_string(), other);
        }
    }
}

/// Serializes `value` for use as a nested report entry.
pub fn to_value<T: serde::Serialize + ?Sized>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form() {
        let v = json!({"b": [1, -2, 0.1], "a": {"z": null, "y": "q\""}, "c": [], "d": true});
        let s = canonical_json(&v);
        assert_eq!(
            s,
            "{\n  \"a\": {\n    \"y\": \"q\\\"\",\n    \"z\": null\n  },\n  \"b\": [\n    1,\n    -2,\n    1.0000000000000001e-1\n  ],\n  \"c\": [],\n  \"d\": true\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn hash_depends_on_content_only() {
        let a = json!({"x": 1, "y": [2.5]});
        let b: Value = serde_json::from_str("{ \"y\": [2.5], \"x\": 1 }").unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        assert_ne!(config_hash(&a), config_hash(&json!({"x": 2, "y": [2.5]})));
    }
}
