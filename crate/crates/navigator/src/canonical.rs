//! Canonical JSON: object keys sorted, no insignificant whitespace, floats
//! printed with exactly nine decimals, integers (counts, cents) printed as
//! integers. Two equal values always produce the same bytes, whichever
//! entry point computed them.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

pub const DECIMALS: usize = 9;

/// Serializes `value` canonically.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    Ok(value_to_string(&serde_json::to_value(value)?))
}

pub fn value_to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

/// Fixed-decimal float text; negative zero (including values that round to
/// zero) prints as positive zero.
pub fn format_float(v: f64) -> String {
    let s = format!("{:.*}", DECIMALS, v);
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64().filter(|_| !n.is_f64()) {
                write!(out, "{}", i).unwrap();
            } else if let Some(u) = n.as_u64().filter(|_| !n.is_f64()) {
                write!(out, "{}", u).unwrap();
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push(':');
                write_value(out, &map[k]);
            }
            out.push('}');
        }
    }
}
