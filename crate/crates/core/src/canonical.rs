//! Canonical JSON rendering shared by the CLI and the HTTP service.
//!
//! Object keys are sorted, floats are rounded to six fractional digits and
//! the document is pretty-printed with a trailing newline, so equal values
//! always produce identical bytes.

use serde::Serialize;
use serde_json::{Number, Value};

pub const FRACTION_DIGITS: i32 = 6;

pub fn round_value(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            let scale = 10f64.powi(FRACTION_DIGITS);
            let mut rounded = (x * scale).round() / scale;
            if rounded == 0.0 {
                rounded = 0.0;
            }
            Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Value> {
    serde_json::to_value(value).map(round_value)
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = serde_json::to_string_pretty(&to_value(value)?)?;
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounds_and_sorts() {
        let v = json!({"z": 0.1234567890, "a": [1.0000004, -0.0000001], "m": 3});
        let s = to_string(&v).unwrap();
        assert_eq!(s, "{\n  \"a\": [\n    1.0,\n    0.0\n  ],\n  \"m\": 3,\n  \"z\": 0.123457\n}\n");
    }

    #[test]
    fn stable_for_equal_inputs() {
        let a = json!({"x": 0.1 + 0.2});
        let b = json!({"x": 0.3});
        assert_eq!(to_string(&a).unwrap(), to_string(&b).unwrap());
    }
}
