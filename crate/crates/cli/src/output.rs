//! Output formatting: every float is rounded to 12 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

/// CSV cell for a float.
pub fn cell(v: f64) -> String {
    round12(v).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round12(0.6518411348378409), 0.651841134838);
        assert_eq!(round12(2.0), 2.0);
        assert_eq!(cell(1.0 / 3.0), "0.333333333333");
        assert_eq!(cell(-1e-20 / 3.0).parse::<f64>().unwrap(), -3.33333333333e-21);
    }

    #[test]
    fn nested_values_are_rounded_and_integers_kept() {
        let v = serde_json::json!({"a": [1.0 / 3.0, 7], "b": {"c": 2.0f64.sqrt()}});
        let text = to_json(&v).unwrap();
        assert!(text.contains("0.333333333333") && text.contains("1.41421356237") && text.contains('7'));
    }
}
