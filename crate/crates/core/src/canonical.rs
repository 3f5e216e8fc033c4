//! JSON Canonicalization Scheme (RFC 8785).
//!
//! Every hash and signature in the protocol is computed over the output of
//! [`canonicalize`]: object members sorted by their UTF-16 code units, no
//! insignificant whitespace, numbers in the ECMAScript `Number.toString`
//! form, and strings with the minimal JSON escape set.

use serde::Serialize;
use serde_json::{Number, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("number {0} cannot be represented as an IEEE 754 double")]
    NonRepresentableNumber(String),
    #[error("value does not serialize to JSON: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Largest integer magnitude a double holds exactly.
const MAX_SAFE_INTEGER: u64 = (1 << 53) - 1;

pub fn canonicalize(value: &Value) -> Result<Vec<u8>, CanonicalError> {
    let mut out = Vec::with_capacity(256);
    write_value(value, &mut out)?;
    Ok(out)
}

/// Serializes `value` through `serde_json` and canonicalizes the result.
pub fn canonicalize_serializable<T: Serialize + ?Sized>(
    value: &T,
) -> Result<Vec<u8>, CanonicalError> {
    canonicalize(&serde_json::to_value(value)?)
}

pub fn canonical_string(value: &Value) -> Result<String, CanonicalError> {
    // Output is built only from UTF-8 input and ASCII escapes.
    Ok(String::from_utf8(canonicalize(value)?).expect("canonical form is UTF-8"))
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => write_number(n, out)?,
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|(a, _), (b, _)| a.encode_utf16().cmp(b.encode_utf16()));
            out.push(b'{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(key, out);
                out.push(b':');
                write_value(item, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    out.push(b'"');
    for ch in s.chars() {
        match ch {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            '\u{08}' => out.extend_from_slice(b"\\b"),
            '\t' => out.extend_from_slice(b"\\t"),
            '\n' => out.extend_from_slice(b"\\n"),
            '\u{0C}' => out.extend_from_slice(b"\\f"),
            '\r' => out.extend_from_slice(b"\\r"),
            c if (c as u32) < 0x20 => {
                out.extend_from_slice(format!("\\u{:04x}", c as u32).as_bytes());
            }
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}

fn write_number(n: &Number, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    let value = if let Some(i) = n.as_i64() {
        if i.unsigned_abs() > MAX_SAFE_INTEGER {
            return Err(CanonicalError::NonRepresentableNumber(n.to_string()));
        }
        i as f64
    } else if let Some(u) = n.as_u64() {
        if u > MAX_SAFE_INTEGER {
            return Err(CanonicalError::NonRepresentableNumber(n.to_string()));
        }
        u as f64
    } else {
        match n.as_f64() {
            Some(f) if f.is_finite() => f,
            _ => return Err(CanonicalError::NonRepresentableNumber(n.to_string())),
        }
    };
    out.extend_from_slice(format_ecmascript(value).as_bytes());
    Ok(())
}

/// ECMAScript `Number.prototype.toString` for a finite double.
pub fn format_ecmascript(value: f64) -> String {
    debug_assert!(value.is_finite());
    if value == 0.0 {
        return "0".to_owned();
    }
    // `{:e}` yields the shortest round-tripping digits, e.g. "1.2345e-7".
    let sci = format!("{:e}", value.abs());
    let (mantissa, exponent) = sci.split_once('e').expect("scientific notation");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let k = digits.len() as i32;
    // value = 0.digits × 10^n
    let n = exponent + 1;

    let mut s = String::with_capacity(32);
    if value < 0.0 {
        s.push('-');
    }
    if k <= n && n <= 21 {
        s.push_str(&digits);
        s.extend(std::iter::repeat_n('0', (n - k) as usize));
    } else if 0 < n && n <= 21 {
        s.push_str(&digits[..n as usize]);
        s.push('.');
        s.push_str(&digits[n as usize..]);
    } else if -6 < n && n <= 0 {
        s.push_str("0.");
        s.extend(std::iter::repeat_n('0', (-n) as usize));
        s.push_str(&digits);
    } else {
        s.push_str(&digits[..1]);
        if k > 1 {
            s.push('.');
            s.push_str(&digits[1..]);
        }
        s.push('e');
        s.push(if n - 1 < 0 { '-' } else { '+' });
        s.push_str(&(n - 1).abs().to_string());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn canon(v: Value) -> String {
        canonical_string(&v).unwrap()
    }

    #[test]
    fn sorts_keys() {
        assert_eq!(canon(json!({"b": 1, "a": 2})), r#"{"a":2,"b":1}"#);
        assert_eq!(canon(json!({})), "{}");
    }

    #[test]
    fn sorts_by_utf16_code_units() {
        // U+1F600 is D83D DE00 in UTF-16 and sorts before U+FB01 (FB01),
        // the reverse of their UTF-8 / code point order.
        let v = json!({"\u{fb01}": 1, "\u{1f600}": 2});
        assert_eq!(canon(v), "{\"\u{1f600}\":2,\"\u{fb01}\":1}");
    }

    #[test]
    fn rfc8785_number_samples() {
        let cases: &[(f64, &str)] = &[
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (-1.5, "-1.5"),
            (1e21, "1e+21"),
            (1e20, "100000000000000000000"),
            (0.000001, "0.000001"),
            (1e-7, "1e-7"),
            (123456789012345680000.0, "123456789012345680000"),
            (4.5, "4.5"),
            (2e-3, "0.002"),
            (9007199254740991.0, "9007199254740991"),
            (5e-324, "5e-324"),
            (1.7976931348623157e308, "1.7976931348623157e+308"),
            (333333333.3333333, "333333333.3333333"),
        ];
        for (input, expected) in cases {
            assert_eq!(format_ecmascript(*input), *expected, "{input:e}");
        }
    }

    #[test]
    fn escapes_minimal_set() {
        assert_eq!(
            canon(json!("a\"b\\c\nd\u{1}e\u{7f}é")),
            "\"a\\\"b\\\\c\\nd\\u0001e\u{7f}é\""
        );
    }

    #[test]
    fn rejects_unsafe_integers() {
        let big = json!(9007199254740993u64);
        assert!(matches!(
            canonicalize(&big),
            Err(CanonicalError::NonRepresentableNumber(_))
        ));
        assert!(canonicalize(&json!(-9007199254740991i64)).is_ok());
    }

    #[test]
    fn nested_structures() {
        let v = json!({"z": [3, {"y": null, "x": true}], "a": "s"});
        assert_eq!(canon(v), r#"{"a":"s","z":[3,{"x":true,"y":null}]}"#);
    }
}
