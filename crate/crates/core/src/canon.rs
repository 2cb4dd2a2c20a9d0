//! Canonical JSON emission: sorted object keys, fixed 6-decimal reals, no
//! insignificant whitespace. Two equal values always serialize to the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Canon {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Arr(Vec<Canon>),
    Obj(BTreeMap<String, Canon>),
}

/// Rounds to the 6-decimal grid used by every file format in this crate.
/// Negative zero is folded to positive zero so the text form is stable.
pub fn quantize(v: f64) -> f64 {
    let q = (v * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

impl std::fmt::Display for Canon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        self.write(&mut out);
        f.write_str(&out)
    }
}

impl Canon {
    pub fn obj<I, K>(entries: I) -> Canon
    where
        I: IntoIterator<Item = (K, Canon)>,
        K: Into<String>,
    {
        Canon::Obj(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn str(s: impl Into<String>) -> Canon {
        Canon::Str(s.into())
    }

    pub fn xy(x: f64, y: f64) -> Canon {
        Canon::Arr(vec![Canon::Real(x), Canon::Real(y)])
    }

    fn write(&self, out: &mut String) {
        match self {
            Canon::Null => out.push_str("null"),
            Canon::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Canon::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Canon::Real(v) => {
                let _ = write!(out, "{:.6}", quantize(*v));
            }
            Canon::Str(s) => write_str(out, s),
            Canon::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Canon::Obj(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_str(out, k);
                    out.push(':');
                    v.write(out);
                }
                out.push('}');
            }
        }
    }
}

fn write_str(out: &mut String, s: &str) {
    // serde_json's string escaping is already canonical.
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_sorted_and_reals_fixed() {
        let v = Canon::obj([("b", Canon::Real(1.0)), ("a", Canon::Arr(vec![Canon::Int(3), Canon::Real(-0.0000001)]))]);
        assert_eq!(v.to_string(), r#"{"a":[3,0.000000],"b":1.000000}"#);
    }

    #[test]
    fn quantize_is_idempotent_through_text() {
        for &x in &[0.1234567, -2.9876543219, 1e-7, 123456.7654321] {
            let q = quantize(x);
            let text = format!("{q:.6}");
            let back: f64 = text.parse().unwrap();
            assert_eq!(back, q);
            assert_eq!(quantize(back), q);
        }
    }
}
