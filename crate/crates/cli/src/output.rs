//! Report emission: numbers rounded to 12 significant digits, JSON or a
//! flattened `field,value` CSV, to stdout or into an output directory.

use std::fs;
use std::path::Path;

use serde_json::{Number, Value};

const SIG_DIGITS: usize = 12;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub struct Report<'a> {
    pub name: &'a str,
    pub value: Value,
    /// Additional files (name, contents), written only with `--out`.
    pub extra: Vec<(String, String)>,
}

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    if !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Locale-independent decimal rendering of a rounded number.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{}", round_sig(v))
}

pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(_), _, _) | (_, Some(_), _) => Value::Number(n),
            (_, _, Some(f)) => Number::from_f64(round_sig(f)).map_or(Value::Null, Value::Number),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(o) => {
            for (k, v) in o {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), n.as_f64().map_or(n.to_string(), fmt_num))),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render(value: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", value, &mut rows);
            let mut s = String::from("field,value\n");
            for (k, v) in rows {
                s.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
            }
            s
        }
    }
}

pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<(), String> {
    let value = round_value(report.value.clone());
    let text = render(&value, format);
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
            let ext = match format {
                Format::Json => "json",
                Format::Csv => "csv",
            };
            let path = dir.join(format!("{}.{ext}", report.name));
            fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            for (name, contents) in &report.extra {
                let path = dir.join(name);
                fs::write(&path, contents)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(fmt_num(-1e-30 * 0.0), "0");
        assert_eq!(fmt_num(2.5), "2.5");
    }

    #[test]
    fn csv_flattening() {
        let v = serde_json::json!({"a": [1.5, 2], "b": {"c": "x,y"}});
        let s = render(&v, Format::Csv);
        assert_eq!(s, "field,value\na[0],1.5\na[1],2\nb.c,\"x,y\"\n");
    }
}
