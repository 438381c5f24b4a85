//! Report writers. Floats are always printed as `{:.16e}` (17 significant
//! digits) so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Pretty JSON with sorted keys and fixed float formatting.
pub fn render_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            out.push_str("{\n");
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(out, &m[*k], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// A certified quantity: `value` compared against `limit` with `relation`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub limit: f64,
    pub holds: bool,
}

impl Certificate {
    pub fn le(name: &str, value: f64, limit: f64) -> Certificate {
        Certificate { name: name.into(), value, relation: "<=", limit, holds: value <= limit }
    }

    pub fn lt(name: &str, value: f64, limit: f64) -> Certificate {
        Certificate { name: name.into(), value, relation: "<", limit, holds: value < limit }
    }

    pub fn ge(name: &str, value: f64, limit: f64) -> Certificate {
        Certificate { name: name.into(), value, relation: ">=", limit, holds: value >= limit }
    }

    pub fn gt(name: &str, value: f64, limit: f64) -> Certificate {
        Certificate { name: name.into(), value, relation: ">", limit, holds: value > limit }
    }

    pub fn eq(name: &str, value: f64, limit: f64) -> Certificate {
        Certificate { name: name.into(), value, relation: "==", limit, holds: value == limit }
    }
}

pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Table {
        Table { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Everything a command produces.
pub struct Outcome {
    pub report: Value,
    pub certificates: Vec<Certificate>,
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
}

pub fn write_outputs(
    dir: &Path,
    command: &str,
    config_hash: &str,
    outcome: &Outcome,
    json: bool,
    csv: bool,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    if json {
        let doc = serde_json::json!({
            "command": command,
            "config_hash": config_hash,
            "certificates": to_value(&outcome.certificates),
            "all_certificates_hold": outcome.certificates.iter().all(|c| c.holds),
            "results": outcome.report,
        });
        let path = dir.join(format!("{}.json", command.replace('-', "_")));
        std::fs::write(&path, render_json(&doc)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    if csv {
        for t in &outcome.tables {
            let path = dir.join(format!("{}.csv", t.name));
            let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
            let mut w = csv::Writer::from_path(&path).map_err(io)?;
            w.write_record(&t.header).map_err(io)?;
            for r in &t.rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        let v = serde_json::json!({"b": 1, "a": [0.5, "x"]});
        assert_eq!(render_json(&v), "{\n  \"a\": [\n    5.0000000000000000e-1,\n    \"x\"\n  ],\n  \"b\": 1\n}\n");
    }
}
