//! Report assembly, canonical JSON output and Markdown rendering.

use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::request::{Parsed, SCHEMA_VERSION};
use crate::run::{effective_tolerances, run, Outcome};

/// Significant digits kept for every floating-point number in a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone)]
pub struct Report {
    pub value: Value,
    pub exit_code: i32,
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Rounds floats to [`SIGNIFICANT_DIGITS`] and folds `-0` into `0`. Object keys
/// are already sorted by `serde_json`'s default map.
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), canonicalize(v))).collect()),
        other => other.clone(),
    }
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("report serializes");
    s.push('\n');
    s
}

fn error_value(e: &CliError) -> Value {
    json!({"code": e.code(), "class": e.class(), "message": e.to_string(), "exit_code": e.exit_code()})
}

fn skeleton(kind: Option<&str>, request: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), kind.map_or(Value::Null, |k| json!(k)));
    m.insert("request".into(), request);
    m
}

/// Report for input that failed before a request could be formed.
pub fn failure(kind: Option<&str>, e: &CliError) -> Report {
    let mut m = skeleton(kind, Value::Null);
    m.insert("status".into(), json!("error"));
    m.insert("error".into(), error_value(e));
    m.insert("warnings".into(), json!([]));
    Report {
        value: Value::Object(m),
        exit_code: e.exit_code(),
    }
}

/// Runs a parsed request and assembles the full report.
pub fn execute(parsed: &Parsed) -> Report {
    let req = &parsed.request;
    let mut m = skeleton(Some(req.kind.as_str()), req.to_value());
    let mut provenance = Map::new();
    provenance.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    provenance.insert(
        "tolerances".into(),
        serde_json::to_value(effective_tolerances(req)).expect("tolerances serialize"),
    );
    let mut warnings = parsed.warnings.clone();
    let exit_code = match run(req) {
        Ok(Outcome {
            results,
            solver,
            audit,
            warnings: w,
        }) => {
            warnings.extend(w);
            m.insert("status".into(), json!("ok"));
            m.insert("results".into(), results);
            if let Some(a) = audit {
                m.insert("audit".into(), a);
            }
            provenance.insert("solver".into(), Value::Object(solver));
            0
        }
        Err(e) => {
            m.insert("status".into(), json!("error"));
            m.insert("error".into(), error_value(&e));
            e.exit_code()
        }
    };
    warnings.sort();
    warnings.dedup();
    m.insert("warnings".into(), json!(warnings));
    m.insert("provenance".into(), Value::Object(provenance));
    Report {
        value: Value::Object(m),
        exit_code,
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "n/a".into(),
        other => other.to_string(),
    }
}

/// Flattens nested objects into `a.b.c` rows; arrays of scalars stay inline.
fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, rows);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        other => rows.push((prefix.to_string(), scalar(other))),
    }
}

fn table(out: &mut String, header: [&str; 2], rows: &[(String, String)]) {
    out.push_str(&format!("| {} | {} |\n|---|---|\n", header[0], header[1]));
    for (k, v) in rows {
        out.push_str(&format!("| `{k}` | {} |\n", v.replace('|', "\\|")));
    }
    out.push('\n');
}

fn gap_table(out: &mut String, r: &Value) {
    let cell = |v: &Value| match v {
        Value::Object(i) => format!("[{}, {}]", scalar(&i["lo"]), scalar(&i["hi"])),
        other => scalar(other),
    };
    out.push_str("| set | bound |\n|---|---|\n");
    for (name, key) in [("classical", "classical"), ("quantum", "quantum"), ("no-signaling", "nosignaling")] {
        out.push_str(&format!("| {name} | {} |\n", cell(&r[key])));
    }
    out.push_str(&format!("| gap | {} |\n\n", scalar(&r["gap"])));
}

/// Markdown rendering of a (canonicalized) report.
pub fn to_markdown(v: &Value) -> String {
    let v = canonicalize(v);
    let mut out = format!("# polybound {}\n\n", scalar(&v["kind"]));
    out.push_str(&format!("Status: **{}**\n\n", scalar(&v["status"])));
    if let Some(e) = v.get("error").filter(|e| !e.is_null()) {
        out.push_str(&format!(
            "Error `{}` ({}): {}\n\n",
            scalar(&e["code"]),
            scalar(&e["class"]),
            scalar(&e["message"])
        ));
    }
    if let Some(r) = v.get("results") {
        out.push_str("## Results\n\n");
        if v["kind"] == "gap" {
            gap_table(&mut out, r);
        }
        let mut rows = Vec::new();
        flatten("", r, &mut rows);
        table(&mut out, ["quantity", "value"], &rows);
    }
    if let Some(a) = v.get("audit") {
        out.push_str("## Audit\n\n");
        let mut rows = Vec::new();
        flatten("", a, &mut rows);
        table(&mut out, ["check", "value"], &rows);
    }
    let warnings = v["warnings"].as_array().cloned().unwrap_or_default();
    if !warnings.is_empty() {
        out.push_str("## Warnings\n\n");
        for w in warnings {
            out.push_str(&format!("- `{}`\n", scalar(&w)));
        }
        out.push('\n');
    }
    if let Some(p) = v.get("provenance") {
        out.push_str("## Provenance\n\n");
        let mut rows = Vec::new();
        flatten("", p, &mut rows);
        table(&mut out, ["field", "value"], &rows);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(2.0 * std::f64::consts::SQRT_2), 2.82842712475);
        assert_eq!(round_sig(-0.0), 0.0);
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1e-300), 1e-300);
    }

    #[test]
    fn negative_zero_folds() {
        let v = canonicalize(&json!({"a": -0.0, "b": [1.0, -1e-20]}));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":0.0,"b":[1.0,-1e-20]}"#);
    }
}
