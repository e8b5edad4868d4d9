//! Library side of the `polybound` command-line tool: request parsing,
//! dispatch to the core crate and report rendering.

pub mod error;
pub mod report;
pub mod request;
pub mod run;

pub use error::{CliError, CliResult};
pub use report::{execute, failure, to_json, to_markdown, Report};
pub use request::{Format, Kind, Overrides, Parsed, Request};

use serde_json::Value;

/// Parses and runs one document, producing a report even on failure.
pub fn process(doc: &Value, kind: Option<Kind>, overrides: &Overrides) -> Report {
    match Request::from_value(doc, kind, overrides) {
        Ok(parsed) => execute(&parsed),
        Err(e) => {
            let k = kind
                .map(|k| k.as_str().to_string())
                .or_else(|| doc.get("kind").and_then(Value::as_str).map(str::to_owned));
            failure(k.as_deref(), &e)
        }
    }
}

/// Runs every document of a batch (in parallel when enabled); the batch exit
/// code is the largest individual one.
pub fn process_batch(docs: &[Value], overrides: &Overrides) -> (Vec<Report>, i32) {
    let reports = polybound::par::map(docs, |d| process(d, None, overrides));
    let code = reports.iter().map(|r| r.exit_code).max().unwrap_or(0);
    (reports, code)
}
