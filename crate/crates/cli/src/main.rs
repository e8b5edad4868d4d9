use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use polybound::causal::FormulaVariant;
use polybound::quantum::NpaLevel;
use polybound_cli::report::Report;
use polybound_cli::run::{cross_section_csv, effective_tolerances};
use polybound_cli::{failure, process, process_batch, to_json, to_markdown, CliError, Format, Kind, Overrides, Request};

fn parse_level(s: &str) -> Result<NpaLevel, String> {
    match s {
        "1" => Ok(NpaLevel::L1),
        "1ab" | "1+ab" => Ok(NpaLevel::L1AB),
        _ => Err(format!("expected 1 or 1ab, got {s:?}")),
    }
}

fn parse_variant(s: &str) -> Result<FormulaVariant, String> {
    match s {
        "standard" => Ok(FormulaVariant::Standard),
        "paper-literal" => Ok(FormulaVariant::PaperLiteral),
        _ => Err(format!("expected standard or paper-literal, got {s:?}")),
    }
}

/// Bounds on correlations over classical, quantum and no-signaling sets.
///
/// Reads a JSON request (`{"schema": 1, "kind": ..., "payload": ..., "options": ...}`)
/// and writes a report. Exit codes: 0 ok, 2 invalid input, 3 infeasible or
/// inconsistent data, 4 solver failure.
#[derive(Debug, Parser)]
#[command(name = "polybound", version)]
struct Cli {
    /// Analysis to run; must match the document's "kind" when both are given.
    #[arg(value_enum, required_unless_present = "batch")]
    kind: Option<Kind>,

    /// Request document; `-` or omitted reads standard input.
    #[arg(short, long, value_name = "PATH")]
    input: Option<PathBuf>,

    /// JSON array of request documents, each carrying its own "kind".
    #[arg(long, value_name = "PATH", conflicts_with_all = ["kind", "input", "cross_section"])]
    batch: Option<PathBuf>,

    /// Write the report here instead of standard output.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Moment-matrix level for quantum bounds: 1 or 1ab.
    #[arg(long, value_parser = parse_level)]
    npa_level: Option<NpaLevel>,

    /// Maximum deviation of a probability block from total mass one.
    #[arg(long)]
    tolerance: Option<f64>,

    /// Closed-form variant for PNS and the instrumental inequality: standard or paper-literal.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<FormulaVariant>,

    /// Rescale probability blocks that do not sum to one instead of rejecting them.
    #[arg(long)]
    renormalize: bool,

    /// Cross-check the result against an independent oracle.
    #[arg(long)]
    audit: bool,

    /// For `gap`: also write the CHSH/CHSH' cross-section as CSV to this path.
    #[arg(long, value_name = "PATH")]
    cross_section: Option<PathBuf>,

    /// Number of angles in the cross-section.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    cross_section_samples: u32,
}

fn read_source(path: Option<&PathBuf>) -> Result<String, CliError> {
    let mut s = String::new();
    match path {
        Some(p) if p.as_os_str() != "-" => {
            s = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
        _ => {
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
        }
    }
    Ok(s)
}

fn parse_json(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::schema(format!("invalid JSON: {e}")))
}

fn render(reports: &[Report], batch: bool, format: Format) -> String {
    match format {
        Format::Json if batch => to_json(&Value::Array(reports.iter().map(|r| r.value.clone()).collect())),
        Format::Json => to_json(&reports[0].value),
        Format::Md => reports.iter().map(|r| to_markdown(&r.value)).collect::<Vec<_>>().join("\n---\n\n"),
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        tolerance: cli.tolerance,
        npa_level: cli.npa_level,
        variant: cli.variant,
        renormalize: cli.renormalize,
        audit: cli.audit,
        format: cli.format,
    };
    let kind_str = cli.kind.map(|k| k.as_str());

    let (reports, code, batch) = if let Some(path) = &cli.batch {
        match read_source(Some(path)).and_then(|t| parse_json(&t)) {
            Ok(Value::Array(docs)) => {
                let (r, c) = process_batch(&docs, &overrides);
                (r, c, true)
            }
            Ok(_) => {
                let r = failure(None, &CliError::schema("batch file must hold a JSON array of requests"));
                let c = r.exit_code;
                (vec![r], c, false)
            }
            Err(e) => {
                let r = failure(None, &e);
                let c = r.exit_code;
                (vec![r], c, false)
            }
        }
    } else {
        let report = match read_source(cli.input.as_ref()).and_then(|t| parse_json(&t)) {
            Ok(doc) => {
                let r = process(&doc, cli.kind, &overrides);
                if r.exit_code == 0 {
                    if let Some(path) = &cli.cross_section {
                        if let Err(e) = write_cross_section(&doc, cli.kind, &overrides, path, cli.cross_section_samples) {
                            let r = failure(kind_str, &e);
                            let c = r.exit_code;
                            return finish(&[r], false, cli.format.unwrap_or_default(), cli.output.as_ref(), c);
                        }
                    }
                }
                r
            }
            Err(e) => failure(kind_str, &e),
        };
        let c = report.exit_code;
        (vec![report], c, false)
    };

    // Format: flag, else the (single) request's own option, else JSON.
    let format = cli.format.unwrap_or_else(|| {
        if batch {
            Format::Json
        } else {
            reports[0].value["request"]["options"]["format"]
                .as_str()
                .and_then(|f| serde_json::from_value(Value::String(f.into())).ok())
                .unwrap_or_default()
        }
    });
    finish(&reports, batch, format, cli.output.as_ref(), code)
}

fn write_cross_section(doc: &Value, kind: Option<Kind>, overrides: &Overrides, path: &PathBuf, samples: u32) -> Result<(), CliError> {
    let parsed = Request::from_value(doc, kind, overrides)?;
    if parsed.request.kind != Kind::Gap {
        return Err(CliError::schema("--cross-section applies only to the gap analysis"));
    }
    let tol = effective_tolerances(&parsed.request);
    let csv = cross_section_csv(samples as usize, parsed.request.settings.npa_level, &tol)?;
    std::fs::write(path, csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn finish(reports: &[Report], batch: bool, format: Format, output: Option<&PathBuf>, code: i32) -> ExitCode {
    let text = render(reports, batch, format);
    if let Err(e) = emit(&text, output) {
        eprintln!("polybound: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    ExitCode::from(code as u8)
}
