//! Headers and writers shared by the subcommands.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Line carrying the program version; the only line allowed to differ between
/// builds for identical inputs.
pub fn version_line() -> String {
    format!("# sigmalab {}", env!("CARGO_PKG_VERSION"))
}

/// Set keys of the resolved configuration.
pub fn config_map(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    cfg.entries().filter(|(_, v)| !v.is_empty()).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Comment header of CSV and report outputs.
pub fn comment_header(command: &str, cfg: &ExperimentConfig) -> String {
    let mut s = format!("{}\n# schema={SCHEMA_VERSION}\n# command={command}\n", version_line());
    for (k, v) in config_map(cfg) {
        s.push_str(&format!("# config {k}={v}\n"));
    }
    s
}

/// CSV body with a header row, `#` comments before and after.
pub fn csv_document<R: Serialize>(
    command: &str,
    cfg: &ExperimentConfig,
    preamble: &[String],
    rows: &[R],
    trailer: &[String],
) -> Result<String, CliError> {
    let mut out = comment_header(command, cfg);
    for line in preamble {
        out.push_str(&format!("# {line}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    }
    let body = w.into_inner().map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
    for line in trailer {
        out.push_str(&format!("# {line}\n"));
    }
    Ok(out)
}

/// Append one JSON object as a line.
pub fn ndjson_line<T: Serialize>(out: &mut String, value: &T) -> Result<(), CliError> {
    let line = serde_json::to_string(value).map_err(|e| CliError::Numerical(format!("json: {e}")))?;
    out.push_str(&line);
    out.push('\n');
    Ok(())
}

/// Write to `path`, or to stdout when absent.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
