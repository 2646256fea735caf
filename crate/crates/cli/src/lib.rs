//! Command-line front end: typed experiment configs, JSON reports, CSV
//! tables and parameter sweeps over the `mtlab` library.

pub mod commands;
pub mod config;
pub mod report;
pub mod sweep;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

use commands::{execute, Outcome, RunError};
use config::{ExperimentConfig, Format};
use report::{Diagnostics, Report, SCHEMA_VERSION};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A finished run: the report, whatever the command produced, and the
/// process exit status.
#[derive(Debug)]
pub struct Completed {
    pub report: Report,
    pub outcome: Option<Outcome>,
    pub exit_code: i32,
}

/// Runs `cfg` and assembles its report. Numerical failures still produce a
/// report, with the message in `diagnostics.error`; validation and I/O
/// problems are returned as errors.
pub fn run(cfg: &ExperimentConfig) -> Result<Completed, RunError> {
    let start = Instant::now();
    let result = execute(cfg);
    let wall = start.elapsed().as_secs_f64();
    let (outcome, exit_code, results, diagnostics) = match result {
        Ok(mut out) => {
            let code = if let Some(msg) = out.failure.take() {
                out.diagnostics.error = Some(msg);
                3
            } else {
                0
            };
            let (r, d) = (out.results.clone(), out.diagnostics.clone());
            (Some(out), code, r, d)
        }
        Err(RunError::Numerical(msg)) => {
            let d = Diagnostics { error: Some(msg), ..Default::default() };
            (None, 3, Value::Null, d)
        }
        Err(e) => return Err(e),
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        version: VERSION.to_string(),
        config: cfg.clone(),
        results,
        diagnostics,
        wall_time_s: cfg.timing.then_some(wall),
    };
    Ok(Completed { report, outcome, exit_code })
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Writes the artifacts of a run and returns the paths written.
///
/// With `format = json` the report goes to `output` (stdout when unset).
/// With `format = csv` the command's table goes there instead and the report
/// is written next to it with a `.json` extension. `profile_csv` receives the
/// command's profile as `t,r,value`.
pub fn write_artifacts(done: &Completed, stdout: &mut dyn Write) -> Result<Vec<PathBuf>, RunError> {
    let cfg = &done.report.config;
    let json = done.report.to_json();
    let mut written = Vec::new();
    let table = done.outcome.as_ref().and_then(|o| o.table.as_ref());
    match (cfg.format, &cfg.output) {
        (Format::Csv, out) if table.is_some() => {
            let mut buf = Vec::new();
            table.expect("checked").write_csv(&mut buf).map_err(|e| RunError::Io(e.to_string()))?;
            match out {
                Some(path) => {
                    write_file(path, &buf)?;
                    written.push(path.clone());
                    let side = path.with_extension("json");
                    write_file(&side, json.as_bytes())?;
                    written.push(side);
                }
                None => stdout.write_all(&buf).map_err(|e| RunError::Io(e.to_string()))?,
            }
        }
        (_, Some(path)) => {
            write_file(path, json.as_bytes())?;
            written.push(path.clone());
        }
        (_, None) => stdout.write_all(json.as_bytes()).map_err(|e| RunError::Io(e.to_string()))?,
    }
    if let (Some(path), Some(u)) = (&cfg.profile_csv, done.outcome.as_ref().and_then(|o| o.profile.as_ref())) {
        let mut buf = Vec::new();
        u.write_csv(&mut buf)?;
        write_file(path, &buf)?;
        written.push(path.clone());
    }
    Ok(written)
}

/// Reads a report and returns its embedded config, ready to run again.
pub fn config_from_report(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let report: Report = serde_json::from_str(&text).map_err(|e| io_error(path, e))?;
    report.config.check().map_err(RunError::Config)?;
    Ok(report.config)
}
