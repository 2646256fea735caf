//! One-parameter sweeps: the same experiment for each value of one numeric
//! key, run in parallel and aggregated into a single CSV in input order.

use rayon::prelude::*;
use serde_json::Value;

use crate::config::{ConfigError, ExperimentConfig, Setting};
use crate::report::{num, Table};
use crate::run;

/// Result of a single sweep entry.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    /// `ok`, `failed` (numerical failure, report written) or `error`.
    pub status: &'static str,
    pub message: String,
    /// Scalar results, flattened with dotted keys in report order.
    pub fields: Vec<(String, String)>,
}

/// Flattens a JSON value into dotted keys; arrays use their indices.
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), n.as_f64().map(num).unwrap_or_else(|| n.to_string()))),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

/// Checks that `axis` is a numeric parameter of the command.
pub fn check_axis(base: &ExperimentConfig, axis: &str) -> Result<(), ConfigError> {
    match base.params.get(axis) {
        Some(Value::Number(n)) if n.is_f64() || n.is_u64() => Ok(()),
        _ => Err(ConfigError {
            origin: "axis".into(),
            message: format!("`{axis}` is not a numeric parameter of `{}`", base.command),
        }),
    }
}

fn entry(base: &ExperimentConfig, axis: &str, value: f64) -> SweepRow {
    let mut settings = base.to_settings();
    settings.push(Setting::flag(axis, num(value)));
    let row = |status, message: String, fields| SweepRow { value, status, message, fields };
    let cfg = match ExperimentConfig::resolve(Some(base.command), &settings) {
        Ok(c) => c,
        Err(e) => return row("error", e.to_string(), vec![]),
    };
    match run(&cfg) {
        Ok(done) => {
            let mut fields = Vec::new();
            flatten("", &done.report.results, &mut fields);
            let status = if done.exit_code == 0 { "ok" } else { "failed" };
            row(status, done.report.diagnostics.error.clone().unwrap_or_default(), fields)
        }
        Err(e) => row("error", e.to_string(), vec![]),
    }
}

/// Runs `base` once per value of `axis`. Individual failures are recorded in
/// their row; the order of the rows is the order of `values`.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>, ConfigError> {
    check_axis(base, axis)?;
    Ok(values.par_iter().map(|&v| entry(base, axis, v)).collect())
}

/// Aggregates rows into one table: the axis, status and message columns,
/// then the union of result keys in order of first appearance.
pub fn sweep_table(axis: &str, rows: &[SweepRow]) -> Table {
    let mut keys: Vec<String> = Vec::new();
    for r in rows {
        for (k, _) in &r.fields {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    let mut header = vec![axis.to_string(), "status".into(), "error".into()];
    header.extend(keys.iter().cloned());
    let mut table = Table { header, rows: Vec::with_capacity(rows.len()) };
    for r in rows {
        let mut cells = vec![num(r.value), r.status.to_string(), r.message.clone()];
        for k in &keys {
            cells.push(r.fields.iter().find(|(fk, _)| fk == k).map(|(_, v)| v.clone()).unwrap_or_default());
        }
        table.rows.push(cells);
    }
    table
}
