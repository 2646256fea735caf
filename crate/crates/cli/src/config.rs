//! Experiment configuration: a command, a dimension and typed key–value
//! parameters, assembled from a config file and command-line overrides.
//!
//! Config files are flat `key = value` lines; `#` starts a comment. Every key
//! is checked against the command's parameter table, so typos are reported
//! with the file and line they came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Functional,
    MoserDiverge,
    LowerBound,
    Ishiwata,
    Blowup,
    B2,
    Green,
    Testfn,
    Maximize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Functional => "functional",
            Command::MoserDiverge => "moser-diverge",
            Command::LowerBound => "lower-bound",
            Command::Ishiwata => "ishiwata",
            Command::Blowup => "blowup",
            Command::B2 => "b2",
            Command::Green => "green",
            Command::Testfn => "testfn",
            Command::Maximize => "maximize",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::value_variants().iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Float,
    Int,
    Text,
    FloatList,
}

#[derive(Clone, Copy, Debug)]
enum Fallback {
    Required,
    Optional,
    Num(f64),
    /// A multiple of `β_N` for the configured dimension.
    BetaN(f64),
    Count(u64),
    Str(&'static str),
}

#[derive(Clone, Copy, Debug)]
struct Param {
    key: &'static str,
    kind: Kind,
    fallback: Fallback,
}

const fn param(key: &'static str, kind: Kind, fallback: Fallback) -> Param {
    Param { key, kind, fallback }
}

const GRID: [Param; 4] = [
    param("grid-tmin", Kind::Float, Fallback::Num(-20.0)),
    param("grid-tmax", Kind::Float, Fallback::Num(60.0)),
    param("grid-h", Kind::Float, Fallback::Num(0.01)),
    param("grid-gauss", Kind::Int, Fallback::Count(2)),
];

const PROFILE: [Param; 4] = [
    param("profile", Kind::Text, Fallback::Str("gaussian")),
    param("k", Kind::Float, Fallback::Num(5.0)),
    param("R", Kind::Float, Fallback::Num(1.0)),
    param("input", Kind::Text, Fallback::Optional),
];

/// Profile names accepted by `functional`, `lower-bound` and `ishiwata`.
pub const PROFILE_NAMES: [&str; 8] =
    ["gaussian", "wide-gaussian", "sech", "algebraic", "ground-state", "moser", "file", "battery"];

fn params(command: Command) -> Vec<Param> {
    use Fallback::*;
    use Kind::*;
    let mut out = match command {
        Command::Constants | Command::B2 => vec![],
        Command::Functional => vec![param("beta", Float, Required), param("alpha", Float, Num(0.0))],
        Command::MoserDiverge => vec![
            param("beta", Float, BetaN(1.0)),
            param("alpha", Float, Num(1.0)),
            param("R", Float, Num(1.0)),
            param("k-max", Float, Num(40.0)),
            param("k-step", Float, Num(10.0)),
        ],
        Command::LowerBound => vec![
            param("beta", Float, Required),
            param("alpha", Float, Num(0.0)),
            param("t-values", FloatList, Str("0.1,0.03,0.01,0.003,0.001")),
        ],
        Command::Ishiwata => vec![param("beta", Float, Required), param("alpha", Float, Num(0.0))],
        Command::Blowup => vec![param("deltas", FloatList, Str("0,0.1,0.5"))],
        Command::Green => vec![param("alpha", Float, Num(0.0)), param("r0", Float, Num(1e-6))],
        Command::Testfn => vec![param("alpha", Float, Num(0.05)), param("eps", Float, Num(1e-3))],
        Command::Maximize => vec![
            param("beta", Float, Required),
            param("alpha", Float, Num(0.0)),
            param("seed", Text, Str("bump")),
            param("budget", Int, Count(3000)),
        ],
    };
    match command {
        Command::Functional | Command::LowerBound => out.extend(PROFILE),
        Command::Ishiwata => {
            out.extend(PROFILE);
            let p = out.iter_mut().find(|p| p.key == "profile").expect("profile key");
            p.fallback = Fallback::Str("battery");
        }
        _ => {}
    }
    if matches!(
        command,
        Command::Functional | Command::LowerBound | Command::Ishiwata | Command::Green | Command::Maximize
    ) {
        out.extend(GRID);
    }
    out
}

/// Keys every command understands besides its parameters.
const GENERAL: [&str; 6] = ["command", "dim", "output", "format", "timing", "profile-csv"];

/// A validation failure, located at a file line or a command-line flag.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{origin}: {message}")]
pub struct ConfigError {
    pub origin: String,
    pub message: String,
}

impl ConfigError {
    fn new(origin: &Origin, message: impl Into<String>) -> Self {
        Self { origin: origin.to_string(), message: message.into() }
    }
}

/// Where a raw setting came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag(String),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag(name) => write!(f, "--{name}"),
            Origin::Default => f.write_str("config"),
        }
    }
}

/// One `key = value` setting before validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl Setting {
    pub fn flag(key: &str, value: impl ToString) -> Self {
        Self { key: key.to_string(), value: value.to_string(), origin: Origin::Flag(key.to_string()) }
    }
}

/// Parses the text of a config file.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Vec<Setting>, ConfigError> {
    let mut out: Vec<Setting> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = Origin::File { path: path.to_path_buf(), line: i + 1 };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(&origin, format!("expected `key = value`, found `{line}`")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::new(&origin, "empty key"));
        }
        if let Some(prev) = out.iter().find(|s| s.key == key) {
            return Err(ConfigError::new(&origin, format!("duplicate key `{key}` (first set at {})", prev.origin)));
        }
        out.push(Setting { key: key.to_string(), value: value.trim().to_string(), origin });
    }
    Ok(out)
}

/// Reads and parses a config file.
pub fn read_config_file(path: &Path) -> Result<Vec<Setting>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        origin: path.display().to_string(),
        message: format!("cannot read config file: {e}"),
    })?;
    parse_config_text(&text, path)
}

/// A fully resolved experiment; embedded verbatim in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub dim: usize,
    /// Every parameter of the command, defaults included.
    pub params: BTreeMap<String, Value>,
    pub output: Option<PathBuf>,
    pub profile_csv: Option<PathBuf>,
    pub format: Format,
    /// Record the wall time; off for byte-reproducible reports.
    pub timing: bool,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

fn parse_float(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, String> {
    match kind {
        Kind::Float => parse_float(raw).map(Value::from).ok_or_else(|| format!("expected a finite number, got `{raw}`")),
        Kind::Int => raw.parse::<u64>().map(Value::from).map_err(|_| format!("expected a nonnegative integer, got `{raw}`")),
        Kind::Text => Ok(Value::from(raw)),
        Kind::FloatList => raw
            .split(',')
            .map(|x| parse_float(x.trim()).ok_or_else(|| format!("expected a comma-separated list of numbers, got `{raw}`")))
            .collect::<Result<Vec<f64>, _>>()
            .map(Value::from),
    }
}

impl ExperimentConfig {
    /// Validates `settings` (later entries override earlier ones) for `command`,
    /// which may instead come from a `command` key.
    pub fn resolve(command: Option<Command>, settings: &[Setting]) -> Result<Self, ConfigError> {
        let mut cmd = command;
        for s in settings.iter().filter(|s| s.key == "command") {
            let named = Command::from_name(&s.value)
                .ok_or_else(|| ConfigError::new(&s.origin, format!("unknown command `{}`", s.value)))?;
            match cmd {
                Some(c) if c != named && command.is_some() => {
                    return Err(ConfigError::new(
                        &s.origin,
                        format!("config is for `{named}` but `{c}` was requested"),
                    ))
                }
                _ => cmd = Some(named),
            }
        }
        let command = cmd.ok_or_else(|| ConfigError {
            origin: "config".into(),
            message: "no command given".into(),
        })?;
        let table = params(command);

        let mut dim = 2usize;
        let mut output = None;
        let mut profile_csv = None;
        let mut format = Format::Json;
        let mut timing = true;
        let mut values: BTreeMap<String, (Value, Origin)> = BTreeMap::new();
        for s in settings {
            let bad = |m: String| ConfigError::new(&s.origin, m);
            match s.key.as_str() {
                "command" => {}
                "dim" => {
                    dim = s.value.parse().map_err(|_| bad(format!("expected an integer dimension, got `{}`", s.value)))?;
                }
                "output" => output = Some(PathBuf::from(&s.value)),
                "profile-csv" => profile_csv = Some(PathBuf::from(&s.value)),
                "format" => {
                    format = Format::from_str(&s.value, true).map_err(|_| bad(format!("unknown format `{}`", s.value)))?;
                }
                "timing" => timing = parse_bool(&s.value).ok_or_else(|| bad(format!("expected true or false, got `{}`", s.value)))?,
                key => {
                    let Some(p) = table.iter().find(|p| p.key == key) else {
                        let mut known: Vec<&str> = table.iter().map(|p| p.key).collect();
                        known.extend(GENERAL);
                        return Err(bad(format!(
                            "unknown key `{key}` for command `{command}` (known: {})",
                            known.join(", ")
                        )));
                    };
                    let v = parse_value(p.kind, &s.value).map_err(|m| bad(format!("{key}: {m}")))?;
                    values.insert(key.to_string(), (v, s.origin.clone()));
                }
            }
        }
        if !(2..=12).contains(&dim) {
            return Err(ConfigError { origin: "dim".into(), message: format!("dimension must be in 2..=12, got {dim}") });
        }
        let beta_n = mtlab::Dim::new(dim).expect("valid dimension").beta_n;
        let mut params = BTreeMap::new();
        for p in &table {
            let v = match (values.remove(p.key), p.fallback) {
                (Some((v, _)), _) => v,
                (None, Fallback::Required) => {
                    return Err(ConfigError {
                        origin: "config".into(),
                        message: format!("missing required key `{}` for command `{command}`", p.key),
                    })
                }
                (None, Fallback::Optional) => continue,
                (None, Fallback::Num(x)) => Value::from(x),
                (None, Fallback::BetaN(f)) => Value::from(f * beta_n),
                (None, Fallback::Count(x)) => Value::from(x),
                (None, Fallback::Str(t)) => parse_value(p.kind, t).expect("valid default"),
            };
            params.insert(p.key.to_string(), v);
        }
        let cfg = Self { command, dim, params, output, profile_csv, format, timing };
        cfg.check()?;
        Ok(cfg)
    }

    /// Range and consistency checks on resolved parameters.
    pub fn check(&self) -> Result<(), ConfigError> {
        let fail = |key: &str, m: String| Err(ConfigError { origin: key.to_string(), message: m });
        if let Some(a) = self.params.get("alpha").and_then(Value::as_f64) {
            if !(0.0..=1.0).contains(&a) {
                return fail("alpha", format!("alpha must lie in [0, 1], got {a}"));
            }
        }
        for key in ["beta", "R", "k", "k-max", "k-step", "eps", "r0", "grid-h"] {
            if let Some(x) = self.params.get(key).and_then(Value::as_f64) {
                if !(x > 0.0) {
                    return fail(key, format!("{key} must be positive, got {x}"));
                }
            }
        }
        if let Some(eps) = self.params.get("eps").and_then(Value::as_f64) {
            if eps >= 0.1 {
                return fail("eps", format!("eps must be below 0.1, got {eps}"));
            }
        }
        if let Some(name) = self.params.get("profile").and_then(Value::as_str) {
            if !PROFILE_NAMES.contains(&name) {
                return fail("profile", format!("unknown profile `{name}` (known: {})", PROFILE_NAMES.join(", ")));
            }
            if name == "battery" && self.command != Command::Ishiwata {
                return fail("profile", "the battery is only available for ishiwata".into());
            }
            if name == "file" && !self.params.contains_key("input") {
                return fail("input", "profile = file needs an input CSV path".into());
            }
        }
        if let Some(seed) = self.params.get("seed").and_then(Value::as_str) {
            if mtlab::maximizer::Seed::from_name(seed).is_none() {
                return fail("seed", format!("unknown seed `{seed}` (known: bump, moser, ground-state)"));
            }
        }
        if matches!(self.command, Command::Ishiwata | Command::B2) && self.dim != 2 {
            return fail("dim", format!("{} is specific to dimension 2", self.command));
        }
        if self.params.get("budget").and_then(Value::as_u64) == Some(0) {
            return fail("budget", "budget must be at least 1".into());
        }
        Ok(())
    }

    pub fn float(&self, key: &str) -> f64 {
        self.params[key].as_f64().unwrap_or_else(|| panic!("parameter {key} is not numeric"))
    }

    pub fn int(&self, key: &str) -> u64 {
        self.params[key].as_u64().unwrap_or_else(|| panic!("parameter {key} is not an integer"))
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        self.params[key].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()
    }

    /// Settings that reproduce this config (used by sweeps to vary one key).
    pub fn to_settings(&self) -> Vec<Setting> {
        let mut out = vec![Setting::flag("dim", self.dim)];
        for (k, v) in &self.params {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Array(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            out.push(Setting::flag(k, text));
        }
        out.push(Setting::flag("timing", self.timing));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> Vec<Setting> {
        parse_config_text(text, Path::new("exp.cfg")).unwrap()
    }

    #[test]
    fn defaults_are_filled_in() {
        let cfg = ExperimentConfig::resolve(Some(Command::MoserDiverge), &[]).unwrap();
        assert_eq!(cfg.float("alpha"), 1.0);
        assert_eq!(cfg.float("beta"), 4.0 * std::f64::consts::PI);
        assert_eq!(cfg.float("k-max"), 40.0);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let s = file("# experiment\ndim = 3\n\nbeta = 2.5\nbogus = 1\n");
        let e = ExperimentConfig::resolve(Some(Command::Maximize), &s).unwrap_err();
        assert_eq!(e.origin, "exp.cfg:5");
        assert!(e.message.contains("unknown key `bogus`"));
    }

    #[test]
    fn malformed_values_and_lines() {
        let e = parse_config_text("dim = 2\njust words\n", Path::new("a.cfg")).unwrap_err();
        assert_eq!(e.origin, "a.cfg:2");
        let e = ExperimentConfig::resolve(Some(Command::Green), &file("alpha = lots")).unwrap_err();
        assert_eq!(e.origin, "exp.cfg:1");
        let e = ExperimentConfig::resolve(Some(Command::Green), &file("alpha = 2")).unwrap_err();
        assert_eq!(e.origin, "alpha");
        let e = ExperimentConfig::resolve(Some(Command::Maximize), &[]).unwrap_err();
        assert!(e.message.contains("missing required key `beta`"));
        assert!(parse_config_text("a = 1\na = 2", Path::new("d.cfg")).is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let mut s = file("command = green\nalpha = 0.25\n");
        s.push(Setting::flag("alpha", 0.5));
        let cfg = ExperimentConfig::resolve(None, &s).unwrap();
        assert_eq!(cfg.command, Command::Green);
        assert_eq!(cfg.float("alpha"), 0.5);
        assert!(ExperimentConfig::resolve(Some(Command::Testfn), &s).is_err());
    }

    #[test]
    fn settings_round_trip() {
        let s = file("dim = 3\nbeta = 2.75\nalpha = 0.3\nseed = moser\ngrid-h = 0.02\n");
        let cfg = ExperimentConfig::resolve(Some(Command::Maximize), &s).unwrap();
        let again = ExperimentConfig::resolve(Some(Command::Maximize), &cfg.to_settings()).unwrap();
        assert_eq!(cfg, again);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
    }
}
