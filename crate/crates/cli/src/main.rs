use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mtlab_cli::commands::RunError;
use mtlab_cli::config::{read_config_file, Command, ConfigError, ExperimentConfig, Format, Setting};
use mtlab_cli::sweep::{sweep, sweep_table};
use mtlab_cli::{config_from_report, run, write_artifacts};

#[derive(Parser)]
#[command(name = "mtlab", version, about = "Radial Moser–Trudinger experiments")]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Dimension constants ω, β_N, c_N.
    Constants(Common),
    /// Evaluate the functional on a profile.
    Functional(Common),
    /// Functional along normalized Moser functions as k grows.
    MoserDiverge(Common),
    /// Small-t sweep of the scaling curve against its threshold.
    LowerBound(Common),
    /// Sign of d/dt J[w_t] at t = 1 (two dimensions).
    Ishiwata(Common),
    /// Mass and moments of the Liouville bubble.
    Blowup(Common),
    /// Gagliardo–Nirenberg constant from the planar ground state.
    B2(Common),
    /// Radial Green function and its constant A_α.
    Green(Common),
    /// Test function φ_ε and its excess over the concentration threshold.
    Testfn(Common),
    /// Projected gradient ascent for a maximizer.
    Maximize(Common),
    /// Run the experiment described by a config file.
    Run(Common),
    /// Re-run the config embedded in a JSON report.
    Rerun {
        report: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a command once per value of one numeric parameter.
    Sweep {
        #[arg(value_enum)]
        command: Command,
        /// Parameter to vary.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

/// Flags shared by every command; unknown combinations are rejected when the
/// config is resolved.
#[derive(Args, Default)]
struct Common {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Arbitrary `key=value` override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long)]
    k_max: Option<f64>,
    #[arg(long)]
    k_step: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    /// Maximizer seed: bump, moser or ground-state.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    /// Profile: gaussian, wide-gaussian, sech, algebraic, ground-state, moser, file, battery.
    #[arg(long)]
    profile: Option<String>,
    /// CSV profile (`t,r,value`) for `--profile file`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    t_values: Option<String>,
    #[arg(long)]
    deltas: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_tmin: Option<f64>,
    #[arg(long)]
    grid_tmax: Option<f64>,
    #[arg(long)]
    grid_h: Option<f64>,
    #[arg(long)]
    grid_gauss: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the command's profile as CSV.
    #[arg(long)]
    profile_csv: Option<PathBuf>,
    /// Leave `wall_time_s` null so reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

impl Common {
    fn settings(&self) -> Result<Vec<Setting>, ConfigError> {
        let mut out = match &self.config {
            Some(path) => read_config_file(path)?,
            None => Vec::new(),
        };
        let mut flag = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push(Setting::flag(key, v));
            }
        };
        let s = |x: &Option<f64>| x.map(|v| v.to_string());
        flag("dim", self.dim.map(|v| v.to_string()));
        flag("beta", s(&self.beta));
        flag("alpha", s(&self.alpha));
        flag("k", s(&self.k));
        flag("R", s(&self.radius));
        flag("k-max", s(&self.k_max));
        flag("k-step", s(&self.k_step));
        flag("eps", s(&self.eps));
        flag("r0", s(&self.r0));
        flag("seed", self.seed.clone());
        flag("budget", self.budget.map(|v| v.to_string()));
        flag("profile", self.profile.clone());
        flag("input", self.input.as_ref().map(|p| p.display().to_string()));
        flag("t-values", self.t_values.clone());
        flag("deltas", self.deltas.clone());
        flag("grid-tmin", s(&self.grid_tmin));
        flag("grid-tmax", s(&self.grid_tmax));
        flag("grid-h", s(&self.grid_h));
        flag("grid-gauss", self.grid_gauss.map(|v| v.to_string()));
        flag("output", self.output.as_ref().map(|p| p.display().to_string()));
        flag("format", self.format.map(|f| if f == Format::Csv { "csv".into() } else { "json".into() }));
        flag("profile-csv", self.profile_csv.as_ref().map(|p| p.display().to_string()));
        if self.no_timing {
            flag("timing", Some("false".into()));
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError {
                origin: "--set".into(),
                message: format!("expected KEY=VALUE, got `{kv}`"),
            })?;
            out.push(Setting::flag(k.trim(), v.trim()));
        }
        Ok(out)
    }

    fn resolve(&self, command: Option<Command>) -> Result<ExperimentConfig, RunError> {
        Ok(ExperimentConfig::resolve(command, &self.settings()?)?)
    }
}

fn run_config(cfg: &ExperimentConfig) -> Result<i32, RunError> {
    let done = run(cfg)?;
    if let Some(msg) = &done.report.diagnostics.error {
        eprintln!("mtlab: {msg}");
    }
    for w in &done.report.diagnostics.warnings {
        eprintln!("mtlab: warning: {w}");
    }
    write_artifacts(&done, &mut io::stdout().lock())?;
    Ok(done.exit_code)
}

fn dispatch(action: Action) -> Result<i32, RunError> {
    let (command, common) = match action {
        Action::Constants(c) => (Command::Constants, c),
        Action::Functional(c) => (Command::Functional, c),
        Action::MoserDiverge(c) => (Command::MoserDiverge, c),
        Action::LowerBound(c) => (Command::LowerBound, c),
        Action::Ishiwata(c) => (Command::Ishiwata, c),
        Action::Blowup(c) => (Command::Blowup, c),
        Action::B2(c) => (Command::B2, c),
        Action::Green(c) => (Command::Green, c),
        Action::Testfn(c) => (Command::Testfn, c),
        Action::Maximize(c) => (Command::Maximize, c),
        Action::Run(c) => return run_config(&c.resolve(None)?),
        Action::Rerun { report, output } => {
            let mut cfg = config_from_report(&report)?;
            cfg.output = output;
            return run_config(&cfg);
        }
        Action::Sweep { command, axis, values, common } => {
            // The axis key may be required by the command, so seed it with the
            // first value before resolving.
            let mut settings = common.settings()?;
            if let Some(v) = values.first() {
                settings.push(Setting::flag(&axis, v));
            }
            let mut base = ExperimentConfig::resolve(Some(command), &settings)?;
            let output = base.output.take();
            let rows = sweep(&base, &axis, &values)?;
            let table = sweep_table(&axis, &rows);
            for r in rows.iter().filter(|r| r.status != "ok") {
                eprintln!("mtlab: {axis} = {}: {} ({})", r.value, r.status, r.message);
            }
            let mut buf = Vec::new();
            table.write_csv(&mut buf).map_err(|e| RunError::Io(e.to_string()))?;
            match output {
                Some(path) => std::fs::write(&path, buf).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?,
                None => io::Write::write_all(&mut io::stdout().lock(), &buf).map_err(|e| RunError::Io(e.to_string()))?,
            }
            return Ok(0);
        }
    };
    run_config(&common.resolve(Some(command))?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.action) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("mtlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
