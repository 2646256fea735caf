//! Maps each command onto the library and collects results and diagnostics.

use std::fs::File;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use mtlab::dims::{factorial, Dimension};
use mtlab::functional::{
    effective_beta, ishiwata_derivative, lower_bound_curve, mt_functional, mt_functional_psi, psi_gap, FunctionalParams,
};
use mtlab::maximizer::{maximize, seed_profile, trial_battery, Seed};
use mtlab::odes::{
    gn_family_bound, gn_ground_state, gn_quotient_fn, green_direct_check, green_g0, green_alpha, green_solve,
    GreenOptions, SENSITIVITY_WARN,
};
use mtlab::radial::{GridSpec, RadialGrid, Shape};
use mtlab::sequences::{
    blowup_mass, blowup_profile, liouville_moment, moser_divergence, moser_profile_on, test_function,
    test_function_excess, MoserParams, TestFunctionParams,
};
use mtlab::{Dim, Error, Grid, Profile};

use crate::config::{Command, ExperimentConfig};
use crate::report::{num, Diagnostics, Table};

/// Everything a command produces.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub diagnostics: Diagnostics,
    pub table: Option<Table>,
    pub profile: Option<Profile>,
    /// Set when the computation finished but did not meet its own criterion
    /// (e.g. an ascent that ran out of budget).
    pub failure: Option<String>,
}

/// Why a run stopped.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Invalid(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::ConstraintViolation { .. } => RunError::Invalid(e.to_string()),
            Error::Io(m) => RunError::Io(m),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

type Run = Result<Outcome, RunError>;

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn dimension(cfg: &ExperimentConfig) -> Dim {
    Dimension::new(cfg.dim).expect("dimension validated by the config")
}

fn grid_spec(cfg: &ExperimentConfig) -> GridSpec {
    GridSpec::new(cfg.float("grid-tmin"), cfg.float("grid-tmax"), cfg.float("grid-h"))
        .with_gauss_points(cfg.int("grid-gauss") as usize)
}

fn grid(cfg: &ExperimentConfig) -> Result<Arc<Grid>, RunError> {
    Ok(RadialGrid::new(dimension(cfg), grid_spec(cfg))?)
}

fn functional_params(cfg: &ExperimentConfig) -> Result<FunctionalParams<f64>, RunError> {
    Ok(FunctionalParams::new(cfg.float("beta"), cfg.float("alpha"))?)
}

/// The profiles selected by the `profile` key, each with unit norm.
fn profiles(cfg: &ExperimentConfig) -> Result<Vec<(String, Profile)>, RunError> {
    let g = grid(cfg)?;
    let name = cfg.text("profile").unwrap_or("gaussian");
    match name {
        "battery" => Ok(trial_battery(&g)?.into_iter().map(|(n, u)| (n.to_string(), u)).collect()),
        "moser" => {
            let mp = MoserParams::new(cfg.float("k"), cfg.float("R"))?;
            let u = moser_profile_on(&mp, dimension(cfg), grid_spec(cfg))?;
            Ok(vec![(name.to_string(), u.normalize_to_sphere()?)])
        }
        "file" => {
            let path = cfg.text("input").expect("input validated by the config");
            let f = File::open(path).map_err(|e| RunError::Io(format!("{path}: {e}")))?;
            let u = Profile::read_csv(f, dimension(cfg), cfg.int("grid-gauss") as usize, Shape::Smooth)?;
            Ok(vec![(path.to_string(), u)])
        }
        _ => {
            let all = trial_battery(&g)?;
            let (n, u) = all
                .into_iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| RunError::Invalid(format!("profile `{name}` is not available in dimension {}", cfg.dim)))?;
            Ok(vec![(n.to_string(), u)])
        }
    }
}

fn single_profile(cfg: &ExperimentConfig) -> Result<(String, Profile), RunError> {
    profiles(cfg)?.into_iter().next().ok_or_else(|| RunError::Invalid("no profile selected".into()))
}

fn profile_table(u: &Profile) -> Table {
    let mut t = Table::new(&["t", "r", "value"]);
    let g = u.grid();
    for ((t_, r), v) in g.t().iter().zip(g.r()).zip(u.values()) {
        t.push(vec![num(*t_), num(*r), num(*v)]);
    }
    t
}

/// Runs the configured command.
pub fn execute(cfg: &ExperimentConfig) -> Run {
    match cfg.command {
        Command::Constants => constants(cfg),
        Command::Functional => functional(cfg),
        Command::MoserDiverge => moser_diverge(cfg),
        Command::LowerBound => lower_bound(cfg),
        Command::Ishiwata => ishiwata(cfg),
        Command::Blowup => blowup(cfg),
        Command::B2 => b2(),
        Command::Green => green(cfg),
        Command::Testfn => testfn(cfg),
        Command::Maximize => run_maximize(cfg),
    }
}

fn constants(cfg: &ExperimentConfig) -> Run {
    let d = dimension(cfg);
    Ok(Outcome {
        results: json!({
            "n": d.n,
            "omega": d.omega,
            "beta_N": d.beta_n,
            "c_N": d.c_n,
            "ball_volume": d.ball_volume(),
        }),
        ..Outcome::default()
    })
}

fn functional(cfg: &ExperimentConfig) -> Run {
    let p = functional_params(cfg)?;
    let (name, u) = single_profile(cfg)?;
    let ev = mt_functional(&u, &p)?;
    let psi = mt_functional_psi(&u, &p)?;
    let mut diagnostics = Diagnostics { saturation_events: (ev.saturated + psi.saturated) as u64, ..Default::default() };
    match u.outer_tail(u.dim().nt()) {
        Some(t) => {
            diagnostics.tail_estimates.insert("ln_mass_outer".into(), t);
        }
        None => diagnostics.warnings.push("outer tail of the L^N mass is not integrable at the observed decay".into()),
    }
    Ok(Outcome {
        results: json!({
            "profile": name,
            "value": ev.value,
            "psi_value": psi.value,
            "psi_gap": psi_gap(&u, &p),
            "effective_beta": effective_beta(&u, &p),
            "ln_mass": u.ln_pow(),
            "grad_pow": u.grad_pow(),
            "full_norm_pow": u.full_norm_pow(),
        }),
        diagnostics,
        table: Some(profile_table(&u)),
        profile: Some(u),
        failure: None,
    })
}

fn moser_diverge(cfg: &ExperimentConfig) -> Run {
    let d = dimension(cfg);
    let p = FunctionalParams::new(cfg.float("beta"), cfg.float("alpha"))?;
    let (k_max, step) = (cfg.float("k-max"), cfg.float("k-step"));
    let ks: Vec<f64> = (1..).map(|i| i as f64 * step).take_while(|k| *k <= k_max * (1.0 + 1e-12)).collect();
    if ks.is_empty() {
        return Err(RunError::Invalid("k-step exceeds k-max".into()));
    }
    let radius = cfg.float("R");
    let pts = moser_divergence(d, &p, radius, &ks)?;
    let limit = radius.powi(d.n as i32) * d.ball_volume();
    let mut table = Table::new(&["k", "value", "inner_ball"]);
    for q in &pts {
        table.push(vec![num(q.k), num(q.value), num(q.inner_ball)]);
    }
    let last = pts.last().expect("nonempty");
    Ok(Outcome {
        results: json!({
            "rows": to_value(&pts),
            "ball_limit": limit,
            "last_over_limit": last.value / limit,
            "increasing": pts.windows(2).all(|w| w[1].value > w[0].value),
            "inner_ball_increasing": pts.windows(2).all(|w| w[1].inner_ball > w[0].inner_ball),
        }),
        diagnostics: Diagnostics {
            saturation_events: pts.iter().map(|q| q.saturated as u64).sum(),
            ..Default::default()
        },
        table: Some(table),
        profile: None,
        failure: None,
    })
}

fn lower_bound(cfg: &ExperimentConfig) -> Run {
    let p = functional_params(cfg)?;
    let (name, v) = single_profile(cfg)?;
    let ts = cfg.floats("t-values");
    let pts = lower_bound_curve(&v, &p, &ts)?;
    let n = cfg.dim;
    let threshold = p.beta.powi(n as i32 - 1) * (1.0 + p.alpha) / factorial::<f64>(n - 1);
    let best = pts.iter().map(|q| q.j_value).fold(f64::NEG_INFINITY, f64::max);
    let mut table = Table::new(&["t", "j_value", "expansion"]);
    for q in &pts {
        table.push(vec![num(q.t), num(q.j_value), num(q.expansion)]);
    }
    Ok(Outcome {
        results: json!({
            "profile": name,
            "threshold": threshold,
            "max_value": best,
            "exceeds_threshold": best > threshold,
            "rows": to_value(&pts),
        }),
        diagnostics: Diagnostics {
            saturation_events: pts.iter().map(|q| q.saturated as u64).sum(),
            ..Default::default()
        },
        table: Some(table),
        profile: None,
        failure: None,
    })
}

fn ishiwata(cfg: &ExperimentConfig) -> Run {
    let p = functional_params(cfg)?;
    let mut rows = Vec::new();
    let mut table = Table::new(&["profile", "finite_difference", "series", "relative_gap"]);
    for (name, v) in profiles(cfg)? {
        let e = ishiwata_derivative(&v, &p)?;
        let gap = ((e.finite_difference - e.series) / e.series).abs();
        table.push(vec![name.clone(), num(e.finite_difference), num(e.series), num(gap)]);
        rows.push(json!({"profile": name, "estimate": to_value(&e), "relative_gap": gap}));
    }
    let all_negative = rows.iter().all(|r| r["estimate"]["finite_difference"].as_f64().is_some_and(|x| x < 0.0));
    let terms = rows.iter().filter_map(|r| r["estimate"]["series_terms"].as_u64()).max().unwrap_or(0);
    let mut diagnostics = Diagnostics::default();
    diagnostics.iterations.insert("series_terms_max".into(), terms);
    Ok(Outcome {
        results: json!({"rows": rows, "all_negative": all_negative}),
        diagnostics,
        table: Some(table),
        profile: None,
        failure: None,
    })
}

fn blowup(cfg: &ExperimentConfig) -> Run {
    let d = dimension(cfg);
    let mass = blowup_mass(&d)?;
    let mut moments = Vec::new();
    let mut table = Table::new(&["delta", "quadrature", "gamma_formula"]);
    for delta in cfg.floats("deltas") {
        let m = liouville_moment(&d, delta)?;
        table.push(vec![num(delta), num(m.quadrature), num(m.gamma_formula)]);
        moments.push(json!({"delta": delta, "moment": to_value(&m)}));
    }
    let mut diagnostics = Diagnostics::default();
    diagnostics.tail_estimates.insert("mass_outer".into(), mass.outer_tail);
    diagnostics.tail_estimates.insert("mass_inner_core".into(), mass.inner_core);
    let profile = blowup_profile(d);
    Ok(Outcome {
        results: json!({"mass": mass.value, "mass_detail": to_value(&mass), "moments": moments}),
        diagnostics,
        table: Some(table),
        profile: Some(profile),
        failure: None,
    })
}

fn b2() -> Run {
    let gs = gn_ground_state()?;
    let fam = gn_family_bound();
    let gaussian = gn_quotient_fn(|r| (-r * r).exp(), |r| -2.0 * r * (-r * r).exp())?;
    let mut diagnostics = Diagnostics::default();
    diagnostics.iterations.insert("bisection".into(), gs.bisection_steps as u64);
    diagnostics.iterations.insert("family_evaluations".into(), fam.evaluations as u64);
    Ok(Outcome {
        results: json!({
            "b2": gs.b2,
            "pohozaev_b2": gs.pohozaev_b2(),
            "q0": gs.q0,
            "ode_residual": gs.residual,
            "l2_sq": gs.l2_sq,
            "l4_pow": gs.l4_pow,
            "grad_sq": gs.grad_sq,
            "r_cut": gs.r_cut,
            "gaussian_quotient": gaussian,
            "family_bound": to_value(&fam),
            "lower_threshold": 1.0 / (2.0 * std::f64::consts::PI),
        }),
        diagnostics,
        table: Some(profile_table(&gs.profile)),
        profile: Some(gs.profile),
        failure: None,
    })
}

fn green(cfg: &ExperimentConfig) -> Run {
    let d = dimension(cfg);
    let opts = GreenOptions { r0: cfg.float("r0"), grid: grid_spec(cfg), check_sensitivity: true };
    let g = green_solve(&d, cfg.float("alpha"), &opts)?;
    let fit = g.near_origin_fit();
    let defect = green_direct_check(&g);
    let mut diagnostics = Diagnostics::default();
    if let Some(s) = g.r0_sensitivity {
        diagnostics.tail_estimates.insert("a_alpha_r0_shift".into(), s);
        if s > SENSITIVITY_WARN {
            diagnostics.warnings.push(format!("A_alpha moves by {s:.3e} when r0 halves"));
        }
    }
    Ok(Outcome {
        results: json!({
            "solution": to_value(&g),
            "norm_pow": g.norm_pow(),
            "weak_form_defect": defect,
            "near_origin": to_value(&fit),
        }),
        diagnostics,
        table: Some(profile_table(&g.profile)),
        profile: Some(g.profile),
        failure: None,
    })
}

fn testfn(cfg: &ExperimentConfig) -> Run {
    let d = dimension(cfg);
    let alpha = cfg.float("alpha");
    let g0 = green_g0(&d)?;
    let g = if alpha == 0.0 { g0 } else { green_alpha(&g0, alpha)? };
    let tp = TestFunctionParams::new(cfg.float("eps"), alpha)?;
    let tf = test_function(&tp, &g)?;
    let ex = test_function_excess(&tf)?;
    let mut diagnostics = Diagnostics { saturation_events: ex.saturated as u64, ..Default::default() };
    diagnostics.iterations.insert("matching".into(), tf.iterations as u64);
    Ok(Outcome {
        results: json!({
            "test_function": to_value(&tf),
            "excess": to_value(&ex),
            "positive": ex.excess > 0.0,
        }),
        diagnostics,
        table: Some(profile_table(&tf.profile)),
        profile: Some(tf.profile),
        failure: None,
    })
}

fn run_maximize(cfg: &ExperimentConfig) -> Run {
    let p = functional_params(cfg)?;
    let g = grid(cfg)?;
    let seed = Seed::from_name(cfg.text("seed").expect("seed validated")).expect("seed validated");
    let u0 = seed_profile(seed, &g)?;
    let rep = maximize(&p, &u0, cfg.int("budget") as usize)?;
    let mut diagnostics = Diagnostics { saturation_events: rep.saturation_events as u64, ..Default::default() };
    diagnostics.iterations.insert("ascent".into(), rep.iterations as u64);
    diagnostics.tail_estimates.insert("ln_mass_edge_fraction".into(), rep.concentration.edge_fraction);
    if rep.experimental {
        diagnostics.warnings.push("critical exponent: experimental run, see the concentration report".into());
    }
    let failure = (!rep.converged).then(|| {
        if rep.spreading {
            "ascent did not converge: the profile spreads out (vanishing)".to_string()
        } else {
            format!("ascent did not converge within {} iterations", rep.iterations)
        }
    });
    Ok(Outcome {
        results: json!({
            "report": to_value(&rep),
            "lambda_bound_holds": rep.lambda_bound_holds(&p),
            "lambda_over_peak": rep.lambda_over_peak(),
        }),
        diagnostics,
        table: Some(profile_table(&rep.profile)),
        profile: Some(rep.profile),
        failure,
    })
}
