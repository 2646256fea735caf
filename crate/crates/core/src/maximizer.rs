//! Constrained maximization of the functional over non-increasing radial
//! profiles on the unit sphere of `W^{1,N}`, with Euler–Lagrange and
//! concentration diagnostics.
//!
//! The ascent direction is the gradient of the discretized functional
//! preconditioned by the Hessian of the constraint `‖∇u‖_N^N + ‖u‖_N^N`
//! (tridiagonal on the grid). At a constrained critical point that direction
//! is parallel to `u`, so a full step is a nonlinear inverse iteration; steps
//! are shortened by backtracking until the value increases. Every iterate is
//! projected onto non-increasing, nonnegative profiles and rescaled to unit
//! norm.

use std::sync::Arc;

use serde::Serialize;

use crate::dims::truncated_exp;
use crate::error::{Error, Result};
use crate::functional::{mt_functional, FunctionalParams, CONSTRAINT_TOL};
use crate::odes::gn_ground_state;
use crate::radial::{pav_nondecreasing, RadialGrid, RadialProfile, Shape};
use crate::sequences::{moser_profile, MoserParams};

/// Relative change of the value below which the ascent stops.
pub const VALUE_TOL: f64 = 1e-10;
/// Largest `α` accepted at `β = β_N`; such runs are flagged experimental.
pub const CRITICAL_ALPHA_MAX: f64 = 0.1;
/// Share of `‖u‖_N^N` in the outer tenth of the window that signals spreading.
pub const SPREADING_FRACTION: f64 = 1e-3;
/// Smallest step fraction tried before the line search gives up.
const MIN_STEP: f64 = 1e-12;

/// Multipliers of the Euler–Lagrange equation
/// `−Δ_N u + u^{N−1} = (α_ε/λ) u^{1/(N−1)} Φ_N'(…) + γ_ε u^{N−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Multipliers {
    /// `λ = ∫ Φ_N'(β(1+α‖u‖_N^N)^{1/(N−1)} u^{N/(N−1)}) u^{N/(N−1)} dx`.
    pub lambda: f64,
    /// `(1 + α‖u‖_N^N)/(1 + 2α‖u‖_N^N)`.
    pub alpha_eps: f64,
    /// `α/(1 + 2α‖u‖_N^N)`.
    pub gamma_eps: f64,
}

/// Where a profile puts its mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Concentration {
    /// `u(0)`.
    pub c0: f64,
    /// `‖u‖_N^N`.
    pub ln_mass: f64,
    /// `r` with `r^N = (λ/α_ε) c0^{−N/(N−1)} e^{−β(1+α‖u‖_N^N)^{1/(N−1)} c0^{N/(N−1)}}`;
    /// zero when the exponential underflows.
    pub r_concentration: f64,
    /// Fraction of `‖u‖_N^N` carried by the outer tenth of the `t` window.
    pub edge_fraction: f64,
    /// Radius of the ball carrying half of `‖u‖_N^N`.
    pub mass_radius: f64,
}

/// Named starting profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Seed {
    /// `e^{−r²}`.
    Bump,
    /// The Moser function with `k = 5`, `R = 1`.
    Moser,
    /// The two-dimensional Gagliardo–Nirenberg ground state.
    GroundState,
}

impl Seed {
    pub const ALL: [Seed; 3] = [Seed::Bump, Seed::Moser, Seed::GroundState];

    pub fn name(self) -> &'static str {
        match self {
            Seed::Bump => "bump",
            Seed::Moser => "moser",
            Seed::GroundState => "ground-state",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Samples `seed` on `grid` and rescales it to unit norm.
pub fn seed_profile(seed: Seed, grid: &Arc<RadialGrid<f64>>) -> Result<RadialProfile<f64>> {
    let dim = *grid.dim();
    let values: Vec<f64> = match seed {
        Seed::Bump => grid.r().iter().map(|r| (-r * r).exp()).collect(),
        Seed::Moser => {
            let u = moser_profile(&MoserParams::new(5.0, 1.0)?, dim)?;
            grid.t().iter().map(|&t| u.eval_t(t)).collect()
        }
        Seed::GroundState => {
            if dim.n != 2 {
                return Err(Error::InvalidArgument("the ground-state seed exists only for N = 2".into()));
            }
            let q = gn_ground_state()?.profile;
            grid.t().iter().map(|&t| q.eval_t(t)).collect()
        }
    };
    RadialProfile::new(grid.clone(), values, Shape::PiecewiseLinear)?.normalize_to_sphere()
}

/// The default seeds available in the grid's dimension.
pub fn seed_battery(grid: &Arc<RadialGrid<f64>>) -> Result<Vec<(Seed, RadialProfile<f64>)>> {
    Seed::ALL
        .into_iter()
        .filter(|s| *s != Seed::GroundState || grid.dim().n == 2)
        .map(|s| seed_profile(s, grid).map(|u| (s, u)))
        .collect()
}

/// Five named unit-norm trial profiles: two Gaussians, `sech r`,
/// `(1 + r²)^{−2}`, and the Gagliardo–Nirenberg ground state (the Moser
/// function with `k = 5` outside dimension two).
pub fn trial_battery(grid: &Arc<RadialGrid<f64>>) -> Result<Vec<(&'static str, RadialProfile<f64>)>> {
    let shapes: [(&'static str, fn(f64) -> f64); 4] = [
        ("gaussian", |r| (-r * r).exp()),
        ("wide-gaussian", |r| (-r * r / 4.0).exp()),
        ("sech", |r| 1.0 / r.cosh()),
        ("algebraic", |r| (1.0 + r * r).powi(-2)),
    ];
    let mut out = Vec::with_capacity(5);
    for (name, f) in shapes {
        let u = RadialProfile::from_fn(grid.clone(), Shape::Smooth, |_, r| f(r))?;
        out.push((name, u.normalize_to_sphere()?));
    }
    if grid.dim().n == 2 {
        out.push(("ground-state", seed_profile(Seed::GroundState, grid)?));
    } else {
        out.push(("moser", seed_profile(Seed::Moser, grid)?));
    }
    Ok(out)
}

/// Outcome of [`maximize`].
#[derive(Clone, Debug, Serialize)]
pub struct MaximizerReport {
    #[serde(skip)]
    pub profile: RadialProfile<f64>,
    pub value: f64,
    pub multipliers: Multipliers,
    pub el_residual: f64,
    pub concentration: Concentration,
    pub iterations: usize,
    pub converged: bool,
    /// Set for runs at `β = β_N`.
    pub experimental: bool,
    /// The mass escapes outwards: it reaches the outer window edge, or an
    /// unconverged run has at least doubled its half-mass radius.
    pub spreading: bool,
    /// Trial steps rejected because the exponential saturated.
    pub saturation_events: usize,
    /// Functional value after every accepted step, starting with the seed.
    pub history: Vec<f64>,
}

impl MaximizerReport {
    /// `λ ≥ value/(β(1+α)^{1/(N−1)})`.
    pub fn lambda_bound_holds(&self, p: &FunctionalParams<f64>) -> bool {
        let n = self.profile.dim().n as f64;
        self.multipliers.lambda >= self.value / (p.beta * (1.0 + p.alpha).powf(1.0 / (n - 1.0)))
    }

    /// `λ/c0^{N/(N−1)}`, to be compared with the value.
    pub fn lambda_over_peak(&self) -> f64 {
        let q = self.profile.dim().conj();
        self.multipliers.lambda / self.concentration.c0.powf(q)
    }
}

/// Functional, `λ`, and the nodal integrals behind the gradient.
struct Sample {
    value: f64,
    ln_mass: f64,
    lambda: f64,
    kappa: f64,
    saturated: usize,
    /// `∫ Φ_N'(s) u^{1/(N−1)} hat_j dx`.
    a: Vec<f64>,
    /// `∫ u^{N−1} hat_j dx`.
    m: Vec<f64>,
}

fn sample(u: &[f64], grid: &RadialGrid<f64>, p: &FunctionalParams<f64>, nodal: bool) -> Sample {
    let dim = grid.dim();
    let n = dim.n;
    let (q, p1) = (dim.conj(), dim.inv_nm1());
    let theta = grid.theta();
    let mass = grid.mass_weights();
    let nq = theta.len();
    let last = u.len() - 1;
    let core = dim.ball_volume() * (-grid.t_max()).exp();

    let mut ln_mass = core * u[last].powi(n as i32);
    for i in 0..grid.cells() {
        for k in 0..nq {
            let v = u[i] + (u[i + 1] - u[i]) * theta[k];
            ln_mass += mass[i * nq + k] * v.powi(n as i32);
        }
    }
    let kappa = p.beta * (1.0 + p.alpha * ln_mass).powf(p1);

    let len = if nodal { u.len() } else { 0 };
    let (mut a, mut m) = (vec![0.0; len], vec![0.0; len]);
    let (mut value, mut lambda, mut saturated) = (0.0, 0.0, 0);
    let mut point = |w: f64, v: f64, split: Option<(usize, f64)>, a: &mut [f64], m: &mut [f64]| {
        let vq = v.powf(q);
        let phi = truncated_exp(kappa * vq, n - 1);
        let dphi = truncated_exp(kappa * vq, n - 2);
        saturated += phi.saturated as usize;
        value += w * phi.value;
        lambda += w * dphi.value * vq;
        if let Some((i, th)) = split {
            let fa = w * dphi.value * v.powf(p1);
            let fm = w * v.powi(n as i32 - 1);
            a[i] += fa * (1.0 - th);
            m[i] += fm * (1.0 - th);
            if th > 0.0 {
                a[i + 1] += fa * th;
                m[i + 1] += fm * th;
            }
        }
    };
    for i in 0..grid.cells() {
        for k in 0..nq {
            let th = theta[k];
            let v = u[i] + (u[i + 1] - u[i]) * th;
            point(mass[i * nq + k], v, nodal.then_some((i, th)), &mut a, &mut m);
        }
    }
    point(core, u[last], nodal.then_some((last, 0.0)), &mut a, &mut m);
    Sample { value, ln_mass, lambda, kappa, saturated, a, m }
}

/// `(1/N) ∂‖∇u‖_N^N/∂u_j` on the grid.
fn energy_gradient(u: &[f64], grid: &RadialGrid<f64>) -> Vec<f64> {
    let n = grid.dim().n as i32;
    let ef = grid.energy_factor();
    let flux: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]).abs().powi(n - 2) * (w[1] - w[0])).collect();
    (0..u.len())
        .map(|j| {
            let left = if j > 0 { flux[j - 1] } else { 0.0 };
            let right = flux.get(j).copied().unwrap_or(0.0);
            ef * (left - right)
        })
        .collect()
}

fn multipliers_from(s: &Sample, alpha: f64) -> Multipliers {
    let l = s.ln_mass;
    Multipliers {
        lambda: s.lambda,
        alpha_eps: (1.0 + alpha * l) / (1.0 + 2.0 * alpha * l),
        gamma_eps: alpha / (1.0 + 2.0 * alpha * l),
    }
}

fn check_unit(u: &RadialProfile<f64>) -> Result<()> {
    let norm = u.full_norm_pow();
    if (norm - 1.0).abs() > CONSTRAINT_TOL {
        return Err(Error::InvalidArgument(format!("profile must have unit norm (norm^N = {norm})")));
    }
    Ok(())
}

/// Multipliers of the Euler–Lagrange equation at a unit-norm profile.
pub fn el_multipliers(u: &RadialProfile<f64>, p: &FunctionalParams<f64>) -> Result<Multipliers> {
    check_unit(u)?;
    let s = sample(u.values(), u.grid(), p, false);
    if s.saturated > 0 {
        return Err(Error::Saturated("multiplier integral"));
    }
    Ok(multipliers_from(&s, p.alpha))
}

/// Compactly supported bumps `(1 − ((t − t_c)/N)²)²` centred at radii from
/// 0.02 to 8, restricted to those inside the window.
fn test_battery(grid: &Arc<RadialGrid<f64>>) -> Vec<RadialProfile<f64>> {
    let nt = grid.dim().nt();
    let half = nt;
    [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|r: &f64| -nt * r.ln())
        .filter(|&c| c - half > grid.t_min() && c + half < grid.t_max())
        .map(|c| {
            let values = grid
                .t()
                .iter()
                .map(|&t| {
                    let x = (t - c) / half;
                    if x.abs() < 1.0 {
                        (1.0 - x * x).powi(2)
                    } else {
                        0.0
                    }
                })
                .collect();
            RadialProfile::signed(grid.clone(), values, Shape::PiecewiseLinear).expect("finite bump")
        })
        .collect()
}

/// Largest weak-form defect of the Euler–Lagrange equation over a fixed
/// battery of bumps `φ`, each divided by `‖φ‖_{W^{1,N}}`. The integrals use
/// the grid quadrature, so a discrete constrained maximizer has zero defect.
pub fn el_residual(u: &RadialProfile<f64>, p: &FunctionalParams<f64>) -> Result<f64> {
    check_unit(u)?;
    let s = sample(u.values(), u.grid(), p, true);
    if s.saturated > 0 {
        return Err(Error::Saturated("Euler-Lagrange residual"));
    }
    let mp = multipliers_from(&s, p.alpha);
    let de = energy_gradient(u.values(), u.grid());
    let mut worst: f64 = 0.0;
    for phi in test_battery(u.grid()) {
        let mut defect = 0.0;
        for (j, &f) in phi.values().iter().enumerate() {
            if f != 0.0 {
                defect += f * (de[j] + (1.0 - mp.gamma_eps) * s.m[j] - mp.alpha_eps / mp.lambda * s.a[j]);
            }
        }
        worst = worst.max(defect.abs() / phi.full_norm());
    }
    Ok(worst)
}

/// `u(0)`, `‖u‖_N^N` and the concentration radius of a unit-norm profile.
pub fn concentration_diagnostics(u: &RadialProfile<f64>, p: &FunctionalParams<f64>) -> Result<Concentration> {
    check_unit(u)?;
    let s = sample(u.values(), u.grid(), p, false);
    let mp = multipliers_from(&s, p.alpha);
    let dim = u.dim();
    let c0 = u.core_value();
    let cq = c0.powf(dim.conj());
    let ln_rn = (mp.lambda / mp.alpha_eps).ln() - cq.ln() - s.kappa * cq;
    let r_concentration = (ln_rn / dim.nt()).exp();
    let grid = u.grid();
    let mass_radius = half_mass_radius(u);
    let cut = grid.t_min() + 0.1 * (grid.t_max() - grid.t_min());
    let outer = RadialProfile::signed(
        grid.clone(),
        grid.t().iter().zip(u.values()).map(|(&t, &v)| if t <= cut { v } else { 0.0 }).collect(),
        Shape::PiecewiseLinear,
    )?;
    Ok(Concentration {
        c0,
        ln_mass: s.ln_mass,
        r_concentration: if r_concentration.is_finite() { r_concentration } else { 0.0 },
        edge_fraction: outer.ln_pow() / s.ln_mass,
        mass_radius,
    })
}

fn half_mass_radius(u: &RadialProfile<f64>) -> f64 {
    let grid = u.grid();
    let n = u.dim().n as i32;
    let (theta, mass) = (grid.theta(), grid.mass_weights());
    let nq = theta.len();
    let v = u.values();
    let half = 0.5 * u.ln_pow();
    let mut acc = u.core_weight() * u.core_value().powi(n);
    for i in (0..grid.cells()).rev() {
        for k in 0..nq {
            acc += mass[i * nq + k] * (v[i] + (v[i + 1] - v[i]) * theta[k]).powi(n);
        }
        if acc >= half {
            return grid.r()[i];
        }
    }
    grid.r()[0]
}

/// Solves `M x = b` for a symmetric tridiagonal `M` (diagonal `d`, off-diagonal `o`).
fn solve_tridiagonal(d: &[f64], o: &[f64], b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = d[0];
    x[0] = b[0] / denom;
    for i in 1..n {
        c[i - 1] = o[i - 1] / denom;
        denom = d[i] - o[i - 1] * c[i - 1];
        x[i] = (b[i] - o[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Hessian of `‖∇u‖_N^N + ‖u‖_N^N` (up to the factor `N(N−1)`), with the
/// degenerate weights of `N ≥ 3` floored relative to their maximum.
fn constraint_metric(u: &[f64], grid: &RadialGrid<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = grid.dim().n as i32;
    let len = u.len();
    let (mut d, mut o) = (vec![0.0; len], vec![0.0; len - 1]);
    let ef = grid.energy_factor();
    let dmax = u.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let umax = u.iter().fold(0.0f64, |a, &b| a.max(b));
    let (dfloor, ufloor) = (1e-8 * dmax, 1e-8 * umax);
    for i in 0..len - 1 {
        let w = ef * (u[i + 1] - u[i]).abs().max(dfloor).powi(n - 2);
        d[i] += w;
        d[i + 1] += w;
        o[i] -= w;
    }
    let theta = grid.theta();
    let mass = grid.mass_weights();
    let nq = theta.len();
    for i in 0..grid.cells() {
        for k in 0..nq {
            let th = theta[k];
            let v = (u[i] + (u[i + 1] - u[i]) * th).max(ufloor);
            let w = mass[i * nq + k] * v.powi(n - 2);
            d[i] += w * (1.0 - th) * (1.0 - th);
            d[i + 1] += w * th * th;
            o[i] += w * th * (1.0 - th);
        }
    }
    let core = grid.dim().ball_volume() * (-grid.t_max()).exp();
    d[len - 1] += core * u[len - 1].max(ufloor).powi(n - 2);
    (d, o)
}

fn project(grid: &Arc<RadialGrid<f64>>, values: &[f64], weights: &[f64]) -> Result<RadialProfile<f64>> {
    let values = pav_nondecreasing(values, weights).into_iter().map(|v| v.max(0.0)).collect();
    RadialProfile::new(grid.clone(), values, Shape::PiecewiseLinear)?.normalize_to_sphere()
}

/// Projected, preconditioned gradient ascent from a unit-norm seed.
///
/// Stops when an accepted step changes the value by less than [`VALUE_TOL`]
/// (relative) or after `budget` iterations; `converged` is false in the
/// latter case and when the profile spreads to the outer window edge.
pub fn maximize(p: &FunctionalParams<f64>, seed: &RadialProfile<f64>, budget: usize) -> Result<MaximizerReport> {
    let dim = *seed.dim();
    let critical = p.beta >= dim.beta_n;
    if p.beta > dim.beta_n * (1.0 + 1e-14) {
        return Err(Error::InvalidArgument("beta must not exceed beta_N".into()));
    }
    if critical && p.alpha > CRITICAL_ALPHA_MAX {
        return Err(Error::InvalidArgument(format!(
            "at beta = beta_N only alpha <= {CRITICAL_ALPHA_MAX} is supported"
        )));
    }
    check_unit(seed)?;
    let grid = seed.grid().clone();
    let weights = grid.node_weights();
    let q = dim.conj();

    let mut u = project(&grid, seed.values(), &weights)?;
    let seed_radius = half_mass_radius(&u);
    let mut s = sample(u.values(), &grid, p, true);
    if s.saturated > 0 {
        return Err(Error::Saturated("maximizer seed"));
    }
    let mut history = vec![s.value];
    let mut saturation_events = 0;
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        iterations += 1;
        let de = energy_gradient(u.values(), &grid);
        let mix = s.kappa * q;
        let coupling = s.lambda * p.alpha / (1.0 + p.alpha * s.ln_mass);
        let grad: Vec<f64> = (0..u.values().len()).map(|j| mix * (s.a[j] + coupling * s.m[j])).collect();
        let (d, o) = constraint_metric(u.values(), &grid);
        let dir = solve_tridiagonal(&d, &o, &grad);
        let dir_norm = RadialProfile::signed(grid.clone(), dir.clone(), Shape::PiecewiseLinear)?.full_norm();
        debug_assert!(de.iter().all(|x| x.is_finite()));
        if !(dir_norm > 0.0) || !dir_norm.is_finite() {
            return Err(Error::NonFinite("ascent direction"));
        }

        let mut accepted = None;
        while step >= MIN_STEP {
            let trial: Vec<f64> =
                u.values().iter().zip(&dir).map(|(&x, &g)| (1.0 - step) * x + step * g / dir_norm).collect();
            let candidate = match project(&grid, &trial, &weights) {
                Ok(c) => c,
                Err(_) => {
                    step *= 0.5;
                    continue;
                }
            };
            let cs = sample(candidate.values(), &grid, p, true);
            if cs.saturated > 0 {
                saturation_events += 1;
                step *= 0.5;
                continue;
            }
            if cs.value > s.value {
                accepted = Some((candidate, cs));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, cs)) = accepted else {
            // No increasing step is left at working precision.
            converged = true;
            break;
        };
        let change = (cs.value - s.value) / s.value;
        u = candidate;
        s = cs;
        history.push(s.value);
        step = (2.0 * step).min(1.0);
        if change < VALUE_TOL {
            converged = true;
            break;
        }
    }

    let value = mt_functional(&u, p)?.value;
    let multipliers = el_multipliers(&u, p)?;
    let el_residual = el_residual(&u, p)?;
    let concentration = concentration_diagnostics(&u, p)?;
    let spreading = concentration.edge_fraction > SPREADING_FRACTION
        || (!converged && concentration.mass_radius > 2.0 * seed_radius);
    Ok(MaximizerReport {
        profile: u,
        value,
        multipliers,
        el_residual,
        concentration,
        iterations,
        converged: converged && !spreading,
        experimental: critical,
        spreading,
        saturation_events,
        history,
    })
}
