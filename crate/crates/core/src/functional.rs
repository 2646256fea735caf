//! The Moser–Trudinger functional with the Adimurthi–Druet correction and the
//! scaling-curve computations built on it.

use serde::Serialize;

use crate::dims::{factorial, truncated_exp, Dimension};
use crate::error::{Error, Result};
use crate::radial::RadialProfile;
use crate::scalar::{int, lit, Real};

/// Tolerance on `‖u‖_{W^{1,N}}^N ≤ 1`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// `(β, α)` of the functional, plus guards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalParams<T> {
    pub beta: T,
    pub alpha: T,
    /// Allows `β > β_N`.
    pub supercritical: bool,
    /// Skips the unit-ball membership check.
    pub unconstrained: bool,
}

impl<T: Real> FunctionalParams<T> {
    pub fn new(beta: T, alpha: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be positive and finite".into()));
        }
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::InvalidArgument("alpha must lie in [0, 1]".into()));
        }
        Ok(Self { beta, alpha, supercritical: false, unconstrained: false })
    }

    /// Permits `β > β_N` (the supremum is infinite there).
    pub fn allow_supercritical(mut self) -> Self {
        self.supercritical = true;
        self
    }

    /// Evaluates outside the unit ball as well.
    pub fn without_constraint(mut self) -> Self {
        self.unconstrained = true;
        self
    }

    fn check(&self, dim: &Dimension<T>) -> Result<()> {
        if !self.supercritical && self.beta > dim.beta_n * (T::one() + lit(1e-14)) {
            return Err(Error::InvalidArgument(
                "beta exceeds beta_N; use allow_supercritical to evaluate anyway".into(),
            ));
        }
        Ok(())
    }
}

/// Functional value with the number of saturated quadrature points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation<T> {
    pub value: T,
    pub saturated: usize,
}

/// `∫ e^{s} − Σ_{k<m} s^k/k! dx` with `s = κ|u|^{N/(N−1)}`.
pub fn exp_integral<T: Real>(u: &RadialProfile<T>, kappa: T, m: usize) -> Evaluation<T> {
    let q = u.dim().conj();
    let mut saturated = 0;
    let value = u.integrate_map(|x| {
        let c = truncated_exp(kappa * x.abs().powf(q), m);
        saturated += c.saturated as usize;
        c.value
    });
    Evaluation { value, saturated }
}

/// `β(1 + α‖u‖_N^N)^{1/(N−1)}`.
pub fn effective_beta<T: Real>(u: &RadialProfile<T>, p: &FunctionalParams<T>) -> T {
    p.beta * (T::one() + p.alpha * u.ln_pow()).powf(u.dim().inv_nm1())
}

fn check_ball<T: Real>(u: &RadialProfile<T>, p: &FunctionalParams<T>) -> Result<()> {
    p.check(u.dim())?;
    let norm = u.full_norm_pow();
    if !p.unconstrained && norm > T::one() + lit(CONSTRAINT_TOL) {
        return Err(Error::ConstraintViolation { norm_n: norm.to_f64().unwrap_or(f64::NAN), tol: CONSTRAINT_TOL });
    }
    Ok(())
}

/// `∫ Φ_N(β(1+α‖u‖_N^N)^{1/(N−1)}|u|^{N/(N−1)}) dx`.
pub fn mt_functional<T: Real>(u: &RadialProfile<T>, p: &FunctionalParams<T>) -> Result<Evaluation<T>> {
    check_ball(u, p)?;
    Ok(exp_integral(u, effective_beta(u, p), u.dim().n - 1))
}

/// Same with `Ψ_N` in place of `Φ_N`.
pub fn mt_functional_psi<T: Real>(u: &RadialProfile<T>, p: &FunctionalParams<T>) -> Result<Evaluation<T>> {
    check_ball(u, p)?;
    Ok(exp_integral(u, effective_beta(u, p), u.dim().n))
}

/// `β^{N−1}(1+α‖u‖_N^N)‖u‖_N^N/(N−1)!`, the gap between the two functionals.
pub fn psi_gap<T: Real>(u: &RadialProfile<T>, p: &FunctionalParams<T>) -> T {
    let n = u.dim().n;
    let l = u.ln_pow();
    p.beta.powi(n as i32 - 1) * (T::one() + p.alpha * l) * l / factorial::<T>(n - 1)
}

/// Pointwise comparison behind the reduction from `(β, α)` to the `τ = 1 − α` norm.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TauCheck<T> {
    /// `(1+α‖u‖_N^N)^{1/(N−1)}|u(r*)|^{N/(N−1)}`.
    pub lhs: T,
    /// `|w(r*)|^{N/(N−1)}` with `w = u/(‖∇u‖_N^N + τ‖u‖_N^N)^{1/N}`.
    pub rhs: T,
    pub r_star: T,
    /// `max_i (lhs_i − rhs_i)` over all nodes.
    pub max_excess: T,
}

pub fn tau_reduction_check<T: Real>(u: &RadialProfile<T>, alpha: T) -> Result<TauCheck<T>> {
    if !(alpha >= T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument("alpha must lie in [0, 1)".into()));
    }
    if u.full_norm_pow() > T::one() + lit(CONSTRAINT_TOL) {
        return Err(Error::ConstraintViolation {
            norm_n: u.full_norm_pow().to_f64().unwrap_or(f64::NAN),
            tol: CONSTRAINT_TOL,
        });
    }
    let dim = u.dim();
    let q = dim.conj();
    let l = u.ln_pow();
    let tau = T::one() - alpha;
    let denom = u.grad_pow() + tau * l;
    if !(denom > T::zero()) {
        return Err(Error::InvalidArgument("profile must be nonzero".into()));
    }
    let lhs_factor = (T::one() + alpha * l).powf(dim.inv_nm1());
    let rhs_factor = denom.powf(-dim.inv_nm1());
    let mut best = (T::neg_infinity(), T::zero(), T::zero());
    let mut max_excess = T::neg_infinity();
    for (&v, &r) in u.values().iter().zip(u.grid().r()) {
        let base = v.abs().powf(q);
        let (lhs, rhs) = (lhs_factor * base, rhs_factor * base);
        if lhs > best.0 {
            best = (lhs, rhs, r);
        }
        max_excess = max_excess.max(lhs - rhs);
    }
    Ok(TauCheck { lhs: best.0, rhs: best.1, r_star: best.2, max_excess })
}

/// One point of the small-`t` lower-bound sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LowerBoundPoint<T> {
    pub t: T,
    /// Functional on `v_t/‖v_t‖_{W^{1,N}}`.
    pub j_value: T,
    /// Constant plus first-order terms of the small-`t` expansion.
    pub expansion: T,
    pub saturated: usize,
}

/// Functional along the normalized scaling curve `v_t/‖v_t‖`, `v_t(x) = t^{1/N}v(t^{1/N}x)`.
///
/// Evaluated through the exact change of variables `y = t^{1/N}x`:
/// `J(t) = t^{−1} ∫Φ_N(κ(t)|v|^{N/(N−1)}) dy`, so no resampling is involved.
pub fn scaling_curve_value<T: Real>(v: &RadialProfile<T>, p: &FunctionalParams<T>, t: T) -> Evaluation<T> {
    let dim = v.dim();
    let (e, l) = (v.grad_pow(), v.ln_pow());
    let norm = t * e + l;
    let m = l / norm;
    let amp = t.powf(dim.nt().recip()) / norm.powf(dim.nt().recip());
    let kappa = p.beta * (T::one() + p.alpha * m).powf(dim.inv_nm1()) * amp.powf(dim.conj());
    let ev = exp_integral(v, kappa, dim.n - 1);
    Evaluation { value: ev.value / t, saturated: ev.saturated }
}

/// Two-term small-`t` expansion of [`scaling_curve_value`].
pub fn lower_bound_expansion<T: Real>(v: &RadialProfile<T>, p: &FunctionalParams<T>, t: T) -> T {
    let dim = v.dim();
    let n = dim.n;
    let (e, l) = (v.grad_pow(), v.ln_pow());
    let one = T::one();
    let bn1 = p.beta.powi(n as i32 - 1) / factorial::<T>(n - 1);
    let pexp = dim.nt() * dim.conj();
    let lp = v.lp_pow(pexp);
    bn1 * (one + p.alpha) - t * bn1 * (one + int::<T>(2) * p.alpha) * e / l
        + p.beta.powi(n as i32) / factorial::<T>(n) * (one + p.alpha).powf(dim.conj()) * lp
            / l.powf(pexp / dim.nt())
            * t.powf(dim.inv_nm1())
}

/// Sweeps the scaling curve over `t_values`.
pub fn lower_bound_curve<T: Real>(
    v: &RadialProfile<T>,
    p: &FunctionalParams<T>,
    t_values: &[T],
) -> Result<Vec<LowerBoundPoint<T>>> {
    p.check(v.dim())?;
    if !(v.full_norm_pow() > T::zero()) {
        return Err(Error::InvalidArgument("profile must be nonzero".into()));
    }
    t_values
        .iter()
        .map(|&t| {
            if !(t > T::zero()) {
                return Err(Error::InvalidArgument("t must be positive".into()));
            }
            let ev = scaling_curve_value(v, p, t);
            Ok(LowerBoundPoint { t, j_value: ev.value, expansion: lower_bound_expansion(v, p, t), saturated: ev.saturated })
        })
        .collect()
}

/// Two estimates of `d/dt J[w_t]` at `t = 1` in dimension two.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IshiwataEstimate<T> {
    /// Richardson-extrapolated central difference.
    pub finite_difference: T,
    /// Partial sum of the series expansion.
    pub series: T,
    pub series_terms: usize,
    pub forward: T,
    pub backward: T,
    pub step: T,
}

/// Finite-difference step in `t`.
pub const ISHIWATA_STEP: f64 = 1e-4;
/// Relative truncation of the series.
pub const SERIES_TOL: f64 = 1e-14;

/// `d/dt J[w_t]|_{t=1}` for a unit-norm `v` in dimension two.
pub fn ishiwata_derivative<T: Real>(v: &RadialProfile<T>, p: &FunctionalParams<T>) -> Result<IshiwataEstimate<T>> {
    let dim = v.dim();
    if dim.n != 2 {
        return Err(Error::InvalidArgument("the derivative test is specific to N = 2".into()));
    }
    p.check(dim)?;
    if (v.full_norm_pow() - T::one()).abs() > lit(CONSTRAINT_TOL) {
        return Err(Error::InvalidArgument("profile must have unit W^{1,2} norm".into()));
    }
    let h = lit::<T>(ISHIWATA_STEP);
    let two = int::<T>(2);
    let j = |t: T| scaling_curve_value(v, p, t).value;
    let j0 = j(T::one());
    let (jp, jm) = (j(T::one() + h), j(T::one() - h));
    let (jp2, jm2) = (j(T::one() + h / two), j(T::one() - h / two));
    let d1 = (jp - jm) / (two * h);
    let d2 = (jp2 - jm2) / h;
    let fd = (int::<T>(4) * d2 - d1) / int(3);
    let forward = (jp - j0) / h;
    let backward = (j0 - jm) / h;
    if (forward - backward).abs() > lit::<T>(1e-3) * fd.abs() {
        return Err(Error::StepSize(format!(
            "one-sided differences {} and {} disagree",
            forward.to_f64().unwrap_or(f64::NAN),
            backward.to_f64().unwrap_or(f64::NAN)
        )));
    }

    let m = v.ln_pow();
    let g = v.grad_pow();
    let one = T::one();
    let a = one + p.alpha * m;
    let mut sum = T::zero();
    let mut coeff = T::one();
    let mut terms = 0;
    for k in 1..=400usize {
        let kt = int::<T>(k as i64);
        coeff = coeff * p.beta / kt;
        let pk = v.lp_pow(two * kt);
        let bracket = -kt * p.alpha * m * g + (kt - one) * a - kt * g * a;
        let term = coeff * a.powi(k as i32 - 1) * pk * bracket;
        sum = sum + term;
        terms = k;
        if k > 2 && term.abs() < lit::<T>(SERIES_TOL) * sum.abs() {
            break;
        }
    }
    Ok(IshiwataEstimate { finite_difference: fd, series: sum, series_terms: terms, forward, backward, step: h })
}
