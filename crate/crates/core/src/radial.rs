//! Radial functions on a grid uniform in the Moser variable `t = −N ln r`.
//!
//! Profiles are stored by their nodal values and interpreted as piecewise
//! linear in `t`. Integrals `∫_{R^N} F(u) dx = (ω/N) ∫ F(u(t)) e^{−t} dt` are
//! evaluated cellwise by Gauss–Legendre on that interpolant, plus the exact
//! contribution of the constant core `t > t_max`. The gradient energy
//! `ω N^{N−1} ∫ |u_t|^N dt` is summed exactly from the cell slopes.

use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dims::{phi_n, Capped, Dimension};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::{int, lit, to_f64, Real};

/// Window and resolution of a [`RadialGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub h: f64,
    /// Gauss–Legendre points per cell.
    pub gauss_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { t_min: -20.0, t_max: 60.0, h: 0.01, gauss_points: 2 }
    }
}

impl GridSpec {
    pub fn new(t_min: f64, t_max: f64, h: f64) -> Self {
        Self { t_min, t_max, h, ..Self::default() }
    }

    pub fn with_gauss_points(mut self, m: usize) -> Self {
        self.gauss_points = m;
        self
    }
}

/// Uniform grid in `t = −N ln r`.
#[derive(Debug)]
pub struct RadialGrid<T> {
    spec: GridSpec,
    dim: Dimension<T>,
    h: T,
    t: Vec<T>,
    r: Vec<T>,
    theta: Vec<T>,
    gauss_w: Vec<T>,
    /// `(ω/N) h w_q e^{−t_q}` for every cell and Gauss point, cell-major.
    mass: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub fn new(dim: Dimension<T>, spec: GridSpec) -> Result<Arc<Self>> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("grid: {m}")));
        if !(spec.h > 0.0) || !spec.h.is_finite() {
            return bad("spacing must be positive");
        }
        if !(spec.t_min < 0.0 && spec.t_max > 0.0) {
            return bad("window must satisfy t_min < 0 < t_max");
        }
        if spec.gauss_points == 0 || spec.gauss_points > 32 {
            return bad("gauss_points must be in 1..=32");
        }
        let cells_f = (spec.t_max - spec.t_min) / spec.h;
        let cells = cells_f.round();
        if (cells - cells_f).abs() > 1e-9 * cells.max(1.0) || cells < 2.0 {
            return bad("window length must be a multiple of the spacing");
        }
        let cells = cells as usize;
        let h = lit::<T>(spec.h);
        let t0 = lit::<T>(spec.t_min);
        let nt = dim.nt();
        let t: Vec<T> = (0..=cells).map(|i| t0 + int::<T>(i as i64) * h).collect();
        let r: Vec<T> = t.iter().map(|&ti| (-ti / nt).exp()).collect();
        let (theta, gauss_w) = gauss_legendre::<T>(spec.gauss_points);
        let scale = dim.ball_volume() * h;
        let mut mass = Vec::with_capacity(cells * theta.len());
        for ti in &t[..cells] {
            for (th, w) in theta.iter().zip(&gauss_w) {
                mass.push(scale * *w * (-(*ti + *th * h)).exp());
            }
        }
        Ok(Arc::new(Self { spec, dim, h, t, r, theta, gauss_w, mass }))
    }

    pub fn with_defaults(dim: Dimension<T>) -> Arc<Self> {
        Self::new(dim, GridSpec::default()).expect("default grid is valid")
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn dim(&self) -> &Dimension<T> {
        &self.dim
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn t(&self) -> &[T] {
        &self.t
    }
    pub fn r(&self) -> &[T] {
        &self.r
    }
    pub fn len(&self) -> usize {
        self.t.len()
    }
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
    pub fn cells(&self) -> usize {
        self.t.len() - 1
    }
    pub fn t_min(&self) -> T {
        self.t[0]
    }
    pub fn t_max(&self) -> T {
        self.t[self.t.len() - 1]
    }
    /// Relative positions of the Gauss points inside a cell.
    pub fn theta(&self) -> &[T] {
        &self.theta
    }
    /// Measure weights of all Gauss points, cell-major.
    pub fn mass_weights(&self) -> &[T] {
        &self.mass
    }

    /// `t` of Gauss point `q` in cell `i`.
    pub fn gauss_t(&self, i: usize, q: usize) -> T {
        self.t[i] + self.theta[q] * self.h
    }

    /// Index of the node nearest to `t` (clamped to the window).
    pub fn nearest_node(&self, t: T) -> usize {
        let x = to_f64((t - self.t_min()) / self.h).round();
        x.clamp(0.0, self.cells() as f64) as usize
    }

    /// `∫_{R^N} f dx` over the window for an analytic integrand given as a function of `t`.
    pub fn integrate_fn(&self, mut f: impl FnMut(T) -> T) -> T {
        let m = self.theta.len();
        let mut acc = T::zero();
        for i in 0..self.cells() {
            for q in 0..m {
                acc = acc + self.mass[i * m + q] * f(self.gauss_t(i, q));
            }
        }
        acc
    }

    /// Lumped node weights `(ω/N) ∫ e^{−t} hat_i(t) dt` used by projections.
    pub fn node_weights(&self) -> Vec<T> {
        let m = self.theta.len();
        let mut w = vec![T::zero(); self.len()];
        for i in 0..self.cells() {
            for q in 0..m {
                let mw = self.mass[i * m + q];
                w[i] = w[i] + mw * (T::one() - self.theta[q]);
                w[i + 1] = w[i + 1] + mw * self.theta[q];
            }
        }
        w
    }

    /// `∫_R f(t) dt`-weights of the gradient energy: `ω N^{N−1} / h^{N−1}` per cell.
    pub fn energy_factor(&self) -> T {
        let n = self.dim.n as i32;
        self.dim.omega * self.dim.nt().powi(n - 1) / self.h.powi(n - 1)
    }
}

/// How a profile is interpolated between nodes when resampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// Monotone cubic Hermite.
    Smooth,
    /// Linear in `t`.
    PiecewiseLinear,
}

#[derive(Clone, Copy, Debug)]
struct Norms<T> {
    grad_pow: T,
    ln_pow: T,
}

/// A radial function sampled on a [`RadialGrid`].
#[derive(Clone, Debug)]
pub struct RadialProfile<T: Real> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
    shape: Shape,
    cache: OnceLock<Norms<T>>,
}

/// Result of a resampling operation together with the fraction of mass lost
/// at the window edges.
#[derive(Clone, Debug)]
pub struct Resampled<T: Real> {
    pub profile: RadialProfile<T>,
    pub clipped_fraction: T,
}

/// Empirical radial-lemma ratios of a profile.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadialBound<T> {
    /// `sup r^{N−1}|u|^N / ‖u‖_{W^{1,N}}^N`.
    pub sobolev_ratio: T,
    /// `sup r^{N−1}|u|^N / (‖∇u‖_N ‖u‖_N^{N−1})`; dilation invariant and at most `N/ω`.
    pub holder_ratio: T,
    /// Radius at which the supremum of `r^{N−1}|u|^N` is attained.
    pub r_star: T,
}

/// The Moser transform `w(t) = N^{1−1/N} ω^{1/N} u(e^{−t/N})` on the shared grid.
#[derive(Clone, Debug)]
pub struct LineProfile<T: Real> {
    grid: Arc<RadialGrid<T>>,
    w: Vec<T>,
}

impl<T: Real> LineProfile<T> {
    pub fn t(&self) -> &[T] {
        self.grid.t()
    }
    pub fn values(&self) -> &[T] {
        &self.w
    }

    fn factor(dim: &Dimension<T>) -> T {
        let nt = dim.nt();
        nt.powf(T::one() - nt.recip()) * dim.omega.powf(nt.recip())
    }

    /// Inverse transform back to a radial profile.
    pub fn to_radial(&self, shape: Shape) -> RadialProfile<T> {
        let f = Self::factor(self.grid.dim());
        let values = self.w.iter().map(|&w| w / f).collect();
        RadialProfile::from_parts(self.grid.clone(), values, shape)
    }
}

impl<T: Real> RadialProfile<T> {
    /// Builds a nonnegative profile from nodal values.
    pub fn new(grid: Arc<RadialGrid<T>>, values: Vec<T>, shape: Shape) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("profile values"));
        }
        if values.iter().any(|v| *v < T::zero()) {
            return Err(Error::InvalidArgument("profile values must be nonnegative".into()));
        }
        Ok(Self::from_parts(grid, values, shape))
    }

    /// Builds a profile of arbitrary sign (norms use `|u|`).
    pub fn signed(grid: Arc<RadialGrid<T>>, values: Vec<T>, shape: Shape) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument("value count does not match grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("profile values"));
        }
        Ok(Self::from_parts(grid, values, shape))
    }

    /// Samples `f(t, r)` at the nodes.
    pub fn from_fn(grid: Arc<RadialGrid<T>>, shape: Shape, f: impl Fn(T, T) -> T) -> Result<Self> {
        let values = grid.t().iter().zip(grid.r()).map(|(&t, &r)| f(t, r)).collect();
        Self::new(grid, values, shape)
    }

    pub(crate) fn from_parts(grid: Arc<RadialGrid<T>>, values: Vec<T>, shape: Shape) -> Self {
        Self { grid, values, shape, cache: OnceLock::new() }
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>) -> Self {
        let n = grid.len();
        Self::from_parts(grid, vec![T::zero(); n], Shape::PiecewiseLinear)
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }
    pub fn dim(&self) -> &Dimension<T> {
        self.grid.dim()
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Value at the innermost node, standing in for `u(0)`.
    pub fn core_value(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// Same grid and shape, new values.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self::from_parts(self.grid.clone(), values, self.shape)
    }

    /// Multiplies all values by `s`.
    pub fn scaled(&self, s: T) -> Self {
        self.with_values(self.values.iter().map(|&v| v * s).collect())
    }

    /// Non-increasing in `r` (non-decreasing in `t`).
    pub fn is_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// `∫_{R^N} F(u) dx`, including the constant core `t > t_max`.
    pub fn integrate_map(&self, mut f: impl FnMut(T) -> T) -> T {
        let g = &*self.grid;
        let m = g.theta.len();
        let mut acc = T::zero();
        for i in 0..g.cells() {
            let (a, b) = (self.values[i], self.values[i + 1]);
            for q in 0..m {
                let th = g.theta[q];
                acc = acc + g.mass[i * m + q] * f(a + (b - a) * th);
            }
        }
        acc + self.core_weight() * f(self.core_value())
    }

    /// Measure `(ω/N) e^{−t_max}` of the core ball.
    pub fn core_weight(&self) -> T {
        self.grid.dim.ball_volume() * (-self.grid.t_max()).exp()
    }

    fn norms(&self) -> Norms<T> {
        *self.cache.get_or_init(|| {
            let nt = self.dim().nt();
            let n = self.dim().n as i32;
            let ln_pow = self.integrate_map(|u| u.abs().powi(n));
            let grad_pow = self.grid.energy_factor()
                * self.values.windows(2).map(|w| (w[1] - w[0]).abs().powf(nt)).sum::<T>();
            Norms { grad_pow, ln_pow }
        })
    }

    /// `∫ |u|^p dx`.
    pub fn lp_pow(&self, p: T) -> T {
        if p == self.dim().nt() {
            return self.norms().ln_pow;
        }
        self.integrate_map(|u| u.abs().powf(p))
    }

    /// `‖u‖_p`.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        if p < T::one() {
            return Err(Error::InvalidArgument("p must be at least 1".into()));
        }
        let v = self.lp_pow(p).powf(p.recip());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("lp_norm"))
        }
    }

    /// `‖u‖_N^N`.
    pub fn ln_pow(&self) -> T {
        self.norms().ln_pow
    }

    /// `‖∇u‖_N^N`, exact for the piecewise-linear-in-`t` interpolant.
    pub fn grad_pow(&self) -> T {
        self.norms().grad_pow
    }

    /// `‖∇u‖_N`.
    pub fn grad_norm(&self) -> T {
        self.grad_pow().powf(self.dim().nt().recip())
    }

    /// `‖u‖_{W^{1,N}}^N = ‖∇u‖_N^N + ‖u‖_N^N`.
    pub fn full_norm_pow(&self) -> T {
        self.grad_pow() + self.ln_pow()
    }

    /// `‖u‖_{W^{1,N}}`.
    pub fn full_norm(&self) -> T {
        self.full_norm_pow().powf(self.dim().nt().recip())
    }

    /// `∫_{B_R} |∇u|^N dx` with `R` snapped to the nearest node; returns the value and that node.
    pub fn grad_pow_ball(&self, radius: T) -> (T, usize) {
        let j = self.node_for_radius(radius);
        let nt = self.dim().nt();
        let s: T = self.values[j..].windows(2).map(|w| (w[1] - w[0]).abs().powf(nt)).sum();
        (self.grid.energy_factor() * s, j)
    }

    fn node_for_radius(&self, radius: T) -> usize {
        self.grid.nearest_node(-self.dim().nt() * radius.ln())
    }

    /// Divides by the full norm so that `‖u‖_{W^{1,N}} = 1`.
    pub fn normalize_to_sphere(&self) -> Result<Self> {
        let norm = self.full_norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero or non-finite profile".into()));
        }
        let out = self.scaled(norm.recip());
        Ok(out)
    }

    /// Estimate of `∫_{t<t_min}` of `|u|^p` beyond the outer window edge.
    ///
    /// The decay beyond the window is extrapolated from the last outer cells,
    /// never slower than the radial-lemma rate `r^{−(N−1)/N}`; `None` means the
    /// extrapolated tail is not integrable.
    pub fn outer_tail(&self, p: T) -> Option<T> {
        let u0 = self.values[0].abs();
        if u0 == T::zero() {
            return Some(T::zero());
        }
        let nt = self.dim().nt();
        let lemma_rate = (nt - T::one()) / (nt * nt);
        let k = 10.min(self.grid.cells());
        let uk = self.values[k].abs();
        let observed = if uk > u0 {
            (uk / u0).ln() / (self.grid.t[k] - self.grid.t[0])
        } else {
            T::zero()
        };
        let rate = observed.max(lemma_rate) * p - T::one();
        if rate <= T::zero() {
            return None;
        }
        Some(self.grid.dim.ball_volume() * u0.powf(p) * (-self.grid.t_min()).exp() / rate)
    }

    /// Value at arbitrary `t`, linear or monotone-cubic depending on the shape;
    /// constant beyond `t_max` and zero before `t_min`.
    pub fn eval_t(&self, t: T) -> T {
        let slopes = match self.shape {
            Shape::Smooth => Some(hermite_slopes(&self.values, self.grid.h)),
            Shape::PiecewiseLinear => None,
        };
        eval_with(&self.grid, &self.values, slopes.as_deref(), t)
    }

    /// Returns `amplitude · u(t + delta)` sampled at the nodes.
    pub fn shifted(&self, delta: T, amplitude: T) -> Resampled<T> {
        let g = &*self.grid;
        let slopes = match self.shape {
            Shape::Smooth => Some(hermite_slopes(&self.values, g.h)),
            Shape::PiecewiseLinear => None,
        };
        // Exact index shifts need no interpolation.
        let steps = delta / g.h;
        let k = steps.round();
        let aligned = (steps - k).abs() <= lit::<T>(1e-9);
        let n = g.len();
        let values: Vec<T> = if aligned {
            let k = to_f64(k) as i64;
            (0..n as i64)
                .map(|i| {
                    let j = i + k;
                    let v = if j < 0 {
                        T::zero()
                    } else if j >= n as i64 {
                        self.values[n - 1]
                    } else {
                        self.values[j as usize]
                    };
                    v * amplitude
                })
                .collect()
        } else {
            g.t.iter()
                .map(|&t| amplitude * eval_with(g, &self.values, slopes.as_deref(), t + delta))
                .collect()
        };
        let clipped_fraction = self.clipped_fraction(delta);
        if clipped_fraction > lit(1e-8) {
            warn!("resampling clips {:.3e} of the profile mass at the grid window", to_f64(clipped_fraction));
        }
        Resampled { profile: Self::from_parts(self.grid.clone(), values, self.shape), clipped_fraction }
    }

    /// Fraction of `L^N` or gradient mass that a shift by `delta` pushes out of the window.
    fn clipped_fraction(&self, delta: T) -> T {
        let g = &*self.grid;
        if delta == T::zero() {
            return T::zero();
        }
        let nt = self.dim().nt();
        let m = g.theta.len();
        let (lo, hi) = if delta > T::zero() {
            (g.t_min(), g.t_min() + delta)
        } else {
            (g.t_max() + delta, g.t_max())
        };
        let (mut mass_out, mut grad_out) = (T::zero(), T::zero());
        for i in 0..g.cells() {
            let mid = g.t[i] + g.h / int(2);
            if mid < lo || mid > hi {
                continue;
            }
            let (a, b) = (self.values[i], self.values[i + 1]);
            grad_out = grad_out + (b - a).abs().powf(nt);
            if delta > T::zero() {
                for q in 0..m {
                    mass_out = mass_out + g.mass[i * m + q] * (a + (b - a) * g.theta[q]).abs().powf(nt);
                }
            }
        }
        let grad_out = grad_out * g.energy_factor();
        let frac = |part: T, total: T| if total > T::zero() { part / total } else { T::zero() };
        frac(mass_out, self.ln_pow()).max(frac(grad_out, self.grad_pow()))
    }

    /// `v_s(x) = s^{1/N} v(s^{1/N} x)`.
    pub fn scale_family(&self, s: T) -> Result<Resampled<T>> {
        if !(s > T::zero()) {
            return Err(Error::InvalidArgument("scale parameter must be positive".into()));
        }
        Ok(self.shifted(-s.ln(), s.powf(self.dim().nt().recip())))
    }

    /// `u(·/R)`.
    pub fn dilate(&self, radius: T) -> Result<Resampled<T>> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidArgument("dilation radius must be positive".into()));
        }
        Ok(self.shifted(self.dim().nt() * radius.ln(), T::one()))
    }

    /// The Moser transform on the shared grid.
    pub fn moser_transform(&self) -> LineProfile<T> {
        let f = LineProfile::factor(self.dim());
        LineProfile { grid: self.grid.clone(), w: self.values.iter().map(|&u| f * u).collect() }
    }

    /// Empirical radial-lemma constants over the grid nodes.
    pub fn radial_bound_check(&self) -> RadialBound<T> {
        let n = self.dim().n as i32;
        let nt = self.dim().nt();
        let (mut best, mut r_star) = (T::zero(), self.grid.r[0]);
        for (&u, &r) in self.values.iter().zip(&self.grid.r) {
            let v = r.powi(n - 1) * u.abs().powi(n);
            if v > best {
                best = v;
                r_star = r;
            }
        }
        let full = self.full_norm_pow();
        let holder = self.grad_norm() * self.ln_pow().powf((nt - T::one()) / nt);
        let ratio = |den: T| if den > T::zero() { best / den } else { T::zero() };
        RadialBound { sobolev_ratio: ratio(full), holder_ratio: ratio(holder), r_star }
    }

    /// `max(u − u(R), 0)` on `r < R`, zero outside; `R` is snapped to the
    /// nearest node, whose radius is returned.
    pub fn boundary_truncate(&self, radius: T) -> Result<(Self, T)> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidArgument("truncation radius must be positive".into()));
        }
        let t = -self.dim().nt() * radius.ln();
        if t < self.grid.t_min() || t > self.grid.t_max() {
            return Err(Error::InvalidArgument("truncation radius outside the grid window".into()));
        }
        let j = self.node_for_radius(radius);
        let edge = self.values[j];
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &u)| if i < j { T::zero() } else { (u - edge).max(T::zero()) })
            .collect();
        Ok((self.with_values(values), self.grid.r[j]))
    }

    /// Weighted isotonic projection onto profiles non-increasing in `r`.
    pub fn decreasing_projection(&self) -> Self {
        let w = self.grid.node_weights();
        self.with_values(pav_nondecreasing(&self.values, &w))
    }

    /// Writes `t,r,value` rows; `f64` cells use the shortest representation
    /// that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        wtr.write_record(["t", "r", "value"])?;
        for ((t, r), v) in self.grid.t.iter().zip(&self.grid.r).zip(&self.values) {
            wtr.write_record([format!("{t:?}"), format!("{r:?}"), format!("{v:?}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl RadialProfile<f64> {
    /// Reads a `t,r,value` CSV written by [`RadialProfile::write_csv`]; the grid is
    /// reconstructed from the `t` column.
    pub fn read_csv<R: Read>(input: R, dim: Dimension<f64>, gauss_points: usize, shape: Shape) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "r", "value"] {
            return Err(Error::Io(format!("unexpected CSV header {:?}", headers)));
        }
        let mut t = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| Error::Io(format!("row {}: {e}", line + 2)))
            };
            t.push(parse(0)?);
            values.push(parse(2)?);
        }
        if t.len() < 3 {
            return Err(Error::Io("profile CSV needs at least three rows".into()));
        }
        let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let spec = GridSpec { t_min: t[0], t_max: t[t.len() - 1], h, gauss_points };
        let grid = RadialGrid::new(dim, spec)?;
        if grid.len() != t.len() || grid.t().iter().zip(&t).any(|(a, b)| (a - b).abs() > 1e-6 * h) {
            return Err(Error::Io("t column is not a uniform grid".into()));
        }
        RadialProfile::signed(grid, values, shape)
    }
}

/// Node slopes (in `t`) for monotone cubic Hermite interpolation: fourth-order
/// central differences, limited by the Hyman filter.
fn hermite_slopes<T: Real>(v: &[T], h: T) -> Vec<T> {
    let n = v.len();
    let secant: Vec<T> = v.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let twelve = int::<T>(12);
    let three = int::<T>(3);
    (0..n)
        .map(|i| {
            let raw = if i >= 2 && i + 2 < n {
                (v[i - 2] - int::<T>(8) * v[i - 1] + int::<T>(8) * v[i + 1] - v[i + 2]) / (twelve * h)
            } else if i >= 1 && i + 1 < n {
                (v[i + 1] - v[i - 1]) / (int::<T>(2) * h)
            } else if i == 0 {
                secant[0]
            } else {
                secant[n - 2]
            };
            let left = if i > 0 { Some(secant[i - 1]) } else { None };
            let right = if i + 1 < n { Some(secant[i]) } else { None };
            match (left, right) {
                (Some(a), Some(b)) => {
                    if a * b <= T::zero() {
                        T::zero()
                    } else {
                        let bound = three * a.abs().min(b.abs());
                        raw.signum() * raw.abs().min(bound) * if raw * a < T::zero() { T::zero() } else { T::one() }
                    }
                }
                (Some(s), None) | (None, Some(s)) => {
                    if raw * s <= T::zero() {
                        T::zero()
                    } else {
                        raw.signum() * raw.abs().min(three * s.abs())
                    }
                }
                (None, None) => T::zero(),
            }
        })
        .collect()
}

fn eval_with<T: Real>(g: &RadialGrid<T>, v: &[T], slopes: Option<&[T]>, t: T) -> T {
    let n = v.len();
    if t <= g.t_min() {
        return if t == g.t_min() { v[0] } else { T::zero() };
    }
    if t >= g.t_max() {
        return v[n - 1];
    }
    let x = (t - g.t_min()) / g.h;
    let i = (to_f64(x.floor()) as usize).min(n - 2);
    let s = x - int(i as i64);
    match slopes {
        None => v[i] + (v[i + 1] - v[i]) * s,
        Some(d) => hermite(v[i], v[i + 1], d[i] * g.h, d[i + 1] * g.h, s),
    }
}

/// Cubic Hermite on the unit interval with end values and (scaled) end slopes.
pub(crate) fn hermite<T: Real>(y0: T, y1: T, m0: T, m1: T, s: T) -> T {
    let two = int::<T>(2);
    let three = int::<T>(3);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
}

/// Pool-adjacent-violators for a weighted non-decreasing fit. Equal block
/// means are not pooled, so flat runs keep their left value.
pub fn pav_nondecreasing<T: Real>(values: &[T], weights: &[T]) -> Vec<T> {
    struct Block<T> {
        mean: T,
        weight: T,
        len: usize,
    }
    let mut blocks: Vec<Block<T>> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = Block { mean: v, weight: w, len: 1 };
        while let Some(prev) = blocks.last() {
            if prev.mean > cur.mean {
                let prev = blocks.pop().expect("non-empty");
                let weight = prev.weight + cur.weight;
                let mean = if weight > T::zero() {
                    (prev.mean * prev.weight + cur.mean * cur.weight) / weight
                } else {
                    (prev.mean + cur.mean) / int(2)
                };
                cur = Block { mean, weight, len: prev.len + cur.len };
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for b in blocks {
        out.extend(std::iter::repeat(b.mean).take(b.len));
    }
    out
}

/// Both sides of `∫Φ_N(β|u|^{N/(N−1)})dx = (ω/N)∫Φ_N((β/β_N)|w|^{N/(N−1)})e^{−t}dt`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChangeOfVariables<T> {
    /// Radial quadrature in `r`.
    pub lhs: T,
    /// Line quadrature in `t` of the transformed function.
    pub rhs: T,
    pub saturated: bool,
}

/// Evaluates both sides of the change-of-variables identity with independent quadratures.
pub fn functional_change_of_variables<T: Real>(u: &RadialProfile<T>, beta: T) -> Result<ChangeOfVariables<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidArgument("beta must be positive".into()));
    }
    let dim = *u.dim();
    let g = &**u.grid();
    let q = dim.conj();
    let mut sat = false;
    let mut phi = |x: T| -> T {
        let c: Capped<T> = phi_n(x, &dim);
        sat |= c.saturated;
        c.value
    };

    // Left side: Gauss–Legendre in r on every cell [r_{i+1}, r_i].
    let nt = dim.nt();
    let n = dim.n as i32;
    let (theta, gw) = (g.theta(), &g.gauss_w);
    let vals = u.values();
    let mut lhs = T::zero();
    for i in 0..g.cells() {
        let (r_in, r_out) = (g.r()[i + 1], g.r()[i]);
        let width = r_out - r_in;
        for (th, w) in theta.iter().zip(gw) {
            let r = r_in + *th * width;
            let s = (-nt * r.ln() - g.t()[i]) / g.h();
            let uv = vals[i] + (vals[i + 1] - vals[i]) * s;
            lhs = lhs + *w * width * dim.omega * r.powi(n - 1) * phi(beta * uv.abs().powf(q));
        }
    }
    lhs = lhs + u.core_weight() * phi(beta * u.core_value().abs().powf(q));

    // Right side: on the line.
    let line = u.moser_transform();
    let wprof = RadialProfile::from_parts(u.grid().clone(), line.w.clone(), u.shape());
    let ratio = beta / dim.beta_n;
    let rhs = wprof.integrate_map(|w| phi(ratio * w.abs().powf(q)));
    Ok(ChangeOfVariables { lhs, rhs, saturated: sat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2() -> Arc<RadialGrid<f64>> {
        RadialGrid::with_defaults(Dimension::new(2).unwrap())
    }

    #[test]
    fn grid_layout() {
        let g = grid2();
        assert_eq!(g.len(), 8001);
        assert!((g.t()[0] + 20.0).abs() < 1e-12 && (g.t_max() - 60.0).abs() < 1e-9);
        for (t, r) in g.t().iter().zip(g.r()) {
            assert!((r - (-t / 2.0).exp()).abs() <= 1e-15 * r);
        }
        assert!(RadialGrid::new(*g.dim(), GridSpec::new(1.0, 2.0, 0.1)).is_err());
        assert!(RadialGrid::new(*g.dim(), GridSpec::new(-1.0, 2.0, 0.3)).is_ok());
        assert!(RadialGrid::new(*g.dim(), GridSpec::new(-1.0, 2.05, 0.1)).is_err());
    }

    #[test]
    fn unit_disc_indicator() {
        // A jump costs O(h) in any nodal representation; refine the spacing.
        let g = RadialGrid::new(Dimension::new(2).unwrap(), GridSpec::new(-10.0, 30.0, 0.001)).unwrap();
        let u = RadialProfile::from_fn(g, Shape::PiecewiseLinear, |_, r| if r < 1.0 { 1.0 } else if r == 1.0 { 0.5 } else { 0.0 }).unwrap();
        let a = u.lp_pow(2.0);
        assert!((a / PI - 1.0).abs() < 1e-3, "{a}");
    }

    #[test]
    fn cone_gradient() {
        let g = grid2();
        let u = RadialProfile::from_fn(g, Shape::Smooth, |_, r| (1.0 - r).max(0.0)).unwrap();
        assert!((u.grad_norm() - PI.sqrt()).abs() < 1e-4, "{}", u.grad_norm());
        let c = RadialProfile::from_fn(u.grid().clone(), Shape::Smooth, |_, _| 1.0).unwrap();
        assert_eq!(c.grad_pow(), 0.0);
    }

    #[test]
    fn analytic_integral_of_gaussian() {
        let g = grid2();
        let v = g.integrate_fn(|t| (-(-t).exp()).exp()); // e^{-r^2}
        assert!((v / PI - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn pav_blip() {
        let v = [1.0, 3.0, 2.0];
        let w = [1.0, 1.0, 3.0];
        let p = pav_nondecreasing(&v, &w);
        assert_eq!(p, vec![1.0, 2.25, 2.25]);
        assert_eq!(pav_nondecreasing(&p, &w), p);
        let flat = [2.0, 2.0, 2.0];
        assert_eq!(pav_nondecreasing(&flat, &w), flat.to_vec());
    }

    #[test]
    fn hermite_interpolation_is_monotone() {
        let g = grid2();
        let u = RadialProfile::from_fn(g, Shape::Smooth, |_, r| if r < 1.0 { 1.0 } else { (-(r - 1.0)).exp() }).unwrap();
        let s = u.shifted(0.0037, 1.0).profile;
        assert!(s.is_decreasing());
        assert!(s.values().iter().all(|v| *v >= 0.0 && *v <= 1.0));
    }

    #[test]
    fn aligned_shift_is_exact() {
        let g = grid2();
        let u = RadialProfile::from_fn(g, Shape::Smooth, |_, r| (-r * r).exp()).unwrap();
        let s = u.shifted(0.5, 1.0).profile;
        assert_eq!(s.values()[100], u.values()[150]);
    }

    #[test]
    fn csv_round_trip() {
        let g = grid2();
        let u = RadialProfile::from_fn(g, Shape::Smooth, |_, r| (-r * r / 3.0).exp()).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,r,value\n"));
        assert!(!text.contains('\r'));
        let back = RadialProfile::read_csv(&buf[..], *u.dim(), 2, Shape::Smooth).unwrap();
        assert_eq!(back.values(), u.values());
        assert!((back.full_norm() / u.full_norm() - 1.0).abs() < 1e-12);
    }
}
