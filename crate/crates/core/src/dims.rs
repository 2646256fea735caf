//! Dimension constants and truncated exponentials.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{int, lit, Real};

/// Space dimension together with its derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dimension<T> {
    /// Space dimension `N ≥ 2`.
    pub n: usize,
    /// Surface area of the unit sphere `S^{N-1}`.
    pub omega: T,
    /// Sharp exponent `N ω^{1/(N-1)}`.
    pub beta_n: T,
    /// Liouville bubble constant `(ω/N)^{1/(N-1)}`.
    pub c_n: T,
}

/// `Γ(m/2)` for a positive integer `m`, by recursion from `Γ(1) = 1`, `Γ(1/2) = √π`.
pub fn gamma_half<T: Real>(m: usize) -> T {
    assert!(m >= 1, "gamma_half needs m >= 1");
    let (mut g, mut x) = if m % 2 == 0 {
        (T::one(), T::one())
    } else {
        (T::PI().sqrt(), lit::<T>(0.5))
    };
    let target = int::<T>(m as i64) / int(2);
    while x < target {
        g = g * x;
        x = x + T::one();
    }
    g
}

/// `n!` as a scalar.
pub fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * int(k as i64))
}

impl<T: Real> Dimension<T> {
    /// Builds the constants for dimension `n`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {n}")));
        }
        let nt = int::<T>(n as i64);
        let half_n = nt / int(2);
        let omega = int::<T>(2) * T::PI().powf(half_n) / gamma_half::<T>(n);
        let inv = T::one() / (nt - T::one());
        let beta_n = nt * omega.powf(inv);
        let c_n = (omega / nt).powf(inv);
        Ok(Self { n, omega, beta_n, c_n })
    }

    /// `N` as a scalar.
    pub fn nt(&self) -> T {
        int(self.n as i64)
    }

    /// The conjugate exponent `N/(N-1)`.
    pub fn conj(&self) -> T {
        self.nt() / (self.nt() - T::one())
    }

    /// `1/(N-1)`.
    pub fn inv_nm1(&self) -> T {
        T::one() / (self.nt() - T::one())
    }

    /// Volume factor `ω/N` of the unit ball.
    pub fn ball_volume(&self) -> T {
        self.omega / self.nt()
    }
}

/// Shorthand for [`Dimension::new`].
pub fn make_dimension<T: Real>(n: usize) -> Result<Dimension<T>> {
    Dimension::new(n)
}

/// A value produced by a saturating exponential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Capped<T> {
    pub value: T,
    /// Set when the argument exceeded [`Real::exp_cap`]; `value` is then the
    /// function evaluated at the cap.
    pub saturated: bool,
}

impl<T: Real> Capped<T> {
    fn exact(value: T) -> Self {
        Self { value, saturated: false }
    }
}

const SERIES_SWITCH: f64 = 0.5;

/// `Σ_{k ≥ m} t^k/k!` by direct summation, for small `t`.
fn exp_tail<T: Real>(t: T, m: usize) -> T {
    let mut term = t.powi(m as i32) / factorial::<T>(m);
    let mut sum = term;
    let mut k = m;
    while term > T::precision() * sum {
        k += 1;
        term = term * t / int(k as i64);
        sum = sum + term;
    }
    sum
}

/// `e^t − Σ_{k<m} t^k/k!` for `t ≥ 0`, saturating above the exponent cap.
pub fn truncated_exp<T: Real>(t: T, m: usize) -> Capped<T> {
    debug_assert!(t >= T::zero());
    if t <= T::zero() {
        return Capped::exact(if m == 0 { T::one() } else { T::zero() });
    }
    if t < lit(SERIES_SWITCH) {
        return Capped::exact(exp_tail(t, m));
    }
    let (x, saturated) = if t > T::exp_cap() { (T::exp_cap(), true) } else { (t, false) };
    let mut partial = T::zero();
    let mut term = T::one();
    for k in 0..m {
        if k > 0 {
            term = term * x / int(k as i64);
        }
        partial = partial + term;
    }
    Capped { value: x.exp() - partial, saturated }
}

/// `Φ_N(t) = e^t − Σ_{k=0}^{N-2} t^k/k!`.
pub fn phi_n<T: Real>(t: T, dim: &Dimension<T>) -> Capped<T> {
    truncated_exp(t, dim.n - 1)
}

/// `Ψ_N(t) = Φ_N(t) − t^{N-1}/(N-1)!`.
pub fn psi_n<T: Real>(t: T, dim: &Dimension<T>) -> Capped<T> {
    truncated_exp(t, dim.n)
}

/// `Φ_N'(t) = Φ_N(t) + t^{N-2}/(N-2)!`.
pub fn phi_n_prime<T: Real>(t: T, dim: &Dimension<T>) -> Capped<T> {
    truncated_exp(t, dim.n - 2)
}

/// `Σ_{k=1}^{N-1} 1/k`.
pub fn harmonic_sum<T: Real>(dim: &Dimension<T>) -> T {
    (1..dim.n).map(|k| T::one() / int(k as i64)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn d(n: usize) -> Dimension<f64> {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn two_dimensional_constants() {
        let dim = d(2);
        assert!((dim.omega - 2.0 * PI).abs() < 1e-15);
        assert!((dim.beta_n - 4.0 * PI).abs() < 1e-14);
        assert!((dim.c_n - PI).abs() < 1e-15);
    }

    #[test]
    fn three_and_four() {
        assert!((d(3).beta_n - 6.0 * PI.sqrt()).abs() < 1e-13);
        assert!((d(4).omega - 2.0 * PI * PI).abs() < 1e-13);
        assert!(Dimension::<f64>::new(1).is_err());
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half::<f64>(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half::<f64>(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half::<f64>(8), 6.0);
    }

    #[test]
    fn spec_examples() {
        assert_eq!(phi_n(0.0, &d(2)).value, 0.0);
        assert!((phi_n(1.0, &d(3)).value - (E - 2.0)).abs() < 1e-15);
        let small = phi_n(1e-8, &d(4)).value;
        assert!((small / (1e-24 / 6.0) - 1.0).abs() < 1e-6);
        assert!((psi_n(1.0, &d(2)).value - (E - 2.0)).abs() < 1e-15);
        assert!((psi_n(2.0, &d(3)).value - (E * E - 5.0)).abs() < 1e-14);
        assert_eq!(phi_n_prime(0.0, &d(2)).value, 1.0);
        assert!((phi_n_prime(3.0, &d(3)).value - (3f64.exp() - 1.0)).abs() < 1e-13);
        assert_eq!(harmonic_sum(&d(2)), 1.0);
        assert!((harmonic_sum(&d(4)) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn series_and_exponential_branches_meet() {
        for n in 2..=6 {
            let dim = d(n);
            let below = phi_n(0.5 - 1e-15, &dim).value;
            let above = phi_n(0.5, &dim).value;
            assert!((below / above - 1.0).abs() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn saturation_is_flagged() {
        let v = phi_n(800.0, &d(2));
        assert!(v.saturated);
        assert!(v.value.is_finite());
        assert!(!phi_n(600.0, &d(2)).saturated);
    }
}
