//! Gauss–Legendre rules on the unit interval.

use crate::scalar::{int, lit, Real};

/// Nodes `θ ∈ (0,1)` and weights (summing to 1) of the `m`-point Gauss–Legendre rule.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "rule needs at least one point");
    let two = int::<T>(2);
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    let tol = T::precision() * int(16);
    for i in 0..m.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th root on [-1, 1].
        let guess = (T::PI() * (lit::<T>(i as f64 + 0.75)) / lit(m as f64 + 0.5)).cos();
        let mut x = guess;
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= tol {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d.abs() > T::zero() {
            dp = d;
        }
        let w = two / ((T::one() - x * x) * dp * dp);
        nodes[i] = (T::one() - x) / two;
        nodes[m - 1 - i] = (T::one() + x) / two;
        weights[i] = w / two;
        weights[m - 1 - i] = w / two;
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre<T: Real>(m: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=m {
        let kt = int::<T>(k as i64);
        let p2 = ((int::<T>(2) * kt - T::one()) * x * p1 - (kt - T::one()) * p0) / kt;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (T::one(), T::zero());
    }
    let mt = int::<T>(m as i64);
    (p1, mt * (x * p1 - p0) / (x * x - T::one()))
}
