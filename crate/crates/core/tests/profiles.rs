//! Randomized properties of radial profiles and the functional.

use std::sync::{Arc, OnceLock};

use mtlab::dims::Dimension;
use mtlab::functional::{mt_functional, mt_functional_psi, psi_gap, tau_reduction_check, FunctionalParams};
use mtlab::radial::{functional_change_of_variables, GridSpec, RadialGrid, RadialProfile, Shape};
use proptest::prelude::*;

fn grid(n: usize) -> Arc<RadialGrid<f64>> {
    static GRIDS: OnceLock<Vec<Arc<RadialGrid<f64>>>> = OnceLock::new();
    let grids = GRIDS.get_or_init(|| {
        (2..=4)
            .map(|n| RadialGrid::new(Dimension::new(n).unwrap(), GridSpec::new(-16.0, 48.0, 0.02)).unwrap())
            .collect()
    });
    grids[n - 2].clone()
}

/// `a e^{−b r²} + c/(1+r²)^2`, a smooth decreasing profile.
fn profile(n: usize, a: f64, b: f64, c: f64) -> RadialProfile<f64> {
    RadialProfile::from_fn(grid(n), Shape::Smooth, |_, r| a * (-b * r * r).exp() + c / (1.0 + r * r).powi(2)).unwrap()
}

fn unit(n: usize, a: f64, b: f64, c: f64, radius: f64) -> RadialProfile<f64> {
    let u = profile(n, a, b, c).normalize_to_sphere().unwrap();
    u.scaled(radius)
}

fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dilation_scales_mass_and_keeps_energy(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0, big_r in 0.5f64..2.0) {
        let u = profile(n, a, b, c);
        let d = u.dilate(big_r).unwrap();
        prop_assert!(d.clipped_fraction < 1e-10);
        let v = d.profile;
        prop_assert!(close(v.ln_pow(), big_r.powi(n as i32) * u.ln_pow(), 1e-6), "{} {}", v.ln_pow(), u.ln_pow());
        prop_assert!(close(v.grad_pow(), u.grad_pow(), 1e-6));
        // The Hölder form of the radial lemma does not see dilations.
        let (bu, bv) = (u.radial_bound_check(), v.radial_bound_check());
        prop_assert!(close(bu.holder_ratio, bv.holder_ratio, 1e-3));
        let dim = u.dim();
        prop_assert!(bu.holder_ratio <= dim.nt() / dim.omega);
    }

    #[test]
    fn truncation_keeps_the_inner_energy(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0, big_r in 0.3f64..4.0) {
        let u = profile(n, a, b, c);
        let (v, snapped) = u.boundary_truncate(big_r).unwrap();
        let (inner, _) = u.grad_pow_ball(snapped);
        prop_assert!(close(v.grad_pow(), inner, 1e-10));
        prop_assert!(v.ln_pow() < u.ln_pow());
        prop_assert!(v.values().iter().all(|&x| x >= 0.0));
        prop_assert!(v.is_decreasing());
    }

    #[test]
    fn decreasing_projection_is_idempotent(n in 2usize..=4, seed in prop::collection::vec(0.0f64..1.0, 8)) {
        // A bumpy profile: a sum of bumps at scattered radii.
        let u = RadialProfile::from_fn(grid(n), Shape::Smooth, |_, r| {
            seed.chunks(2).map(|p| p[0] * (-(r - 3.0 * p[1]).powi(2) * 4.0).exp()).sum()
        }).unwrap();
        let once = u.decreasing_projection();
        prop_assert!(once.is_decreasing());
        let twice = once.decreasing_projection();
        for (x, y) in once.values().iter().zip(twice.values()) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn moser_transform_round_trips(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0) {
        let u = profile(n, a, b, c);
        let back = u.moser_transform().to_radial(Shape::Smooth);
        for (x, y) in u.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
    }

    #[test]
    fn change_of_variables_sides_agree(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0, frac in 0.05f64..0.9) {
        let u = unit(n, a, b, c, 1.0);
        let cv = functional_change_of_variables(&u, frac * u.dim().beta_n).unwrap();
        prop_assert!(!cv.saturated);
        prop_assert!(close(cv.lhs, cv.rhs, 1e-8), "{} {}", cv.lhs, cv.rhs);
    }

    #[test]
    fn functional_grows_with_beta_and_alpha(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0, f1 in 0.05f64..0.9, df in 0.01f64..0.09, al in 0.0f64..0.9, dal in 0.01f64..0.1) {
        let u = unit(n, a, b, c, 0.9);
        let bn = u.dim().beta_n;
        let value = |beta: f64, alpha: f64| mt_functional(&u, &FunctionalParams::new(beta, alpha).unwrap()).unwrap().value;
        let base = value(f1 * bn, al);
        prop_assert!(value((f1 + df) * bn, al) > base);
        prop_assert!(value(f1 * bn, al + dal) > base);
    }

    #[test]
    fn psi_gap_closes_the_two_functionals(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0, frac in 0.05f64..1.0, alpha in 0.0f64..1.0, s in 0.2f64..1.0) {
        let u = unit(n, a, b, c, s);
        let p = FunctionalParams::new(frac * u.dim().beta_n, alpha).unwrap();
        let phi = mt_functional(&u, &p).unwrap().value;
        let psi = mt_functional_psi(&u, &p).unwrap().value;
        prop_assert!(close(phi - psi, psi_gap(&u, &p), 1e-9), "{} vs {}", phi - psi, psi_gap(&u, &p));
    }

    #[test]
    fn tau_reduction_holds_pointwise(n in 2usize..=4, a in 0.2f64..3.0, b in 0.3f64..3.0, c in 0.0f64..1.0, alpha in 0.0f64..0.99, s in 0.1f64..1.0) {
        let u = unit(n, a, b, c, s);
        let chk = tau_reduction_check(&u, alpha).unwrap();
        prop_assert!(chk.max_excess <= 1e-12 * chk.rhs.max(1.0), "{chk:?}");
        prop_assert!(chk.lhs <= chk.rhs * (1.0 + 1e-12));
    }
}

#[test]
fn profiles_outside_the_ball_are_refused() {
    let u = unit(3, 1.0, 1.0, 0.2, 1.1);
    let p = FunctionalParams::new(1.0, 0.0).unwrap();
    assert!(mt_functional(&u, &p).is_err());
    assert!(mt_functional(&u, &p.without_constraint()).is_ok());
    assert!(tau_reduction_check(&u, 0.5).is_err());
    assert!(tau_reduction_check(&unit(3, 1.0, 1.0, 0.2, 0.5), 1.0).is_err());
}
