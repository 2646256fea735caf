//! Concentrating sequences, the Green function and the planar ground state
//! used together.

use mtlab::dims::Dimension;
use mtlab::odes::{gn_family_bound, gn_ground_state, gn_quotient, gn_quotient_fn, green_alpha, green_g0, green_solve, GreenOptions};
use mtlab::sequences::{
    blowup_mass, carleson_chang_bound, liouville_moment, moser_norm_ratio, normalized_moser, test_function,
    test_function_excess, MoserParams, TestFunctionParams,
};

fn dim(n: usize) -> Dimension<f64> {
    Dimension::new(n).unwrap()
}

#[test]
fn green_constant_shifts_with_alpha_in_three_dimensions() {
    // G_α(r) = G_0((1−α)^{1/N} r), so A_α = A_0 − ln(1−α)/β_N and the
    // N-th power norm picks up 1/(1−α).
    let d = dim(3);
    let g0 = green_g0(&d).unwrap();
    for alpha in [0.2f64, 0.6] {
        let oracle = g0.a_alpha - (1.0 - alpha).ln() / d.beta_n;
        let opts = GreenOptions { check_sensitivity: false, ..GreenOptions::default() };
        let direct = green_solve(&d, alpha, &opts).unwrap();
        assert!((direct.a_alpha - oracle).abs() < 1e-4, "alpha {alpha}: {} vs {oracle}", direct.a_alpha);
        let scaled = green_alpha(&g0, alpha).unwrap();
        assert!((scaled.norm_pow() * (1.0 - alpha) / g0.norm_pow() - 1.0).abs() < 1e-5);
        assert!((direct.norm_pow() / scaled.norm_pow() - 1.0).abs() < 1e-3);
    }
}

#[test]
fn three_dimensional_test_functions_beat_the_threshold() {
    let d = dim(3);
    let alpha = 0.2;
    let g = green_alpha(&green_g0(&d).unwrap(), alpha).unwrap();
    let mut last = f64::INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        let tf = test_function(&TestFunctionParams::new(eps, alpha).unwrap(), &g).unwrap();
        assert!((tf.profile.full_norm() - 1.0).abs() < 1e-8);
        assert!(tf.continuity_defect < 1e-8);
        let ex = test_function_excess(&tf).unwrap();
        assert_eq!(ex.threshold, carleson_chang_bound(&d, g.a_alpha));
        assert!(ex.excess > 0.0, "eps {eps}: {ex:?}");
        // The excess shrinks as the concentration sharpens.
        assert!(ex.excess < last);
        last = ex.excess;
    }
}

#[test]
fn green_solution_must_match_the_test_function_alpha() {
    let g = green_g0(&dim(2)).unwrap();
    assert!(test_function(&TestFunctionParams::new(1e-3, 0.1).unwrap(), &g).is_err());
    assert!(TestFunctionParams::new(0.0, 0.1).is_err());
    assert!(TestFunctionParams::new(1e-3, 1.0).is_err());
}

#[test]
fn bubble_moments_in_higher_dimensions() {
    for n in [3, 4] {
        let d = dim(n);
        assert!((blowup_mass(&d).unwrap().value - 1.0).abs() < 1e-6);
        let mut last = f64::INFINITY;
        for delta in [0.0, 0.25, 1.0] {
            let m = liouville_moment(&d, delta).unwrap();
            assert!((m.quadrature / m.gamma_formula - 1.0).abs() < 1e-6, "n={n} delta={delta}: {m:?}");
            assert!(m.quadrature < last);
            last = m.quadrature;
        }
    }
}

#[test]
fn normalized_moser_functions_sit_on_the_sphere() {
    for n in 2..=4 {
        let mut last = f64::INFINITY;
        for k in [5.0, 20.0, 80.0] {
            let mp = MoserParams::new(k, 1.0).unwrap();
            let u = normalized_moser(&mp, dim(n)).unwrap();
            assert!((u.full_norm_pow() - 1.0).abs() < 1e-12);
            let gap = moser_norm_ratio(&mp, dim(n)).unwrap() - 1.0;
            assert!(gap.abs() < last, "n={n} k={k}");
            last = gap.abs();
        }
    }
}

#[test]
fn ground_state_is_reproducible_and_extremal() {
    let a = gn_ground_state().unwrap();
    let b = gn_ground_state().unwrap();
    assert_eq!(a.b2.to_bits(), b.b2.to_bits());
    assert_eq!(a.q0.to_bits(), b.q0.to_bits());

    // Far field: Q decays like e^{−r}/√r, read off on the sampled profile.
    let g = a.profile.grid();
    let (i, j) = (g.nearest_node(-2.0 * 6f64.ln()), g.nearest_node(-2.0 * 9f64.ln()));
    let (r1, r2) = (g.r()[i], g.r()[j]);
    let (q1, q2) = (a.profile.values()[i], a.profile.values()[j]);
    let rate = -((q2 * r2.sqrt()) / (q1 * r1.sqrt())).ln() / (r2 - r1);
    assert!((rate - 1.0).abs() < 0.02, "decay rate {rate}");

    // No member of the comparison families does better than the ground state.
    let fam = gn_family_bound();
    assert!(fam.value <= a.b2);
    let gauss = gn_quotient_fn(|r| (-r * r).exp(), |r| -2.0 * r * (-r * r).exp()).unwrap();
    assert!((gauss - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-10);
    assert!(gauss < fam.value);
    assert!((gn_quotient(&a.profile).unwrap() - a.b2).abs() < 1e-4);
}
