mod common;

use common::simpson;
use proptest::prelude::*;
use remest::counterexample::{
    build_inward_shift, build_uniform_counterexample, compare_costs, report, ShiftConstruction, Verdict, MASS_TOL,
};
use remest::source::{SourceDensity, TabulatedDensity};
use remest::stage::{PolicyRegions, SoftCosts};
use remest::Error;

fn densities() -> Vec<SourceDensity> {
    let gauss = TabulatedDensity::from_fn(|x| (-0.5 * x * x).exp(), 5.0, 1001).unwrap();
    vec![
        SourceDensity::laplace(1.0).unwrap(),
        SourceDensity::uniform(10.0).unwrap(),
        SourceDensity::tabulated(gauss),
    ]
}

/// Variance of the uniform density restricted to a union of intervals, by Simpson.
fn uniform_union_variance(pieces: &[(f64, f64)]) -> f64 {
    let m0: f64 = pieces.iter().map(|&(a, b)| simpson(|_| 1.0, a, b, 100)).sum();
    let m1: f64 = pieces.iter().map(|&(a, b)| simpson(|x| x, a, b, 100)).sum();
    let mean = m1 / m0;
    pieces
        .iter()
        .map(|&(a, b)| simpson(|x| (x - mean).powi(2), a, b, 100))
        .sum::<f64>()
        / m0
}

#[test]
fn uniform_counterexample_difference_matches_quadrature() {
    let costs = SoftCosts::new(0.5, 2.0, 1.0).unwrap();
    let d = SourceDensity::uniform(10.0).unwrap();
    let c = build_uniform_counterexample(10.0, 0.5, 1.0, &costs).unwrap();
    let cmp = compare_costs(&c, &d, &costs).unwrap();
    let var_star = uniform_union_variance(&[(-1.0, -0.5), (0.5, 1.0)]);
    let var_prime = uniform_union_variance(&[(0.5, 1.5)]);
    let predicted = 0.05 / 2.0 * (var_prime - var_star);
    assert!((cmp.difference - predicted).abs() < 1e-12);
    assert!((cmp.difference + 0.0125).abs() < 1e-9);
    assert_eq!(cmp.verdict, Verdict::ShiftedStrictlyBetter);
    assert!(c.masses(&d).max_gap() <= MASS_TOL);
}

#[test]
fn counterexample_strict_margin_over_random_geometry() {
    let d = SourceDensity::uniform(10.0).unwrap();
    for &(b1, b2, g) in &[(0.3, 0.9, 1.0), (1.0, 2.5, 3.0), (0.05, 0.2, 0.5), (2.0, 3.0, 2.0)] {
        let costs = SoftCosts::new(0.1, 3.0, g).unwrap();
        let c = build_uniform_counterexample(10.0, b1, b2, &costs).unwrap();
        let cmp = compare_costs(&c, &d, &costs).unwrap();
        let p = d.mass(-b2, -b1) + d.mass(b1, b2);
        let margin = p / (g + 1.0) * (cmp.noisy_variance_original - cmp.noisy_variance_shifted) / 2.0;
        assert!(margin > 0.0);
        assert!(
            cmp.difference <= -margin + 1e-12,
            "{b1} {b2}: {} vs {margin}",
            cmp.difference
        );
    }
}

#[test]
fn counterexample_rejects_bad_geometry() {
    let costs = SoftCosts::new(0.5, 2.0, 1.0).unwrap();
    for (b1, b2) in [(1.0, 1.0), (0.0, 1.0), (4.0, 7.5)] {
        let err = build_uniform_counterexample(10.0, b1, b2, &costs).unwrap_err();
        assert!(matches!(err, Error::GeometryViolation(_)), "{b1} {b2}: {err}");
    }
}

#[test]
fn null_shift_is_a_tie() {
    let costs = SoftCosts::new(0.5, 2.0, 1.0).unwrap();
    for d in densities() {
        let c = ShiftConstruction::null(PolicyRegions::thresholds(0.7, 1.9), true);
        let cmp = compare_costs(&c, &d, &costs).unwrap();
        assert_eq!(cmp.difference, 0.0);
        assert_eq!(cmp.verdict, Verdict::Tie);
    }
}

#[test]
fn laplace_inward_shift_example() {
    let d = SourceDensity::laplace(1.0).unwrap();
    let s = build_inward_shift(1.0, 2.0, 3.0, &d).unwrap();
    let target = simpson(|x| 0.5 * (-x).exp(), 2.0, 3.0, 2000);
    let got = simpson(|x| 0.5 * (-x).exp(), 1.0, s.beta2_prime, 2000);
    assert!((got - target).abs() < 1e-12);
    assert!(s.construction.masses(&d).max_gap() <= MASS_TOL);
    let costs = SoftCosts::new(0.5, 2.0, 1.0).unwrap();
    let cmp = compare_costs(&s.construction, &d, &costs).unwrap();
    assert!(cmp.j_shifted <= cmp.j_original + 1e-10);
    assert!(cmp.noisy_variance_shifted <= cmp.noisy_variance_original);
}

#[test]
fn uniform_inward_shift_keeps_width() {
    let d = SourceDensity::uniform(10.0).unwrap();
    let s = build_inward_shift(0.5, 2.0, 3.25, &d).unwrap();
    assert!((s.beta2_prime - 1.75).abs() < 1e-12);
}

#[test]
fn report_serializes() {
    let costs = SoftCosts::new(0.5, 2.0, 1.0).unwrap();
    let d = SourceDensity::uniform(10.0).unwrap();
    let c = build_uniform_counterexample(10.0, 0.5, 1.0, &costs).unwrap();
    let r = report(&c, &d, &costs).unwrap();
    assert_eq!(r.original.len(), 5);
    assert_eq!(r.shifted.len(), 4);
    assert!(!r.side_channel);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn inward_shift_preserves_mass_and_dominates(
        b1 in 0.0f64..2.0, gap in 0.01f64..2.0, width in 0.05f64..2.0,
        c1 in 0.0f64..1.0, dc in 0.1f64..3.0, g in 0.2f64..5.0, which in 0usize..3,
    ) {
        let d = &densities()[which];
        let left = b1 + gap;
        let right = left + width;
        prop_assume!(d.mass(left, right) > 1e-9);
        let s = build_inward_shift(b1, left, right, d).unwrap();
        let masses = s.construction.masses(d);
        prop_assert!(masses.max_gap() <= MASS_TOL, "{:?}", masses);
        prop_assert_eq!(masses.idle.0, masses.idle.1);
        let costs = SoftCosts::new(c1, c1 + dc, g).unwrap();
        let cmp = compare_costs(&s.construction, d, &costs).unwrap();
        prop_assert!(cmp.noisy_variance_shifted <= cmp.noisy_variance_original + 1e-12);
        prop_assert!(cmp.j_shifted <= cmp.j_original + 1e-10);
    }
}
