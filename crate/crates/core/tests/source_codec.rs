mod common;

use common::laplace_moments_oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remest::codec::{decode, encode, expected_sq_error, ChannelParams, CodecParams, Sign};
use remest::source::{IntervalMoments, NoiseModel, NoiseShape, SourceDensity, TabulatedDensity};

fn truncated_gaussian() -> SourceDensity {
    let t = TabulatedDensity::from_fn(|x| (-0.5 * x * x).exp(), 4.0, 801).unwrap();
    SourceDensity::tabulated(t)
}

fn densities() -> Vec<SourceDensity> {
    vec![
        SourceDensity::laplace(1.0).unwrap(),
        SourceDensity::laplace(2.5).unwrap(),
        SourceDensity::uniform(10.0).unwrap(),
        truncated_gaussian(),
    ]
}

#[test]
fn laplace_closed_form_matches_simpson_on_random_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = SourceDensity::laplace(1.0).unwrap();
    for _ in 0..100 {
        let a: f64 = rng.random_range(-6.0..6.0);
        let b: f64 = a + rng.random_range(0.01..6.0);
        let m = d.interval_moments(a, b).unwrap();
        let (mass, mean, var) = laplace_moments_oracle(1.0, a, b);
        assert!((m.mass - mass).abs() < 1e-8, "mass ({a},{b})");
        assert!((m.mean - mean).abs() < 1e-8, "mean ({a},{b})");
        assert!((m.variance - var).abs() < 1e-8, "var ({a},{b})");
    }
}

#[test]
fn laplace_moments_of_solver_region() {
    let d = SourceDensity::laplace(1.0).unwrap();
    let m = d.interval_moments(0.896, 3.41).unwrap();
    let (mass, mean, var) = laplace_moments_oracle(1.0, 0.896, 3.41);
    assert!((m.mass - mass).abs() < 1e-8);
    assert!((m.mean - mean).abs() < 1e-8);
    assert!((m.variance - var).abs() < 1e-8);
}

#[test]
fn semi_infinite_laplace_intervals() {
    let d = SourceDensity::laplace(1.5).unwrap();
    for &(a, b) in &[(1.0, f64::INFINITY), (f64::NEG_INFINITY, -0.3), (-2.0, f64::INFINITY)] {
        let m = d.interval_moments(a, b).unwrap();
        let (mass, mean, var) = laplace_moments_oracle(1.5, a, b);
        assert!((m.mass - mass).abs() < 1e-8);
        assert!((m.mean - mean).abs() < 1e-8);
        assert!((m.variance - var).abs() < 1e-8);
    }
}

#[test]
fn full_support_gives_unconditional_moments() {
    for d in densities() {
        let (lo, hi) = d.support();
        let m = d.interval_moments(lo.max(-1e3) - 1.0, hi.min(1e3) + 1.0).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-10, "{}", d.name());
        assert!(m.mean.abs() < 1e-10, "{}", d.name());
        assert!((m.variance - d.variance()).abs() < 1e-9, "{}", d.name());
    }
}

#[test]
fn tabulated_density_integrates_to_one() {
    let d = truncated_gaussian();
    let q = remest::quadrature::integrate_with_breaks(|x| d.pdf(x), -4.0, 4.0, &[0.0], 1e-12);
    assert!((q.value - 1.0).abs() < 1e-10);
}

#[test]
fn sample_moments_within_three_standard_errors() {
    let n = 1_000_000;
    for d in densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = d.variance();
        assert!(mean.abs() < 3.0 * (var / n as f64).sqrt(), "{} mean {mean}", d.name());
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m2 = sq.iter().sum::<f64>() / n as f64;
        let v2 = sq.iter().map(|s| (s - m2).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(
            (m2 - var).abs() < 3.0 * (v2 / n as f64).sqrt(),
            "{} var {m2} vs {var}",
            d.name()
        );
    }
}

#[test]
fn gaussian_noise_variance_matches_channel() {
    let ch = ChannelParams::with_snr(1.0).unwrap();
    let noise = NoiseModel::new(NoiseShape::Gaussian, ch.noise_variance()).unwrap();
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sq: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng).powi(2)).collect();
    let m2 = sq.iter().sum::<f64>() / n as f64;
    let v2 = sq.iter().map(|s| (s - m2).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    assert!((m2 - 1.0).abs() < 3.0 * (v2 / n as f64).sqrt());
}

/// Rejection-samples `X | X ∈ (a, b]`.
fn sample_region(d: &SourceDensity, a: f64, b: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = d.sample(rng);
        if x > a && x <= b {
            return x;
        }
    }
}

#[test]
fn codec_mse_and_power_by_monte_carlo() {
    let d = SourceDensity::laplace(1.0).unwrap();
    let (a, b) = (0.4, 2.7);
    let region = d.interval_moments(a, b).unwrap();
    for &snr in &[0.5, 1.0, 4.0] {
        let ch = ChannelParams::new(2.0, snr).unwrap();
        let codec = CodecParams::for_region(&region, &ch).unwrap();
        for shape in [NoiseShape::Gaussian, NoiseShape::Uniform, NoiseShape::Laplace] {
            let noise = NoiseModel::new(shape, ch.noise_variance()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let n = 100_000;
            let mut errs = Vec::with_capacity(n);
            let mut powers = Vec::with_capacity(n);
            for _ in 0..n {
                let x = sample_region(&d, a, b, &mut rng);
                let y = encode(x, Sign::Plus, &codec);
                let xhat = decode(y + noise.sample(&mut rng), Sign::Plus, &codec);
                errs.push((x - xhat).powi(2));
                powers.push(y * y);
            }
            let check = |v: &[f64], target: f64, what: &str| {
                let m = v.iter().sum::<f64>() / n as f64;
                let s = (v.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
                assert!(
                    (m - target).abs() < 3.0 * s,
                    "{what} {shape:?} γ={snr}: {m} vs {target}"
                );
            };
            check(&errs, region.variance / (1.0 + snr), "mse");
            check(&powers, 2.0, "power");
        }
    }
}

#[test]
fn per_x_expected_error_matches_expansion_by_monte_carlo() {
    let codec = CodecParams::new(1.3, 0.8, 2.0).unwrap();
    let noise_var = 0.7;
    let noise = NoiseModel::new(NoiseShape::Gaussian, noise_var).unwrap();
    let x = 1.9;
    let n = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let errs: Vec<f64> = (0..n)
        .map(|_| {
            let yt = encode(x, Sign::Plus, &codec) + noise.sample(&mut rng);
            (x - decode(yt, Sign::Plus, &codec)).powi(2)
        })
        .collect();
    let m = errs.iter().sum::<f64>() / n as f64;
    let se = (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    let expect = expected_sq_error(x, &codec, noise_var);
    let g1 = 3.0;
    let by_hand = (x - 0.8f64).powi(2) / (g1 * g1) + 4.0 * noise_var / (1.3f64.powi(2) * g1 * g1);
    assert!((expect - by_hand).abs() < 1e-14);
    assert!((m - expect).abs() < 3.0 * se);
}

fn interval() -> impl Strategy<Value = (f64, f64, f64)> {
    (-8.0f64..8.0, 0.05f64..8.0, 0.01f64..0.99).prop_map(|(a, w, f)| (a, a + w, a + f * w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splitting_preserves_mass_and_total_variance((a, b, c) in interval(), which in 0usize..4) {
        let d = &densities()[which];
        let whole = d.interval_moments_or_empty(a, b);
        let left = d.interval_moments_or_empty(a, c);
        let right = d.interval_moments_or_empty(c, b);
        let joined = IntervalMoments::combine([left, right]);
        prop_assert!((whole.mass - joined.mass).abs() < 1e-9);
        if whole.mass > 1e-6 {
            prop_assert!((whole.mean - joined.mean).abs() < 1e-9);
            prop_assert!((whole.variance - joined.variance).abs() < 1e-9);
        }
        prop_assert!(whole.variance >= 0.0);
    }

    #[test]
    fn conditional_mean_is_odd((a, b, _c) in interval(), which in 0usize..4) {
        let d = &densities()[which];
        let fwd = d.interval_moments_or_empty(a, b);
        let back = d.interval_moments_or_empty(-b, -a);
        prop_assert!((fwd.mass - back.mass).abs() < 1e-12);
        if fwd.mass > 1e-6 {
            prop_assert!((fwd.mean + back.mean).abs() < 1e-10);
            prop_assert!((fwd.variance - back.variance).abs() < 1e-10);
        }
    }

    #[test]
    fn pdf_symmetric_and_unimodal(x in 0.0f64..12.0, dx in 0.0f64..2.0, which in 0usize..4) {
        let d = &densities()[which];
        prop_assert_eq!(d.pdf(x), d.pdf(-x));
        prop_assert!(d.pdf(x + dx) <= d.pdf(x) + 1e-15);
    }

    #[test]
    fn codec_round_trip_without_noise(x in -20.0f64..20.0, gain in 0.1f64..5.0, offset in -3.0f64..3.0) {
        let codec = CodecParams::new(gain, offset, 1e9).unwrap();
        let s = Sign::of(x);
        let back = decode(encode(x, s, &codec), s, &codec);
        prop_assert!((back - x).abs() < 1e-6 * (1.0 + x.abs()));
    }
}
