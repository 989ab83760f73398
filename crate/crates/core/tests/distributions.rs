mod common;

use common::tanh_sinh;
use errvar::distributions::{empirical_moments, Center, RegularErrorDistribution};
use errvar::ErrorSequence;

fn kinds() -> Vec<RegularErrorDistribution> {
    vec![
        RegularErrorDistribution::arcsine(1.0).unwrap(),
        RegularErrorDistribution::arcsine(2.0).unwrap(),
        RegularErrorDistribution::arcsine(1.7).unwrap(),
        RegularErrorDistribution::uniform(0.5).unwrap(),
        RegularErrorDistribution::uniform(3.0).unwrap(),
        RegularErrorDistribution::normal(2.0).unwrap(),
    ]
}

fn integration_range(d: &RegularErrorDistribution) -> (f64, f64) {
    match *d {
        RegularErrorDistribution::Normal { sigma } => (-12.0 * sigma, 12.0 * sigma),
        _ => d.support(),
    }
}

#[test]
fn quadrature_oracle_sanity() {
    // ∫_{-1}^{1} 1/√(1−x²) dx = π
    let v = tanh_sinh(|x| 1.0 / (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-10);
    assert!((v - std::f64::consts::PI).abs() < 1e-7, "{v}");
    let v = tanh_sinh(|x| x * x, 0.0, 3.0, 1e-12);
    assert!((v - 9.0).abs() < 1e-10);
}

#[test]
fn pdf_integrates_to_one() {
    for d in kinds() {
        let (lo, hi) = integration_range(&d);
        let mass = tanh_sinh(|x| d.pdf(x), lo, hi, 1e-9);
        assert!((mass - 1.0).abs() < 1e-6, "{d:?}: {mass}");
    }
}

#[test]
fn arcsine_mass_over_open_interval() {
    let d = RegularErrorDistribution::arcsine(2.0).unwrap();
    let mass = tanh_sinh(|x| d.pdf(x), -2.0, 2.0, 1e-9);
    assert!((mass - 1.0).abs() < 1e-6);
}

#[test]
fn variance_matches_quadrature() {
    for d in kinds() {
        let (lo, hi) = integration_range(&d);
        let second = tanh_sinh(|x| x * x * d.pdf(x), lo, hi, 1e-9);
        assert!((second - d.variance()).abs() < 1e-6, "{d:?}: {second}");
        let first = tanh_sinh(|x| x * d.pdf(x), lo, hi, 1e-9);
        assert!(first.abs() < 1e-6, "{d:?}: {first}");
    }
    // A = 1.7 → A²/2 = 1.445
    let d = RegularErrorDistribution::arcsine(1.7).unwrap();
    let second = tanh_sinh(|x| x * x * d.pdf(x), -1.7, 1.7, 1e-9);
    assert!((second - 1.445).abs() < 1e-6);
}

#[test]
fn arcsine_sampling_moments() {
    let d = RegularErrorDistribution::arcsine(1.0).unwrap();
    let s = d.sample(1_000_000, 2024).unwrap();
    let (mean, m2) = common::mean_and_second_moment(s.values());
    assert!(mean.abs() < 0.005, "{mean}");
    assert!((m2 - 0.5).abs() < 0.005, "{m2}");
}

#[test]
fn uniform_sampling_moments() {
    let d = RegularErrorDistribution::uniform(1.0).unwrap();
    let s = d.sample(1_000_000, 77).unwrap();
    assert!(s.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    let m = empirical_moments(&s, Center::Zero).unwrap();
    assert!((m.variance - 1.0 / 3.0).abs() < 0.01 / 3.0, "{}", m.variance);
}

#[test]
fn normal_sampling_moments() {
    let d = RegularErrorDistribution::normal(2.0).unwrap();
    let s = d.sample(1_000_000, 5).unwrap();
    let m = empirical_moments(&s, Center::Zero).unwrap();
    assert!((m.variance - 4.0).abs() < 0.04, "{}", m.variance);
    // first moment within 3 standard errors of zero
    assert!(m.mean.abs() < 3.0 * 2.0 / 1000.0, "{}", m.mean);
}

#[test]
fn constant_sequence_has_exactly_zero_variance() {
    for c in [0.0, 1.0, -3.25, 10.000742, 1e-300, 6.02214076e23, 0.1] {
        for n in [1usize, 2, 3, 7, 1000] {
            let s = ErrorSequence::new(vec![c; n], "const").unwrap();
            let m = empirical_moments(&s, Center::Mean).unwrap();
            assert_eq!(m.mean, c);
            assert_eq!(m.variance, 0.0, "c = {c}, n = {n}");
        }
    }
}
