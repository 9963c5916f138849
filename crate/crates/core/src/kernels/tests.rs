#![allow(clippy::excessive_precision)]

use super::*;
use crate::mlf::{gamma, ml, recip_gamma};
use proptest::prelude::*;
use std::f64::consts::PI;

fn params(alpha: f64) -> ProcessParams {
    ProcessParams::new(alpha, 1.0, 1.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn parameter_validation() {
    assert!(ProcessParams::new(0.0, 1.0, 1.0).is_err());
    assert!(ProcessParams::new(1.2, 1.0, 1.0).is_err());
    assert!(ProcessParams::new(0.5, -1.0, 1.0).is_err());
    assert!(ProcessParams::new(0.5, 1.0, f64::NAN).is_err());
    let p = ProcessParams::new(0.5, 2.0, 3.0).unwrap();
    assert!((p.fp_drift() - 2.0 / 2f64.sqrt()).abs() < 1e-15);
    assert!((p.fp_diff() - 3.0 / 2f64.sqrt()).abs() < 1e-15);
    assert!(matches!(cov_fractional_ou(-1.0, 1.0, &p), Err(KernelError::NegativeTime { .. })));
}

#[test]
fn time_change_values() {
    let p = params(0.5);
    assert_eq!(time_change_alpha(0.0, &p).unwrap(), 0.0);
    assert!((time_change_alpha(1.0, &p).unwrap() - 0.54501857656104331971).abs() < 1e-12);
    let q = ProcessParams::new(1.0, 0.7, 1.0).unwrap();
    for &t in &[0.1, 1.0, 5.0] {
        assert!((time_change_alpha(t, &q).unwrap() - t).abs() < 1e-13);
    }
    let mut prev = 0.0;
    for k in 1..200 {
        let t = k as f64 * 0.05;
        let v = time_change_alpha(t, &p).unwrap();
        assert!(v > prev);
        prev = v;
    }
}

#[test]
fn time_changed_ou_covariance() {
    let p = params(0.5);
    let var = cov_time_changed_ou(1.5, 1.5, &p).unwrap();
    assert!((var - (1.0 - ml(0.5, 1.0, -(3.0f64).sqrt()).unwrap())).abs() < 1e-14);
    assert_eq!(cov_time_changed_ou(0.0, 2.0, &p).unwrap(), 0.0);
    assert_eq!(cov_time_changed_ou(2.0, 0.0, &p).unwrap(), 0.0);
    let q = ProcessParams::new(1.0, 1.0, 1.0).unwrap();
    let exact = (-1.0f64).exp() * (1.0 - (-2.0f64).exp());
    assert!((cov_time_changed_ou(1.0, 2.0, &q).unwrap() - exact).abs() < 1e-15);
}

#[test]
fn time_changed_stationary_covariance() {
    let p = params(0.5);
    assert_eq!(cov_time_changed_stationary_ou(0.7, 0.7, &p).unwrap(), 1.0);
    let v = cov_time_changed_stationary_ou(1.0, 2.0, &p).unwrap();
    assert!((v - 0.87157613606198506916).abs() < 1e-12);
    let q = ProcessParams::new(1.0, 0.8, 2.0).unwrap();
    let v = cov_time_changed_stationary_ou(0.5, 2.0, &q).unwrap();
    assert!(rel(v, 2.5 * (-0.8f64 * 1.5).exp()) < 1e-13);
}

#[test]
fn stationary_covariance() {
    let p = ProcessParams::new(0.6, 2.0, 3.0).unwrap();
    assert_eq!(cov_stationary(0.0, &p).unwrap(), 1.5);
    assert_eq!(cov_stationary(-1.3, &p).unwrap(), cov_stationary(1.3, &p).unwrap());
    let q = ProcessParams::new(1.0, 2.0, 3.0).unwrap();
    assert!(rel(cov_stationary(0.9, &q).unwrap(), 1.5 * (-1.8f64).exp()) < 1e-14);
    // r(s) s^α → θ/(γ² Γ(1−α)) at large s
    let s: f64 = 1e3;
    let lhs = cov_stationary(s, &p).unwrap() * s.powf(0.6);
    let rhs = 3.0 / (2.0 * 2.0) * recip_gamma(0.4);
    assert!(rel(lhs, rhs) < 5e-2, "{lhs} vs {rhs}");
}

#[test]
fn fractional_ou_covariance() {
    let p = params(0.6);
    assert_eq!(cov_fractional_ou(0.0, 0.0, &p).unwrap(), 0.0);
    let v = cov_fractional_ou(1.0, 2.0, &p).unwrap();
    assert!((v - 0.16389200429090073849).abs() < 1e-12);
    assert!((variance_fractional_ou(1.0, &p).unwrap() - 0.69941613332681682427).abs() < 1e-12);
    let q = ProcessParams::new(1.0, 1.3, 0.4).unwrap();
    let (s, t) = (0.4, 1.1);
    let exact = 0.4 / 1.3 * ((-1.3f64 * 0.7).exp() - (-1.3f64 * 1.5).exp());
    assert!((cov_fractional_ou(s, t, &q).unwrap() - exact).abs() < 1e-15);
}

#[test]
fn characteristic_function_and_cgf() {
    let p = ProcessParams::new(0.7, 1.0, 1.0).unwrap();
    assert_eq!(char_function(0.0, 3.0, &p).unwrap(), 1.0);
    assert_eq!(char_function(2.0, 0.0, &p).unwrap(), 1.0);
    assert!((cgf(1.0, 1.0, &p).unwrap() - 0.36840499660045377169).abs() < 1e-12);
    assert_eq!(cgf(0.0, 1.0, &p).unwrap(), 0.0);
    assert_eq!(cgf(1.0, 0.0, &p).unwrap(), 0.0);
    let q = ProcessParams::new(1.0, 0.5, 2.0).unwrap();
    let t = 0.8;
    let exact = (-(2.0 * 9.0 / (2.0 * 0.5)) * (1.0 - (-2.0f64 * 0.5 * t).exp())).exp();
    assert!(rel(char_function(3.0, t, &q).unwrap(), exact) < 1e-13);
    // stationary limit
    let far = char_function(1.0, 1e6, &p).unwrap();
    assert!((far - (-0.5f64).exp()).abs() < 1e-3);
    // variance identity: Var(t) = −2 log û(1, t)
    for &t in &[0.01, 0.5, 3.0] {
        let v = variance_fractional_ou(t, &p).unwrap();
        let u = char_function(1.0, t, &p).unwrap();
        assert!((v + 2.0 * u.ln()).abs() < 1e-14);
        assert!((cgf(1.0, t, &p).unwrap() - 0.5 * v).abs() < 1e-15);
    }
}

#[test]
fn variogram() {
    // the next-order term is relatively γτ^α Γ(1+α)/Γ(1+2α), below 1e-4 here
    let p = params(0.7);
    let tau: f64 = 1e-6;
    let scaled = variogram_small_lag(tau, &p).unwrap() / tau.powf(0.7);
    assert!(rel(scaled, 2.0 / gamma(1.7)) < 1e-3);
    let p = params(0.4);
    let q = params(1.0);
    assert!(rel(variogram_small_lag(1.0, &q).unwrap(), 2.0 * (1.0 - (-1.0f64).exp())) < 1e-14);
    let mut prev = 0.0;
    for k in 1..=6 {
        let tau = 10f64.powi(-k);
        let v = variogram_small_lag(tau, &p).unwrap() / (tau * tau);
        assert!(v > prev);
        prev = v;
    }
    assert!(variogram_small_lag(0.0, &p).is_err());
}

fn autocorr(s: f64, t: f64, p: &ProcessParams, f: fn(f64, f64, &ProcessParams) -> Result<f64>) -> f64 {
    f(s, t, p).unwrap() / (f(s, s, p).unwrap() * f(t, t, p).unwrap()).sqrt()
}

#[test]
fn markov_factorization_and_witness() {
    let lattice = [0.1, 0.3, 0.7, 1.0, 1.6, 2.5, 4.0];
    for &a in &[0.3, 0.5, 0.8, 1.0] {
        let p = params(a);
        for i in 0..lattice.len() {
            for j in i + 1..lattice.len() {
                for k in j + 1..lattice.len() {
                    let (s, h, t) = (lattice[i], lattice[j], lattice[k]);
                    let direct = autocorr(s, t, &p, cov_time_changed_ou);
                    let chained = autocorr(s, h, &p, cov_time_changed_ou) * autocorr(h, t, &p, cov_time_changed_ou);
                    assert!(rel(chained, direct) < 1e-12);
                }
            }
        }
    }
    let p = params(0.5);
    let direct = autocorr(1.0, 3.0, &p, cov_fractional_ou);
    let chained = autocorr(1.0, 2.0, &p, cov_fractional_ou) * autocorr(2.0, 3.0, &p, cov_fractional_ou);
    assert!((direct - chained).abs() > 1e-3);
}

#[test]
fn random_walk_limit() {
    let p = params(0.5);
    for &tau in &[0.5, 3.0, 10.0] {
        let v = cov_time_changed_ou(1e6, 1e6 + tau, &p).unwrap();
        assert!((v - 1.0).abs() < 1e-2);
    }
}

// Stieltjes representation E(−γs^α) = ∫ e^{−rs} K(r) dr turns the cosine
// transform into a non-oscillatory integral.
fn spectral_oracle(omega: f64, p: &ProcessParams) -> f64 {
    let (a, g) = (p.alpha, p.gamma);
    let k = |r: f64| {
        let ra = r.powf(a);
        g * r.powf(a - 1.0) * (a * PI).sin() / (PI * (ra * ra + 2.0 * g * ra * (a * PI).cos() + g * g))
    };
    let integrand = |x: f64| {
        let r = x.exp();
        k(r) * r * r / (r * r + omega * omega)
    };
    let mut total = 0.0;
    let mut x = -80.0;
    while x < 160.0 {
        total += quad::integrate(integrand, x, x + 1.0, 1e-15).unwrap().value;
        x += 1.0;
    }
    p.sill() / PI * total
}

#[test]
fn spectral_density_against_stieltjes_oracle() {
    let q = SpectralQuadrature::default();
    for &a in &[0.4, 0.7] {
        for &g in &[1.0, 2.5] {
            let p = ProcessParams::new(a, g, 1.3).unwrap();
            for &w in &[0.05, 0.5, 1.0, 4.0] {
                let s = spectral_density(w, &p, &q).unwrap();
                let o = spectral_oracle(w, &p);
                assert!(rel(s, o) < 1e-7, "alpha {a} gamma {g} omega {w}: {s} vs {o}");
            }
        }
    }
}

#[test]
fn spectral_density_alpha_one() {
    let q = SpectralQuadrature::default();
    let p = params(1.0);
    let s = spectral_density(1.0, &p, &q).unwrap();
    assert!(rel(s, 1.0 / (2.0 * PI)) < 1e-8);
    for &w in &[0.1, 10.0] {
        let s = spectral_density(w, &p, &q).unwrap();
        assert!(rel(s, 1.0 / (PI * (1.0 + w * w))) < 1e-8);
    }
    assert!(rel(spectral_density(0.0, &p, &q).unwrap(), 1.0 / PI) < 1e-15);
    assert!(matches!(
        spectral_density(0.0, &params(0.5), &q),
        Err(KernelError::ZeroFrequency { .. })
    ));
}

#[test]
fn spectral_low_frequency_slope() {
    let q = SpectralQuadrature::default();
    let p = params(0.5);
    let w1 = 1e-4;
    let w2 = 1e-2;
    let s1 = spectral_density(w1, &p, &q).unwrap();
    let s2 = spectral_density(w2, &p, &q).unwrap();
    let slope = (s2.ln() - s1.ln()) / (w2.ln() - w1.ln());
    assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
    assert_eq!(s1, spectral_density(-w1, &p, &q).unwrap());
}

proptest! {
    #[test]
    fn kernels_are_symmetric(a in 0.1f64..=1.0, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let p = params(a);
        prop_assert_eq!(cov_time_changed_ou(s, t, &p).unwrap(), cov_time_changed_ou(t, s, &p).unwrap());
        prop_assert_eq!(cov_fractional_ou(s, t, &p).unwrap(), cov_fractional_ou(t, s, &p).unwrap());
        prop_assert_eq!(
            cov_time_changed_stationary_ou(s, t, &p).unwrap(),
            cov_time_changed_stationary_ou(t, s, &p).unwrap()
        );
    }

    #[test]
    fn characteristic_function_is_monotone(a in 0.1f64..=1.0, xi in 0.0f64..3.0, t in 0.0f64..5.0, dt in 1e-3f64..1.0) {
        let p = params(a);
        let u = char_function(xi, t, &p).unwrap();
        prop_assert!(u > 0.0 && u <= 1.0);
        prop_assert!(char_function(xi, t + dt, &p).unwrap() <= u);
        prop_assert!(char_function(xi + dt, t, &p).unwrap() <= u);
    }

    #[test]
    fn time_change_is_increasing(a in 0.1f64..=1.0, t in 0.0f64..10.0, dt in 1e-3f64..1.0) {
        let p = params(a);
        prop_assert!(time_change_alpha(t + dt, &p).unwrap() > time_change_alpha(t, &p).unwrap());
    }
}
