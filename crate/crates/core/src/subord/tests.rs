use super::*;
use crate::fracops::TimeGrid;
use crate::kernels::{self, ProcessParams};
use crate::mlf::{ml, wright};
use crate::quad;
use proptest::prelude::*;

fn cpe(a: f64) -> BernsteinSpec {
    BernsteinSpec::CompoundPoissonExp { a }
}

fn stable(alpha: f64) -> BernsteinSpec {
    BernsteinSpec::Stable { alpha }
}

fn power_triplet(alpha: f64) -> BernsteinSpec {
    BernsteinSpec::Custom(CustomTriplet {
        kill: 0.0,
        drift: 0.0,
        tail: vec![NamedTail::Power { alpha, weight: 1.0 }],
    })
}

fn exp_triplet(a: f64) -> BernsteinSpec {
    BernsteinSpec::Custom(CustomTriplet {
        kill: 0.0,
        drift: 0.0,
        tail: vec![NamedTail::Exponential { rate: a, weight: 1.0 }],
    })
}

fn kspec(model: GeneralizedModel, b: BernsteinSpec, gamma: f64, theta: f64, scale: TimeScale) -> GeneralizedKernelSpec {
    GeneralizedKernelSpec::new(model, b, gamma, theta, scale).unwrap()
}

#[test]
fn bernstein_values_and_shape() {
    assert!((stable(0.5).g(4.0) - 2.0).abs() < 1e-15);
    assert!((cpe(2.0).g(2.0) - 0.5).abs() < 1e-15);
    let mixed = BernsteinSpec::Custom(CustomTriplet {
        kill: 0.3,
        drift: 0.5,
        tail: vec![
            NamedTail::Power { alpha: 0.4, weight: 2.0 },
            NamedTail::Exponential { rate: 1.0, weight: 1.5 },
        ],
    });
    assert!((mixed.g(1.0) - (0.3 + 0.5 + 2.0 + 0.75)).abs() < 1e-14);
    let pts: Vec<f64> = (0..60).map(|k| 1e-3 * 1.25f64.powi(k)).collect();
    for b in [stable(0.3), stable(1.0), cpe(0.5), mixed.clone()] {
        assert!(b.is_bernstein_on(&pts), "{b:?}");
    }
    // s² is not concave
    let convex = |s: f64| s * s;
    let v: Vec<f64> = pts.iter().map(|&s| convex(s)).collect();
    assert!(v.windows(3).any(|w| w[2] - 2.0 * w[1] + w[0] > 0.0));
}

#[test]
fn spec_validation() {
    assert!(stable(0.0).validate().is_err());
    assert!(stable(1.2).validate().is_err());
    assert!(cpe(-1.0).validate().is_err());
    let empty = BernsteinSpec::Custom(CustomTriplet {
        kill: 1.0,
        drift: 0.0,
        tail: vec![],
    });
    assert!(matches!(empty.validate(), Err(SubordError::InvalidParameter { name: "drift", .. })));
    assert!(power_triplet(1.0).validate().is_err());
    assert!(matches!(ltilde(1.0, -1.0, &cpe(1.0)), Err(SubordError::NegativeTime { .. })));
    assert!(ltilde(0.0, 1.0, &cpe(1.0)).is_err());
}

#[test]
fn serde_round_trip() {
    let b = BernsteinSpec::Custom(CustomTriplet {
        kill: 0.0,
        drift: 1.0,
        tail: vec![NamedTail::Exponential { rate: 2.0, weight: 0.5 }],
    });
    let s = serde_json::to_string(&b).unwrap();
    assert!(s.contains("\"family\":\"custom\""), "{s}");
    assert_eq!(serde_json::from_str::<BernsteinSpec>(&s).unwrap(), b);
    let k: GeneralizedKernelSpec =
        serde_json::from_str(r#"{"model":"xg","bernstein":{"family":"stable","alpha":0.5},"gamma":1,"theta":2}"#).unwrap();
    assert_eq!(k.time_scale, TimeScale::Doubled);
}

#[test]
fn closed_forms() {
    for &t in &[0.0, 0.3, 1.0, 7.5] {
        let v = ltilde(1.3, t, &stable(0.6)).unwrap();
        assert!((v - ml(0.6, 1.0, -1.3 * t.powf(0.6)).unwrap()).abs() < 1e-15);
        let v = ltilde(2.0, t, &stable(1.0)).unwrap();
        assert!((v - (-2.0 * t).exp()).abs() < 1e-15);
    }
    assert!((ltilde(1.0, 0.0, &cpe(1.0)).unwrap() - 0.5).abs() < 1e-16);
    let v = ltilde(1.0, 1.0, &cpe(1.0)).unwrap();
    assert!((v - 0.303265329856316711801899767496).abs() < 1e-15);
}

#[test]
fn talbot_reproduces_closed_forms() {
    let ts: Vec<f64> = (0..=40).map(|k| 0.1 * 100f64.powf(k as f64 / 40.0)).collect();
    let cases = [
        (stable(0.3), 1.0),
        (stable(0.5), 0.7),
        (stable(0.9), 2.0),
        (stable(1.0), 1.0),
        (cpe(1.0), 1.0),
        (cpe(0.4), 3.0),
    ];
    for (b, gamma) in &cases {
        for &t in &ts {
            let exact = ltilde(*gamma, t, b).unwrap();
            let inv = invert_ltilde(*gamma, t, b).unwrap();
            assert!((inv.value - exact).abs() < 1e-8, "{b:?} t={t}: {} vs {exact}", inv.value);
        }
    }
}

#[test]
fn custom_triplets_match_their_closed_form_twins() {
    for &t in &[0.1, 0.5, 2.0, 10.0] {
        let a = ltilde(1.5, t, &power_triplet(0.45)).unwrap();
        let b = ltilde(1.5, t, &stable(0.45)).unwrap();
        assert!((a - b).abs() < 1e-8);
        let a = ltilde(0.8, t, &exp_triplet(2.0)).unwrap();
        let b = ltilde(0.8, t, &cpe(2.0)).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
    assert_eq!(ltilde(1.0, 0.0, &power_triplet(0.5)).unwrap(), 1.0);
    assert!((ltilde(1.0, 0.0, &exp_triplet(1.0)).unwrap() - 0.5).abs() < 1e-16);
}

#[test]
fn ltilde_is_strictly_decreasing() {
    let fams = [
        stable(0.3),
        stable(1.0),
        cpe(0.5),
        BernsteinSpec::Custom(CustomTriplet {
            kill: 0.2,
            drift: 0.1,
            tail: vec![NamedTail::Power { alpha: 0.6, weight: 1.0 }],
        }),
    ];
    for b in &fams {
        let v: Vec<f64> = (0..50).map(|k| ltilde(1.0, 0.05 + 0.2 * k as f64, b).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{b:?}");
        assert!(v.iter().all(|x| *x > 0.0 && *x <= 1.0));
    }
}

#[test]
fn cpe_density() {
    for &t in &[0.0, 0.5, 3.0] {
        let v = inverse_subordinator_density_cpe(0.0, t, 1.3).unwrap();
        assert!((v - (-1.3 * t).exp()).abs() < 1e-16);
    }
    for &x in &[0.0, 0.7, 4.0] {
        assert!((inverse_subordinator_density_cpe(x, 0.0, 2.0).unwrap() - (-x).exp()).abs() < 1e-16);
    }
    // mpmath values of e^{−x−at} I₀(2√(xat))
    let v = inverse_subordinator_density_cpe(3.0, 2.0, 0.5).unwrap();
    assert!((v / 0.131121595373807713053495275222 - 1.0).abs() < 1e-13);
    let v = inverse_subordinator_density_cpe(50.0, 40.0, 2.0).unwrap();
    assert!((v / 0.00106271749580040561771894777033 - 1.0).abs() < 1e-12);
    // agrees with the Wright series where that converges
    let (x, t, a) = (1.5, 0.8, 1.1);
    let w = wright(1.0, 1.0, x * a * t).unwrap().value;
    let v = inverse_subordinator_density_cpe(x, t, a).unwrap();
    assert!((v - (-x - a * t).exp() * w).abs() < 1e-15);
}

#[test]
fn cpe_density_laplace_identity() {
    let (a, gamma, t) = (1.0, 1.0, 1.0);
    let q = quad::integrate_to_infinity(
        |x| (-gamma * x).exp() * inverse_subordinator_density_cpe(x, t, a).unwrap(),
        0.0,
        10.0,
        1e-10,
    )
    .unwrap();
    let exact = ltilde(gamma, t, &cpe(a)).unwrap();
    assert!((q.value - exact).abs() < 1e-6, "{} vs {exact}", q.value);
}

#[test]
fn cpe_derivative_relation() {
    let (a, gamma) = (0.7, 1.5);
    let b = cpe(a);
    // h̃ against quadrature of the continuous part of h
    let h = |t: f64, x: f64| {
        let z: f64 = x * a * t;
        let mut s = 0.0;
        let mut term = z;
        for j in 1..200 {
            s += term;
            term *= z / ((j + 1) as f64 * j as f64);
        }
        (-x - a * t).exp() / t * s
    };
    let t = 2.0;
    let q = quad::integrate_to_infinity(|x| (-gamma * x).exp() * h(t, x), 0.0, 5.0, 1e-12).unwrap();
    assert!((q.value - 0.0483515786240569251226423555142).abs() < 1e-10);
    assert!((htilde_cpe(t, gamma, a).unwrap() - 0.0483515786240569251226423555142).abs() < 1e-16);

    let d = 1e-4;
    for &t in &[0.2, 1.0, 4.0] {
        let l = |s: f64| ltilde(gamma, s, &b).unwrap();
        let dl = (l(t + d) - l(t - d)) / (2.0 * d);
        assert!((dl + gamma * htilde_cpe(t, gamma, a).unwrap()).abs() < 1e-6);
        let d2l = (l(t + d) - 2.0 * l(t) + l(t - d)) / (d * d);
        let h = |s: f64| htilde_cpe(s, gamma, a).unwrap();
        let dh = (h(t + d) - h(t - d)) / (2.0 * d);
        assert!((d2l + gamma * dh).abs() < 1e-6);
    }
}

#[test]
fn ltilde_solves_the_initial_value_problem() {
    let (a, gamma) = (1.0, 1.0);
    let b = cpe(a);
    let mut prev = f64::INFINITY;
    for n in [128, 256, 512] {
        let grid = TimeGrid::new(0.0, 4.0, n).unwrap();
        let u = GridFunction::from_fn(grid, |t| ltilde(gamma, t, &b).unwrap())
            .unwrap()
            .with_initial(1.0)
            .unwrap();
        let d = derivative_g(&u, &b).unwrap();
        let err = d
            .values
            .iter()
            .zip(&u.values)
            .skip(1)
            .map(|(dv, uv)| (dv + gamma * uv).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3 && err < prev, "n={n}: {err}");
        prev = err;
    }
}

#[test]
fn stable_derivative_matches_caputo() {
    let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
    let u = GridFunction::from_fn(grid, |t| (-0.5 * t.powf(0.6)).exp()).unwrap();
    let a = log_operator_spec(&u, &stable(0.6)).unwrap();
    let b = fracops::log_operator(&u, 0.6).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-12);
    }
    let a = derivative_g(&u, &stable(1.0)).unwrap();
    let b = fracops::fd_derivative(&u).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn killing_and_drift_parts() {
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let u = GridFunction::from_fn(grid, |t| t * t).unwrap();
    let b = BernsteinSpec::Custom(CustomTriplet {
        kill: 2.0,
        drift: 3.0,
        tail: vec![],
    });
    let d = derivative_g(&u, &b).unwrap();
    for (t, v) in u.grid.nodes.iter().zip(&d.values).skip(1) {
        assert!((v - (2.0 * t * t + 6.0 * t)).abs() < 1e-9);
    }
}

// û with D^g l̃ = −γ l̃ satisfies 𝓛^g û = −(γ/2)ξ∂_ξû − (θ/2)ξ²û.
fn generalized_fp_residual(b: &BernsteinSpec, gamma: f64, theta: f64, xi: f64, n: usize) -> f64 {
    let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
    let c = theta * xi * xi / (2.0 * gamma);
    let u = GridFunction::from_fn(grid, |t| (-c * one_minus_ltilde(gamma, t, b).unwrap()).exp())
        .unwrap()
        .with_initial(1.0)
        .unwrap();
    let lhs = log_operator_spec(&u, b).unwrap();
    u.grid
        .nodes
        .iter()
        .zip(&u.values)
        .zip(&lhs.values)
        .filter(|((t, _), _)| **t >= 0.25)
        .map(|((_, uv), l)| {
            let xi_du = 2.0 * uv.ln() * uv;
            (l + 0.5 * gamma * xi_du + 0.5 * theta * xi * xi * uv).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn generalized_fokker_planck_residual() {
    for xi in [0.5, 1.0, 2.0] {
        let r = generalized_fp_residual(&cpe(1.0), 1.0, 1.0, xi, 256);
        assert!(r < 1e-3, "cpe xi={xi}: {r}");
        let r = generalized_fp_residual(&stable(0.7), 1.0, 1.0, xi, 256);
        assert!(r < 1e-3, "stable xi={xi}: {r}");
    }
    // the wrong coefficient pair leaves an O(1) residual
    let grid = TimeGrid::new(0.0, 1.0, 256).unwrap();
    let b = cpe(1.0);
    let u = GridFunction::from_fn(grid, |t| (-0.5 * one_minus_ltilde(1.0, t, &b).unwrap()).exp())
        .unwrap()
        .with_initial(1.0)
        .unwrap();
    let lhs = log_operator_spec(&u, &b).unwrap();
    let k = u.values.len() - 1;
    let uv = u.values[k];
    let full = lhs.values[k] + 2.0 * uv.ln() * uv + uv;
    assert!(full.abs() > 0.1);
}

#[test]
fn time_changes() {
    let p = ProcessParams::new(0.6, 1.4, 1.0).unwrap();
    for &t in &[0.0, 0.2, 1.0, 5.0] {
        let a = time_change_g(t, 1.4, &stable(0.6), TimeScale::Doubled).unwrap();
        let b = kernels::time_change_alpha(t, &p).unwrap();
        assert!((a - b).abs() < 1e-12 * b.max(1.0));
        let id = time_change_g(t, 2.0, &stable(1.0), TimeScale::Natural).unwrap();
        assert!((id - 0.5 * t).abs() < 1e-15 * t.max(1.0));
    }
    let v = time_change_g(0.0, 1.0, &cpe(1.0), TimeScale::Natural).unwrap();
    assert!((v - 0.5 * 2f64.ln()).abs() < 1e-15);
    let (a, g) = (1.3, 0.7);
    let t1 = time_change_g(1.0, g, &cpe(a), TimeScale::Natural).unwrap();
    let t2 = time_change_g(3.0, g, &cpe(a), TimeScale::Natural).unwrap();
    assert!(((t2 - t1) / 2.0 - a / (2.0 * (g + 1.0))).abs() < 1e-14);
}

#[test]
fn x_g_kernels() {
    let k = kspec(GeneralizedModel::Xg, cpe(1.0), 1.0, 1.0, TimeScale::Natural);
    assert!((cov_x_g(1.0, 2.0, &k).unwrap() - 0.542617506700897514676146991507).abs() < 1e-15);
    let k = kspec(GeneralizedModel::Xg, cpe(1.0), 1.0, 1.0, TimeScale::Doubled);
    assert!((cov_x_g(2.0, 1.0, &k).unwrap() - 0.494965579638418509137159299609).abs() < 1e-15);
    // X_g does not start at zero for CPE: Var X_g(0) = θ/(γ+1)
    assert!((cov_x_g(0.0, 0.0, &k).unwrap() - 0.5).abs() < 1e-16);

    let p = ProcessParams::new(0.45, 1.2, 0.8).unwrap();
    let k = kspec(GeneralizedModel::Xg, stable(0.45), 1.2, 0.8, TimeScale::Doubled);
    let lattice = [0.0, 0.1, 0.5, 1.0, 2.5, 6.0];
    for &s in &lattice {
        for &t in &lattice {
            let a = cov_x_g(s, t, &k).unwrap();
            let b = kernels::cov_time_changed_ou(s, t, &p).unwrap();
            assert!((a - b).abs() < 1e-10, "({s},{t})");
        }
        let d = cov_x_g(s, s, &k).unwrap();
        let expect = k.sill() * one_minus_ltilde(1.2, 2.0 * s, &k.bernstein).unwrap();
        assert_eq!(d, expect);
    }
}

#[test]
fn stationary_and_started_kernels() {
    let (a, gamma, theta) = (0.8, 1.5, 2.0);
    let k = kspec(GeneralizedModel::YbarG, cpe(a), gamma, theta, TimeScale::Doubled);
    for &s in &[-3.0, -0.5, 0.0, 0.5, 3.0] {
        let expect = theta / gamma * (-a * gamma * f64::abs(s) / (gamma + 1.0)).exp() / (gamma + 1.0);
        assert!((cov_ybar_g(s, &k).unwrap() - expect).abs() < 1e-15);
        assert_eq!(cov_ybar_g(s, &k).unwrap(), cov_ybar_g(-s, &k).unwrap());
    }
    let k1 = kspec(GeneralizedModel::YbarG, cpe(1.0), 1.0, 3.0, TimeScale::Doubled);
    assert!((cov_ybar_g(0.0, &k1).unwrap() - 1.5).abs() < 1e-15);

    let p = ProcessParams::new(0.5, 1.0, 1.0).unwrap();
    let ks = kspec(GeneralizedModel::YbarG, stable(0.5), 1.0, 1.0, TimeScale::Doubled);
    let ky = kspec(GeneralizedModel::Yg, stable(0.5), 1.0, 1.0, TimeScale::Doubled);
    for &s in &[0.0, 0.3, 2.0] {
        assert!((cov_ybar_g(s, &ks).unwrap() - kernels::cov_stationary(s, &p).unwrap()).abs() < 1e-15);
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            let v = cov_y_g(s, t, &ky).unwrap();
            assert!((v - kernels::cov_fractional_ou(s, t, &p).unwrap()).abs() < 1e-14);
            assert_eq!(v, cov_y_g(t, s, &ky).unwrap());
        }
    }
    // the formula gives zero variance at t = 0 for every family; for CPE the
    // variance then saturates at r(0) = θ/(γ(γ+1)) rather than θ/γ
    let ky = kspec(GeneralizedModel::Yg, cpe(1.0), 1.0, 1.0, TimeScale::Doubled);
    assert_eq!(cov_y_g(0.0, 0.0, &ky).unwrap(), 0.0);
    assert!((cov_y_g(200.0, 200.0, &ky).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn psd_gate_accepts_valid_and_rejects_corrupted_kernels() {
    let b = BernsteinSpec::Custom(CustomTriplet {
        kill: 0.0,
        drift: 0.0,
        tail: vec![
            NamedTail::Power { alpha: 0.5, weight: 1.0 },
            NamedTail::Exponential { rate: 2.0, weight: 1.0 },
        ],
    });
    let k = GeneralizedKernelSpec::new(GeneralizedModel::YbarG, b, 1.0, 1.0, TimeScale::Doubled).unwrap();
    assert!(psd_gate(&k).unwrap().passed);
    // box profile: not positive definite
    let pts: Vec<f64> = (1..=PSD_GATE_POINTS).map(|i| 10.0 * i as f64 / 32.0).collect();
    let err = psd_gate_with(&pts, |s, t| Ok(if (s - t).abs() < 1.0 { 1.0 } else { 0.0 })).unwrap_err();
    assert!(matches!(err, SubordError::PsdViolated { .. }));
    // negated off-diagonal
    let err = psd_gate_with(&pts, |s, t| {
        let r = cov_ybar_g(t - s, &k)?;
        Ok(if s == t { r } else { -r })
    })
    .unwrap_err();
    assert!(matches!(err, SubordError::PsdViolated { .. }));
}

#[test]
fn lrd_fits() {
    for alpha in [0.4, 0.7] {
        let r = lrd_tail_check(&stable(alpha), 1.0, 0.5, 1e2, 1e4, 41).unwrap();
        assert!(r.fit.power_law);
        assert!((r.fit.slope + alpha).abs() < 0.05, "alpha={alpha}: {}", r.fit.slope);
    }
    let r = lrd_tail_check(&cpe(1.0), 1.0, 0.5, 1.0, 100.0, 41).unwrap();
    assert!(!r.fit.power_law && !r.matches);
    assert!(lrd_tail_check(&stable(0.5), 1.0, 0.5, 1.0, 50.0, 41).is_err());
    assert!(lrd_tail_check(&stable(0.5), 1.0, 1.5, 1.0, 500.0, 41).is_err());
    // r underflows for CPE at large lags
    let err = lrd_tail_check(&cpe(1.0), 1.0, 0.5, 1e2, 1e4, 41).unwrap_err();
    assert!(matches!(err, SubordError::NonPositive { .. }));
}

#[test]
fn stable_half_spectral_slope_matches_covariance_slope() {
    let alpha = 0.5;
    let p = ProcessParams::new(alpha, 1.0, 1.0).unwrap();
    let q = kernels::SpectralQuadrature::default();
    let om: Vec<f64> = (0..12).map(|k| 1e-4 * 10f64.powf(2.0 * k as f64 / 11.0)).collect();
    let sv: Vec<f64> = om.iter().map(|&w| kernels::spectral_density(w, &p, &q).unwrap()).collect();
    let spec_fit = memory_exponent(&sv, &om).unwrap();
    let cov = lrd_tail_check(&stable(alpha), 1.0, 0.5, 1e2, 1e4, 21).unwrap();
    // S(ω) ∼ ω^{α−1} ⇔ r(s) ∼ s^{−α}: slopes add to −1
    assert!((spec_fit.slope + cov.fit.slope + 1.0).abs() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn x_g_symmetric_and_bounded(a in 0.1f64..3.0, g in 0.2f64..3.0, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let k = GeneralizedKernelSpec::new(GeneralizedModel::Xg, cpe(a), g, 1.0, TimeScale::Natural).unwrap();
        let c = cov_x_g(s, t, &k).unwrap();
        prop_assert_eq!(c, cov_x_g(t, s, &k).unwrap());
        let vs = cov_x_g(s, s, &k).unwrap();
        let vt = cov_x_g(t, t, &k).unwrap();
        prop_assert!(c * c <= vs * vt * (1.0 + 1e-12));
    }

    #[test]
    fn time_change_non_decreasing(alpha in 0.1f64..1.0, g in 0.2f64..3.0, t in 0.0f64..10.0, dt in 0.0f64..2.0) {
        let b = stable(alpha);
        let a = time_change_g(t, g, &b, TimeScale::Doubled).unwrap();
        let c = time_change_g(t + dt, g, &b, TimeScale::Doubled).unwrap();
        prop_assert!(c >= a - 1e-14);
    }
}
