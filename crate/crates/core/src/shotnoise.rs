//! Power-law Poisson shot noise and its centred, rescaled version
//! `U_n(t) = n^{−1/2} [Σ_{T_j ≤ t} h₀(t − T_j) − μ_n(t)]`.
//!
//! The driving Poisson process has rate `n·λ₀` on `[0, t_max]`; event
//! times are drawn conditionally uniform given their count. The response is
//! `h₀(u) = √(w^{α−1} E_{α,α}(−γ2^α w^α))`, `w = u + ξ₀`, for `u > 0`.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::mlf::{ml, MlfError};
use crate::quad::{self, QuadError};
use crate::sampling::{check_times, jackknife_cov, open_uniform, path_rng, SamplePath, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShotNoiseError {
    #[error("parameter {name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("expected event count n*lambda0*t_max = {expected:e} exceeds 1e9")]
    TooManyEvents { expected: f64 },
    #[error("response is singular at u = {u} (xi0 = 0, alpha < 1)")]
    Singular { u: f64 },
    #[error(transparent)]
    Mlf(#[from] MlfError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

impl ShotNoiseError {
    pub fn code(&self) -> &'static str {
        match self {
            ShotNoiseError::InvalidParameter { .. } => "invalid_parameter",
            ShotNoiseError::TooManyEvents { .. } => "too_many_events",
            ShotNoiseError::Singular { .. } => "singular_response",
            ShotNoiseError::Mlf(e) => e.code(),
            ShotNoiseError::Quadrature(_) => "quadrature",
            ShotNoiseError::Sampling(e) => e.code(),
        }
    }

    pub fn is_validation(&self) -> bool {
        match self {
            ShotNoiseError::InvalidParameter { .. }
            | ShotNoiseError::TooManyEvents { .. }
            | ShotNoiseError::Singular { .. } => true,
            ShotNoiseError::Mlf(e) => e.is_validation(),
            ShotNoiseError::Sampling(e) => e.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, ShotNoiseError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseSpec {
    pub lambda0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub xi0: f64,
    /// Rescaling index: rate `n·λ₀`, amplitude `1/√n`.
    pub n: u64,
}

impl ShotNoiseSpec {
    pub fn new(lambda0: f64, alpha: f64, gamma: f64, xi0: f64, n: u64) -> Result<Self> {
        let s = ShotNoiseSpec {
            lambda0,
            alpha,
            gamma,
            xi0,
            n,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda0", self.lambda0), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ShotNoiseError::InvalidParameter {
                    name,
                    value: v,
                    bound: "> 0",
                });
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ShotNoiseError::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                bound: "in (0, 1]",
            });
        }
        if !(self.xi0.is_finite() && self.xi0 >= 0.0) {
            return Err(ShotNoiseError::InvalidParameter {
                name: "xi0",
                value: self.xi0,
                bound: ">= 0",
            });
        }
        if self.n == 0 {
            return Err(ShotNoiseError::InvalidParameter {
                name: "n",
                value: 0.0,
                bound: ">= 1",
            });
        }
        Ok(())
    }

    /// `γ2^α`.
    fn k(&self) -> f64 {
        self.gamma * 2f64.powf(self.alpha)
    }

    pub fn rate(&self) -> f64 {
        self.n as f64 * self.lambda0
    }

    pub fn with_n(&self, n: u64) -> Self {
        ShotNoiseSpec { n, ..*self }
    }
}

/// `h₀(u)`; zero for `u ≤ 0`.
pub fn response_h0(u: f64, spec: &ShotNoiseSpec) -> Result<f64> {
    spec.validate()?;
    if u.is_nan() {
        return Err(ShotNoiseError::InvalidParameter {
            name: "u",
            value: u,
            bound: "not NaN",
        });
    }
    if u <= 0.0 {
        return Ok(0.0);
    }
    let w = u + spec.xi0;
    let a = spec.alpha;
    let v = (w.powf(a - 1.0) * ml(a, a, -spec.k() * w.powf(a))?).sqrt();
    if !v.is_finite() {
        return Err(ShotNoiseError::Singular { u });
    }
    Ok(v)
}

const QUAD_TOL: f64 = 1e-11;

/// `∫_0^T f(h₀(w), w) dw` with `w = v²`, which removes the `w^{(α−1)/2}`
/// weakness at 0 when `ξ₀ = 0`.
fn integrate_sq<F>(upper: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let err = std::cell::RefCell::new(None);
    let q = quad::integrate(
        |v| match f(v * v) {
            Ok(x) => 2.0 * v * x,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        upper.sqrt(),
        QUAD_TOL,
    )?;
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(q.value)
}

/// `μ_n(t) = nλ₀ ∫_0^t h₀(u) du`.
pub fn mean_mu(spec: &ShotNoiseSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    Ok(spec.rate() * integrate_sq(t, |w| response_h0(w, spec))?)
}

/// Exact `Var U_n(t) = λ₀ ∫_0^t h₀²(u) du = (λ₀/(γ2^α)) [E(−γ2^α ξ₀^α) − E(−γ2^α(t+ξ₀)^α)]`,
/// the same for every `n`.
pub fn variance_exact(spec: &ShotNoiseSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let (a, k) = (spec.alpha, spec.k());
    let lo = ml(a, 1.0, -k * spec.xi0.powf(a))?;
    let hi = ml(a, 1.0, -k * (t + spec.xi0).powf(a))?;
    Ok(spec.lambda0 / k * (lo - hi))
}

/// The closed form without the `1/(γ2^α)` factor, `λ₀[E(−γ2^α ξ₀^α) − E(−γ2^α(t+ξ₀)^α)]`.
/// It equals [`variance_exact`] only when `γ2^α = 1`.
pub fn variance_unnormalized(spec: &ShotNoiseSpec, t: f64) -> Result<f64> {
    Ok(spec.k() * variance_exact(spec, t)?)
}

/// Limit covariance `λ₀ ∫_0^{s∧t} h₀(s − u) h₀(t − u) du`.
pub fn covariance_exact(spec: &ShotNoiseSpec, s: f64, t: f64) -> Result<f64> {
    spec.validate()?;
    let (lo, d) = (s.min(t), (s - t).abs());
    Ok(spec.lambda0
        * integrate_sq(lo, |w| Ok(response_h0(w, spec)? * response_h0(w + d, spec)?))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentOrder {
    #[serde(rename = "2")]
    Second,
    #[serde(rename = "4")]
    Fourth,
}

/// Moments of the increment remainder `W_{α,n}(s; ρ)`: order 2 is `(λ/√n) I₂`, order 4 is `(λ/n²) I₄ + (3λ²/n) I₂²`, where
/// `I_p = ∫_0^s [h₀(s − y) − h₀(s + ρ − y)]^p dy` and `λ = nλ₀`.
pub fn w_moment(spec: &ShotNoiseSpec, s: f64, rho: f64, order: MomentOrder) -> Result<f64> {
    spec.validate()?;
    for (name, v) in [("s", s), ("rho", rho)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ShotNoiseError::InvalidParameter {
                name,
                value: v,
                bound: ">= 0",
            });
        }
    }
    let diff = |w: f64| Ok(response_h0(w, spec)? - response_h0(w + rho, spec)?);
    let i2 = integrate_sq(s, |w| diff(w).map(|d| d * d))?;
    let (lambda, n) = (spec.rate(), spec.n as f64);
    Ok(match order {
        MomentOrder::Second => lambda / n.sqrt() * i2,
        MomentOrder::Fourth => {
            let i4 = integrate_sq(s, |w| diff(w).map(|d| d.powi(4)))?;
            lambda / (n * n) * i4 + 3.0 * lambda * lambda / n * i2 * i2
        }
    })
}

const TABLE_POINTS: usize = 4096;

/// `h₀` tabulated on a uniform grid in `log(u + ξ₀)` over `(0, t_max]`,
/// read back by 4-point Lagrange interpolation.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    v0: f64,
    dv: f64,
    xi0: f64,
    values: Vec<f64>,
}

impl ResponseTable {
    pub fn new(spec: &ShotNoiseSpec, t_max: f64) -> Result<Self> {
        spec.validate()?;
        if !(spec.xi0 > 0.0) {
            return Err(ShotNoiseError::InvalidParameter {
                name: "xi0",
                value: spec.xi0,
                bound: "> 0 for simulation",
            });
        }
        let v0 = spec.xi0.ln();
        let v1 = (t_max + spec.xi0).ln();
        let dv = (v1 - v0) / (TABLE_POINTS - 4) as f64;
        let mut values = Vec::with_capacity(TABLE_POINTS);
        for i in 0..TABLE_POINTS {
            // one node below the range keeps the stencil inside the table
            let w = (v0 + (i as f64 - 1.0) * dv).exp();
            let a = spec.alpha;
            values.push((w.powf(a - 1.0) * ml(a, a, -spec.k() * w.powf(a))?).sqrt());
        }
        Ok(ResponseTable {
            v0,
            dv,
            xi0: spec.xi0,
            values,
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let x = ((u + self.xi0).ln() - self.v0) / self.dv + 1.0;
        let i = (x.floor() as usize).clamp(1, self.values.len() - 3);
        let f = x - i as f64;
        let p = &self.values[i - 1..i + 3];
        let (a, b, c) = (f + 1.0, f - 1.0, f - 2.0);
        -p[0] * f * b * c / 6.0 + p[1] * a * b * c / 2.0 - p[2] * a * f * c / 2.0 + p[3] * a * f * b / 6.0
    }
}

pub const MAX_EXPECTED_EVENTS: f64 = 1e9;

/// Paths of `U_n` at `times` (non-decreasing, `t_max = times.last()`).
pub fn simulate_un(spec: &ShotNoiseSpec, times: &[f64], n_paths: usize, seed: u64) -> Result<SamplePath> {
    spec.validate()?;
    check_times(times)?;
    if n_paths == 0 {
        return Err(ShotNoiseError::InvalidParameter {
            name: "n_paths",
            value: 0.0,
            bound: ">= 1",
        });
    }
    let t_max = *times.last().unwrap_or(&0.0);
    if !(t_max > 0.0) {
        return Err(ShotNoiseError::InvalidParameter {
            name: "t_max",
            value: t_max,
            bound: "> 0",
        });
    }
    let expected = spec.rate() * t_max;
    if expected > MAX_EXPECTED_EVENTS {
        return Err(ShotNoiseError::TooManyEvents { expected });
    }
    let table = ResponseTable::new(spec, t_max)?;
    let mu: Vec<f64> = times.iter().map(|&t| mean_mu(spec, t)).collect::<Result<_>>()?;
    let poisson = Poisson::new(expected).map_err(|_| ShotNoiseError::InvalidParameter {
        name: "lambda0",
        value: spec.lambda0,
        bound: "finite Poisson mean",
    })?;
    let scale = 1.0 / (spec.n as f64).sqrt();
    let paths: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let count = poisson.sample(&mut rng) as usize;
            let mut ev: Vec<f64> = (0..count).map(|_| t_max * open_uniform(&mut rng)).collect();
            ev.sort_by(f64::total_cmp);
            times
                .iter()
                .zip(&mu)
                .map(|(&t, m)| {
                    let s: f64 = ev.iter().take_while(|&&tj| tj < t).map(|&tj| table.eval(t - tj)).sum();
                    scale * (s - m)
                })
                .collect()
        })
        .collect();
    Ok(SamplePath {
        times: times.to_vec(),
        paths,
        seed,
        source: serde_json::to_string(spec).unwrap_or_default(),
        jitter: 0.0,
    })
}

/// Kolmogorov–Smirnov statistic of `sample` against `N(0, var)` and its
/// asymptotic p-value.
pub fn ks_normal(sample: &[f64], var: f64) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let nd = Normal::new(0.0, var.sqrt()).expect("positive variance");
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = nd.cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    (d, kolmogorov_q((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d))
}

// Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovCheck {
    pub s: f64,
    pub t: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub theory: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMoments {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub theory_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub n: u64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub covariances: Vec<CovCheck>,
    pub nodes: Vec<NodeMoments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference_time: f64,
    pub entries: Vec<ConvergenceEntry>,
    /// KS statistics non-increasing in `n` up to `1/√n_paths`.
    pub ks_non_increasing: bool,
}

/// Simulates `U_n` for each `n` and compares the marginal at `times[ref_node]`
/// (KS) and the covariances at `pairs` (node indices) with the Gaussian
/// limit.
pub fn convergence_report(
    base: &ShotNoiseSpec,
    ns: &[u64],
    times: &[f64],
    ref_node: usize,
    pairs: &[(usize, usize)],
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if ref_node >= times.len() || pairs.iter().any(|&(i, j)| i.max(j) >= times.len()) {
        return Err(ShotNoiseError::InvalidParameter {
            name: "ref_node",
            value: ref_node as f64,
            bound: "a valid node index",
        });
    }
    if n_paths < 3 {
        return Err(ShotNoiseError::InvalidParameter {
            name: "n_paths",
            value: n_paths as f64,
            bound: ">= 3",
        });
    }
    let t_ref = times[ref_node];
    let var_ref = variance_exact(base, t_ref)?;
    let mut entries = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = base.with_n(n);
        let sp = simulate_un(&spec, times, n_paths, seed)?;
        let (ks_statistic, ks_p_value) = ks_normal(&sp.column(ref_node), var_ref);
        let mut covariances = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let (empirical, std_error) = jackknife_cov(&sp.column(i), &sp.column(j));
            let theory = covariance_exact(&spec, times[i], times[j])?;
            covariances.push(CovCheck {
                s: times[i],
                t: times[j],
                empirical,
                std_error,
                theory,
                within_3se: (empirical - theory).abs() <= 3.0 * std_error,
            });
        }
        let mut nodes = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let col = sp.column(j);
            let mean = col.iter().sum::<f64>() / n_paths as f64;
            let (variance, variance_se) = jackknife_cov(&col, &col);
            nodes.push(NodeMoments {
                t,
                mean,
                variance,
                variance_se,
                theory_variance: variance_exact(&spec, t)?,
            });
        }
        entries.push(ConvergenceEntry {
            n,
            ks_statistic,
            ks_p_value,
            covariances,
            nodes,
        });
    }
    let slack = 1.0 / (n_paths as f64).sqrt();
    let ks_non_increasing = entries
        .windows(2)
        .all(|w| w[1].ks_statistic <= w[0].ks_statistic + slack);
    Ok(ConvergenceReport {
        reference_time: t_ref,
        entries,
        ks_non_increasing,
    })
}
