//! Bernstein functions, Laplace transforms of inverse subordinators and the
//! covariance kernels built from them.
//!
//! `l̃(γ, t) = E e^{−γL(t)}` has Laplace transform `g(s)/(s(γ + g(s)))` in
//! `t`. The stable and compound-Poisson-exponential families are inverted in
//! closed form; custom triplets go through fixed-Talbot inversion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fracops::{self, ExpTail, FracopsError, GridFunction, PowerTail, Tail};
use crate::linalg::{self, PsdReport};
use crate::mlf::{ln_gamma, ml_neg, one_minus_ml, MlfError};
use crate::sampling::{memory_exponent, EstimatorError, MemoryFit};
use crate::talbot::fixed_talbot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubordError {
    #[error("parameter {name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("time {name} = {value} is negative")]
    NegativeTime { name: &'static str, value: f64 },
    #[error("Laplace inversion at t = {t} did not converge (estimated error {est_error:e})")]
    InversionNotConverged { t: f64, est_error: f64 },
    #[error("kernel Gram matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e} < {threshold:e})")]
    PsdViolated { min_eigenvalue: f64, threshold: f64 },
    #[error("r(s) = {value} at s = {s} is not positive")]
    NonPositive { s: f64, value: f64 },
    #[error(transparent)]
    Mlf(#[from] MlfError),
    #[error(transparent)]
    Fracops(#[from] FracopsError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

impl SubordError {
    pub fn code(&self) -> &'static str {
        match self {
            SubordError::InvalidParameter { .. } => "invalid_parameter",
            SubordError::NegativeTime { .. } => "negative_time",
            SubordError::InversionNotConverged { .. } => "inversion_not_converged",
            SubordError::PsdViolated { .. } => "psd_violated",
            SubordError::NonPositive { .. } => "non_positive",
            SubordError::Mlf(e) => e.code(),
            SubordError::Fracops(e) => e.code(),
            SubordError::Estimator(e) => e.code(),
        }
    }

    pub fn is_validation(&self) -> bool {
        match self {
            SubordError::InvalidParameter { .. }
            | SubordError::NegativeTime { .. }
            | SubordError::NonPositive { .. } => true,
            SubordError::Mlf(e) => e.is_validation(),
            SubordError::Fracops(e) => e.is_validation(),
            SubordError::Estimator(e) => e.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, SubordError>;

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(SubordError::InvalidParameter {
            name,
            value: v,
            bound: "> 0",
        });
    }
    Ok(())
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(SubordError::InvalidParameter {
            name,
            value: v,
            bound: ">= 0",
        });
    }
    Ok(())
}

fn check_time(name: &'static str, t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(SubordError::InvalidParameter {
            name,
            value: t,
            bound: "finite",
        });
    }
    if t < 0.0 {
        return Err(SubordError::NegativeTime { name, value: t });
    }
    Ok(())
}

/// Built-in Lévy tails `ν(x) = ν̄((x, ∞))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedTail {
    /// `w·x^{−α}/Γ(1−α)`, contributing `w·s^α` to `g`.
    Power { alpha: f64, weight: f64 },
    /// `w·e^{−r x}`, contributing `w·s/(s + r)` to `g`.
    Exponential { rate: f64, weight: f64 },
}

impl NamedTail {
    fn validate(&self) -> Result<()> {
        match *self {
            NamedTail::Power { alpha, weight } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(SubordError::InvalidParameter {
                        name: "tail.alpha",
                        value: alpha,
                        bound: "in (0, 1)",
                    });
                }
                check_nonneg("tail.weight", weight)
            }
            NamedTail::Exponential { rate, weight } => {
                check_positive("tail.rate", rate)?;
                check_nonneg("tail.weight", weight)
            }
        }
    }

    // s·∫e^{−sx}ν(x)dx
    fn g_part(&self, s: Complex64) -> Complex64 {
        match *self {
            NamedTail::Power { alpha, weight } => weight * s.powf(alpha),
            NamedTail::Exponential { rate, weight } => weight * s / (s + rate),
        }
    }

    fn g_limit(&self) -> f64 {
        match *self {
            NamedTail::Power { weight, .. } if weight > 0.0 => f64::INFINITY,
            NamedTail::Power { .. } => 0.0,
            NamedTail::Exponential { weight, .. } => weight,
        }
    }
}

impl Tail for NamedTail {
    fn value(&self, s: f64) -> f64 {
        match *self {
            NamedTail::Power { alpha, weight } => weight * PowerTail { alpha }.value(s),
            NamedTail::Exponential { rate, weight } => ExpTail { rate, weight }.value(s),
        }
    }

    fn cell_integral(&self, a: f64, b: f64) -> Option<f64> {
        match *self {
            NamedTail::Power { alpha, weight } => {
                PowerTail { alpha }.cell_integral(a, b).map(|v| weight * v)
            }
            NamedTail::Exponential { rate, weight } => ExpTail { rate, weight }.cell_integral(a, b),
        }
    }
}

/// Sum of named tails, usable as a convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSum(pub Vec<NamedTail>);

impl Tail for TailSum {
    fn value(&self, s: f64) -> f64 {
        self.0.iter().map(|p| p.value(s)).sum()
    }

    fn cell_integral(&self, a: f64, b: f64) -> Option<f64> {
        self.0.iter().map(|p| p.cell_integral(a, b)).sum()
    }
}

/// `g(s) = kill + drift·s + ∫(1 − e^{−sx}) ν̄(dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTriplet {
    #[serde(default)]
    pub kill: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub tail: Vec<NamedTail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BernsteinSpec {
    /// `g(s) = s^α`, α ∈ (0, 1].
    Stable { alpha: f64 },
    /// `g(s) = s/(s + a)`: unit-rate compound Poisson with Exp(a) jumps.
    CompoundPoissonExp { a: f64 },
    Custom(CustomTriplet),
}

impl BernsteinSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BernsteinSpec::Stable { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(SubordError::InvalidParameter {
                        name: "alpha",
                        value: *alpha,
                        bound: "in (0, 1]",
                    });
                }
                Ok(())
            }
            BernsteinSpec::CompoundPoissonExp { a } => check_positive("a", *a),
            BernsteinSpec::Custom(c) => {
                check_nonneg("kill", c.kill)?;
                check_nonneg("drift", c.drift)?;
                for p in &c.tail {
                    p.validate()?;
                }
                if c.drift == 0.0 && c.tail.iter().all(|p| p.g_limit() == 0.0) {
                    return Err(SubordError::InvalidParameter {
                        name: "drift",
                        value: c.drift,
                        bound: "> 0 unless the tail has positive mass",
                    });
                }
                Ok(())
            }
        }
    }

    /// Killing rate, drift and Lévy tail.
    pub fn triplet(&self) -> CustomTriplet {
        match self {
            BernsteinSpec::Stable { alpha } if *alpha == 1.0 => CustomTriplet {
                kill: 0.0,
                drift: 1.0,
                tail: vec![],
            },
            BernsteinSpec::Stable { alpha } => CustomTriplet {
                kill: 0.0,
                drift: 0.0,
                tail: vec![NamedTail::Power {
                    alpha: *alpha,
                    weight: 1.0,
                }],
            },
            BernsteinSpec::CompoundPoissonExp { a } => CustomTriplet {
                kill: 0.0,
                drift: 0.0,
                tail: vec![NamedTail::Exponential {
                    rate: *a,
                    weight: 1.0,
                }],
            },
            BernsteinSpec::Custom(c) => c.clone(),
        }
    }

    pub fn g_complex(&self, s: Complex64) -> Complex64 {
        match self {
            BernsteinSpec::Stable { alpha } => s.powf(*alpha),
            BernsteinSpec::CompoundPoissonExp { a } => s / (s + a),
            BernsteinSpec::Custom(c) => {
                c.tail.iter().map(|p| p.g_part(s)).sum::<Complex64>() + c.kill + c.drift * s
            }
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        self.g_complex(Complex64::new(s, 0.0)).re
    }

    /// `lim_{s→∞} g(s)`.
    pub fn g_limit(&self) -> f64 {
        match self {
            BernsteinSpec::Stable { .. } => f64::INFINITY,
            BernsteinSpec::CompoundPoissonExp { .. } => 1.0,
            BernsteinSpec::Custom(c) if c.drift > 0.0 => f64::INFINITY,
            BernsteinSpec::Custom(c) => c.kill + c.tail.iter().map(|p| p.g_limit()).sum::<f64>(),
        }
    }

    /// Spot check of `g ≥ 0`, `g′ ≥ 0` and `g″ ≤ 0` by differences on a
    /// sorted lattice of positive points.
    pub fn is_bernstein_on(&self, points: &[f64]) -> bool {
        let v: Vec<f64> = points.iter().map(|&s| self.g(s)).collect();
        let tol = 1e-12 * v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if v.iter().any(|x| !(x.is_finite() && *x >= -tol)) {
            return false;
        }
        let slopes: Vec<f64> = points
            .windows(2)
            .zip(v.windows(2))
            .map(|(p, w)| (w[1] - w[0]) / (p[1] - p[0]))
            .collect();
        if slopes.iter().any(|d| *d < -tol) {
            return false;
        }
        slopes
            .windows(2)
            .all(|d| d[1] <= d[0] + tol * 1e3 * d[0].abs().max(1.0))
    }
}

/// `D^g u(t) = kill·(u(t) − u(0⁻)) + drift·u′(t) + ∫_0^t u′(t − s) ν(s) ds`.
///
/// The drift part ignores a jump supplied through `initial`.
pub fn derivative_g(u: &GridFunction, spec: &BernsteinSpec) -> Result<GridFunction> {
    spec.validate()?;
    let c = spec.triplet();
    let mut out = vec![0.0; u.values.len()];
    if !c.tail.is_empty() {
        let conv = fracops::convolution_derivative(u, &TailSum(c.tail.clone()))?;
        out.iter_mut().zip(&conv.values).for_each(|(o, v)| *o += v);
    }
    if c.drift > 0.0 {
        let d = fracops::fd_derivative(u)?;
        out.iter_mut().zip(&d.values).for_each(|(o, v)| *o += c.drift * v);
    }
    if c.kill > 0.0 {
        let u0 = u.initial.unwrap_or(u.values[0]);
        for (o, v) in out.iter_mut().zip(&u.values).skip(1) {
            *o += c.kill * (v - u0);
        }
    }
    Ok(GridFunction::new(u.grid.clone(), out)?)
}

/// `𝓛^g u = u · D^g log u`.
pub fn log_operator_spec(u: &GridFunction, spec: &BernsteinSpec) -> Result<GridFunction> {
    let logu = u.map_log()?;
    Ok(u.times(&derivative_g(&logu, spec)?))
}

pub const TALBOT_NODES: usize = 32;
pub const INVERSION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub value: f64,
    /// `|M=32 − M=16|`.
    pub est_error: f64,
}

/// Fixed-Talbot inversion of `g(s)/(s(γ + g(s)))` at `t > 0`, for any
/// family.
pub fn invert_ltilde(gamma: f64, t: f64, spec: &BernsteinSpec) -> Result<Inversion> {
    check_positive("gamma", gamma)?;
    check_positive("t", t)?;
    spec.validate()?;
    let f = |s: Complex64| {
        let g = spec.g_complex(s);
        g / (s * (gamma + g))
    };
    let value = fixed_talbot(f, t, TALBOT_NODES);
    let coarse = fixed_talbot(f, t, TALBOT_NODES / 2);
    let est_error = (value - coarse).abs();
    if !value.is_finite() || est_error > INVERSION_TOL {
        return Err(SubordError::InversionNotConverged { t, est_error });
    }
    Ok(Inversion { value, est_error })
}

/// `l̃(γ, t) = E e^{−γL(t)}`.
pub fn ltilde(gamma: f64, t: f64, spec: &BernsteinSpec) -> Result<f64> {
    check_positive("gamma", gamma)?;
    check_time("t", t)?;
    spec.validate()?;
    match spec {
        BernsteinSpec::Stable { alpha } => Ok(ml_neg(*alpha, gamma * t.powf(*alpha))?),
        BernsteinSpec::CompoundPoissonExp { a } => {
            Ok((-a * gamma * t / (gamma + 1.0)).exp() / (gamma + 1.0))
        }
        BernsteinSpec::Custom(_) if t == 0.0 => Ok(ltilde_at_zero(gamma, spec)),
        BernsteinSpec::Custom(_) => Ok(invert_ltilde(gamma, t, spec)?.value),
    }
}

// lim_{s→∞} s·F(s) = g(∞)/(γ + g(∞))
fn ltilde_at_zero(gamma: f64, spec: &BernsteinSpec) -> f64 {
    let gl = spec.g_limit();
    if gl.is_infinite() {
        1.0
    } else {
        gl / (gamma + gl)
    }
}

/// `l̃(γ, 0) − l̃(γ, t)`, without cancellation for the closed forms.
pub fn ltilde_drop(gamma: f64, t: f64, spec: &BernsteinSpec) -> Result<f64> {
    check_positive("gamma", gamma)?;
    check_time("t", t)?;
    spec.validate()?;
    match spec {
        BernsteinSpec::Stable { alpha } => Ok(one_minus_ml(*alpha, gamma * t.powf(*alpha))?),
        BernsteinSpec::CompoundPoissonExp { a } => {
            Ok(-(-a * gamma * t / (gamma + 1.0)).exp_m1() / (gamma + 1.0))
        }
        BernsteinSpec::Custom(_) => {
            Ok(ltilde_at_zero(gamma, spec) - ltilde(gamma, t, spec)?)
        }
    }
}

/// `1 − l̃(γ, t)`.
pub fn one_minus_ltilde(gamma: f64, t: f64, spec: &BernsteinSpec) -> Result<f64> {
    let drop = ltilde_drop(gamma, t, spec)?;
    Ok((1.0 - ltilde_at_zero(gamma, spec)) + drop)
}

/// Density of the inverse compound-Poisson-exponential subordinator,
/// `e^{−x−at} W_{1,1}(xat)`, summed in log space.
pub fn inverse_subordinator_density_cpe(x: f64, t: f64, a: f64) -> Result<f64> {
    check_time("x", x)?;
    check_time("t", t)?;
    check_positive("a", a)?;
    let base = -x - a * t;
    let z = x * a * t;
    if z == 0.0 {
        return Ok(base.exp());
    }
    let lz = z.ln();
    let log_term = |j: f64| j * lz - 2.0 * ln_gamma(j + 1.0);
    // terms peak near j = √z
    let peak = z.sqrt().floor();
    let lmax = log_term(peak);
    let mut sum = 0.0;
    for dir in [1.0, -1.0] {
        let mut j = if dir > 0.0 { peak } else { peak - 1.0 };
        while j >= 0.0 {
            let r = (log_term(j) - lmax).exp();
            sum += r;
            if r < 1e-18 {
                break;
            }
            j += dir;
        }
    }
    Ok((base + lmax + sum.ln()).exp())
}

/// `h̃(t, γ) = ∫e^{−γx} h(t, x) dx` for the compound-Poisson-exponential
/// family at `t > 0`; `∂_t l̃(γ, t) = −γ h̃(t, γ)`.
pub fn htilde_cpe(t: f64, gamma: f64, a: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("gamma", gamma)?;
    check_positive("a", a)?;
    Ok(a * (-a * gamma * t / (gamma + 1.0)).exp() / ((gamma + 1.0) * (gamma + 1.0)))
}

/// Clock on which `l̃` is read by the `X_g` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    /// `l̃(γ, t)`.
    Natural,
    /// `l̃(γ, 2t)`; for the stable family this is `E(−γ(2t)^α)`, the clock of
    /// `kernels::cov_time_changed_ou` (equivalently `γ′ = 2^α γ`).
    #[default]
    Doubled,
}

impl TimeScale {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            TimeScale::Natural => t,
            TimeScale::Doubled => 2.0 * t,
        }
    }
}

/// `𝒯_g(t) = −(1/2γ) log l̃(γ, t)` on the chosen clock.
pub fn time_change_g(t: f64, gamma: f64, spec: &BernsteinSpec, scale: TimeScale) -> Result<f64> {
    let l = ltilde(gamma, scale.apply(t), spec)?;
    Ok(-l.ln() / (2.0 * gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneralizedModel {
    #[serde(rename = "xg")]
    Xg,
    #[serde(rename = "ybarg")]
    YbarG,
    #[serde(rename = "yg")]
    Yg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedKernelSpec {
    pub model: GeneralizedModel,
    pub bernstein: BernsteinSpec,
    pub gamma: f64,
    pub theta: f64,
    /// Only read by `X_g`.
    #[serde(default)]
    pub time_scale: TimeScale,
}

pub const PSD_GATE_POINTS: usize = 32;
pub const PSD_GATE_HORIZON: f64 = 10.0;

impl GeneralizedKernelSpec {
    /// Validates, and for custom triplets with a `Ȳ_g`/`Y_g` model runs the
    /// Gram check of [`psd_gate`].
    pub fn new(
        model: GeneralizedModel,
        bernstein: BernsteinSpec,
        gamma: f64,
        theta: f64,
        time_scale: TimeScale,
    ) -> Result<Self> {
        let k = GeneralizedKernelSpec {
            model,
            bernstein,
            gamma,
            theta,
            time_scale,
        };
        k.validate()?;
        if matches!(k.bernstein, BernsteinSpec::Custom(_)) && k.model != GeneralizedModel::Xg {
            psd_gate(&k)?;
        }
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_positive("theta", self.theta)?;
        self.bernstein.validate()
    }

    pub fn sill(&self) -> f64 {
        self.theta / self.gamma
    }

    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        match self.model {
            GeneralizedModel::Xg => cov_x_g(s, t, self),
            GeneralizedModel::YbarG => {
                check_time("s", s)?;
                check_time("t", t)?;
                cov_ybar_g(t - s, self)
            }
            GeneralizedModel::Yg => cov_y_g(s, t, self),
        }
    }
}

/// `(θ/γ) √(l̃(t∨s)/l̃(t∧s)) [1 − l̃(t∧s)]`, with `l̃` read on `time_scale`.
pub fn cov_x_g(s: f64, t: f64, k: &GeneralizedKernelSpec) -> Result<f64> {
    k.validate()?;
    check_time("s", s)?;
    check_time("t", t)?;
    let (g, b) = (k.gamma, &k.bernstein);
    let lo = k.time_scale.apply(s.min(t));
    let hi = k.time_scale.apply(s.max(t));
    let spread = if lo == hi {
        1.0
    } else {
        (ltilde(g, hi, b)? / ltilde(g, lo, b)?).sqrt()
    };
    Ok(k.sill() * spread * one_minus_ltilde(g, lo, b)?)
}

/// `r(s) = (θ/γ) l̃(γ, |s|)`.
pub fn cov_ybar_g(s: f64, k: &GeneralizedKernelSpec) -> Result<f64> {
    k.validate()?;
    if !s.is_finite() {
        return Err(SubordError::InvalidParameter {
            name: "s",
            value: s,
            bound: "finite",
        });
    }
    Ok(k.sill() * ltilde(k.gamma, s.abs(), &k.bernstein)?)
}

/// `(θ/γ) [l̃(γ, |t−s|) − √(l̃(γ, 2t) l̃(γ, 2s))]`.
pub fn cov_y_g(s: f64, t: f64, k: &GeneralizedKernelSpec) -> Result<f64> {
    k.validate()?;
    check_time("s", s)?;
    check_time("t", t)?;
    let (g, b) = (k.gamma, &k.bernstein);
    if s == t {
        return Ok(k.sill() * ltilde_drop(g, 2.0 * t, b)?);
    }
    let lag = ltilde(g, (t - s).abs(), b)?;
    Ok(k.sill() * (lag - (ltilde(g, 2.0 * t, b)? * ltilde(g, 2.0 * s, b)?).sqrt()))
}

/// Minimum-eigenvalue check of the kernel's Gram matrix on
/// `PSD_GATE_POINTS` equispaced points of `(0, PSD_GATE_HORIZON]`.
pub fn psd_gate(k: &GeneralizedKernelSpec) -> Result<PsdReport> {
    let points: Vec<f64> = (1..=PSD_GATE_POINTS)
        .map(|i| PSD_GATE_HORIZON * i as f64 / PSD_GATE_POINTS as f64)
        .collect();
    psd_gate_with(&points, |s, t| k.cov(s, t))
}

pub(crate) fn psd_gate_with<F>(points: &[f64], cov: F) -> Result<PsdReport>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let m = linalg::gram(points, cov)?;
    let report = linalg::psd_report(&m);
    if !report.passed {
        return Err(SubordError::PsdViolated {
            min_eigenvalue: report.min_eigenvalue,
            threshold: report.threshold,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrdReport {
    pub fit: MemoryFit,
    /// `1 − H`, the exponent in `r(s) ∼ K′s^{1−H}`.
    pub predicted_slope: f64,
    /// Whether the fit is power-law and `|slope − (1 − H)|` is within
    /// three standard errors plus 0.05.
    pub matches: bool,
}

pub const LRD_SLOPE_BAND: f64 = 0.05;

/// Fits `log l̃(γ, s)` against `log s` on `n_points` log-spaced points of
/// `[s_min, s_max]` (the `θ/γ` factor does not affect the slope).
pub fn lrd_tail_check(
    spec: &BernsteinSpec,
    gamma: f64,
    h: f64,
    s_min: f64,
    s_max: f64,
    n_points: usize,
) -> Result<LrdReport> {
    if !(h > 0.0 && h < 1.0) {
        return Err(SubordError::InvalidParameter {
            name: "H",
            value: h,
            bound: "in (0, 1)",
        });
    }
    check_positive("s_min", s_min)?;
    if !(s_max.is_finite() && s_max >= 100.0 * s_min) {
        return Err(SubordError::InvalidParameter {
            name: "s_max",
            value: s_max,
            bound: ">= 100 * s_min",
        });
    }
    if n_points < 10 {
        return Err(SubordError::InvalidParameter {
            name: "n_points",
            value: n_points as f64,
            bound: ">= 10",
        });
    }
    let ratio = (s_max / s_min).ln();
    let s: Vec<f64> = (0..n_points)
        .map(|i| s_min * (ratio * i as f64 / (n_points - 1) as f64).exp())
        .collect();
    let mut r = Vec::with_capacity(n_points);
    for &si in &s {
        let v = ltilde(gamma, si, spec)?;
        if !(v > 0.0) {
            return Err(SubordError::NonPositive { s: si, value: v });
        }
        r.push(v);
    }
    let fit = memory_exponent(&r, &s)?;
    let predicted_slope = 1.0 - h;
    let matches = fit.power_law
        && (fit.slope - predicted_slope).abs() <= 3.0 * fit.std_error + LRD_SLOPE_BAND;
    Ok(LrdReport {
        fit,
        predicted_slope,
        matches,
    })
}

#[cfg(test)]
mod tests;
