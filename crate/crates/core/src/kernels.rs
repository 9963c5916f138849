//! Time changes, covariance kernels, characteristic functions and the
//! spectral density of the fractional Ornstein–Uhlenbeck family.
//!
//! Throughout, `E(x)` is `E_{α,1}(x)` and the non-stationary kernels use the
//! doubled clock `γ(2t)^α`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlf::{ml_neg, one_minus_ml, MlfError};
use crate::quad::{self, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("parameter {name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("time {name} = {value} is negative")]
    NegativeTime { name: &'static str, value: f64 },
    #[error("spectral density diverges at omega = 0 for alpha = {alpha} < 1")]
    ZeroFrequency { alpha: f64 },
    #[error("spectral integral did not converge after {panels} panels (last change {change:e})")]
    SpectralNotConverged { panels: usize, change: f64 },
    #[error(transparent)]
    Mlf(#[from] MlfError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

impl KernelError {
    pub fn code(&self) -> &'static str {
        match self {
            KernelError::InvalidParameter { .. } => "invalid_parameter",
            KernelError::NegativeTime { .. } => "negative_time",
            KernelError::ZeroFrequency { .. } => "zero_frequency",
            KernelError::SpectralNotConverged { .. } => "spectral_not_converged",
            KernelError::Mlf(e) => e.code(),
            KernelError::Quadrature(_) => "quadrature",
        }
    }

    pub fn is_validation(&self) -> bool {
        match self {
            KernelError::InvalidParameter { .. }
            | KernelError::NegativeTime { .. }
            | KernelError::ZeroFrequency { .. } => true,
            KernelError::Mlf(e) => e.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, KernelError>;

fn check_time(name: &'static str, t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(KernelError::InvalidParameter {
            name,
            value: t,
            bound: "finite",
        });
    }
    if t < 0.0 {
        return Err(KernelError::NegativeTime { name, value: t });
    }
    Ok(())
}

/// `(α, γ, θ)`: memory order, mean-reversion rate and noise intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl ProcessParams {
    pub fn new(alpha: f64, gamma: f64, theta: f64) -> Result<Self> {
        let p = ProcessParams { alpha, gamma, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(KernelError::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                bound: "in (0, 1]",
            });
        }
        for (name, v) in [("gamma", self.gamma), ("theta", self.theta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KernelError::InvalidParameter {
                    name,
                    value: v,
                    bound: "> 0",
                });
            }
        }
        Ok(())
    }

    /// Drift coefficient of the Fourier-space equation, `γ/2^{1−α}`.
    pub fn fp_drift(&self) -> f64 {
        self.gamma / 2f64.powf(1.0 - self.alpha)
    }

    /// Diffusion coefficient of the Fourier-space equation, `θ/2^{1−α}`.
    pub fn fp_diff(&self) -> f64 {
        self.theta / 2f64.powf(1.0 - self.alpha)
    }

    /// Stationary variance `θ/γ`.
    pub fn sill(&self) -> f64 {
        self.theta / self.gamma
    }

    // γ(2t)^α
    fn doubled_clock(&self, t: f64) -> f64 {
        self.gamma * (2.0 * t).powf(self.alpha)
    }

    // E(−γ(2t)^α)
    fn e_doubled(&self, t: f64) -> Result<f64> {
        Ok(ml_neg(self.alpha, self.doubled_clock(t))?)
    }

    // 1 − E(−γ(2t)^α)
    fn one_minus_doubled(&self, t: f64) -> Result<f64> {
        Ok(one_minus_ml(self.alpha, self.doubled_clock(t))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `X_α`: OU process run on the deterministic clock.
    TimeChangedOu,
    /// `X̄_α`: the stationary OU process run on the same clock.
    TimeChangedStationaryOu,
    /// `Ȳ_α`: stationary, covariance `(θ/γ)E(−γ|s|^α)`.
    FractionalStationaryOu,
    /// `Y_α`: started at zero.
    FractionalOu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub model: Model,
    pub params: ProcessParams,
}

impl KernelSpec {
    pub fn new(model: Model, params: ProcessParams) -> Result<Self> {
        params.validate()?;
        Ok(KernelSpec { model, params })
    }

    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        let p = &self.params;
        match self.model {
            Model::TimeChangedOu => cov_time_changed_ou(s, t, p),
            Model::TimeChangedStationaryOu => cov_time_changed_stationary_ou(s, t, p),
            Model::FractionalStationaryOu => {
                check_time("s", s)?;
                check_time("t", t)?;
                cov_stationary(t - s, p)
            }
            Model::FractionalOu => cov_fractional_ou(s, t, p),
        }
    }
}

/// `𝒯_α(t) = −(1/2γ) log E(−γ(2t)^α)`.
pub fn time_change_alpha(t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("t", t)?;
    Ok(-(-p.one_minus_doubled(t)?).ln_1p() / (2.0 * p.gamma))
}

/// Covariance of `X_α`.
pub fn cov_time_changed_ou(s: f64, t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("s", s)?;
    check_time("t", t)?;
    let (lo, hi) = (s.min(t), s.max(t));
    let spread = if lo == hi {
        1.0
    } else {
        (p.e_doubled(hi)? / p.e_doubled(lo)?).sqrt()
    };
    Ok(p.sill() * spread * p.one_minus_doubled(lo)?)
}

/// Covariance of `X̄_α`.
pub fn cov_time_changed_stationary_ou(s: f64, t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("s", s)?;
    check_time("t", t)?;
    let (lo, hi) = (s.min(t), s.max(t));
    if lo == hi {
        return Ok(p.sill());
    }
    Ok(p.sill() * (p.e_doubled(hi)? / p.e_doubled(lo)?).sqrt())
}

/// `r(s) = (θ/γ) E(−γ|s|^α)`.
pub fn cov_stationary(s: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    if !s.is_finite() {
        return Err(KernelError::InvalidParameter {
            name: "s",
            value: s,
            bound: "finite",
        });
    }
    Ok(p.sill() * ml_neg(p.alpha, p.gamma * s.abs().powf(p.alpha))?)
}

/// Covariance of `Y_α`.
pub fn cov_fractional_ou(s: f64, t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("s", s)?;
    check_time("t", t)?;
    if s == t {
        return variance_fractional_ou(t, p);
    }
    let lag = ml_neg(p.alpha, p.gamma * (t - s).abs().powf(p.alpha))?;
    Ok(p.sill() * (lag - (p.e_doubled(t)? * p.e_doubled(s)?).sqrt()))
}

/// `Var Y_α(t) = (θ/γ)[1 − E(−γ(2t)^α)]`.
pub fn variance_fractional_ou(t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("t", t)?;
    Ok(p.sill() * p.one_minus_doubled(t)?)
}

/// `û(ξ, t) = exp{−(θξ²/2γ)[1 − E(−γ(2t)^α)]}`.
pub fn char_function(xi: f64, t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("t", t)?;
    Ok((-0.5 * xi * xi * p.sill() * p.one_minus_doubled(t)?).exp())
}

/// `∂_ξ û(ξ, t)`.
pub fn char_function_dxi(xi: f64, t: f64, p: &ProcessParams) -> Result<f64> {
    let u = char_function(xi, t, p)?;
    Ok(-xi * p.sill() * p.one_minus_doubled(t)? * u)
}

/// `C(η, t) = (η²θ/2γ)[1 − E(−γ(2t)^α)]`.
pub fn cgf(eta: f64, t: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    check_time("t", t)?;
    Ok(0.5 * eta * eta * p.sill() * p.one_minus_doubled(t)?)
}

/// `E[Ȳ_α(t+τ) − Ȳ_α(t)]² = 2(θ/γ)[1 − E(−γτ^α)]`.
pub fn variogram_small_lag(tau: f64, p: &ProcessParams) -> Result<f64> {
    p.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(KernelError::InvalidParameter {
            name: "tau",
            value: tau,
            bound: "> 0",
        });
    }
    Ok(2.0 * p.sill() * one_minus_ml(p.alpha, p.gamma * tau.powf(p.alpha))?)
}

/// Controls for [`spectral_density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralQuadrature {
    /// Relative tolerance on the accelerated partial sums.
    pub rel_tol: f64,
    /// Minimum number of half-period panels before testing convergence.
    pub min_panels: usize,
    pub max_panels: usize,
}

impl Default for SpectralQuadrature {
    fn default() -> Self {
        SpectralQuadrature {
            rel_tol: 1e-10,
            min_panels: 8,
            max_panels: 400,
        }
    }
}

// Wynn's epsilon algorithm; returns the latest even-column estimate and the
// change from the previous one.
struct Wynn {
    rows: Vec<Vec<f64>>,
}

impl Wynn {
    fn new() -> Self {
        Wynn { rows: Vec::new() }
    }

    fn push(&mut self, partial: f64) -> (f64, f64) {
        // rows[k] holds the diagonal ε_k for the latest term
        let mut new_row = vec![partial];
        if let Some(prev) = self.rows.last() {
            for k in 0..prev.len() {
                let below = if k == 0 { 0.0 } else { prev[k - 1] };
                let diff = new_row[k] - prev[k];
                let next = if diff == 0.0 { f64::INFINITY } else { below + 1.0 / diff };
                if !next.is_finite() {
                    break;
                }
                new_row.push(next);
            }
        }
        let last_even = |row: &Vec<f64>| {
            let k = (row.len() - 1) & !1;
            row[k]
        };
        let est = last_even(&new_row);
        let change = self
            .rows
            .last()
            .map_or(f64::INFINITY, |prev| (est - last_even(prev)).abs());
        self.rows.push(new_row);
        (est, change)
    }
}

/// `S(ω) = (θ/πγ) ∫_0^∞ cos(|ω|s) E(−γs^α) ds`.
///
/// The integral is split at the zeros of the cosine. The first half-period
/// is further split geometrically towards the origin, where the integrand
/// has an `s^α` cusp. Partial sums over the later panels alternate and are
/// accelerated with Wynn's epsilon algorithm; the loop also stops once the
/// alternating-series remainder bound `E(−γs_k^α)·π/|ω|` is negligible.
pub fn spectral_density(omega: f64, p: &ProcessParams, q: &SpectralQuadrature) -> Result<f64> {
    p.validate()?;
    if !omega.is_finite() {
        return Err(KernelError::InvalidParameter {
            name: "omega",
            value: omega,
            bound: "finite",
        });
    }
    let w = omega.abs();
    let pref = p.sill() / std::f64::consts::PI;
    if w == 0.0 {
        if p.alpha < 1.0 {
            return Err(KernelError::ZeroFrequency { alpha: p.alpha });
        }
        return Ok(pref / p.gamma);
    }
    let f = |s: f64| -> f64 {
        ml_neg(p.alpha, p.gamma * s.powf(p.alpha)).unwrap_or(f64::NAN)
    };
    let integrand = |s: f64| (w * s).cos() * f(s);
    let half = std::f64::consts::PI / w;
    let first_zero = 0.5 * half;

    // first panel, geometric split towards 0
    let mut head = 0.0;
    let mut hi = first_zero;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        head += quad::integrate(integrand, lo, hi, 1e-14 * hi.max(1e-300))?.value;
        hi = lo;
        if hi < 1e-14 * first_zero {
            break;
        }
    }
    head += quad::integrate(integrand, 0.0, hi, 1e-16)?.value;

    let mut partial = head;
    let mut wynn = Wynn::new();
    let mut last_change = f64::INFINITY;
    for k in 0..q.max_panels {
        let a = first_zero + k as f64 * half;
        let b = a + half;
        let scale = f(a).abs() * half;
        let panel = quad::integrate(integrand, a, b, 1e-2 * q.rel_tol * scale.max(1e-300))?.value;
        partial += panel;
        let (est, change) = wynn.push(partial);
        last_change = change;
        let remainder = f(b) * half;
        if remainder <= 1e-3 * q.rel_tol * partial.abs() {
            return Ok(pref * partial);
        }
        if k + 1 >= q.min_panels && change <= q.rel_tol * est.abs() {
            return Ok(pref * est);
        }
    }
    Err(KernelError::SpectralNotConverged {
        panels: q.max_panels,
        change: last_change,
    })
}

#[cfg(test)]
mod tests;
