//! Residual checks of the Fourier-space equations on uniform grids.
//!
//! Each harness evaluates a closed-form solution on `[0, T]`, applies the
//! discrete operator, and reports the max-norm of the residual over
//! `[T/4, T]` together with the observed order when `h` halves. The first
//! nodes are left out because the L1 scheme is only `O(1)`-accurate there
//! for solutions that behave like `t^α` at the origin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fracops::{self, FracopsError, GridFunction, TimeGrid};
use crate::kernels::{KernelError, ProcessParams};
use crate::mlf::{one_minus_ml, MlfError};
use crate::subord::{self, BernsteinSpec, SubordError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("parameter {name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error(transparent)]
    Mlf(#[from] MlfError),
    #[error(transparent)]
    Fracops(#[from] FracopsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Subord(#[from] SubordError),
}

impl VerifyError {
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::InvalidParameter { .. } => "invalid_parameter",
            VerifyError::Mlf(e) => e.code(),
            VerifyError::Fracops(e) => e.code(),
            VerifyError::Kernel(e) => e.code(),
            VerifyError::Subord(e) => e.code(),
        }
    }

    pub fn is_validation(&self) -> bool {
        match self {
            VerifyError::InvalidParameter { .. } => true,
            VerifyError::Mlf(e) => e.is_validation(),
            VerifyError::Fracops(e) => e.is_validation(),
            VerifyError::Kernel(e) => e.is_validation(),
            VerifyError::Subord(e) => e.is_validation(),
        }
    }
}

pub type Result<T> = std::result::Result<T, VerifyError>;

pub const RESIDUAL_HORIZON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// `𝓛^α û + γ2^{α−1} ξ∂_ξû + θ2^{α−1} ξ²û = 0`
    FpResidual,
    /// `D^α C + 2^α γ C − 2^{α−1} η²θ = 0`, `C(η, 0) = 0`
    CgfResidual,
    /// `𝓛^g û + (γ/2) ξ∂_ξû + (θ/2) ξ²û = 0` with `D^g l̃ = −γ l̃`
    GfpResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub suite: Suite,
    pub steps: usize,
    pub t_max: f64,
    pub window_start: f64,
    pub max_norm: f64,
    /// Max-norm with `2·steps` nodes.
    pub max_norm_refined: f64,
    /// `log₂(max_norm / max_norm_refined)`.
    pub order_estimate: f64,
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 8 {
        return Err(VerifyError::InvalidParameter {
            name: "steps",
            value: steps as f64,
            bound: ">= 8",
        });
    }
    Ok(())
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(VerifyError::InvalidParameter {
            name,
            value: v,
            bound: "finite",
        })
    }
}

fn window_max(grid: &TimeGrid, r: impl Iterator<Item = f64>) -> f64 {
    let start = grid.t0 + 0.25 * (grid.t_max - grid.t0);
    grid.nodes
        .iter()
        .zip(r)
        .filter(|(t, _)| **t >= start)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

fn report<F>(suite: Suite, steps: usize, f: F) -> Result<ResidualReport>
where
    F: Fn(usize) -> Result<f64>,
{
    check_steps(steps)?;
    let coarse = f(steps)?;
    let fine = f(2 * steps)?;
    Ok(ResidualReport {
        suite,
        steps,
        t_max: RESIDUAL_HORIZON,
        window_start: 0.25 * RESIDUAL_HORIZON,
        max_norm: coarse,
        max_norm_refined: fine,
        order_estimate: (coarse / fine).log2(),
    })
}

fn fp_max(p: &ProcessParams, xi: f64, steps: usize) -> Result<f64> {
    let grid = TimeGrid::new(0.0, RESIDUAL_HORIZON, steps)?;
    let c = 0.5 * xi * xi * p.sill();
    let k = p.gamma * 2f64.powf(p.alpha);
    let vals = grid
        .nodes
        .iter()
        .map(|&t| Ok((-c * one_minus_ml(p.alpha, k * t.powf(p.alpha))?).exp()))
        .collect::<Result<Vec<f64>>>()?;
    let u = GridFunction::new(grid.clone(), vals)?;
    let lhs = fracops::log_operator(&u, p.alpha)?;
    let (drift, diff) = (p.fp_drift(), p.fp_diff());
    let r = u.values.iter().zip(&lhs.values).map(|(&uv, l)| {
        let xi_du = 2.0 * uv.ln() * uv;
        l + drift * xi_du + diff * xi * xi * uv
    });
    Ok(window_max(&grid, r))
}

/// Residual of the Fourier-space FP equation for `û = exp{−(θξ²/2γ)[1 − E(−γ(2t)^α)]}`.
pub fn fp_residual(p: &ProcessParams, xi: f64, steps: usize) -> Result<ResidualReport> {
    p.validate()?;
    check_finite("xi", xi)?;
    report(Suite::FpResidual, steps, |n| fp_max(p, xi, n))
}

fn cgf_max(p: &ProcessParams, eta: f64, steps: usize) -> Result<f64> {
    let grid = TimeGrid::new(0.0, RESIDUAL_HORIZON, steps)?;
    let c = 0.5 * eta * eta * p.sill();
    let k = p.gamma * 2f64.powf(p.alpha);
    let vals = grid
        .nodes
        .iter()
        .map(|&t| Ok(c * one_minus_ml(p.alpha, k * t.powf(p.alpha))?))
        .collect::<Result<Vec<f64>>>()?;
    let u = GridFunction::new(grid.clone(), vals)?;
    let d = fracops::caputo_derivative(&u, p.alpha)?;
    let src = 2f64.powf(p.alpha - 1.0) * eta * eta * p.theta;
    let r = u.values.iter().zip(&d.values).map(|(cv, dv)| dv + k * cv - src);
    Ok(window_max(&grid, r))
}

/// Residual of the fractional ODE for the cumulant generating function `C(η, t)`.
pub fn cgf_residual(p: &ProcessParams, eta: f64, steps: usize) -> Result<ResidualReport> {
    p.validate()?;
    check_finite("eta", eta)?;
    report(Suite::CgfResidual, steps, |n| cgf_max(p, eta, n))
}

fn gfp_max(spec: &BernsteinSpec, gamma: f64, theta: f64, xi: f64, steps: usize) -> Result<f64> {
    let grid = TimeGrid::new(0.0, RESIDUAL_HORIZON, steps)?;
    let c = theta * xi * xi / (2.0 * gamma);
    let vals = grid
        .nodes
        .iter()
        .map(|&t| Ok((-c * subord::one_minus_ltilde(gamma, t, spec)?).exp()))
        .collect::<Result<Vec<f64>>>()?;
    // û(0−) = 1; a compound-Poisson clock starts with a jump at 0
    let u = GridFunction::new(grid.clone(), vals)?.with_initial(1.0)?;
    let lhs = subord::log_operator_spec(&u, spec)?;
    let r = u.values.iter().zip(&lhs.values).map(|(&uv, l)| {
        let xi_du = 2.0 * uv.ln() * uv;
        l + 0.5 * gamma * xi_du + 0.5 * theta * xi * xi * uv
    });
    Ok(window_max(&grid, r))
}

/// Residual of the generalized FP equation on the natural clock.
pub fn gfp_residual(spec: &BernsteinSpec, gamma: f64, theta: f64, xi: f64, steps: usize) -> Result<ResidualReport> {
    spec.validate()?;
    for (name, v) in [("gamma", gamma), ("theta", theta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(VerifyError::InvalidParameter { name, value: v, bound: "> 0" });
        }
    }
    check_finite("xi", xi)?;
    report(Suite::GfpResidual, steps, |n| gfp_max(spec, gamma, theta, xi, n))
}
