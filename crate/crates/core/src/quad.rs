//! Adaptive wrapper around tanh-sinh quadrature.
//!
//! The underlying rule caps itself at a few hundred evaluations and silently
//! replaces non-finite samples with zero. Here intervals are bisected until
//! the reported error meets the tolerance, and a non-finite sample is an
//! error.

use std::cell::Cell;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
    #[error("quadrature on [{a}, {b}] did not converge (estimated error {error:e})")]
    NotConverged { a: f64, b: f64, error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 24;
const MAX_EVALUATIONS: usize = 200_000;
const ROUNDOFF_ULPS: f64 = 64.0;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`, or to roundoff
/// level when `tol` is smaller than that.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature, QuadError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let bad = Cell::new(None);
    let guarded = |x: f64| {
        let v = f(x);
        // nodes that round onto an endpoint are dropped by the rule itself
        if !v.is_finite() && x != a && x != b && bad.get().is_none() {
            bad.set(Some(x));
        }
        v
    };
    let mut out = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut unresolved = 0.0;
    while let Some((lo, hi, local_tol, depth)) = stack.pop() {
        let r = quadrature::double_exponential::integrate(&guarded, lo, hi, local_tol);
        out.evaluations += r.num_function_evaluations as usize;
        if let Some(at) = bad.get() {
            return Err(QuadError::NonFinite { at });
        }
        if out.evaluations > MAX_EVALUATIONS {
            return Err(QuadError::NotConverged {
                a,
                b,
                error: r.error_estimate,
            });
        }
        // the rule cannot resolve below a few hundred ulps of the result
        let floor = local_tol.max(ROUNDOFF_ULPS * f64::EPSILON * r.integral.abs());
        if r.error_estimate <= floor || depth >= MAX_DEPTH {
            if r.error_estimate > floor {
                unresolved += r.error_estimate;
            }
            out.value += r.integral;
            out.error += r.error_estimate.min(r.integral.abs().max(local_tol));
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, 0.5 * local_tol, depth + 1));
        stack.push((lo, mid, 0.5 * local_tol, depth + 1));
    }
    if unresolved > 10.0 * tol {
        return Err(QuadError::NotConverged {
            a,
            b,
            error: out.error,
        });
    }
    Ok(out)
}

/// Integrate over `[a, ∞)` by summing `[a + kL, a + (k+1)L]` panels until a
/// panel contributes less than `tol`·1e-3 twice in a row.
pub fn integrate_to_infinity<F>(f: F, a: f64, panel: f64, tol: f64) -> Result<Quadrature, QuadError>
where
    F: Fn(f64) -> f64,
{
    let mut total = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let mut quiet = 0;
    for k in 0..100_000 {
        let lo = a + k as f64 * panel;
        let r = integrate(&f, lo, lo + panel, tol * 1e-2)?;
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
        if r.value.abs() < 1e-3 * tol {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
    }
    Err(QuadError::NotConverged {
        a,
        b: f64::INFINITY,
        error: total.error,
    })
}
