//! Exact Gaussian sampling on a finite set of times, and the estimators
//! used to check samples against their kernels.
//!
//! Randomness: path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` with
//! its stream set to `i`, and every standard normal is one uniform pushed
//! through the inverse normal CDF. A path therefore depends only on
//! `(seed, i)` and the output is independent of the thread count.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::kernels::{KernelError, KernelSpec, ProcessParams};
use crate::linalg::{self, PsdReport};
use crate::mlf::{ml_neg, one_minus_ml};
use crate::subord::{self, GeneralizedKernelSpec, GeneralizedModel, SubordError};

/// Errors of the estimators, kept apart from [`SamplingError`] so that
/// kernel modules can use the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("{n} paths supplied, at least {required} required")]
    TooFewPaths { n: usize, required: usize },
    #[error("{n} points supplied, at least {required} required")]
    TooFewPoints { n: usize, required: usize },
    #[error("abscissae span {decades:.3} decades, at least 2 required")]
    NarrowRange { decades: f64 },
    #[error("value {value} at index {index} is not strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("sequences have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("node index {index} out of range for {nodes} nodes")]
    IndexOutOfRange { index: usize, nodes: usize },
}

impl EstimatorError {
    pub fn code(&self) -> &'static str {
        match self {
            EstimatorError::TooFewPaths { .. } => "too_few_paths",
            EstimatorError::TooFewPoints { .. } => "too_few_points",
            EstimatorError::NarrowRange { .. } => "narrow_range",
            EstimatorError::NonPositive { .. } => "non_positive",
            EstimatorError::LengthMismatch { .. } => "length_mismatch",
            EstimatorError::IndexOutOfRange { .. } => "index_out_of_range",
        }
    }

    pub fn is_validation(&self) -> bool {
        true
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("parameter {name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("times must be finite, non-negative and non-decreasing (index {index})")]
    BadTimes { index: usize },
    #[error("covariance matrix is not positive definite even with jitter {max_jitter:e} (min eigenvalue {min_eigenvalue:e})")]
    FactorizationFailed { max_jitter: f64, min_eigenvalue: f64 },
    #[error("Brownian clock decreases at index {index}")]
    ClockNotMonotone { index: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Subord(#[from] SubordError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

impl SamplingError {
    pub fn code(&self) -> &'static str {
        match self {
            SamplingError::InvalidParameter { .. } => "invalid_parameter",
            SamplingError::BadTimes { .. } => "bad_times",
            SamplingError::FactorizationFailed { .. } => "factorization_failed",
            SamplingError::ClockNotMonotone { .. } => "clock_not_monotone",
            SamplingError::Kernel(e) => e.code(),
            SamplingError::Subord(e) => e.code(),
            SamplingError::Estimator(e) => e.code(),
        }
    }

    pub fn is_validation(&self) -> bool {
        match self {
            SamplingError::InvalidParameter { .. } | SamplingError::BadTimes { .. } => true,
            SamplingError::Kernel(e) => e.is_validation(),
            SamplingError::Subord(e) => e.is_validation(),
            SamplingError::Estimator(e) => e.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, SamplingError>;

/// Any covariance kernel the samplers accept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyKernel {
    Fractional(KernelSpec),
    Generalized(GeneralizedKernelSpec),
}

impl AnyKernel {
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        Ok(match self {
            AnyKernel::Fractional(k) => k.cov(s, t)?,
            AnyKernel::Generalized(k) => k.cov(s, t)?,
        })
    }
}

impl From<KernelSpec> for AnyKernel {
    fn from(k: KernelSpec) -> Self {
        AnyKernel::Fractional(k)
    }
}

impl From<GeneralizedKernelSpec> for AnyKernel {
    fn from(k: GeneralizedKernelSpec) -> Self {
        AnyKernel::Generalized(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub times: Vec<f64>,
    /// `paths[i][j]` is path `i` at `times[j]`.
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
    pub source: String,
    /// Relative diagonal jitter used by the factorization (0 otherwise).
    pub jitter: f64,
}

impl SamplePath {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[j]).collect()
    }
}

/// Per-path generator.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Uniform on the open interval `(0, 1)` from 53 random bits.
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn std_normal(rng: &mut impl RngCore) -> f64 {
    // statrs' Normal::standard() is infallible
    let n = Normal::standard();
    n.inverse_cdf(open_uniform(rng))
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(SamplingError::InvalidParameter {
            name: "times",
            value: 0.0,
            bound: "at least one node",
        });
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t.is_finite() && t >= 0.0) || (i > 0 && t < times[i - 1]) {
            return Err(SamplingError::BadTimes { index: i });
        }
    }
    Ok(())
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(SamplingError::InvalidParameter {
            name: "n_paths",
            value: 0.0,
            bound: ">= 1",
        });
    }
    Ok(())
}

pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Lower Cholesky factor of `m + ε·(trace/n)·I` for the first `ε` on
/// [`JITTER_LADDER`] that succeeds.
pub fn factorize(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    let scale = m.trace() / n as f64;
    for &eps in &JITTER_LADDER {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += eps * scale;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok((c.l(), eps));
        }
    }
    Err(SamplingError::FactorizationFailed {
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        min_eigenvalue: linalg::psd_report(m).min_eigenvalue,
    })
}

/// Draws `n_paths` centered Gaussian vectors with covariance
/// `kernel.cov(times[i], times[j])`.
///
/// Nodes whose whole covariance row vanishes (e.g. `t = 0` for processes
/// started at zero) are set to exactly 0 and left out of the factorization.
pub fn sample_gaussian(kernel: &AnyKernel, times: &[f64], n_paths: usize, seed: u64) -> Result<SamplePath> {
    check_times(times)?;
    check_paths(n_paths)?;
    let full = linalg::gram(times, |s, t| kernel.cov(s, t))?;
    let live: Vec<usize> = (0..times.len())
        .filter(|&i| full.row(i).iter().any(|v| *v != 0.0))
        .collect();
    let m = DMatrix::from_fn(live.len(), live.len(), |i, j| full[(live[i], live[j])]);
    let (l, jitter) = if live.is_empty() {
        (DMatrix::zeros(0, 0), 0.0)
    } else {
        factorize(&m)?
    };
    let paths: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let z = DVector::from_fn(live.len(), |_, _| std_normal(&mut rng));
            let x = &l * z;
            let mut out = vec![0.0; times.len()];
            for (k, &i) in live.iter().enumerate() {
                out[i] = x[k];
            }
            out
        })
        .collect();
    Ok(SamplePath {
        times: times.to_vec(),
        paths,
        seed,
        source: serde_json::to_string(kernel).unwrap_or_default(),
        jitter,
    })
}

/// Processes written as `a(t)·W(c(t))` for a standard Brownian motion `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BrownianRep {
    /// `X_α`: `a = √((θ/γ)E)`, `c = 1/E − 1`, `E = E(−γ(2t)^α)`.
    TimeChangedOu(ProcessParams),
    /// `X_g`: as above with `l̃` in place of `E`.
    Generalized(GeneralizedKernelSpec),
    /// Scaled Brownian motion `W(t^α)`.
    PowerClock { alpha: f64 },
}

impl BrownianRep {
    /// Amplitude and clock at `t`.
    pub fn amplitude_clock(&self, t: f64) -> Result<(f64, f64)> {
        match self {
            BrownianRep::TimeChangedOu(p) => {
                p.validate()?;
                let x = p.gamma * (2.0 * t).powf(p.alpha);
                let e = ml_neg(p.alpha, x).map_err(KernelError::from)?;
                let om = one_minus_ml(p.alpha, x).map_err(KernelError::from)?;
                Ok(((p.sill() * e).sqrt(), om / e))
            }
            BrownianRep::Generalized(k) => {
                if k.model != GeneralizedModel::Xg {
                    return Err(SamplingError::InvalidParameter {
                        name: "model",
                        value: f64::NAN,
                        bound: "xg (only X_g has a Brownian representation)",
                    });
                }
                let tt = k.time_scale.apply(t);
                let l = subord::ltilde(k.gamma, tt, &k.bernstein)?;
                let om = subord::one_minus_ltilde(k.gamma, tt, &k.bernstein)?;
                Ok(((k.sill() * l).sqrt(), om / l))
            }
            BrownianRep::PowerClock { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(SamplingError::InvalidParameter {
                        name: "alpha",
                        value: *alpha,
                        bound: "in (0, 1]",
                    });
                }
                Ok((1.0, t.powf(*alpha)))
            }
        }
    }
}

/// Evaluates one Brownian path per sample at the deterministic clock, using
/// independent Gaussian increments of the clock.
pub fn sample_brownian_rep(rep: &BrownianRep, times: &[f64], n_paths: usize, seed: u64) -> Result<SamplePath> {
    check_times(times)?;
    check_paths(n_paths)?;
    let mut amp = Vec::with_capacity(times.len());
    let mut steps = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let (a, c) = rep.amplitude_clock(t)?;
        if !(a.is_finite() && c.is_finite()) || c < prev {
            return Err(SamplingError::ClockNotMonotone { index: i });
        }
        amp.push(a);
        steps.push((c - prev).sqrt());
        prev = c;
    }
    let paths: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut w = 0.0;
            amp.iter()
                .zip(&steps)
                .map(|(a, dc)| {
                    w += dc * std_normal(&mut rng);
                    a * w
                })
                .collect()
        })
        .collect();
    Ok(SamplePath {
        times: times.to_vec(),
        paths,
        seed,
        source: serde_json::to_string(rep).unwrap_or_default(),
        jitter: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_samples: usize,
}

/// Unbiased covariance of the node pairs with jackknife standard errors.
pub fn empirical_cov(sp: &SamplePath, pairs: &[(usize, usize)]) -> std::result::Result<EstimatorReport, EstimatorError> {
    let n = sp.n_paths();
    if n < 3 {
        return Err(EstimatorError::TooFewPaths { n, required: 3 });
    }
    let nodes = sp.times.len();
    let mut estimate = Vec::with_capacity(pairs.len());
    let mut std_error = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        for index in [i, j] {
            if index >= nodes {
                return Err(EstimatorError::IndexOutOfRange { index, nodes });
            }
        }
        let (c, se) = jackknife_cov(&sp.column(i), &sp.column(j));
        estimate.push(c);
        std_error.push(se);
    }
    Ok(EstimatorReport {
        estimate,
        std_error,
        n_samples: n,
    })
}

/// Sample covariance and its delete-one jackknife standard error.
pub fn jackknife_cov(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sx: f64 = xc.iter().sum();
    let sy: f64 = yc.iter().sum();
    let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
    let full = (sxy - sx * sy / n) / (n - 1.0);
    let loo: Vec<f64> = xc
        .iter()
        .zip(&yc)
        .map(|(a, b)| {
            let (sx, sy) = (sx - a, sy - b);
            (sxy - a * b - sx * sy / (n - 1.0)) / (n - 2.0)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1.0) / n;
    (full, var.sqrt())
}

/// Sample mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Quadratic-term size (in log units over the fitted range) above which a
/// significant curvature rejects the power law.
pub const CURVATURE_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryFit {
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
    /// `|c₂|` of `log r = c₀ + c₁u + c₂u²`, `u` the log-abscissa mapped to
    /// `[−1, 1]`.
    pub curvature: f64,
    /// `c₂` over its standard error (infinite for noise-free curved data).
    pub curvature_z: f64,
    pub n_points: usize,
    pub power_law: bool,
}

/// Least-squares slope of `log r` against `log s`.
pub fn memory_exponent(r: &[f64], s: &[f64]) -> std::result::Result<MemoryFit, EstimatorError> {
    if r.len() != s.len() {
        return Err(EstimatorError::LengthMismatch {
            left: r.len(),
            right: s.len(),
        });
    }
    let n = r.len();
    if n < 10 {
        return Err(EstimatorError::TooFewPoints { n, required: 10 });
    }
    for (index, &value) in r.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(EstimatorError::NonPositive { index, value });
        }
    }
    for (index, &value) in s.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(EstimatorError::NonPositive { index, value });
        }
    }
    let x: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let decades = (hi - lo) / std::f64::consts::LN_10;
    if decades < 2.0 - 1e-9 {
        return Err(EstimatorError::NarrowRange { decades });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let std_error = (rss / (nf - 2.0) / sxx).sqrt();

    let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let design = DMatrix::from_fn(n, 3, |i, k| ((x[i] - mid) / half).powi(k as i32));
    let yv = DVector::from_vec(y.clone());
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * &yv;
    let (curvature, curvature_z) = match xtx.clone().try_inverse() {
        Some(inv) => {
            let c = &inv * xty;
            let resid = &yv - &design * &c;
            let s2 = resid.norm_squared() / (nf - 3.0);
            let se2 = (s2 * inv[(2, 2)]).sqrt();
            let z = if se2 > 0.0 {
                c[2] / se2
            } else if c[2] == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(c[2])
            };
            (c[2].abs(), z)
        }
        None => (0.0, 0.0),
    };
    let power_law = !(curvature > CURVATURE_TOL && curvature_z.abs() > 3.0);
    Ok(MemoryFit {
        slope,
        std_error,
        intercept,
        curvature,
        curvature_z,
        n_points: n,
        power_law,
    })
}

pub const PSD_MAX_NODES: usize = 512;

/// Minimum eigenvalue of the kernel's Gram matrix on `times`.
pub fn psd_check(kernel: &AnyKernel, times: &[f64]) -> Result<PsdReport> {
    if times.len() > PSD_MAX_NODES {
        return Err(SamplingError::InvalidParameter {
            name: "times",
            value: times.len() as f64,
            bound: "at most 512 nodes",
        });
    }
    let m = linalg::gram(times, |s, t| kernel.cov(s, t))?;
    Ok(linalg::psd_report(&m))
}
