//! Grid operators: the Caputo derivative (L1 scheme), convolution-type
//! derivatives with a Lévy-tail kernel, and the logarithmic operators
//! `u · D log u` built on top of them.
//!
//! All grids are uniform. Every operator reports `0` at node 0, where the
//! memory integral is empty.
//!
//! A [`GridFunction`] may carry an `initial` value that differs from its
//! value at node 0. The operators then treat `u` as jumping from `initial`
//! to `values[0]` at `t0⁺`, and add the exact contribution of that jump
//! (`Δ·ν(t)`, which for the power kernel is `Δ·t^{−α}/Γ(1−α)`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlf::{gamma, recip_gamma};
use crate::quad::{self, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracopsError {
    #[error("parameter {name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("grid has {nodes} nodes, at least {required} required")]
    TooFewNodes { nodes: usize, required: usize },
    #[error("{len} values supplied for a grid of {nodes} nodes")]
    LengthMismatch { len: usize, nodes: usize },
    #[error("value at node {index} is not finite")]
    NonFinite { index: usize },
    #[error("value {value} at node {index} is not strictly positive (logarithm undefined)")]
    NonPositive { index: usize, value: f64 },
    #[error("tail kernel is not integrable on the first cell [0, {h}]")]
    NonIntegrableTail { h: f64 },
    #[error("tail cell integral failed: {0}")]
    Quadrature(#[from] QuadError),
}

impl FracopsError {
    pub fn code(&self) -> &'static str {
        match self {
            FracopsError::InvalidParameter { .. } => "invalid_parameter",
            FracopsError::TooFewNodes { .. } => "too_few_nodes",
            FracopsError::LengthMismatch { .. } => "length_mismatch",
            FracopsError::NonFinite { .. } => "non_finite",
            FracopsError::NonPositive { .. } => "non_positive",
            FracopsError::NonIntegrableTail { .. } => "non_integrable_tail",
            FracopsError::Quadrature(_) => "quadrature",
        }
    }

    pub fn is_validation(&self) -> bool {
        !matches!(self, FracopsError::Quadrature(_))
    }
}

pub type Result<T> = std::result::Result<T, FracopsError>;

/// Uniform time grid `t0, t0 + h, …, t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_max: f64,
    pub n_steps: usize,
    pub nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t0: f64, t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(FracopsError::InvalidParameter {
                name: "t0",
                value: t0,
                bound: ">= 0",
            });
        }
        if !(t_max.is_finite() && t_max > t0) {
            return Err(FracopsError::InvalidParameter {
                name: "t_max",
                value: t_max,
                bound: "> t0",
            });
        }
        if n_steps < 2 {
            return Err(FracopsError::InvalidParameter {
                name: "n_steps",
                value: n_steps as f64,
                bound: ">= 2",
            });
        }
        let h = (t_max - t0) / n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps).map(|k| t0 + k as f64 * h).collect();
        nodes[n_steps] = t_max;
        Ok(TimeGrid {
            t0,
            t_max,
            n_steps,
            nodes,
        })
    }

    pub fn h(&self) -> f64 {
        (self.t_max - self.t0) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Value of `u` just before `t0` when it differs from `values[0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FracopsError::LengthMismatch {
                len: values.len(),
                nodes: grid.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FracopsError::NonFinite { index });
        }
        Ok(GridFunction {
            grid,
            values,
            initial: None,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: TimeGrid, f: F) -> Result<Self> {
        let values = grid.nodes.iter().map(|&t| f(t)).collect();
        GridFunction::new(grid, values)
    }

    pub fn with_initial(mut self, initial: f64) -> Result<Self> {
        if !initial.is_finite() {
            return Err(FracopsError::NonFinite { index: 0 });
        }
        self.initial = Some(initial);
        Ok(self)
    }

    pub(crate) fn jump(&self) -> f64 {
        self.initial.map_or(0.0, |u0| self.values[0] - u0)
    }

    pub(crate) fn map_log(&self) -> Result<GridFunction> {
        if let Some((index, &value)) = self.values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(FracopsError::NonPositive { index, value });
        }
        let initial = match self.initial {
            Some(u0) if u0 <= 0.0 => return Err(FracopsError::NonPositive { index: 0, value: u0 }),
            Some(u0) => Some(u0.ln()),
            None => None,
        };
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.ln()).collect(),
            initial,
        })
    }

    pub(crate) fn times(&self, factor: &GridFunction) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&factor.values)
                .map(|(a, b)| a * b)
                .collect(),
            initial: None,
        }
    }
}

fn check_nodes(u: &GridFunction) -> Result<()> {
    if u.values.len() < 3 {
        return Err(FracopsError::TooFewNodes {
            nodes: u.values.len(),
            required: 3,
        });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(FracopsError::InvalidParameter {
            name: "alpha",
            value: alpha,
            bound: "in (0, 1]",
        })
    }
}

const FD_STENCIL: usize = 7;

// Fornberg weights for the first derivative at `z` from unit-spaced nodes 0..n.
fn fornberg_first_derivative(z: f64, n: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let m = 1;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[1]).collect()
}

/// First derivative by sixth-order finite differences (one-sided near the
/// ends). Node 0 is reported as 0 like every other operator here.
pub fn fd_derivative(u: &GridFunction) -> Result<GridFunction> {
    check_nodes(u)?;
    let n = u.values.len();
    let width = FD_STENCIL.min(n);
    let h = u.grid.h();
    let tables: Vec<Vec<f64>> = (0..width)
        .map(|p| fornberg_first_derivative(p as f64, width))
        .collect();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        let start = i.saturating_sub(width / 2).min(n - width);
        let w = &tables[i - start];
        *o = w
            .iter()
            .zip(&u.values[start..start + width])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / h;
    }
    GridFunction::new(u.grid.clone(), out)
}

/// Caputo derivative of order `alpha ∈ (0, 1]` by the L1 scheme.
///
/// The scheme is of order `h^{2−α}` for smooth `u`; at `alpha = 1` it is
/// replaced by [`fd_derivative`]. A jump supplied through
/// [`GridFunction::initial`] contributes `Δ·(t − t0)^{−α}/Γ(1−α)`, which
/// vanishes at `alpha = 1`.
pub fn caputo_derivative(u: &GridFunction, alpha: f64) -> Result<GridFunction> {
    check_alpha(alpha)?;
    check_nodes(u)?;
    if alpha == 1.0 {
        return fd_derivative(u);
    }
    let n = u.values.len();
    let h = u.grid.h();
    let one_minus = 1.0 - alpha;
    let b: Vec<f64> = (0..n)
        .map(|j| ((j + 1) as f64).powf(one_minus) - (j as f64).powf(one_minus))
        .collect();
    let diffs: Vec<f64> = u.values.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = 1.0 / (h.powf(alpha) * gamma(2.0 - alpha));
    let jump = u.jump();
    let jump_scale = recip_gamma(one_minus);
    let mut out = vec![0.0; n];
    for (m, o) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for k in 0..m {
            acc += diffs[k] * b[m - 1 - k];
        }
        *o = acc * scale;
        if jump != 0.0 {
            *o += jump * jump_scale * (u.grid.nodes[m] - u.grid.t0).powf(-alpha);
        }
    }
    GridFunction::new(u.grid.clone(), out)
}

/// `𝓛^α u = u · D^α log u`.
pub fn log_operator(u: &GridFunction, alpha: f64) -> Result<GridFunction> {
    check_alpha(alpha)?;
    let logu = u.map_log()?;
    Ok(u.times(&caputo_derivative(&logu, alpha)?))
}

/// Tail `ν(s) = ν̄((s, ∞))` of a Lévy measure, used as a convolution kernel.
pub trait Tail: Sync {
    fn value(&self, s: f64) -> f64;

    /// `∫_a^b ν(s) ds` in closed form, when available.
    fn cell_integral(&self, _a: f64, _b: f64) -> Option<f64> {
        None
    }
}

/// `ν(s) = s^{−α}/Γ(1−α)`, the tail of the α-stable subordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTail {
    pub alpha: f64,
}

impl Tail for PowerTail {
    fn value(&self, s: f64) -> f64 {
        s.powf(-self.alpha) * recip_gamma(1.0 - self.alpha)
    }

    fn cell_integral(&self, a: f64, b: f64) -> Option<f64> {
        let p = 1.0 - self.alpha;
        Some((b.powf(p) - a.powf(p)) * recip_gamma(2.0 - self.alpha))
    }
}

/// `ν(s) = w·e^{−r s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTail {
    pub rate: f64,
    pub weight: f64,
}

impl Tail for ExpTail {
    fn value(&self, s: f64) -> f64 {
        self.weight * (-self.rate * s).exp()
    }

    fn cell_integral(&self, a: f64, b: f64) -> Option<f64> {
        let r = self.rate;
        if r == 0.0 {
            return Some(self.weight * (b - a));
        }
        // e^{−ra}(1 − e^{−r(b−a)})/r without cancellation
        Some(self.weight * (-r * a).exp() * -(-r * (b - a)).exp_m1() / r)
    }
}

/// Arbitrary tail given as a closure; cells are integrated numerically.
pub struct FnTail<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Tail for FnTail<F> {
    fn value(&self, s: f64) -> f64 {
        (self.0)(s)
    }
}

const CELL_TOL: f64 = 1e-12;

fn cell_weights(tail: &dyn Tail, h: f64, cells: usize) -> Result<Vec<f64>> {
    let mut w = Vec::with_capacity(cells);
    for j in 0..cells {
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        let v = match tail.cell_integral(a, b) {
            Some(v) => v,
            None => {
                let q = quad::integrate(|s| tail.value(s), a, b, CELL_TOL * h.max(1.0));
                match q {
                    Ok(r) => r.value,
                    Err(_) if j == 0 => return Err(FracopsError::NonIntegrableTail { h }),
                    Err(e) => return Err(e.into()),
                }
            }
        };
        if !v.is_finite() {
            if j == 0 {
                return Err(FracopsError::NonIntegrableTail { h });
            }
            return Err(FracopsError::NonFinite { index: j });
        }
        w.push(v);
    }
    Ok(w)
}

/// `∫_0^t u′(t − s) ν(s) ds` by product integration: `u′` is constant on
/// each cell and `ν` is integrated exactly (or by quadrature) per cell.
pub fn convolution_derivative(u: &GridFunction, tail: &dyn Tail) -> Result<GridFunction> {
    check_nodes(u)?;
    let n = u.values.len();
    let h = u.grid.h();
    let w = cell_weights(tail, h, n - 1)?;
    let slopes: Vec<f64> = u.values.windows(2).map(|p| (p[1] - p[0]) / h).collect();
    let jump = u.jump();
    let mut out = vec![0.0; n];
    for (m, o) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for k in 0..m {
            acc += slopes[k] * w[m - 1 - k];
        }
        if jump != 0.0 {
            acc += jump * tail.value(u.grid.nodes[m] - u.grid.t0);
        }
        *o = acc;
    }
    GridFunction::new(u.grid.clone(), out)
}

/// `𝓛^g u = u · D^g log u`.
pub fn log_operator_g(u: &GridFunction, tail: &dyn Tail) -> Result<GridFunction> {
    let logu = u.map_log()?;
    Ok(u.times(&convolution_derivative(&logu, tail)?))
}
