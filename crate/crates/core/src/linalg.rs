//! Gram matrices and positive-semidefiniteness diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Relative threshold: the minimum eigenvalue must be at least
/// `−PSD_RTOL · trace/size`.
pub const PSD_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub threshold: f64,
    pub trace: f64,
    pub size: usize,
    pub passed: bool,
}

/// Symmetric Gram matrix `K[i][j] = k(x_i, x_j)`, evaluated on the upper
/// triangle and mirrored.
pub fn gram<E, F>(points: &[f64], k: F) -> Result<DMatrix<f64>, E>
where
    F: Fn(f64, f64) -> Result<f64, E>,
{
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k(points[i], points[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

pub fn psd_report(m: &DMatrix<f64>) -> PsdReport {
    let size = m.nrows();
    if size == 0 {
        return PsdReport {
            min_eigenvalue: 0.0,
            threshold: 0.0,
            trace: 0.0,
            size,
            passed: true,
        };
    }
    let trace = m.trace();
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = -PSD_RTOL * trace.abs() / size as f64;
    PsdReport {
        min_eigenvalue,
        threshold,
        trace,
        size,
        passed: min_eigenvalue >= threshold,
    }
}
