//! Long-memory Gaussian processes driven by log-fractional Fokker-Planck
//! equations: Mittag-Leffler and Wright functions, Caputo and
//! convolution-type derivatives, covariance kernels, inverse-subordinator
//! generalizations, Gaussian and shot-noise samplers.

pub mod mlf;
pub mod talbot;
pub mod quad;
pub mod fracops;
pub mod kernels;
pub mod linalg;
pub mod subord;
pub mod sampling;
pub mod shotnoise;
pub mod verify;
pub mod cli;

use thiserror::Error;

/// Any error surfaced by the library, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mlf(#[from] mlf::MlfError),
    #[error(transparent)]
    Fracops(#[from] fracops::FracopsError),
    #[error(transparent)]
    Kernels(#[from] kernels::KernelError),
    #[error(transparent)]
    Subord(#[from] subord::SubordError),
    #[error(transparent)]
    Sampling(#[from] sampling::SamplingError),
    #[error(transparent)]
    ShotNoise(#[from] shotnoise::ShotNoiseError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error("{what}: {message}")]
    Config { what: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Mlf(_) => "mlf",
            Error::Fracops(_) => "fracops",
            Error::Kernels(_) => "kernels",
            Error::Subord(_) => "subord",
            Error::Sampling(_) => "sampling",
            Error::ShotNoise(_) => "shotnoise",
            Error::Verify(_) => "verify",
            Error::Config { .. } | Error::Io { .. } => "cli",
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::Mlf(e) => e.code(),
            Error::Fracops(e) => e.code(),
            Error::Kernels(e) => e.code(),
            Error::Subord(e) => e.code(),
            Error::Sampling(e) => e.code(),
            Error::ShotNoise(e) => e.code(),
            Error::Verify(e) => e.code(),
            Error::Config { .. } => "invalid_config",
            Error::Io { .. } => "io",
        }
    }

    /// 2 for invalid input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        let validation = match self {
            Error::Mlf(e) => e.is_validation(),
            Error::Fracops(e) => e.is_validation(),
            Error::Kernels(e) => e.is_validation(),
            Error::Subord(e) => e.is_validation(),
            Error::Sampling(e) => e.is_validation(),
            Error::ShotNoise(e) => e.is_validation(),
            Error::Verify(e) => e.is_validation(),
            Error::Config { .. } => true,
            Error::Io { .. } => return 4,
        };
        if validation {
            2
        } else {
            3
        }
    }
}
