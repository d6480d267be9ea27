//! Green's functions for the two-dimensional Helmholtz equation in a two-layer
//! medium, their counterparts under PML truncation, and the tooling needed to
//! check them: complex Hankel functions, spectral kernels with their
//! dispersion function, contour quadrature, a finite-difference reference
//! solver and a convergence harness.
//!
//! Layer 1 (wavenumber `k1`) occupies `x2 > 0` and layer 2 (wavenumber
//! `k2 > k1`) occupies `x2 < 0`.

pub mod contour;
pub mod fdm;
pub mod geometry;
pub mod green;
pub mod harness;
pub mod special;
pub mod spectral;

pub use num_complex::Complex64 as C64;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Shorthand for building complex numbers.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("argument {0} is below the underflow floor of the Hankel functions")]
    Domain(C64),
    #[error("Hankel evaluation could not certify the requested accuracy at z = {0}")]
    Accuracy(C64),
    #[error("source and target points coincide")]
    CoincidentPoints,
    #[error("coordinate {value} lies outside [-{limit}, {limit}]")]
    OutOfDomain { value: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("point with x2 = {x2} does not belong to layer {layer}")]
    LayerMismatch { x2: f64, layer: u8 },
    #[error("spectral point {0} is too close to a zero of the dispersion function")]
    NearDispersionZero(C64),
    #[error("function nearly vanishes on the contour at {0}")]
    ZeroOnContour(C64),
    #[error("winding number not certifiable: accumulated turns {0}")]
    Uncertain(f64),
    #[error("quadrature did not converge after {panels} panels (error estimate {err:e})")]
    NoConvergence { panels: usize, err: f64 },
    #[error("integrand is singular on the path at {0}")]
    SingularityOnPath(C64),
    #[error("path constants violate their constraints: {0}")]
    BadConstants(String),
    #[error("grid does not resolve the wavelength: k2*h = {0}")]
    Resolution(f64),
    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),
    #[error("need at least 3 usable rows, found {0}")]
    InsufficientData(usize),
    #[error("source quadrature failed: {0}")]
    Quadrature(String),
    #[error("image series did not reach tolerance within {0} terms")]
    SeriesBudget(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
