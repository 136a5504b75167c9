use thiserror::Error;

use crate::C64;

/// Errors raised by the planar geometry primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid triangle: vertices must be finite and pairwise distinct")]
    InvalidTriangle,
    #[error("distortion estimate needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("derivative vanishes at sample {index}; map is not univalent there")]
    NonUnivalent { index: usize },
    #[error("koebe bound needs 0 <= s < r, got r = {r}, s = {s}")]
    Domain { r: f64, s: f64 },
}

/// Errors raised by the tract geometry.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TractError {
    #[error("tract parameters violate univalence: linear - wiggle*sinh(beta) = {margin} <= 0")]
    NotUnivalent { margin: f64 },
    #[error("strip half-height must be positive, got {0}")]
    BadStrip(f64),
    #[error("{w} is outside the image of the domain strip (residual {residual:e})")]
    OutsideImage { w: C64, residual: f64 },
    #[error("radius {radius} is too small for the radial parametrization (corner at {corner})")]
    RadiusTooSmall { radius: f64, corner: f64 },
    #[error("contour construction failed: {0}")]
    Contour(String),
}

/// Errors raised by the Cauchy integral engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CauchyError {
    #[error("{z} lies outside the sector where g is defined")]
    OutsideSector { z: C64 },
    #[error("{z} is within {dist:e} of the contour")]
    OnContour { z: C64, dist: f64 },
    #[error("quadrature config rejected: {0}")]
    Config(String),
    #[error("deformation around {z} failed: {reason}")]
    Deformation { z: C64, reason: String },
    #[error("need at least 3 radii for an order estimate, got {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Tract(#[from] TractError),
}

/// Errors raised by the logarithmic dynamics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("{z} is outside the tract array")]
    OutsideTract { z: C64 },
    #[error("branch inversion failed for w = {w}, k = {k}: {reason}")]
    BranchInversion { w: C64, k: i64, reason: String },
    #[error("orbit left the tract array at step {step} ({z})")]
    EscapedTract { step: usize, z: C64 },
    #[error("orbit overflowed double precision at step {step}")]
    Overflow { step: usize },
    #[error("invalid external address: {0}")]
    Address(String),
    #[error("tract index {k} exceeds symbol bound {bound}")]
    SymbolBound { k: i64, bound: i64 },
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Tract(#[from] TractError),
}

/// Errors raised while tracing hairs and building certificates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HairError {
    #[error("bad address: {0}")]
    Address(String),
    #[error("address {0} is not realized by any hair")]
    Unrealized(String),
    #[error("polyline too coarse to bracket Re = {x} at level {level}")]
    Refinement { level: usize, x: f64 },
    #[error("base point too shallow at level {level}: Re w = {re} <= 4*pi")]
    TooShallow { level: usize, re: f64 },
    #[error("certificate needs at least {needed} levels, got {got}")]
    TooFewLevels { needed: usize, got: usize },
    #[error("inconsistent certificate: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
