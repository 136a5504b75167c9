//! Numerical construction of an entire function of finite order whose
//! Julia set consists of wiggling hairs.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: triangle degeneracy, distortion and Koebe bounds.
//! * [`tract`]: the map `h(z) = a z + i b sin z`, its inverse and the tract boundary.
//! * [`quadrature`], [`cauchy`]: Cauchy integrals over tract boundaries.
//! * [`dynamics`]: the disjoint-type rescaling and its logarithmic transform.
//! * [`hair`]: hair tracing, marker points and triangle certificates.
//! * [`render`], [`verify`], [`export`]: escape-time images, invariant checks, serialization.

pub mod cauchy;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod ext;
pub mod geometry;
pub mod hair;
pub mod quadrature;
pub mod render;
pub mod tract;
pub mod verify;

pub use num_complex::Complex;

/// Double precision complex number used throughout.
pub type C64 = Complex<f64>;

pub use cauchy::{ConstructionConstants, Engine, FunctionValue, QuadratureConfig};
pub use config::Config;
pub use dynamics::{DisjointTypeModel, ExternalAddress, TractIndexedPoint};
pub use error::{CauchyError, DynamicsError, GeometryError, HairError, TractError};
pub use geometry::{DistortionEstimate, Triangle};
pub use hair::{HairPolyline, MarkerPoint, WiggleCertificate};
pub use tract::{ContourSample, StripSpec, TractSpec};
