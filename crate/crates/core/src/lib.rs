//! Radial numerics for Moser–Trudinger type functionals on `R^N`.
//!
//! All routines are generic over a [`Real`] scalar; the aliases below fix
//! the common `f64` instantiation.

pub mod dims;
pub mod error;
pub mod functional;
pub mod maximizer;
pub mod odes;
#[cfg(feature = "extended")]
pub mod extended;
pub mod quadrature;
pub mod radial;
pub mod scalar;
pub mod sequences;

pub use error::{Error, Result};
pub use scalar::Real;

#[cfg(feature = "extended")]
pub use extended::Ext;

/// Dimension constants in double precision.
pub type Dim = dims::Dimension<f64>;
/// Grid in double precision.
pub type Grid = radial::RadialGrid<f64>;
/// Profile in double precision.
pub type Profile = radial::RadialProfile<f64>;
