//! Numerical toolkit for the one-dimensional Muskat equation
//! `∂ₜf = -Λf + T(f)f` on a periodic torus, with the logarithmic Sobolev
//! weights, norm equivalences and functional inequalities used by its
//! critical-regularity theory.

pub mod error;
pub mod lab;
pub mod muskat;
pub mod norms;
pub mod quad;
pub mod real;
pub mod solver;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use real::Real;
pub use spectral::{Grid, GridFunction, Symbol};

/// Double-precision field, the working type of every quantitative module.
pub type Field = GridFunction<f64>;
/// Single-precision field for exploratory spectral work.
pub type Field32 = GridFunction<f32>;
