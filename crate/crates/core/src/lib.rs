//! Continuous wavelet transforms, Besov norms and coorbit sampling on symmetric cones.

pub mod besov;
pub mod cone;
pub mod error;
pub mod frames;
pub mod grid;
pub mod io;
pub mod group;
pub mod mat;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod selftest;
pub mod scalar;
pub mod smooth;
pub mod transform;
pub mod wavelet;

pub use cone::{ConeKind, ConeModel, HElement};
pub use error::{Error, Result};
pub use scalar::Real;

pub type ConeModel64 = ConeModel<f64>;
pub type ConeModel32 = ConeModel<f32>;
