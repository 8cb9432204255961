//! Empirical Fréchet means on model Riemannian manifolds, the limit-theorem
//! functionals that govern their fluctuations, and Monte Carlo experiments
//! that measure central approximation with a truncated Wasserstein distance.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

/// Library version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod frechet;
pub mod gaussian_transport;
pub mod linalg;
pub mod manifold;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use manifold::{Family, ManifoldKind, Point, TangentFrame, TangentVector};
pub use scalar::Scalar;

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type Manifold64 = ManifoldKind<f64>;
pub type Manifold32 = ManifoldKind<f32>;
pub type Tangent64 = TangentVector<f64>;
pub type Sample64 = frechet::Sample<f64>;
pub type Matrix64 = Matrix<f64>;
