//! Isogeometric boundary elements for acoustic scattering by random obstacles.

pub mod bayes;
pub mod bem;
pub mod container;
pub mod error;
pub mod geometry;
pub mod interface;
pub mod mie;
pub mod mlq;
pub mod pipeline;
pub mod quadrature;
pub mod randomfield;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases of the generic geometry and quadrature types.
pub type KnotVector = geometry::KnotVector<f64>;
pub type NurbsPatch = geometry::NurbsPatch<f64>;
pub type MultipatchSurface = geometry::MultipatchSurface<f64>;
pub type ElementMesh = geometry::ElementMesh<f64>;
pub type QuadratureRule = quadrature::QuadratureRule<f64>;
pub type AnisotropyWeights = quadrature::AnisotropyWeights<f64>;
