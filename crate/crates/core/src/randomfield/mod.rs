//! Surface covariance kernels, spline spaces and the Karhunen-Loeve model of
//! random surface deformations.

pub mod cholesky;
pub mod deform;
pub mod kernel;
pub mod kl;
pub mod mass;
pub mod space;

pub use cholesky::{pivoted_cholesky, pivoted_cholesky_with, LowRankFactor, ShapeCovariance};
pub use deform::DeformationModel;
pub use kernel::{gaussian_kernel, MatrixKernel};
pub use kl::{compute_kl, reduced_eig, truncate, truncation_rank, Eigenpairs, KlExpansion, KlSettings};
pub use mass::{assemble_mass, CsrMatrix};
pub use space::SplineSpace;
