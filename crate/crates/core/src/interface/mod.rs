//! Cauchy data of scattered fields on a fixed artificial interface enclosing
//! every admissible scatterer, and exterior evaluation of means and
//! correlations from such data.

pub mod grid;
pub mod moments;
mod snapshot;

pub use grid::{
    cgl_nodes, eval_from_interface, lagrange, sample_cauchy, sample_cauchy_with, InterfaceCauchyData, InterfaceGrid,
};
pub use moments::{correlation_at, variance_at, SecondMomentData};
