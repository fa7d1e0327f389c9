//! Parameter-domain quadrature on `[-1, 1]^M` for the uniform probability measure.

pub mod gauss;
pub mod halton;
pub mod rule;
pub mod sparse;

pub use gauss::{gauss_legendre, gauss_legendre_unit};
pub use halton::{halton_rule, halton_rule_offset};
pub use rule::{tensor_gauss, QuadratureRule, RuleKind};
pub use sparse::{sparse_grid, AnisotropyWeights};
