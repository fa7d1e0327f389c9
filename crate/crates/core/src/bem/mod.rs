//! Galerkin boundary elements for the sound-soft Helmholtz problem with the
//! combined field equation `(1/2 + K' - i eta V) psi = du_inc/dn - i eta u_inc`
//! for the Neumann trace `psi` of the total field.

pub mod assemble;
pub mod kernel;
pub mod singular;
pub mod solve;
pub mod space;

pub use assemble::{assemble_cfie, assemble_rhs, far_order, BemSystem, QuadSettings};
pub use kernel::{adjoint_dlp_kernel, dlp_kernel, helmholtz_kernel, incident_trace, WaveContext};
pub use solve::{
    eval_potential, eval_potential_normal_derivative, solve_density, solve_scattering, DensitySolution, Evaluated,
    PotentialEvaluator, SOLVER_TOLERANCE,
};
pub use space::{BoundarySpace, Cell, CellPoint};
