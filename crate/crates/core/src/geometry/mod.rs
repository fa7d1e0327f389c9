//! B-splines, NURBS patches and multipatch surfaces.

pub mod builtin;
pub mod io;
pub mod knots;
pub mod mesh;
pub mod multipatch;
pub mod patch;

pub use knots::{common_refinement, KnotVector};
pub use mesh::{integration_cells, Element, ElementMesh};
pub use multipatch::{validate_multipatch, Edge, Glue, MultipatchSurface};
pub use patch::{cross3, dot3, interpolate_tensor, interpolate_tensor_dyn, norm3, sub3, NurbsPatch, PatchJet, Point3};
