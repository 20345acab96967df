//! Horizontal geometry of hypersurfaces in vertically rigid sub-Riemannian manifolds.
//!
//! The crate computes horizontal normals, the horizontal second fundamental form,
//! perimeter and volume integrals, first and second variations of perimeter, and
//! stability spectra, with a closed-form reference implementation of the ℍ² bubble set.

pub mod bubble;
pub mod charset;
pub mod error;
pub mod expr;
pub mod field;
pub mod geom;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod quadrature;
pub mod surface;
pub mod variation;
pub mod verify;

pub use error::{Result, SrmError};
pub use manifold::{builtin_heisenberg, builtin_rototranslation, ManifoldModel};

