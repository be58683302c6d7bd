//! Explicit stationary-disc machinery for nondegenerate model quadrics:
//! the quadratic matrix equation, disc lifts, degeneracy and minimality
//! tests, and the 1-jet Jacobian criterion.

pub mod discs;
pub mod error;
pub mod jets;
pub mod linalg;
pub mod matrix_eq;
pub mod quadric;
pub mod sample;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, Definiteness, HermitianMatrix, C64};
pub use quadric::QuadricModel;
