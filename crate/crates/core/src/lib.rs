//! Reduced-order models of geometrically nonlinear structures by direct
//! normal form.
//!
//! The library builds the nonlinear mapping tensors of an invariant-manifold
//! reduction straight from the mass/stiffness operators and nonlinear force
//! evaluations of a finite-element model, assembles the reduced dynamics in
//! normal coordinates, and validates the resulting models against full-order
//! harmonic-balance continuation.
//!
//! Pipeline: [`model`] -> [`eigen`] -> [`step`] -> [`dnf`] -> [`rom`] ->
//! [`hbm`], with [`oracle`] providing independent modal-basis cross-checks.

pub mod dnf;
pub mod eigen;
pub mod error;
pub mod hbm;
pub mod model;
pub mod oracle;
pub mod rom;
pub mod step;

pub use error::{Error, Result};
