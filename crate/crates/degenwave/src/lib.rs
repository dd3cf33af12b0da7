//! Numerical toolkit for the 1D wave equation with an interior degeneracy of
//! the stiffness coefficient a(x), vanishing at x = 1 inside [c, d].
//!
//! The crate computes the explicit degeneracy and observability constants of
//! such weights, integrates the degenerate transmission problem with
//! conserved energy, verifies the boundary observability inequality
//! numerically, and synthesizes boundary null controls by the Hilbert
//! Uniqueness Method (HUM).

pub mod config;
pub mod error;
pub mod experiment;
pub mod hum;
pub mod mesh;
pub mod modal;
pub mod observability;
pub mod oracle;
pub mod solver;
pub mod tridiag;
pub mod weights;

pub use error::{Error, Result};
pub use mesh::{build_mesh, DiscreteOperators, Mesh};
pub use weights::{DegeneracyClass, DegeneracyReport, DomainSpec, WeightSpec};
