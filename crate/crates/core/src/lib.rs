//! Continuous P1 finite elements for the scalar conservation law
//! `u_t + div(beta u^(l+1)) = f` on the unit square with homogeneous
//! Dirichlet data.
//!
//! Three semi-discretizations are provided:
//!
//! - `Standard`: consistent mass matrix, plain Galerkin convection.
//! - `LowOrder`: lumped mass plus the artificial diffusion operator `D`.
//! - `Afc`: the low-order operator with limited antidiffusive fluxes added
//!   back (algebraic flux correction with a linearity-preserving LED limiter).
//!
//! All of them are advanced in time with the two-stage SSP Runge-Kutta method.
//! The `experiments` module drives the discrete maximum principle check and the
//! temporal/spatial convergence studies exposed by the `afc` binary.

pub mod error;
pub mod experiments;
pub mod fem;
pub mod mesh;
pub mod problems;
pub mod stabilization;
pub mod time_integration;

pub use error::{Error, Result};
pub use fem::{FemSpace, NodalField, QuadratureRule, SparseMatrix};
pub use mesh::Mesh;
pub use problems::{FluxField, ManufacturedCase};
pub use stabilization::{DiffusionOperator, FluxSet, LimiterFactors};
pub use time_integration::{SchemeConfig, Solver, StepReport, StepRule, Variant};
