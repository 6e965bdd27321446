//! Upwind finite-difference schemes for tumor growth models of porous-medium
//! type, `dn/dt - div(n grad p) = n G`, `p = kappa n^gamma`.
//!
//! The crate covers the semi-discrete and fully implicit schemes in 1D,
//! nutrient-coupled and two-species variants, a 2D implicit scheme, closed-form
//! reference solutions, diagnostics, and the configuration/output layer used
//! by the `simulate` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod diagnostics;
pub mod error;
pub mod growth;
pub mod implicit1d;
pub mod io;
pub mod law;
pub mod linalg;
pub mod mesh;
pub mod nutrient;
pub mod par;
pub mod scheme2d;
pub mod semidiscrete;
pub mod state;
pub mod stencil;
pub mod twospecies;

pub use error::{Error, Result};
pub use growth::{GrowthModel, GrowthTable, Rates};
pub use law::{pressure_from_density, PressureLaw};
pub use mesh::{Field, Field2D, Grid1D, Grid2D};
pub use par::Execution;
pub use state::SimState;
