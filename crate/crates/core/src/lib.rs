//! Numerical toolkit for KMS states of AF algebras presented by Bratteli
//! diagrams with real-valued potentials.
//!
//! The crate is organised bottom-up:
//!
//! * [`diagram`] holds leveled diagrams with integer arrow counts and potentials.
//! * [`spectral`] builds β-dependent transfer matrices and the finite-level
//!   KMS bookkeeping (matrix-unit bases, states, defects).
//! * [`cone`] approximates the inverse-limit cones `lim← A^(j)(β)` with the
//!   Hilbert projective metric and clusters extreme rays.
//! * [`glue`] glues seed diagrams so that each seed is switched on exactly on
//!   a prescribed interval of inverse temperatures.
//! * [`uhf`] moves a glued system onto a UHF diagram and realizes the
//!   resulting action as a tensor product of two one-sided factors.
//! * [`cli`] drives sweeps and demos from the `kmsforge` binary.

pub mod cli;
pub mod cone;
pub mod diagram;
pub mod error;
pub mod glue;
pub mod numeric;
pub mod spec;
pub mod spectral;
pub mod uhf;

pub use error::{Error, Result};
