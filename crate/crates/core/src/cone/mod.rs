//! Finite-depth approximations of the inverse-limit cone `lim← A^(j)(β)`.
//!
//! Everything here runs in the gauge `ψ̂^j_w = ρ_j(w) ψ^j_w` with
//! `ρ_j(w) = (A^(1)⋯A^(j))_{v_0,w}`. In that gauge every transfer matrix is
//! column-stochastic, `ψ̂^0 = ψ^0` is the mass, and a cone element of mass 1
//! has probability vectors on every level. The Hilbert projective metric and
//! the cross-ratio `φ` are unchanged by diagonal rescaling, so all geometric
//! statements transfer verbatim while path counts of any size stay finite.

mod approx;
mod nnls;
mod system;
mod vector;

pub use approx::{
    contraction_check, contraction_check_system, extreme_rays, generators_at, hilbert_diameter,
    hilbert_distance, nesting_residual, stable_extreme_rays, ConeApprox, ContractionReport,
    ContractionStep, RayClusters, DEFAULT_DELTA, DEFAULT_THETA, RATIO_SLACK,
};
pub use nnls::nnls;
pub use system::GaugedSystem;
pub use vector::ConeVector;
