//! Synthesis of phase-field potentials for prescribed branched-transport
//! costs: forward maps from a potential to its induced cost, the inverse
//! (deconvolution) construction, optimal 1D profiles, and a 2D network
//! relaxation.

pub mod costs;
pub mod error;
pub mod forward;
pub(crate) mod infjson;
pub mod inverse;
pub mod monotone;
pub mod network2d;
pub mod phase_costs;
pub mod profiles;
pub mod quad;

pub use error::{Error, Result};
