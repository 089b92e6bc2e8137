//! Numerical laboratory for the singularly perturbed Davey-Stewartson II
//! equation on a periodic rectangle.
//!
//! ```text
//! i q_t = Υq + 2[Δ⁻¹Υ|q|² + ⟨|q|²⟩ − ω²] q + iε(Δq − αq + β)
//! ```
//!
//! The crate reconstructs the explicit homoclinic orbit produced by a twice
//! iterated Bäcklund-Darboux transformation, evaluates the Melnikov integrals
//! along it, and checks every closed form against spectral oracles.
//!
//! * [`model`]: parameters, saddle, linear spectrum, (J, θ, f) coordinates.
//! * [`spectral`]: grids, fields and Fourier multipliers.
//! * [`darboux`]: the orbit and its eigenfunctions.
//! * [`melnikov`]: Melnikov integrals and the parameter conditions.
//! * [`evolve`]: ETDRK4 / split-step integrator used as an oracle.
//! * [`normalform`]: the homological system for the quadratic normal form.

// `!(x > 0.0)` is the idiom used to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darboux;
pub mod evolve;
pub mod melnikov;
pub mod model;
pub mod normalform;
pub mod spectral;

mod error;
mod sum;

pub use error::{Error, ErrorClass, Result};
pub use num_complex::Complex64;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
