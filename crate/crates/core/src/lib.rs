//! Neumann domains of Laplacian eigenfunctions on the flat torus, and the
//! numerical machinery around the star-like domains of separable
//! eigenfunctions.
//!
//! The crate is organised bottom-up:
//!
//! * [`wavefield`] builds torus eigenfunctions with exact derivatives;
//! * [`morse`] finds and classifies their critical points;
//! * [`tracer`] integrates Neumann lines and assembles Neumann domains;
//! * [`stardomain`] collects the closed-form facts about Ω_{a,b};
//! * [`spectral`] solves the mixed-boundary eigenproblems;
//! * [`rearrange`] implements the sector rearrangement;
//! * [`isoperimetric`] treats the isoperimetric and Cheeger functionals.

pub mod error;
pub mod export;
pub mod isoperimetric;
pub mod morse;
mod par;
pub mod quad;
pub mod rearrange;
pub mod special;
pub mod spectral;
pub mod stardomain;
pub mod tracer;
pub mod wavefield;

pub use error::{Error, Result};
