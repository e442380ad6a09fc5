//! Spatially homogeneous kinetic equations in 2D velocity space: Fourier
//! spectral Boltzmann and Landau collision operators together with a family
//! of entropy-dissipative SAV time integrators, including positivity- and
//! mass-preserving variants.

pub mod collision;
pub mod error;
pub mod grid;
pub mod harness;
pub mod reference;
pub mod schemes;
pub mod spectral;

pub use error::{CacheError, CollisionError, GridError, HarnessError, SchemeError};
pub use grid::{Density, MomentSet, VelocityGrid};
pub use schemes::{SavState, SchemeConfig, SchemeTag, StepReport};
