//! Collision operators on the periodic velocity grid: the Boltzmann operator
//! with its gain/loss split (precomputed spectral weight tables) and the
//! Landau operator (FFT convolutions with a periodized matrix kernel).

mod boltzmann;
mod cache;
mod landau;
pub(crate) mod quadrature;

pub use boltzmann::{default_quadrature_orders, BoltzmannKernel, BoltzmannModes};
pub use landau::{LandauKernel, LandauModes};

use crate::error::CollisionError;
use crate::grid::{Density, VelocityGrid};

/// A bilinear collision operator Q(f) evaluated on densities of one grid.
pub trait CollisionOperator: Send + Sync {
    fn grid(&self) -> VelocityGrid;

    fn apply(&self, f: &Density) -> Result<Density, CollisionError>;

    /// Gain/loss decomposition Q(f) = gain(f) - loss_factor(f) * f, when the
    /// operator has one (Boltzmann does, Landau does not).
    fn split(&self) -> Option<&dyn SplitCollisionOperator> {
        None
    }
}

/// The positive decomposition used by the stabilized Boltzmann scheme.
pub trait SplitCollisionOperator: CollisionOperator {
    fn gain(&self, f: &Density) -> Result<Density, CollisionError>;

    fn loss_factor(&self, f: &Density) -> Result<Density, CollisionError>;
}

/// Precomputed spectral tables for either operator, as stored in mode caches.
pub enum KernelModes {
    Boltzmann(BoltzmannModes),
    Landau(LandauModes),
}

impl KernelModes {
    pub fn operator(&self) -> &dyn CollisionOperator {
        match self {
            KernelModes::Boltzmann(m) => m,
            KernelModes::Landau(m) => m,
        }
    }

    pub fn grid(&self) -> VelocityGrid {
        self.operator().grid()
    }
}

pub(crate) fn check_grid(op_grid: VelocityGrid, f: &Density) -> Result<(), CollisionError> {
    if op_grid == f.grid() {
        Ok(())
    } else {
        Err(crate::error::GridError::GridMismatch.into())
    }
}
