//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("number of modes per dimension must be even and >= 8, got {0}")]
    InvalidModes(usize),
    #[error("domain half-width must be positive, got {0}")]
    InvalidHalfWidth(f64),
    #[error("field shape {found:?} does not match grid {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("density has non-positive mass {0}")]
    NonPositiveMass(f64),
    #[error("density entry {min} below -{floor} (negative density)")]
    NegativeDensity { min: f64, floor: f64 },
}

#[derive(Debug, Error)]
pub enum CollisionError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("quadrature orders must be >= 8, got M_r={m_r}, M_theta={m_th}")]
    QuadratureTooLow { m_r: usize, m_th: usize },
    #[error("truncation radius {radius} outside (0, 2L] with L={half_width}")]
    InvalidRadius { radius: f64, half_width: f64 },
    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a mode-cache file (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    BadVersion(u32),
    #[error("cache metadata mismatch: {0}")]
    MetadataMismatch(String),
    #[error("cache file corrupt: {0}")]
    CorruptFile(String),
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error("density min {min} below negativity threshold {threshold} (log f undefined)")]
    NonPositiveDensity { min: f64, threshold: f64 },
    #[error("modified entropy H + C = {0} is not positive; increase the offset C")]
    NonPositiveModifiedEntropy(f64),
    #[error("r-update denominator {0} <= 0 (entropy production too large for this step size)")]
    Degenerate(f64),
    #[error("second-order scheme invoked without history")]
    MissingHistory,
    #[error("scheme requires an operator with a gain/loss split")]
    OperatorWithoutSplit,
    #[error("mass multiplier iteration did not converge after {iterations} iterations (|F|={residual})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("BKW profile is negative for K={k} <= 1/2 (requested t={t})")]
    NegativeRegion { t: f64, k: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("run aborted at step {step} (t={t}): {source}")]
    Aborted {
        step: u64,
        t: f64,
        source: SchemeError,
    },
    #[error("fewer than {needed} successful rows ({got}) for a slope fit")]
    TooFewRows { needed: usize, got: usize },
}
