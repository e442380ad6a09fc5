//! SAV time integrators for df/dt = Q(f).
//!
//! The auxiliary scalar r tracks sqrt(H) with H = \int f log f dv + C; every
//! scheme here solves its two coupled update equations in closed form (the
//! f-equation is substituted into the r-equation, which becomes scalar) and
//! then reconstructs f. The positivity-preserving variants append either the
//! stabilized gain/loss update (Boltzmann only) or a pointwise KKT
//! projection, optionally with a scalar mass multiplier.

mod positivity;
mod steps;

pub use positivity::{kkt_project, solve_mass_multiplier};
pub use steps::{
    extrapolate_ab, extrapolate_positive, sav1_l_step, sav1_lm_step, sav1_pb_step, sav1_step,
    sav2_bdf_step, sav2_cn_step, sav2_l_step, sav2_lm_step,
};

use crate::collision::CollisionOperator;
use crate::error::SchemeError;
use crate::grid::{clamped_entropy, entropy, Density};

/// Which integrator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    Sav1,
    Sav2Bdf,
    Sav2Cn,
    Sav1Pb,
    Sav1L,
    Sav2L,
    Sav1Lm,
    Sav2Lm,
}

impl SchemeTag {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sav1" | "sav-1st" => Self::Sav1,
            "sav2" | "sav2-bdf" | "sav-2nd" => Self::Sav2Bdf,
            "sav2-cn" => Self::Sav2Cn,
            "sav1-pb" => Self::Sav1Pb,
            "sav1-l" => Self::Sav1L,
            "sav2-l" => Self::Sav2L,
            "sav1-lm" => Self::Sav1Lm,
            "sav2-lm" => Self::Sav2Lm,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sav1 => "sav1",
            Self::Sav2Bdf => "sav2",
            Self::Sav2Cn => "sav2-cn",
            Self::Sav1Pb => "sav1-pb",
            Self::Sav1L => "sav1-l",
            Self::Sav2L => "sav2-l",
            Self::Sav1Lm => "sav1-lm",
            Self::Sav2Lm => "sav2-lm",
        }
    }

    pub fn is_second_order(&self) -> bool {
        matches!(self, Self::Sav2Bdf | Self::Sav2Cn | Self::Sav2L | Self::Sav2Lm)
    }

    /// Uses the two-level modified entropy of the BDF2 dissipation law.
    pub fn has_two_level_entropy(&self) -> bool {
        matches!(self, Self::Sav2Bdf | Self::Sav2L | Self::Sav2Lm)
    }
}

/// Integrator parameters.
#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    pub scheme: SchemeTag,
    pub dt: f64,
    /// Entropy offset C keeping H = \int f log f + C positive.
    pub entropy_offset: f64,
    /// Positivity floor epsilon of the KKT projections; also the clamp used
    /// inside every log f evaluation.
    pub eps: f64,
    /// Stabilization constant of sav1-pb.
    pub beta: Option<f64>,
    pub secant_tol: f64,
    pub secant_max_iter: usize,
    /// Relative negativity threshold: a scheme that needs log f aborts once
    /// min f < -neg_tol * max |f|. Spectral evaluation leaves O(1e-5)
    /// relative negative dust in resolved tails, which the clamp absorbs;
    /// anything larger means the time step genuinely lost positivity.
    pub neg_tol: f64,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeTag, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            entropy_offset: 10.0,
            eps: 1e-16,
            beta: None,
            secant_tol: 1e-13,
            secant_max_iter: 100,
            neg_tol: 1e-4,
        }
    }

    pub(crate) fn log_floor(&self) -> f64 {
        self.eps.max(1e-300)
    }
}

/// Integrator state: current level plus one history level.
#[derive(Debug, Clone)]
pub struct SavState {
    pub f: Density,
    pub r: f64,
    /// Previous level (f^{n-1}, r^{n-1}); populated after the first step.
    pub prev: Option<(Density, f64)>,
    pub n: u64,
    pub t: f64,
}

/// Which update produced a step; fixes the modified-entropy formula and the
/// dissipation identity the step satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    FirstOrder,
    Bdf2,
    CrankNicolson,
    /// First order with the beta-stabilized denominator 1 + beta dt.
    Stabilized,
}

/// Per-step diagnostics.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: u64,
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 2],
    pub energy: f64,
    /// Actual entropy H(f^{n+1}) (clamped log).
    pub entropy: f64,
    /// Scheme-specific modified entropy after the step.
    pub modified_entropy: f64,
    pub r: f64,
    pub min_f: f64,
    /// Entropy production D = \int Q log f dv used by the r-update.
    pub entropy_production: f64,
    /// The entropy value H^n or H^{n+1,*} the r-update divided by.
    pub h_star: f64,
    pub xi: f64,
    pub lambda_sum: f64,
    pub clipped: u64,
    pub corrected: bool,
    /// sav1-pb advisory: beta fell below r^{n+1}/sqrt(H^n) * max Q^-.
    pub beta_warning: bool,
    pub kind: StepKind,
}

/// r^0 = sqrt(H(f0) + C); rejects negative input or non-positive H.
pub fn init_state(f0: &Density, cfg: &SchemeConfig, t0: f64) -> Result<SavState, SchemeError> {
    let h = entropy(f0, cfg.entropy_offset, cfg.log_floor())?;
    if !(h > 0.0) {
        return Err(SchemeError::NonPositiveModifiedEntropy(h));
    }
    Ok(SavState {
        f: f0.clone(),
        r: h.sqrt(),
        prev: None,
        n: 0,
        t: t0,
    })
}

/// Modified entropy of a state under a scheme tag: (r^n)^2 for the
/// first-order and Crank-Nicolson laws, the two-level BDF2 combination
/// otherwise.
pub fn modified_entropy(state: &SavState, tag: SchemeTag) -> Result<f64, SchemeError> {
    if tag.has_two_level_entropy() {
        let (_, r_prev) = state.prev.as_ref().ok_or(SchemeError::MissingHistory)?;
        Ok(two_level_modified_entropy(state.r, *r_prev))
    } else {
        Ok(state.r * state.r)
    }
}

pub(crate) fn two_level_modified_entropy(r: f64, r_prev: f64) -> f64 {
    let lead = 2.0 * r - r_prev;
    0.5 * r * r + 0.5 * lead * lead
}

/// One step of the configured scheme. Second-order schemes without history
/// start themselves with the matching first-order scheme.
pub fn step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    match cfg.scheme {
        SchemeTag::Sav1 => sav1_step(state, op, cfg),
        SchemeTag::Sav1Pb => sav1_pb_step(state, op, cfg),
        SchemeTag::Sav1L => sav1_l_step(state, op, cfg),
        SchemeTag::Sav1Lm => sav1_lm_step(state, op, cfg),
        SchemeTag::Sav2Bdf => match state.prev {
            None => sav1_step(state, op, cfg),
            Some(_) => sav2_bdf_step(state, op, cfg),
        },
        SchemeTag::Sav2Cn => match state.prev {
            None => sav1_step(state, op, cfg),
            Some(_) => sav2_cn_step(state, op, cfg),
        },
        SchemeTag::Sav2L => match state.prev {
            None => sav1_l_step(state, op, cfg),
            Some(_) => sav2_l_step(state, op, cfg),
        },
        SchemeTag::Sav2Lm => match state.prev {
            None => sav1_lm_step(state, op, cfg),
            Some(_) => sav2_lm_step(state, op, cfg),
        },
    }
}

/// Diagnostics shared by every step: raw moments have no positivity
/// precondition so they stay available on blow-up trajectories.
pub(crate) fn raw_moments(f: &Density) -> (f64, [f64; 2], f64) {
    let grid = f.grid();
    let n = grid.modes();
    let mut mass = crate::grid::KahanAcc::default();
    let mut mx = crate::grid::KahanAcc::default();
    let mut my = crate::grid::KahanAcc::default();
    let mut en = crate::grid::KahanAcc::default();
    let v = f.values();
    for ix in 0..n {
        let vx = grid.node(ix);
        for iy in 0..n {
            let vy = grid.node(iy);
            let fj = v[[ix, iy]];
            mass.add(fj);
            mx.add(fj * vx);
            my.add(fj * vy);
            en.add(fj * (vx * vx + vy * vy));
        }
    }
    let dv = grid.cell_area();
    (
        dv * mass.value(),
        [dv * mx.value(), dv * my.value()],
        dv * en.value(),
    )
}

pub(crate) struct CorrectionData {
    pub xi: f64,
    pub lambda_sum: f64,
    pub clipped: u64,
    pub corrected: bool,
}

impl CorrectionData {
    pub fn none() -> Self {
        Self {
            xi: 0.0,
            lambda_sum: 0.0,
            clipped: 0,
            corrected: false,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_step(
    old: &SavState,
    f_new: Density,
    r_new: f64,
    kind: StepKind,
    d: f64,
    h_star: f64,
    correction: CorrectionData,
    beta_warning: bool,
    cfg: &SchemeConfig,
) -> (SavState, StepReport) {
    let (mass, momentum, energy) = raw_moments(&f_new);
    let actual_entropy = clamped_entropy(&f_new, cfg.entropy_offset, cfg.log_floor());
    let modified = match kind {
        StepKind::Bdf2 => two_level_modified_entropy(r_new, old.r),
        _ => r_new * r_new,
    };
    let report = StepReport {
        step: old.n + 1,
        t: old.t + cfg.dt,
        mass,
        momentum,
        energy,
        entropy: actual_entropy,
        modified_entropy: modified,
        r: r_new,
        min_f: f_new.min(),
        entropy_production: d,
        h_star,
        xi: correction.xi,
        lambda_sum: correction.lambda_sum,
        clipped: correction.clipped,
        corrected: correction.corrected,
        beta_warning,
        kind,
    };
    let state = SavState {
        prev: Some((old.f.clone(), old.r)),
        f: f_new,
        r: r_new,
        n: old.n + 1,
        t: old.t + cfg.dt,
    };
    (state, report)
}
