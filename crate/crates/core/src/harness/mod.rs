//! Experiment runners: time evolution, convergence sweeps and the beta
//! study, with CSV output and a companion plot script.

mod config;
mod output;

pub use config::{Equation, ErrorReference, InitialCondition, RunConfig};
pub use output::{
    write_beta_csv, write_converge_csv, write_evolve_csv, write_field_csv, write_plot_script,
    BETA_HEADER, CONVERGE_HEADER, EVOLVE_HEADER,
};

use crate::collision::{
    BoltzmannKernel, BoltzmannModes, CollisionOperator, KernelModes, LandauKernel, LandauModes,
};
use crate::error::HarnessError;
use crate::grid::{clamped_entropy, Density};
use crate::reference::{bi_maxwellian, bkw, max_norm_error};
use crate::schemes::{self, SavState, SchemeTag, StepKind, StepReport};

/// Machine-readable abort record of a run that stopped early.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub step: u64,
    pub t: f64,
    pub kind: String,
}

#[derive(Debug)]
pub struct EvolveOutcome {
    /// Cadence-filtered reports, beginning with the initial-state row.
    pub reports: Vec<StepReport>,
    /// Final state (last successfully computed).
    pub state: SavState,
    pub failure: Option<RunFailure>,
}

impl EvolveOutcome {
    pub fn final_density(&self) -> &Density {
        &self.state.f
    }
}

/// Precompute the operator tables, honoring the modes-cache path: an
/// existing cache file is loaded (its metadata must match), a missing one is
/// written after precomputation.
pub fn build_modes(cfg: &RunConfig) -> Result<KernelModes, HarnessError> {
    let grid = cfg.grid()?;
    match cfg.equation {
        Equation::Boltzmann => {
            let kernel = BoltzmannKernel {
                constant: cfg.kernel_strength,
                gamma: cfg.gamma,
                angular: 1.0,
                radius: cfg.radius,
            };
            let (m_r, m_th) = cfg.quadrature_orders();
            if let Some(path) = &cfg.modes_cache {
                if path.exists() {
                    let modes = BoltzmannModes::load(path, grid, kernel, m_r, m_th)
                        .map_err(crate::error::CollisionError::from)?;
                    return Ok(KernelModes::Boltzmann(modes));
                }
            }
            let modes = BoltzmannModes::precompute(grid, kernel, m_r, m_th)?;
            if let Some(path) = &cfg.modes_cache {
                modes.save(path).map_err(crate::error::CollisionError::from)?;
            }
            Ok(KernelModes::Boltzmann(modes))
        }
        Equation::Landau => {
            let kernel = LandauKernel {
                constant: cfg.kernel_strength,
                gamma: cfg.gamma,
            };
            if let Some(path) = &cfg.modes_cache {
                if path.exists() {
                    let modes = LandauModes::load(path, grid, kernel)
                        .map_err(crate::error::CollisionError::from)?;
                    return Ok(KernelModes::Landau(modes));
                }
            }
            let modes = LandauModes::precompute(grid, kernel)?;
            if let Some(path) = &cfg.modes_cache {
                modes.save(path).map_err(crate::error::CollisionError::from)?;
            }
            Ok(KernelModes::Landau(modes))
        }
    }
}

pub fn initial_density(cfg: &RunConfig) -> Result<Density, HarnessError> {
    let grid = cfg.grid()?;
    Ok(match cfg.init {
        InitialCondition::Bkw => bkw(grid, cfg.t0)?,
        InitialCondition::BiMaxwellian(p) => bi_maxwellian(grid, p)?,
    })
}

fn initial_report(state: &SavState, cfg: &RunConfig) -> StepReport {
    let (mass, momentum, energy) = schemes::raw_moments(&state.f);
    let h = clamped_entropy(&state.f, cfg.entropy_offset, cfg.eps.max(1e-300));
    StepReport {
        step: 0,
        t: state.t,
        mass,
        momentum,
        energy,
        entropy: h,
        modified_entropy: state.r * state.r,
        r: state.r,
        min_f: state.f.min(),
        entropy_production: 0.0,
        h_star: h,
        xi: 0.0,
        lambda_sum: 0.0,
        clipped: 0,
        corrected: false,
        beta_warning: false,
        kind: StepKind::FirstOrder,
    }
}

/// Fixed-step evolution from t0 to t_end. A scheme abort terminates the run
/// early and is recorded, not swallowed.
pub fn run_evolve(cfg: &RunConfig, op: &dyn CollisionOperator) -> Result<EvolveOutcome, HarnessError> {
    let f0 = initial_density(cfg)?;
    let scheme_cfg = cfg.scheme_config();
    let mut state = schemes::init_state(&f0, &scheme_cfg, cfg.t0).map_err(|e| {
        HarnessError::Aborted {
            step: 0,
            t: cfg.t0,
            source: e,
        }
    })?;
    let cadence = cfg.effective_cadence() as u64;
    let steps = cfg.steps();
    let mut reports = Vec::with_capacity((steps / cadence + 2) as usize);
    reports.push(initial_report(&state, cfg));
    let mut failure = None;
    for k in 0..steps {
        match schemes::step(&state, op, &scheme_cfg) {
            Ok((next, report)) => {
                state = next;
                if (k + 1) % cadence == 0 || k + 1 == steps {
                    reports.push(report);
                }
            }
            Err(e) => {
                failure = Some(RunFailure {
                    step: k + 1,
                    t: state.t + cfg.dt,
                    kind: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(EvolveOutcome {
        reports,
        state,
        failure,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug)]
pub struct ConvergenceOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<(f64, RunFailure)>,
    /// The self-refined reference run itself aborted; no errors can be
    /// measured in that case.
    pub reference_failure: Option<RunFailure>,
    /// Least-squares slope of log error vs log dt over the successful rows;
    /// present when at least three rows succeeded.
    pub slope: Option<f64>,
}

fn lstsq_slope(rows: &[ConvergenceRow]) -> Option<f64> {
    if rows.len() < 3 {
        return None;
    }
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for row in rows {
        let x = row.dt.ln();
        let y = row.error.max(1e-300).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Convergence study: one evolve per dt to the common t_end, errors in the
/// max norm against the configured reference.
pub fn run_converge(
    cfg: &RunConfig,
    dts: &[f64],
    op: &dyn CollisionOperator,
) -> Result<ConvergenceOutcome, HarnessError> {
    if dts.len() < 3 {
        return Err(HarnessError::TooFewRows {
            needed: 3,
            got: dts.len(),
        });
    }
    let reference_field = match cfg.reference {
        ErrorReference::Analytic => None,
        ErrorReference::SelfRefined { factor } => {
            let dt_min = dts.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut ref_cfg = cfg.clone();
            ref_cfg.dt = dt_min / factor.max(2) as f64;
            let outcome = run_evolve(&ref_cfg, op)?;
            if let Some(fail) = outcome.failure {
                return Ok(ConvergenceOutcome {
                    rows: Vec::new(),
                    failures: dts.iter().map(|&dt| (dt, fail.clone())).collect(),
                    reference_failure: Some(fail),
                    slope: None,
                });
            }
            Some(outcome.state.f)
        }
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &dt in dts {
        let mut row_cfg = cfg.clone();
        row_cfg.dt = dt;
        let outcome = run_evolve(&row_cfg, op)?;
        match outcome.failure {
            Some(fail) => failures.push((dt, fail)),
            None => {
                let t_final = outcome.state.t;
                let err = match &reference_field {
                    Some(reference) => max_norm_error(&outcome.state.f, reference)?,
                    None => {
                        let exact = bkw(outcome.state.f.grid(), t_final)?;
                        max_norm_error(&outcome.state.f, &exact)?
                    }
                };
                rows.push(ConvergenceRow { dt, error: err });
            }
        }
    }
    let slope = lstsq_slope(&rows);
    Ok(ConvergenceOutcome {
        rows,
        failures,
        reference_failure: None,
        slope,
    })
}

/// One beta's worth of the beta study.
#[derive(Debug)]
pub struct BetaRow {
    pub beta: f64,
    pub convergence: ConvergenceOutcome,
    /// Max-norm error against the analytic solution at the smallest dt.
    pub error_vs_analytic: Option<f64>,
    /// The per-step advisory bound was violated at least once.
    pub warned: bool,
    pub entropy_run: EvolveOutcome,
}

/// sav1-pb study over a list of stabilization constants.
pub fn run_beta_study(
    cfg: &RunConfig,
    betas: &[f64],
    dts: &[f64],
    op: &dyn CollisionOperator,
) -> Result<Vec<BetaRow>, HarnessError> {
    if cfg.scheme != SchemeTag::Sav1Pb || cfg.equation != Equation::Boltzmann {
        return Err(HarnessError::Config(
            "beta study requires equation = boltzmann, scheme = sav1-pb".into(),
        ));
    }
    let dt_min = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    for &beta in betas {
        let mut b_cfg = cfg.clone();
        b_cfg.beta = Some(beta);
        let convergence = run_converge(&b_cfg, dts, op)?;

        let mut e_cfg = b_cfg.clone();
        e_cfg.dt = dt_min;
        let entropy_run = run_evolve(&e_cfg, op)?;
        let warned = entropy_run.reports.iter().any(|r| r.beta_warning);
        let error_vs_analytic = if entropy_run.failure.is_none() {
            let exact = bkw(entropy_run.state.f.grid(), entropy_run.state.t)?;
            Some(max_norm_error(&entropy_run.state.f, &exact)?)
        } else {
            None
        };
        out.push(BetaRow {
            beta,
            convergence,
            error_vs_analytic,
            warned,
            entropy_run,
        });
    }
    Ok(out)
}
