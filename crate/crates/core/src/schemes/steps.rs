//! The SAV update formulas.

use ndarray::Array2;

use crate::collision::CollisionOperator;
use crate::error::SchemeError;
use crate::grid::{integrate_product, Density};
use crate::schemes::positivity::{kkt_project, shift_density, solve_mass_multiplier};
use crate::schemes::{finish_step, CorrectionData, SavState, SchemeConfig, StepKind, StepReport};

/// log f and the entropy H = \int f log f + C of a field that is about to be
/// differentiated through the SAV equations, with the negativity guard.
pub(crate) struct LogEntropy {
    pub log_f: Array2<f64>,
    pub h: f64,
}

pub(crate) fn log_entropy(f: &Density, cfg: &SchemeConfig) -> Result<LogEntropy, SchemeError> {
    let min = f.min();
    let threshold = cfg.neg_tol * f.max_abs();
    if min < -threshold {
        return Err(SchemeError::NonPositiveDensity { min, threshold });
    }
    let floor = cfg.log_floor();
    let log_f = f.values().mapv(|x| x.max(floor).ln());
    let h = integrate_product(&f.grid(), f.values(), &log_f) + cfg.entropy_offset;
    if !(h > 0.0) {
        return Err(SchemeError::NonPositiveModifiedEntropy(h));
    }
    Ok(LogEntropy { log_f, h })
}

/// Output of a first- or second-order prediction, before any positivity
/// correction.
pub(crate) struct Prediction {
    pub f_tilde: Density,
    pub r_new: f64,
    pub d: f64,
    pub h_star: f64,
    pub kind: StepKind,
}

/// SAV-1st prediction:
///   r^{n+1} = r^n / (1 - dt D / 2H),   f~ = f^n + dt (r^{n+1}/sqrt(H)) Q(f^n)
/// with H = H(f^n), D = \int Q(f^n) log f^n dv.
pub(crate) fn sav1_predict(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<Prediction, SchemeError> {
    let le = log_entropy(&state.f, cfg)?;
    let q = op.apply(&state.f)?;
    let d = integrate_product(&state.f.grid(), q.values(), &le.log_f);
    let dt = cfg.dt;
    let den = 1.0 - dt * d / (2.0 * le.h);
    if !(den > 0.0) {
        return Err(SchemeError::Degenerate(den));
    }
    let r_new = state.r / den;
    let s = dt * (r_new / le.h.sqrt());
    let mut f_tilde = state.f.clone();
    f_tilde
        .values_mut()
        .zip_mut_with(q.values(), |fj, &qj| *fj += s * qj);
    Ok(Prediction {
        f_tilde,
        r_new,
        d,
        h_star: le.h,
        kind: StepKind::FirstOrder,
    })
}

/// Adams-Bashforth extrapolation 2 f^n - f^{n-1}.
pub fn extrapolate_ab(f: &Density, f_prev: &Density) -> Result<Density, SchemeError> {
    f.same_grid(f_prev)?;
    let mut out = f.clone();
    out.values_mut()
        .zip_mut_with(f_prev.values(), |a, &b| *a = 2.0 * *a - b);
    Ok(out)
}

/// Positivity-safe extrapolation: 2 f^n - f^{n-1} where f^n >= f^{n-1},
/// 1 / (2/f^n - 1/f^{n-1}) otherwise. Inputs must be strictly positive.
pub fn extrapolate_positive(f: &Density, f_prev: &Density) -> Result<Density, SchemeError> {
    f.same_grid(f_prev)?;
    let min = f.min().min(f_prev.min());
    if !(min > 0.0) {
        return Err(SchemeError::NonPositiveDensity {
            min,
            threshold: 0.0,
        });
    }
    let mut out = f.clone();
    out.values_mut().zip_mut_with(f_prev.values(), |a, &b| {
        *a = if *a >= b {
            2.0 * *a - b
        } else {
            1.0 / (2.0 / *a - 1.0 / b)
        }
    });
    Ok(out)
}

pub(crate) enum Extrapolation {
    AdamsBashforth,
    Positive,
}

/// BDF2 prediction with an explicit extrapolant f* of f(t^{n+1}):
///   3 r^{n+1} - 4 r^n + r^{n-1} = dt r^{n+1} D*/H*,
///   f~ = (4 f^n - f^{n-1} + 2 dt (r^{n+1}/sqrt(H*)) Q(f*)) / 3.
pub(crate) fn sav2_bdf_predict(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
    extrapolation: Extrapolation,
) -> Result<Prediction, SchemeError> {
    let (f_prev, r_prev) = state.prev.as_ref().ok_or(SchemeError::MissingHistory)?;
    let f_star = match extrapolation {
        Extrapolation::AdamsBashforth => extrapolate_ab(&state.f, f_prev)?,
        Extrapolation::Positive => extrapolate_positive(&state.f, f_prev)?,
    };
    let le = log_entropy(&f_star, cfg)?;
    let q = op.apply(&f_star)?;
    let d = integrate_product(&f_star.grid(), q.values(), &le.log_f);
    let dt = cfg.dt;
    let den = 3.0 - dt * d / le.h;
    if !(den > 0.0) {
        return Err(SchemeError::Degenerate(den));
    }
    let r_new = (4.0 * state.r - r_prev) / den;
    let s = 2.0 * dt * (r_new / le.h.sqrt());
    let n = state.f.grid().modes();
    let mut values = state.f.grid().zeros();
    let fv = state.f.values();
    let fp = f_prev.values();
    let qv = q.values();
    for ix in 0..n {
        for iy in 0..n {
            let i = [ix, iy];
            values[i] = (4.0 * fv[i] - fp[i] + s * qv[i]) / 3.0;
        }
    }
    Ok(Prediction {
        f_tilde: Density::new(state.f.grid(), values)?,
        r_new,
        d,
        h_star: le.h,
        kind: StepKind::Bdf2,
    })
}

/// SAV-1st.
pub fn sav1_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let p = sav1_predict(state, op, cfg)?;
    Ok(finish_step(
        state,
        p.f_tilde,
        p.r_new,
        p.kind,
        p.d,
        p.h_star,
        CorrectionData::none(),
        false,
        cfg,
    ))
}

/// SAV-2nd (BDF2 with Adams-Bashforth extrapolation).
pub fn sav2_bdf_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let p = sav2_bdf_predict(state, op, cfg, Extrapolation::AdamsBashforth)?;
    Ok(finish_step(
        state,
        p.f_tilde,
        p.r_new,
        p.kind,
        p.d,
        p.h_star,
        CorrectionData::none(),
        false,
        cfg,
    ))
}

/// Crank-Nicolson SAV with the midpoint extrapolant (3 f^n - f^{n-1}) / 2:
///   r^{n+1} (1 - a) = r^n (1 + a),  a = dt D*/(4 H*),
///   f^{n+1} = f^n + dt (r^{n+1} + r^n)/(2 sqrt(H*)) Q(f*).
pub fn sav2_cn_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let (f_prev, _) = state.prev.as_ref().ok_or(SchemeError::MissingHistory)?;
    let mut f_star = state.f.clone();
    f_star
        .values_mut()
        .zip_mut_with(f_prev.values(), |a, &b| *a = (3.0 * *a - b) * 0.5);
    let le = log_entropy(&f_star, cfg)?;
    let q = op.apply(&f_star)?;
    let d = integrate_product(&f_star.grid(), q.values(), &le.log_f);
    let dt = cfg.dt;
    let a = dt * d / (4.0 * le.h);
    let den = 1.0 - a;
    if !(den > 0.0) {
        return Err(SchemeError::Degenerate(den));
    }
    let r_new = state.r * (1.0 + a) / den;
    let s = dt * ((r_new + state.r) / (2.0 * le.h.sqrt()));
    let mut f_new = state.f.clone();
    f_new
        .values_mut()
        .zip_mut_with(q.values(), |fj, &qj| *fj += s * qj);
    Ok(finish_step(
        state,
        f_new,
        r_new,
        StepKind::CrankNicolson,
        d,
        le.h,
        CorrectionData::none(),
        false,
        cfg,
    ))
}

/// SAV-1st-P-B: the beta-stabilized gain/loss update for operators with a
/// split,
///   r^{n+1} = r^n / (1 - dt D / (2 H^n (1 + dt beta))),
///   (1 + dt beta) f^{n+1} = dt c Q^+ + (1 + dt (beta - c Q^-)) f^n,
/// with c = r^{n+1}/sqrt(H^n). The gain is clamped at zero before use so the
/// positivity argument survives the spectral gain's negative dust.
pub fn sav1_pb_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let split = op.split().ok_or(SchemeError::OperatorWithoutSplit)?;
    let beta = cfg.beta.unwrap_or(0.0);
    if beta < 0.0 {
        return Err(SchemeError::Degenerate(beta));
    }
    let le = log_entropy(&state.f, cfg)?;
    let gain = split.gain(&state.f)?;
    let loss = split.loss_factor(&state.f)?;
    let gain_pos = gain.values().mapv(|g| g.max(0.0));

    // the effective Q of this scheme is the split composition
    let n = state.f.grid().modes();
    let fv = state.f.values();
    let lv = loss.values();
    let mut q_eff = state.f.grid().zeros();
    for ix in 0..n {
        for iy in 0..n {
            let i = [ix, iy];
            q_eff[i] = gain_pos[i] - lv[i] * fv[i];
        }
    }
    let d = integrate_product(&state.f.grid(), &q_eff, &le.log_f);
    let dt = cfg.dt;
    let den = 1.0 - dt * d / ((2.0 * le.h) * (1.0 + dt * beta));
    if !(den > 0.0) {
        return Err(SchemeError::Degenerate(den));
    }
    let r_new = state.r / den;
    let c = r_new / le.h.sqrt();
    let s = dt * c;
    let denom_f = 1.0 + dt * beta;
    let mut values = state.f.grid().zeros();
    let mut max_loss = f64::NEG_INFINITY;
    for ix in 0..n {
        for iy in 0..n {
            let i = [ix, iy];
            max_loss = max_loss.max(lv[i]);
            values[i] = (s * gain_pos[i] + (1.0 + dt * (beta - c * lv[i])) * fv[i]) / denom_f;
        }
    }
    let beta_warning = beta < c * max_loss;
    let f_new = Density::new(state.f.grid(), values)?;
    Ok(finish_step(
        state,
        f_new,
        r_new,
        StepKind::Stabilized,
        d,
        le.h,
        CorrectionData::none(),
        beta_warning,
        cfg,
    ))
}

fn corrected_step(
    state: &SavState,
    p: Prediction,
    dt_eff: f64,
    cfg: &SchemeConfig,
    with_mass: bool,
) -> Result<(SavState, StepReport), SchemeError> {
    let (shifted, xi) = if with_mass {
        let target = crate::grid::integrate(&state.f);
        let xi = solve_mass_multiplier(
            &p.f_tilde,
            target,
            dt_eff,
            cfg.eps,
            cfg.secant_tol,
            cfg.secant_max_iter,
        )?;
        (shift_density(&p.f_tilde, dt_eff * xi), xi)
    } else {
        (p.f_tilde, 0.0)
    };
    let (f_new, lambda) = kkt_project(&shifted, dt_eff, cfg.eps);
    let clipped = lambda.iter().filter(|&&l| l > 0.0).count() as u64;
    let lambda_sum = f_new.grid().integrate(&lambda);
    let correction = CorrectionData {
        xi,
        lambda_sum,
        clipped,
        corrected: clipped > 0 || xi != 0.0,
    };
    Ok(finish_step(
        state, f_new, p.r_new, p.kind, p.d, p.h_star, correction, false, cfg,
    ))
}

/// SAV-1st-L: SAV-1st prediction, then the pointwise KKT cut-off. r is not
/// touched by the correction.
pub fn sav1_l_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let p = sav1_predict(state, op, cfg)?;
    corrected_step(state, p, cfg.dt, cfg, false)
}

/// SAV-2nd-L: BDF2 prediction with the positivity-safe extrapolation, then
/// the KKT cut-off with dt_eff = 2 dt / 3.
pub fn sav2_l_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let p = sav2_bdf_predict(state, op, cfg, Extrapolation::Positive)?;
    corrected_step(state, p, 2.0 * cfg.dt / 3.0, cfg, false)
}

/// SAV-1st-LM: prediction, scalar mass multiplier, KKT cut-off. Mass of the
/// result equals the mass of f^n to the secant tolerance.
pub fn sav1_lm_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let p = sav1_predict(state, op, cfg)?;
    corrected_step(state, p, cfg.dt, cfg, true)
}

/// SAV-2nd-LM.
pub fn sav2_lm_step(
    state: &SavState,
    op: &dyn CollisionOperator,
    cfg: &SchemeConfig,
) -> Result<(SavState, StepReport), SchemeError> {
    let p = sav2_bdf_predict(state, op, cfg, Extrapolation::Positive)?;
    corrected_step(state, p, 2.0 * cfg.dt / 3.0, cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{CollisionError, CollisionOperator, SplitCollisionOperator};
    use crate::grid::{integrate, VelocityGrid};
    use crate::schemes::{init_state, modified_entropy, SchemeTag};

    /// Operator returning a fixed field regardless of the input.
    struct ConstOp {
        grid: VelocityGrid,
        q: Density,
    }

    impl CollisionOperator for ConstOp {
        fn grid(&self) -> VelocityGrid {
            self.grid
        }
        fn apply(&self, _f: &Density) -> Result<Density, CollisionError> {
            Ok(self.q.clone())
        }
    }

    /// Split operator with a fixed gain and loss factor; apply is literally
    /// gain - loss * f.
    struct SplitOp {
        grid: VelocityGrid,
        gain: Density,
        loss: Density,
    }

    impl CollisionOperator for SplitOp {
        fn grid(&self) -> VelocityGrid {
            self.grid
        }
        fn apply(&self, f: &Density) -> Result<Density, CollisionError> {
            let mut q = self.gain.clone();
            let l = self.loss.values();
            let fv = f.values();
            q.values_mut()
                .indexed_iter_mut()
                .for_each(|((ix, iy), v)| *v -= l[[ix, iy]] * fv[[ix, iy]]);
            Ok(q)
        }
        fn split(&self) -> Option<&dyn SplitCollisionOperator> {
            Some(self)
        }
    }

    impl SplitCollisionOperator for SplitOp {
        fn gain(&self, _f: &Density) -> Result<Density, CollisionError> {
            Ok(self.gain.clone())
        }
        fn loss_factor(&self, _f: &Density) -> Result<Density, CollisionError> {
            Ok(self.loss.clone())
        }
    }

    fn unit_dv_grid() -> VelocityGrid {
        // N = 8, L = 4 gives spacing 1 and cell area 1 over 64 cells
        VelocityGrid::new(8, 4.0).unwrap()
    }

    /// f = e everywhere makes log f = 1 exactly; with (2L)^2 = 4 this pins
    /// H = 4e + C and D = integral of Q.
    fn pinned_state(c_offset: f64) -> (SavState, SchemeConfig, VelocityGrid) {
        let grid = VelocityGrid::new(8, 1.0).unwrap();
        let f = Density::from_fn(grid, |_, _| std::f64::consts::E);
        let mut cfg = SchemeConfig::new(SchemeTag::Sav1, 0.1);
        cfg.entropy_offset = c_offset;
        let state = init_state(&f, &cfg, 0.0).unwrap();
        (state, cfg, grid)
    }

    fn offset_for_h(target_h: f64) -> f64 {
        // H = 4 e + C
        target_h - 4.0 * std::f64::consts::E
    }

    #[test]
    fn zero_operator_is_a_fixed_point() {
        let (state, cfg, grid) = pinned_state(offset_for_h(4.0));
        let op = ConstOp {
            grid,
            q: Density::zeros(grid),
        };
        let (next, report) = sav1_step(&state, &op, &cfg).unwrap();
        assert_eq!(next.r, state.r);
        assert_eq!(report.entropy_production, 0.0);
        let mut worst = 0.0f64;
        for (a, b) in next.f.values().iter().zip(state.f.values().iter()) {
            worst = worst.max((a - b).abs());
        }
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn sav1_r_update_matches_linear_system_oracle() {
        // H = 4, r0 = 2, dt = 0.1, Q = -0.5 so D = -2: the spec's mock case
        let (state, cfg, grid) = pinned_state(offset_for_h(4.0));
        assert!((state.r - 2.0).abs() < 1e-12);
        let op = ConstOp {
            grid,
            q: Density::from_fn(grid, |_, _| -0.5),
        };
        let (next, report) = sav1_step(&state, &op, &cfg).unwrap();
        assert!((report.entropy_production + 2.0).abs() < 1e-12);
        // closed form r' = r / (1 - dt D / 2H) = 2 / 1.025
        assert!((next.r - 1.951_219_512_195_122).abs() < 1e-9);
        // independent route: solve the coupled pair
        //   r' - (dt/(2 sqrt(H))) y = r,   y = (D/sqrt(H)) r'
        // as a 2x2 linear system for (r', y)
        let (h, d, dt, r0) = (report.h_star, report.entropy_production, cfg.dt, state.r);
        let a = [
            [1.0, -dt / (2.0 * h.sqrt())],
            [-d / h.sqrt(), 1.0],
        ];
        let rhs = [r0, 0.0];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let r_sys = (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det;
        assert!((next.r - r_sys).abs() < 1e-12);
        // D <= 0 gives a contracting r
        assert!(next.r <= state.r);
    }

    #[test]
    fn sav1_dissipation_identity_holds_exactly() {
        for q0 in [-0.5, -2.0, 0.75] {
            let (state, cfg, grid) = pinned_state(offset_for_h(4.0));
            let op = ConstOp {
                grid,
                q: Density::from_fn(grid, |_, _| q0),
            };
            let (next, report) = sav1_step(&state, &op, &cfg).unwrap();
            let lhs = next.r * next.r - state.r * state.r + (next.r - state.r).powi(2);
            let rhs = cfg.dt * next.r * next.r * report.entropy_production / report.h_star;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "q0={q0}: lhs={lhs} rhs={rhs}"
            );
        }
    }

    #[test]
    fn sav1_rejects_negative_density_and_degenerate_steps() {
        let grid = VelocityGrid::new(8, 1.0).unwrap();
        let mut f = Density::from_fn(grid, |_, _| 1.0);
        f.values_mut()[[2, 2]] = -0.5;
        let cfg = SchemeConfig::new(SchemeTag::Sav1, 0.1);
        let state = SavState {
            f,
            r: 2.0,
            prev: None,
            n: 0,
            t: 0.0,
        };
        let op = ConstOp {
            grid,
            q: Density::zeros(grid),
        };
        assert!(matches!(
            sav1_step(&state, &op, &cfg),
            Err(SchemeError::NonPositiveDensity { .. })
        ));

        // large positive production degenerates the denominator
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.dt = 10.0;
        let op = ConstOp {
            grid,
            q: Density::from_fn(grid, |_, _| 2.0),
        };
        assert!(matches!(
            sav1_step(&state, &op, &cfg),
            Err(SchemeError::Degenerate(_))
        ));
    }

    #[test]
    fn bdf2_r_update_matches_linear_system_oracle() {
        // r^n = r^{n-1} = 2, H* = 4, D* = -2, dt = 0.1: solving
        // 3r' - 4 r^n + r^{n-1} = dt D* r'/H* gives r' = 6/3.05
        let (state0, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.scheme = SchemeTag::Sav2Bdf;
        let state = SavState {
            prev: Some((state0.f.clone(), state0.r)),
            ..state0
        };
        let op = ConstOp {
            grid,
            q: Density::from_fn(grid, |_, _| -0.5),
        };
        let (next, report) = sav2_bdf_step(&state, &op, &cfg).unwrap();
        assert!((report.entropy_production + 2.0).abs() < 1e-12);
        let expected = 6.0 / 3.05;
        assert!(
            (next.r - expected).abs() < 1e-9,
            "r'={} expected={expected}",
            next.r
        );
        // independent 2x2 route: unknowns (r', y) with
        //   3 r' - dt/sqrt(H) y = 4 r^n - r^{n-1},  y = (D/sqrt(H)) r'
        let (h, d, dt) = (report.h_star, report.entropy_production, cfg.dt);
        let det = 3.0 - (dt / h.sqrt()) * (d / h.sqrt());
        let r_sys = (4.0 * state.r - state.prev.as_ref().unwrap().1) / det;
        assert!((next.r - r_sys).abs() < 1e-12);
    }

    #[test]
    fn bdf2_with_zero_operator_is_pure_extrapolation() {
        let (state0, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.scheme = SchemeTag::Sav2Bdf;
        let mut prev_f = state0.f.clone();
        prev_f.values_mut().mapv_inplace(|x| 0.5 * x);
        let state = SavState {
            prev: Some((prev_f.clone(), 1.5)),
            ..state0.clone()
        };
        let op = ConstOp {
            grid,
            q: Density::zeros(grid),
        };
        let (next, _) = sav2_bdf_step(&state, &op, &cfg).unwrap();
        assert!((next.r - (4.0 * state.r - 1.5) / 3.0).abs() < 1e-14);
        let want = (4.0 * std::f64::consts::E - 0.5 * std::f64::consts::E) / 3.0;
        assert!((next.f.values()[[0, 0]] - want).abs() < 1e-14);
    }

    #[test]
    fn bdf2_requires_history() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.scheme = SchemeTag::Sav2Bdf;
        let op = ConstOp {
            grid,
            q: Density::zeros(grid),
        };
        assert!(matches!(
            sav2_bdf_step(&state, &op, &cfg),
            Err(SchemeError::MissingHistory)
        ));
    }

    #[test]
    fn bdf2_dissipation_identity_holds_exactly() {
        let (state0, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.scheme = SchemeTag::Sav2Bdf;
        let state = SavState {
            prev: Some((state0.f.clone(), 1.9)),
            ..state0
        };
        for q0 in [-0.5, -1.5, 0.4] {
            let op = ConstOp {
                grid,
                q: Density::from_fn(grid, |_, _| q0),
            };
            let (next, report) = sav2_bdf_step(&state, &op, &cfg).unwrap();
            let h_new = crate::schemes::two_level_modified_entropy(next.r, state.r);
            let h_old =
                crate::schemes::two_level_modified_entropy(state.r, state.prev.as_ref().unwrap().1);
            let incr = next.r - 2.0 * state.r + state.prev.as_ref().unwrap().1;
            let lhs = h_new - h_old + 0.5 * incr * incr;
            let rhs = cfg.dt * next.r * next.r * report.entropy_production / report.h_star;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "q0={q0}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn crank_nicolson_identity_and_monotonicity() {
        let (state0, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.scheme = SchemeTag::Sav2Cn;
        let state = SavState {
            prev: Some((state0.f.clone(), state0.r)),
            ..state0
        };
        let op = ConstOp {
            grid,
            q: Density::from_fn(grid, |_, _| -0.5),
        };
        let (next, report) = sav2_cn_step(&state, &op, &cfg).unwrap();
        // (r')^2 - r^2 = dt (r' + r)^2 D / (4 H*)
        let lhs = next.r * next.r - state.r * state.r;
        let sum = next.r + state.r;
        let rhs = cfg.dt * sum * sum * report.entropy_production / (4.0 * report.h_star);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        assert!(next.r <= state.r);

        // zero operator: identity step
        let op = ConstOp {
            grid,
            q: Density::zeros(grid),
        };
        let (next, _) = sav2_cn_step(&state, &op, &cfg).unwrap();
        assert_eq!(next.r, state.r);
    }

    #[test]
    fn extrapolation_formulas() {
        let grid = VelocityGrid::new(8, 1.0).unwrap();
        let two = Density::from_fn(grid, |_, _| 2.0);
        let one = Density::from_fn(grid, |_, _| 1.0);
        let ab = extrapolate_ab(&two, &one).unwrap();
        assert_eq!(ab.values()[[0, 0]], 3.0);

        // first branch: f^n >= f^{n-1}
        let pos = extrapolate_positive(&two, &one).unwrap();
        assert_eq!(pos.values()[[0, 0]], 3.0);
        // second branch: 1 / (2/1 - 1/2) = 2/3
        let pos = extrapolate_positive(&one, &two).unwrap();
        assert!((pos.values()[[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!(pos.min() > 0.0);
        // equal inputs agree on both branches
        let pos = extrapolate_positive(&two, &two).unwrap();
        assert_eq!(pos.values()[[0, 0]], 2.0);

        // exactness on linear-in-time data
        let f0 = Density::from_fn(grid, |vx, vy| 1.0 + 0.25 * vx - 0.5 * vy + 2.0);
        let f1 = Density::from_fn(grid, |vx, vy| 1.0 + 2.0 * (0.25 * vx - 0.5 * vy) + 2.0);
        let f2 = Density::from_fn(grid, |vx, vy| 1.0 + 3.0 * (0.25 * vx - 0.5 * vy) + 2.0);
        let ex = extrapolate_ab(&f1, &f0).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in ex.values().iter().zip(f2.values().iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-14);

        let unpos = extrapolate_positive(&one, &Density::zeros(grid));
        assert!(matches!(unpos, Err(SchemeError::NonPositiveDensity { .. })));
    }

    #[test]
    fn pb_with_zero_beta_and_lossless_mock_is_bitwise_sav1() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        let gain = Density::from_fn(grid, |vx, vy| 0.25 + 0.01 * vx - 0.03 * vy * vy);
        let op = SplitOp {
            grid,
            gain,
            loss: Density::zeros(grid),
        };
        cfg.beta = Some(0.0);
        let (next_pb, rep_pb) = sav1_pb_step(&state, &op, &cfg).unwrap();
        let (next_sav, rep_sav) = sav1_step(&state, &op, &cfg).unwrap();
        assert_eq!(next_pb.r.to_bits(), next_sav.r.to_bits());
        for (a, b) in next_pb.f.values().iter().zip(next_sav.f.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(
            rep_pb.entropy_production.to_bits(),
            rep_sav.entropy_production.to_bits()
        );
    }

    #[test]
    fn pb_with_zero_beta_matches_sav1_closely_with_loss() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        let gain = Density::from_fn(grid, |vx, vy| 0.3 + 0.02 * vx + 0.01 * vy);
        let loss = Density::from_fn(grid, |vx, _| 0.1 + 0.005 * vx * vx);
        let op = SplitOp { grid, gain, loss };
        cfg.beta = Some(0.0);
        let (next_pb, _) = sav1_pb_step(&state, &op, &cfg).unwrap();
        let (next_sav, _) = sav1_step(&state, &op, &cfg).unwrap();
        assert!((next_pb.r - next_sav.r).abs() <= 1e-14 * next_sav.r);
        let mut worst = 0.0f64;
        for (a, b) in next_pb.f.values().iter().zip(next_sav.f.values().iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-13 * next_sav.f.max_abs());
    }

    #[test]
    fn pb_dissipation_identity_and_monotonicity() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.beta = Some(2.0);
        let gain = Density::from_fn(grid, |_, _| 0.2);
        let loss = Density::from_fn(grid, |_, _| 0.45);
        let op = SplitOp { grid, gain, loss };
        let (next, report) = sav1_pb_step(&state, &op, &cfg).unwrap();
        // identity with the stabilized factor 1/(1 + beta dt)
        let lhs = next.r * next.r - state.r * state.r + (next.r - state.r).powi(2);
        let rhs = cfg.dt * next.r * next.r * report.entropy_production
            / ((1.0 + 2.0 * cfg.dt) * report.h_star);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        assert!(report.entropy_production <= 0.0);
        assert!(next.r >= 0.0 && next.r <= state.r);
        // beta = 2.0 exceeds c * max loss here: no warning
        assert!(!report.beta_warning);
        // positivity of the update
        assert!(next.f.min() >= 0.0);
    }

    #[test]
    fn pb_requires_a_split_operator() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.beta = Some(1.0);
        let op = ConstOp {
            grid,
            q: Density::zeros(grid),
        };
        assert!(matches!(
            sav1_pb_step(&state, &op, &cfg),
            Err(SchemeError::OperatorWithoutSplit)
        ));
    }

    #[test]
    fn pb_flags_insufficient_beta() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(4.0));
        cfg.beta = Some(0.01);
        let gain = Density::from_fn(grid, |_, _| 0.2);
        let loss = Density::from_fn(grid, |_, _| 0.45);
        let op = SplitOp { grid, gain, loss };
        let (_, report) = sav1_pb_step(&state, &op, &cfg).unwrap();
        assert!(report.beta_warning);
    }

    #[test]
    fn l_and_lm_steps_clip_and_conserve() {
        // drive the field hard negative in spots with a mock operator
        let grid = unit_dv_grid();
        let f = Density::from_fn(grid, |vx, vy| 0.2 + 0.1 * (vx + vy).sin());
        let mut cfg = SchemeConfig::new(SchemeTag::Sav1Lm, 0.5);
        cfg.entropy_offset = 40.0;
        let state = init_state(&f, &cfg, 0.0).unwrap();
        let q = Density::from_fn(grid, |vx, vy| if vx < -2.0 && vy < -2.0 { -1.0 } else { 0.01 });
        let op = ConstOp { grid, q };

        // plain L: clips, mass increases
        let (next_l, rep_l) = sav1_l_step(&state, &op, &cfg).unwrap();
        assert!(next_l.f.min() >= cfg.eps);
        assert!(rep_l.corrected && rep_l.clipped > 0);
        assert!(rep_l.xi == 0.0);
        assert!(integrate(&next_l.f) >= integrate(&state.f) - 1e-12);
        // r untouched by the correction: matches the plain sav1 r
        let (next_plain, _) = sav1_step(&state, &op, &cfg).unwrap();
        assert_eq!(next_l.r.to_bits(), next_plain.r.to_bits());

        // LM: clips and restores the mass through xi
        let (next_lm, rep_lm) = sav1_lm_step(&state, &op, &cfg).unwrap();
        assert!(next_lm.f.min() >= cfg.eps);
        assert!(rep_lm.corrected && rep_lm.clipped > 0);
        assert!(rep_lm.xi < 0.0);
        let m0 = integrate(&state.f);
        assert!((integrate(&next_lm.f) - m0).abs() <= 1e-12 * m0);
        assert_eq!(next_lm.r.to_bits(), next_plain.r.to_bits());
    }

    #[test]
    fn lm_without_clipping_equals_the_plain_step() {
        let (state, mut cfg, grid) = pinned_state(offset_for_h(9.0));
        cfg.scheme = SchemeTag::Sav1Lm;
        let op = ConstOp {
            grid,
            q: Density::from_fn(grid, |_, _| -0.01),
        };
        let (next_lm, rep) = sav1_lm_step(&state, &op, &cfg).unwrap();
        let (next_plain, _) = sav1_step(&state, &op, &cfg).unwrap();
        assert!(!rep.corrected);
        assert_eq!(rep.xi, 0.0);
        for (a, b) in next_lm.f.values().iter().zip(next_plain.f.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn modified_entropy_formulas() {
        let grid = VelocityGrid::new(8, 1.0).unwrap();
        let f = Density::from_fn(grid, |_, _| 1.0);
        let mut state = SavState {
            f,
            r: 2.0,
            prev: None,
            n: 1,
            t: 0.1,
        };
        assert_eq!(modified_entropy(&state, SchemeTag::Sav1).unwrap(), 4.0);
        assert!(matches!(
            modified_entropy(&state, SchemeTag::Sav2Bdf),
            Err(SchemeError::MissingHistory)
        ));
        state.prev = Some((state.f.clone(), 2.0));
        assert_eq!(modified_entropy(&state, SchemeTag::Sav2Bdf).unwrap(), 4.0);
        state.prev = Some((state.f.clone(), 1.0));
        assert_eq!(modified_entropy(&state, SchemeTag::Sav2Bdf).unwrap(), 6.5);
    }

    #[test]
    fn init_state_values_and_errors() {
        let grid = VelocityGrid::new(
            64,
            (3.0 * std::f64::consts::SQRT_2 + 1.0) * 3.3 / 2.0,
        )
        .unwrap();
        let m = crate::reference::maxwellian(grid, 1.0, [0.0, 0.0], 1.0);
        let cfg = SchemeConfig::new(SchemeTag::Sav1, 0.01);
        let state = init_state(&m, &cfg, 0.5).unwrap();
        // sqrt(10 - 1 - log(2 pi))
        assert!((state.r - 2.676_214_291_418_132).abs() < 1e-6);

        let mut bad = m.clone();
        bad.values_mut()[[1, 1]] = -1.0;
        assert!(matches!(
            init_state(&bad, &cfg, 0.5),
            Err(SchemeError::Grid(_))
        ));

        let mut tiny = SchemeConfig::new(SchemeTag::Sav1, 0.01);
        tiny.entropy_offset = 0.0;
        assert!(matches!(
            init_state(&m, &tiny, 0.5),
            Err(SchemeError::NonPositiveModifiedEntropy(_))
        ));
    }
}
