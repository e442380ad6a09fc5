//! Pointwise KKT projection onto { f >= eps } and the scalar mass
//! multiplier that restores the previous mass before projecting.

use ndarray::Array2;

use crate::error::SchemeError;
use crate::grid::{kahan_sum, Density};

/// Complementarity projection: returns (f, lambda) with
///   f = f~      , lambda = 0                  where f~ >= eps,
///   f = eps     , lambda = (eps - f~)/dt_eff  otherwise,
/// so lambda >= 0, f >= eps and lambda (f - eps) = 0 hold exactly.
pub fn kkt_project(f_tilde: &Density, dt_eff: f64, eps: f64) -> (Density, Array2<f64>) {
    assert!(dt_eff > 0.0, "dt_eff must be positive");
    assert!(eps >= 0.0, "eps must be nonnegative");
    let mut f = f_tilde.clone();
    let mut lambda = f_tilde.grid().zeros();
    for (fj, lj) in f.values_mut().iter_mut().zip(lambda.iter_mut()) {
        if *fj < eps {
            *lj = (eps - *fj) / dt_eff;
            *fj = eps;
        }
    }
    (f, lambda)
}

/// f~ + shift at every node.
pub(crate) fn shift_density(f_tilde: &Density, shift: f64) -> Density {
    let mut out = f_tilde.clone();
    out.values_mut().mapv_inplace(|x| x + shift);
    out
}

/// Mass of the projection of f~ + dt_eff * xi, minus the target.
/// Piecewise linear and nondecreasing in xi.
fn mass_defect(f_tilde: &Density, target: f64, dt_eff: f64, eps: f64, xi: f64) -> f64 {
    let shift = dt_eff * xi;
    let dv = f_tilde.grid().cell_area();
    dv * kahan_sum(f_tilde.values().iter().map(|&x| (x + shift).max(eps))) - target
}

/// Root of F(xi) = mass(project(f~ + dt_eff xi)) - target by a secant
/// iteration with bracket maintenance and bisection fallback. Starts from
/// xi = 0 and xi = -dt_eff; converges when |F| <= tol * max(target, 1).
pub fn solve_mass_multiplier(
    f_tilde: &Density,
    target: f64,
    dt_eff: f64,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, SchemeError> {
    assert!(dt_eff > 0.0, "dt_eff must be positive");
    let f = |xi: f64| mass_defect(f_tilde, target, dt_eff, eps, xi);
    let goal = tol * target.abs().max(1.0);

    let mut x0 = 0.0;
    let mut f0 = f(x0);
    if f0.abs() <= goal {
        return Ok(x0);
    }

    // establish a bracket [lo, hi] with F(lo) < 0 <= F(hi); F is monotone
    // nondecreasing and unbounded above, so one exists unless the target
    // exceeds every achievable mass
    let (mut lo, mut flo, mut hi, mut fhi);
    if f0 > 0.0 {
        hi = x0;
        fhi = f0;
        let mut x = -dt_eff.max(1e-30);
        let mut fx = f(x);
        let mut tries = 0;
        while fx > 0.0 {
            hi = x;
            fhi = fx;
            x *= 4.0;
            fx = f(x);
            tries += 1;
            if tries > 400 {
                return Err(SchemeError::NoConvergence {
                    iterations: tries,
                    residual: fx,
                });
            }
        }
        lo = x;
        flo = fx;
    } else {
        lo = x0;
        flo = f0;
        let mut x = dt_eff.max(1e-30);
        let mut fx = f(x);
        let mut tries = 0;
        while fx < 0.0 {
            lo = x;
            flo = fx;
            x *= 4.0;
            fx = f(x);
            tries += 1;
            if tries > 400 {
                return Err(SchemeError::NoConvergence {
                    iterations: tries,
                    residual: fx,
                });
            }
        }
        hi = x;
        fhi = fx;
    }

    // secant from (x0, x1) = (0, -dt_eff) orientation: use the bracket ends
    // as the two current iterates
    let mut x1 = if flo.abs() < fhi.abs() { lo } else { hi };
    let mut f1 = if flo.abs() < fhi.abs() { flo } else { fhi };
    x0 = if x1 == lo { hi } else { lo };
    f0 = if x1 == lo { fhi } else { flo };
    for it in 0..max_iter {
        if f1.abs() <= goal {
            return Ok(x1);
        }
        let den = f1 - f0;
        let mut x2 = if den != 0.0 {
            x1 - f1 * (x1 - x0) / den
        } else {
            0.5 * (lo + hi)
        };
        if !(x2 > lo && x2 < hi) || !x2.is_finite() {
            x2 = 0.5 * (lo + hi);
        }
        let f2 = f(x2);
        if f2 < 0.0 {
            lo = x2;
            flo = f2;
        } else {
            hi = x2;
            fhi = f2;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        if hi - lo <= f64::EPSILON * (hi.abs().max(lo.abs()).max(1.0)) {
            // bracket collapsed to machine width; take the better end
            let best = if flo.abs() < fhi.abs() { lo } else { hi };
            let fb = f(best);
            if fb.abs() <= goal {
                return Ok(best);
            }
            return Err(SchemeError::NoConvergence {
                iterations: it + 1,
                residual: fb,
            });
        }
    }
    Err(SchemeError::NoConvergence {
        iterations: max_iter,
        residual: f1,
    })
}
