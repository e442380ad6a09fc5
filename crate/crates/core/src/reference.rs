//! Analytic reference solutions and error norms.

use crate::error::{GridError, ReferenceError};
use crate::grid::{Density, VelocityGrid};

/// Maxwellian with density rho, bulk velocity u, temperature T (d = 2).
pub fn maxwellian(grid: VelocityGrid, rho: f64, u: [f64; 2], temperature: f64) -> Density {
    let norm = rho / (2.0 * std::f64::consts::PI * temperature);
    Density::from_fn(grid, |vx, vy| {
        let dx = vx - u[0];
        let dy = vy - u[1];
        norm * (-(dx * dx + dy * dy) / (2.0 * temperature)).exp()
    })
}

/// K(t) = 1 - exp(-t/8)/2 of the BKW profile.
pub fn bkw_k(t: f64) -> f64 {
    1.0 - (-t / 8.0).exp() / 2.0
}

/// BKW solution of the 2D Boltzmann/Landau equations with the Maxwell-type
/// kernels used here,
///   f(t,v) = exp(-|v|^2/2K)/(2 pi K) [ (2K-1)/K + (1-K)/(2K^2) |v|^2 ].
/// Requires K(t) > 1/2, i.e. t > 0, for a nonnegative profile.
pub fn bkw(grid: VelocityGrid, t: f64) -> Result<Density, ReferenceError> {
    let k = bkw_k(t);
    if k <= 0.5 {
        return Err(ReferenceError::NegativeRegion { t, k });
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * k);
    let c1 = (2.0 * k - 1.0) / k;
    let c2 = (1.0 - k) / (2.0 * k * k);
    Ok(Density::from_fn(grid, |vx, vy| {
        let r2 = vx * vx + vy * vy;
        norm * (-r2 / (2.0 * k)).exp() * (c1 + c2 * r2)
    }))
}

/// Parameters of a two-bump initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiMaxwellianParams {
    pub rho: [f64; 2],
    pub temperature: [f64; 2],
    pub center: [[f64; 2]; 2],
}

impl BiMaxwellianParams {
    pub fn validate(&self) -> Result<(), ReferenceError> {
        for i in 0..2 {
            if !(self.rho[i] > 0.0) || !(self.temperature[i] > 0.0) {
                return Err(ReferenceError::InvalidParameter(format!(
                    "component {i}: rho={}, T={}",
                    self.rho[i], self.temperature[i]
                )));
            }
        }
        Ok(())
    }
}

/// The two-bump initial condition of the relaxation test:
/// rho = (1/2, 1/2), T = (1, 1), centers (-1, 2) and (3, -3).
pub fn bi_maxwellian_test_params() -> BiMaxwellianParams {
    BiMaxwellianParams {
        rho: [0.5, 0.5],
        temperature: [1.0, 1.0],
        center: [[-1.0, 2.0], [3.0, -3.0]],
    }
}

/// Sum of two Maxwellians.
pub fn bi_maxwellian(
    grid: VelocityGrid,
    params: BiMaxwellianParams,
) -> Result<Density, ReferenceError> {
    params.validate()?;
    let mut a = maxwellian(grid, params.rho[0], params.center[0], params.temperature[0]);
    let b = maxwellian(grid, params.rho[1], params.center[1], params.temperature[1]);
    a.values_mut().zip_mut_with(b.values(), |x, &y| *x += y);
    Ok(a)
}

/// max_j |f_j - g_j| on a common grid.
pub fn max_norm_error(f: &Density, g: &Density) -> Result<f64, GridError> {
    f.same_grid(g)?;
    Ok(f.values()
        .iter()
        .zip(g.values().iter())
        .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs())))
}

/// Closed-form entropy of a Maxwellian over the whole plane,
/// \int M log M dv = rho (log(rho / (2 pi T)) - 1).
pub fn maxwellian_entropy(rho: f64, temperature: f64) -> f64 {
    rho * ((rho / (2.0 * std::f64::consts::PI * temperature)).ln() - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, moments};

    fn grid64() -> VelocityGrid {
        VelocityGrid::new(64, (3.0 * std::f64::consts::SQRT_2 + 1.0) * 3.3 / 2.0).unwrap()
    }

    #[test]
    fn maxwellian_peak_value() {
        let g = VelocityGrid::new(16, 4.0).unwrap();
        let m = maxwellian(g, 2.0, [0.0, 0.0], 0.5);
        // v = u sits on a node
        let peak = 2.0 / (2.0 * std::f64::consts::PI * 0.5);
        assert!((m.values()[[0, 0]] - peak).abs() < 1e-14);
        // wrong spot: node(0) is -L; the origin is node N/2
        let n = g.modes();
        assert!((m.values()[[n / 2, n / 2]] - peak).abs() < 1e-14);
    }

    #[test]
    fn bkw_profile_values_and_limits() {
        let g = grid64();
        let f = bkw(g, 0.5).unwrap();
        let k = bkw_k(0.5);
        assert!((k - 0.5302933679995623).abs() < 1e-15);
        let center = (2.0 * k - 1.0) / (2.0 * std::f64::consts::PI * k * k);
        let n = g.modes();
        assert!((f.values()[[n / 2, n / 2]] - center).abs() < 1e-14);
        assert!((center - 0.03428992804873512).abs() < 1e-15);
        assert!(f.min() > 0.0);

        // t -> infinity recovers the unit Maxwellian pointwise
        let late = bkw(g, 1e9).unwrap();
        let m = maxwellian(g, 1.0, [0.0, 0.0], 1.0);
        let mut worst = 0.0f64;
        for (a, b) in late.values().iter().zip(m.values().iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn bkw_moments_are_unit() {
        let g = grid64();
        for t in [0.5, 1.0, 3.0] {
            let f = bkw(g, t).unwrap();
            assert!((integrate(&f) - 1.0).abs() < 1e-10);
            let mom = moments(&f).unwrap();
            assert!((mom.rho - 1.0).abs() < 1e-8);
            assert!(mom.u[0].abs() < 1e-8 && mom.u[1].abs() < 1e-8);
            assert!((mom.temperature - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn bkw_rejects_low_k() {
        let g = grid64();
        assert!(matches!(
            bkw(g, 0.0),
            Err(ReferenceError::NegativeRegion { .. })
        ));
        assert!(matches!(
            bkw(g, -3.0),
            Err(ReferenceError::NegativeRegion { .. })
        ));
    }

    #[test]
    fn bi_maxwellian_paper_parameters() {
        let g = VelocityGrid::new(64, 10.0).unwrap();
        let f = bi_maxwellian(g, bi_maxwellian_test_params()).unwrap();
        assert!((integrate(&f) - 1.0).abs() < 1e-8);
        let mom = moments(&f).unwrap();
        assert!((mom.u[0] - 1.0).abs() < 1e-8);
        assert!((mom.u[1] + 0.5).abs() < 1e-8);
        // analytic mixture temperature T = sum rho_i (T_i + |V_i - u|^2/2)
        let p = bi_maxwellian_test_params();
        let mut t_mix = 0.0;
        for i in 0..2 {
            let dx = p.center[i][0] - mom.u[0];
            let dy = p.center[i][1] - mom.u[1];
            t_mix += p.rho[i] * (p.temperature[i] + 0.5 * (dx * dx + dy * dy));
        }
        assert!((mom.temperature - t_mix).abs() < 1e-6);
        assert!((t_mix - 6.125).abs() < 1e-9);
    }

    #[test]
    fn coincident_bumps_are_a_single_maxwellian() {
        let g = VelocityGrid::new(32, 8.0).unwrap();
        let p = BiMaxwellianParams {
            rho: [0.25, 0.75],
            temperature: [0.8, 0.8],
            center: [[0.5, -0.25], [0.5, -0.25]],
        };
        let f = bi_maxwellian(g, p).unwrap();
        let m = maxwellian(g, 1.0, [0.5, -0.25], 0.8);
        assert!(max_norm_error(&f, &m).unwrap() < 1e-14);
    }

    #[test]
    fn max_norm_error_basics() {
        let g = VelocityGrid::new(16, 4.0).unwrap();
        let f = maxwellian(g, 1.0, [0.0, 0.0], 1.0);
        assert_eq!(max_norm_error(&f, &f).unwrap(), 0.0);
        let mut shifted = f.clone();
        shifted.values_mut().mapv_inplace(|x| x + 0.125);
        assert_eq!(max_norm_error(&f, &shifted).unwrap(), 0.125);
        let other = Density::zeros(VelocityGrid::new(32, 4.0).unwrap());
        assert!(max_norm_error(&f, &other).is_err());
    }

    #[test]
    fn bkw_difference_matches_direct_evaluation() {
        let g = VelocityGrid::new(32, (3.0 * std::f64::consts::SQRT_2 + 1.0) * 3.3 / 2.0).unwrap();
        let a = bkw(g, 0.6).unwrap();
        let b = bkw(g, 0.5).unwrap();
        let got = max_norm_error(&a, &b).unwrap();
        // independent direct evaluation of the two closed forms
        let eval = |t: f64, vx: f64, vy: f64| {
            let k = 1.0 - (-t / 8.0f64).exp() / 2.0;
            let r2 = vx * vx + vy * vy;
            1.0 / (2.0 * std::f64::consts::PI * k)
                * (-r2 / (2.0 * k)).exp()
                * ((2.0 * k - 1.0) / k + (1.0 - k) / (2.0 * k * k) * r2)
        };
        let mut want = 0.0f64;
        for ix in 0..32 {
            for iy in 0..32 {
                let (vx, vy) = (g.node(ix), g.node(iy));
                want = want.max((eval(0.6, vx, vy) - eval(0.5, vx, vy)).abs());
            }
        }
        assert!(got > 0.0);
        assert!((got - want).abs() <= 1e-12 * want);
    }
}
