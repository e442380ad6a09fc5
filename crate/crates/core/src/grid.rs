//! Uniform periodic velocity grid on [-L, L)^2 with quadrature, moments and
//! the entropy functional.

use ndarray::Array2;

use crate::error::GridError;

/// Uniform N x N periodic grid on the square [-L, L)^2.
///
/// Nodes follow the cell-left convention `v_j = -L + j * 2L/N`, so `-L` is a
/// node and `+L` is not. Wavenumbers are `xi_k = (pi/L) k` with
/// `k in {-N/2, ..., N/2 - 1}` stored in FFT index order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    n: usize,
    l: f64,
}

impl VelocityGrid {
    /// `n` must be even and at least 8; `l` positive.
    pub fn new(n: usize, l: f64) -> Result<Self, GridError> {
        if n < 8 || n % 2 != 0 {
            return Err(GridError::InvalidModes(n));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(GridError::InvalidHalfWidth(l));
        }
        Ok(Self { n, l })
    }

    /// Grid used in small unit tests; skips the n >= 8 restriction.
    #[cfg(test)]
    pub(crate) fn new_unchecked(n: usize, l: f64) -> Self {
        Self { n, l }
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    /// Node spacing 2L/N, identical in both dimensions.
    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Quadrature weight (cell area) dv = (2L/N)^2.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Axis node coordinate, j in 0..N.
    pub fn node(&self, j: usize) -> f64 {
        -self.l + self.spacing() * j as f64
    }

    /// Signed frequency index for FFT storage index i: 0..N/2 then -N/2..-1.
    pub fn freq(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Axis wavenumber xi = (pi/L) * freq(i).
    pub fn wavenumber(&self, i: usize) -> f64 {
        std::f64::consts::PI / self.l * self.freq(i) as f64
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros(self.shape())
    }

    /// Quadrature: dv * sum_j g_j, compensated summation.
    pub fn integrate(&self, g: &Array2<f64>) -> f64 {
        self.cell_area() * kahan_sum(g.iter().copied())
    }
}

/// Compensated (Kahan) accumulator; deterministic and accurate enough for
/// the per-step mass bookkeeping of the LM schemes.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanAcc {
    sum: f64,
    carry: f64,
}

impl KahanAcc {
    pub fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = KahanAcc::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Real-valued density field bound to its grid.
#[derive(Debug, Clone)]
pub struct Density {
    grid: VelocityGrid,
    values: Array2<f64>,
}

impl Density {
    pub fn new(grid: VelocityGrid, values: Array2<f64>) -> Result<Self, GridError> {
        if values.dim() != grid.shape() {
            return Err(GridError::ShapeMismatch {
                expected: grid.shape(),
                found: values.dim(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: VelocityGrid) -> Self {
        Self {
            grid,
            values: grid.zeros(),
        }
    }

    /// Evaluate `f(vx, vy)` at every node.
    pub fn from_fn(grid: VelocityGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.modes();
        let mut values = grid.zeros();
        for ix in 0..n {
            let vx = grid.node(ix);
            for iy in 0..n {
                values[[ix, iy]] = f(vx, grid.node(iy));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> VelocityGrid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Density) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

/// Mass, bulk velocity, temperature and raw second moment of a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub rho: f64,
    pub u: [f64; 2],
    pub temperature: f64,
    /// Raw kinetic moment  ∫ f |v|^2 dv.
    pub energy: f64,
}

pub fn integrate(f: &Density) -> f64 {
    f.grid().integrate(f.values())
}

/// Quadrature of a pointwise product, dv * sum_j a_j b_j.
pub fn integrate_product(grid: &VelocityGrid, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    grid.cell_area() * kahan_sum(a.iter().zip(b.iter()).map(|(x, y)| x * y))
}

/// Moments of a density; temperature uses T = (energy/rho - |u|^2) / d with d = 2.
pub fn moments(f: &Density) -> Result<MomentSet, GridError> {
    let grid = f.grid();
    let n = grid.modes();
    let v = f.values();
    let mut mass = KahanAcc::default();
    let mut mom_x = KahanAcc::default();
    let mut mom_y = KahanAcc::default();
    let mut kin = KahanAcc::default();
    for ix in 0..n {
        let vx = grid.node(ix);
        for iy in 0..n {
            let vy = grid.node(iy);
            let fj = v[[ix, iy]];
            mass.add(fj);
            mom_x.add(fj * vx);
            mom_y.add(fj * vy);
            kin.add(fj * (vx * vx + vy * vy));
        }
    }
    let dv = grid.cell_area();
    let rho = dv * mass.value();
    if !(rho > 0.0) {
        return Err(GridError::NonPositiveMass(rho));
    }
    let ux = dv * mom_x.value() / rho;
    let uy = dv * mom_y.value() / rho;
    let energy = dv * kin.value();
    let temperature = (energy / rho - (ux * ux + uy * uy)) / 2.0;
    Ok(MomentSet {
        rho,
        u: [ux, uy],
        temperature,
        energy,
    })
}

/// Entropy functional H = ∫ f log(max(f, floor)) dv + C.
///
/// Entries in [-floor, floor] are clamped to `floor` inside the logarithm
/// (this realizes the 0 log 0 = 0 convention); an entry below -floor means
/// the field is genuinely negative and is rejected.
pub fn entropy(f: &Density, offset: f64, floor: f64) -> Result<f64, GridError> {
    let min = f.min();
    if min < -floor {
        return Err(GridError::NegativeDensity { min, floor });
    }
    Ok(clamped_entropy(f, offset, floor))
}

/// Entropy with the same clamping as [`entropy`] but no negativity check;
/// the time steppers run their own threshold first.
pub fn clamped_entropy(f: &Density, offset: f64, floor: f64) -> f64 {
    let grid = f.grid();
    grid.cell_area()
        * kahan_sum(f.values().iter().map(|&x| {
            let c = x.max(floor);
            x * c.ln()
        }))
        + offset
}
