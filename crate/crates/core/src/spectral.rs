//! 2D discrete Fourier transforms on the periodic velocity grid, plus
//! spectral differentiation.
//!
//! Mode arrays are stored in FFT index order. "Physical" mode coefficients
//! c_k are those of the expansion f(v) = sum_k c_k exp(i xi_k . v) on
//! [-L, L)^2; they differ from the raw index-space DFT by a checkerboard
//! sign and the 1/N^2 normalization (the nodes start at -L, not 0).

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::GridError;
use crate::grid::{Density, VelocityGrid};

/// Cached FFT plans for one grid size. Cheap to clone (plans are shared).
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Unnormalized forward DFT in place: A_k = sum_j a_j exp(-2 pi i k.j/N).
    pub fn forward(&self, a: &mut Array2<Complex64>) {
        self.transform_2d(a, &self.fwd);
    }

    /// Unnormalized inverse DFT in place: a_j = sum_k A_k exp(+2 pi i k.j/N).
    /// The caller applies any 1/N^2 normalization.
    pub fn inverse(&self, a: &mut Array2<Complex64>) {
        self.transform_2d(a, &self.inv);
    }

    fn transform_2d(&self, a: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(a.dim(), (n, n));
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for mut row in a.rows_mut() {
            let slice = row.as_slice_mut().expect("row-major layout");
            plan.process_with_scratch(slice, &mut scratch);
        }
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = a[[i, j]];
            }
            plan.process_with_scratch(&mut col, &mut scratch);
            for i in 0..n {
                a[[i, j]] = col[i];
            }
        }
    }
}

pub(crate) fn complexify(a: &Array2<f64>) -> Array2<Complex64> {
    a.mapv(|x| Complex64::new(x, 0.0))
}

/// Checkerboard sign (-1)^(kx+ky) for the FFT storage index (ix, iy).
fn mode_sign(grid: &VelocityGrid, ix: usize, iy: usize) -> f64 {
    if (grid.freq(ix) + grid.freq(iy)) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Physical mode coefficients of a real field, FFT index order.
pub fn field_to_modes(fft: &Fft2, grid: &VelocityGrid, f: &Array2<f64>) -> Array2<Complex64> {
    let n = grid.modes();
    let mut a = complexify(f);
    fft.forward(&mut a);
    let scale = 1.0 / (n * n) as f64;
    for ix in 0..n {
        for iy in 0..n {
            a[[ix, iy]] *= mode_sign(grid, ix, iy) * scale;
        }
    }
    a
}

/// Evaluate sum_k c_k exp(i xi_k . v) at the nodes; returns the real part and
/// the relative magnitude of the imaginary residue.
pub fn modes_to_field(
    fft: &Fft2,
    grid: &VelocityGrid,
    modes: &Array2<Complex64>,
) -> (Array2<f64>, f64) {
    let n = grid.modes();
    let mut a = modes.clone();
    for ix in 0..n {
        for iy in 0..n {
            a[[ix, iy]] *= mode_sign(grid, ix, iy);
        }
    }
    fft.inverse(&mut a);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    let out = a.mapv(|z| {
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
        z.re
    });
    let residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    (out, residue)
}

/// Forward transform of a density to physical mode coefficients.
pub fn transform(f: &Density) -> Array2<Complex64> {
    let grid = f.grid();
    let fft = Fft2::new(grid.modes());
    field_to_modes(&fft, &grid, f.values())
}

/// Inverse of [`transform`]; discards the imaginary residue.
pub fn inverse_transform(grid: VelocityGrid, modes: &Array2<Complex64>) -> Result<Density, GridError> {
    if modes.dim() != grid.shape() {
        return Err(GridError::ShapeMismatch {
            expected: grid.shape(),
            found: modes.dim(),
        });
    }
    let fft = Fft2::new(grid.modes());
    let (values, _) = modes_to_field(&fft, &grid, modes);
    Density::new(grid, values)
}

/// Spectral derivative multipliers i*xi with the unpaired -N/2 mode zeroed,
/// applied to a raw (index-space) DFT in place.
pub(crate) fn apply_gradient_multiplier(
    grid: &VelocityGrid,
    spectrum: &Array2<Complex64>,
) -> (Array2<Complex64>, Array2<Complex64>) {
    let n = grid.modes();
    let mut gx = spectrum.clone();
    let mut gy = spectrum.clone();
    for ix in 0..n {
        let xix = if ix == n / 2 { 0.0 } else { grid.wavenumber(ix) };
        for iy in 0..n {
            let xiy = if iy == n / 2 { 0.0 } else { grid.wavenumber(iy) };
            let z = spectrum[[ix, iy]];
            gx[[ix, iy]] = Complex64::new(0.0, xix) * z;
            gy[[ix, iy]] = Complex64::new(0.0, xiy) * z;
        }
    }
    (gx, gy)
}

/// Spectral gradient (d/dvx, d/dvy) of a real field.
pub fn gradient(f: &Density) -> (Density, Density) {
    let grid = f.grid();
    let n = grid.modes();
    let fft = Fft2::new(n);
    let mut spec = complexify(f.values());
    fft.forward(&mut spec);
    let (mut gx, mut gy) = apply_gradient_multiplier(&grid, &spec);
    fft.inverse(&mut gx);
    fft.inverse(&mut gy);
    let scale = 1.0 / (n * n) as f64;
    let dx = gx.mapv(|z| z.re * scale);
    let dy = gy.mapv(|z| z.re * scale);
    (
        Density::new(grid, dx).expect("shape preserved"),
        Density::new(grid, dy).expect("shape preserved"),
    )
}
