//! Fourier spectral Landau collision operator.
//!
//! Q_L(f) = div[ (A*f) grad f - (A*grad f) f ] with the matrix kernel
//! A(q) = C_L |q|^gamma (|q|^2 I - q x q). Every convolution is a periodic
//! spectral convolution against the kernel sampled at signed grid offsets
//! (components mapped to [-L, L)), and grad / div are spectral.

use ndarray::Array2;
use num_complex::Complex64;

use crate::collision::{check_grid, CollisionOperator};
use crate::error::CollisionError;
use crate::grid::{Density, VelocityGrid};
use crate::spectral::{apply_gradient_multiplier, complexify, Fft2};

/// Landau kernel A(q) = C_L |q|^gamma (|q|^2 I_2 - q x q).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandauKernel {
    pub constant: f64,
    pub gamma: f64,
}

impl LandauKernel {
    pub fn validate(&self) -> Result<(), CollisionError> {
        if !(self.constant > 0.0) {
            return Err(CollisionError::InvalidKernel(format!(
                "kernel strength must be positive (C_L={})",
                self.constant
            )));
        }
        if !(self.gamma >= -2.0 && self.gamma <= 1.0) {
            return Err(CollisionError::InvalidKernel(format!(
                "gamma={} outside [-2, 1]",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Kernel matrix at offset q, row-major [[a11, a12], [a12, a22]].
    pub fn matrix(&self, q: [f64; 2]) -> [[f64; 2]; 2] {
        let q2 = q[0] * q[0] + q[1] * q[1];
        let fac = if self.gamma == 0.0 {
            self.constant
        } else if q2 == 0.0 {
            0.0
        } else {
            self.constant * q2.powf(self.gamma / 2.0)
        };
        let a11 = fac * (q2 - q[0] * q[0]);
        let a12 = fac * (-q[0] * q[1]);
        let a22 = fac * (q2 - q[1] * q[1]);
        [[a11, a12], [a12, a22]]
    }
}

/// Spectral tables of the three independent components of the periodized
/// kernel, i.e. the raw DFT of A sampled at grid offsets.
pub struct LandauModes {
    grid: VelocityGrid,
    kernel: LandauKernel,
    a11_hat: Array2<Complex64>,
    a12_hat: Array2<Complex64>,
    a22_hat: Array2<Complex64>,
    fft: Fft2,
}

impl LandauModes {
    pub fn precompute(grid: VelocityGrid, kernel: LandauKernel) -> Result<Self, CollisionError> {
        kernel.validate()?;
        let n = grid.modes();
        let h = grid.spacing();
        let l = grid.half_width();
        // circular-convolution layout: index i maps to offset i*h wrapped
        // into [-L, L)
        let offset = |i: usize| -> f64 {
            let x = i as f64 * h;
            if i < n / 2 {
                x
            } else {
                x - 2.0 * l
            }
        };
        let mut a11 = grid.zeros();
        let mut a12 = grid.zeros();
        let mut a22 = grid.zeros();
        for ix in 0..n {
            let qx = offset(ix);
            for iy in 0..n {
                let m = kernel.matrix([qx, offset(iy)]);
                a11[[ix, iy]] = m[0][0];
                a12[[ix, iy]] = m[0][1];
                a22[[ix, iy]] = m[1][1];
            }
        }
        let fft = Fft2::new(n);
        let mut a11_hat = complexify(&a11);
        let mut a12_hat = complexify(&a12);
        let mut a22_hat = complexify(&a22);
        fft.forward(&mut a11_hat);
        fft.forward(&mut a12_hat);
        fft.forward(&mut a22_hat);
        Ok(Self {
            grid,
            kernel,
            a11_hat,
            a12_hat,
            a22_hat,
            fft,
        })
    }

    pub(crate) fn from_parts(
        grid: VelocityGrid,
        kernel: LandauKernel,
        a11_hat: Array2<Complex64>,
        a12_hat: Array2<Complex64>,
        a22_hat: Array2<Complex64>,
    ) -> Self {
        let n = grid.modes();
        Self {
            grid,
            kernel,
            a11_hat,
            a12_hat,
            a22_hat,
            fft: Fft2::new(n),
        }
    }

    pub fn kernel(&self) -> LandauKernel {
        self.kernel
    }

    pub(crate) fn tables(&self) -> [&Array2<Complex64>; 3] {
        [&self.a11_hat, &self.a12_hat, &self.a22_hat]
    }
}

impl CollisionOperator for LandauModes {
    fn grid(&self) -> VelocityGrid {
        self.grid
    }

    fn apply(&self, f: &Density) -> Result<Density, CollisionError> {
        check_grid(self.grid, f)?;
        let n = self.grid.modes();
        let inv_n2 = 1.0 / (n * n) as f64;
        let dv = self.grid.cell_area();

        let mut spec = complexify(f.values());
        self.fft.forward(&mut spec);
        let (gx_hat, gy_hat) = apply_gradient_multiplier(&self.grid, &spec);

        // grad f in physical space
        let mut fx = gx_hat.clone();
        let mut fy = gy_hat.clone();
        self.fft.inverse(&mut fx);
        self.fft.inverse(&mut fy);

        // periodic convolutions: diffusion matrix D = A*f, drift b = A*grad f
        let conv = |a: &Array2<Complex64>, g: &Array2<Complex64>| -> Array2<Complex64> {
            let mut out = a * g;
            self.fft.inverse(&mut out);
            out
        };
        let d11 = conv(&self.a11_hat, &spec);
        let d12 = conv(&self.a12_hat, &spec);
        let d22 = conv(&self.a22_hat, &spec);
        let mut b1 = &self.a11_hat * &gx_hat + &self.a12_hat * &gy_hat;
        let mut b2 = &self.a12_hat * &gx_hat + &self.a22_hat * &gy_hat;
        self.fft.inverse(&mut b1);
        self.fft.inverse(&mut b2);

        // flux = D grad f - f b, pointwise; conv results carry dv/N^2,
        // gradients 1/N^2
        let conv_scale = dv * inv_n2;
        let fv = f.values();
        let mut phi1 = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        let mut phi2 = phi1.clone();
        for ix in 0..n {
            for iy in 0..n {
                let i = [ix, iy];
                let gxr = fx[i].re * inv_n2;
                let gyr = fy[i].re * inv_n2;
                let fj = fv[i];
                let p1 = conv_scale * (d11[i].re * gxr + d12[i].re * gyr - fj * b1[i].re);
                let p2 = conv_scale * (d12[i].re * gxr + d22[i].re * gyr - fj * b2[i].re);
                phi1[i] = Complex64::new(p1, 0.0);
                phi2[i] = Complex64::new(p2, 0.0);
            }
        }

        // spectral divergence of the flux
        self.fft.forward(&mut phi1);
        self.fft.forward(&mut phi2);
        let (mut div_x, _) = apply_gradient_multiplier(&self.grid, &phi1);
        let (_, div_y) = apply_gradient_multiplier(&self.grid, &phi2);
        div_x += &div_y;
        self.fft.inverse(&mut div_x);
        let out = div_x.mapv(|z| z.re * inv_n2);
        Ok(Density::new(self.grid, out).expect("shape preserved"))
    }
}
