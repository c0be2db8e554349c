//! Two-dimensional complex FFT on one horizontal level, built from
//! `rustfft` row transforms and a transpose.
//!
//! Level buffers are x-major: entry `(ix, iy)` lives at `ix * ny + iy`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

/// Scratch space for one transform; reuse across levels to avoid allocation.
#[derive(Debug, Default)]
pub struct Fft2Work {
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn prepare(&self, work: &mut Fft2Work) {
        let n = self.len();
        if work.tmp.len() != n {
            work.tmp.resize(n, Complex64::new(0.0, 0.0));
        }
        let need = [
            self.fwd_x.get_inplace_scratch_len(),
            self.inv_x.get_inplace_scratch_len(),
            self.fwd_y.get_inplace_scratch_len(),
            self.inv_y.get_inplace_scratch_len(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        if work.scratch.len() < need {
            work.scratch.resize(need, Complex64::new(0.0, 0.0));
        }
    }

    /// Unnormalized forward transform, `Σ f e^{-i(kx+ly)}`.
    pub fn forward(&self, buf: &mut [Complex64], work: &mut Fft2Work) {
        self.run(buf, work, true);
    }

    /// Unnormalized inverse transform, `Σ f̂ e^{+i(kx+ly)}`.
    pub fn inverse(&self, buf: &mut [Complex64], work: &mut Fft2Work) {
        self.run(buf, work, false);
    }

    fn run(&self, buf: &mut [Complex64], work: &mut Fft2Work, forward: bool) {
        assert_eq!(buf.len(), self.len(), "level buffer has wrong length");
        self.prepare(work);
        let (fx, fy) = if forward {
            (&self.fwd_x, &self.fwd_y)
        } else {
            (&self.inv_x, &self.inv_y)
        };
        let (nx, ny) = (self.nx, self.ny);
        let scratch_y = &mut work.scratch[..fy.get_inplace_scratch_len()];
        fy.process_with_scratch(buf, scratch_y);
        transpose(buf, &mut work.tmp, nx, ny);
        let scratch_x = &mut work.scratch[..fx.get_inplace_scratch_len()];
        fx.process_with_scratch(&mut work.tmp, scratch_x);
        transpose(&work.tmp, buf, ny, nx);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_dft() {
        let (nx, ny) = (6, 4);
        let fft = Fft2::new(nx, ny);
        let data: Vec<Complex64> = (0..nx * ny)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.1).cos()))
            .collect();
        let mut buf = data.clone();
        let mut work = Fft2Work::default();
        fft.forward(&mut buf, &mut work);
        let tau = std::f64::consts::TAU;
        for kx in 0..nx {
            for ky in 0..ny {
                let mut acc = Complex64::new(0.0, 0.0);
                for ix in 0..nx {
                    for iy in 0..ny {
                        let ang = -tau * (kx * ix) as f64 / nx as f64 - tau * (ky * iy) as f64 / ny as f64;
                        acc += data[ix * ny + iy] * Complex64::from_polar(1.0, ang);
                    }
                }
                assert!((acc - buf[kx * ny + ky]).norm() < 1e-12);
            }
        }
        fft.inverse(&mut buf, &mut work);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a / (nx * ny) as f64 - b).norm() < 1e-14);
        }
    }
}
