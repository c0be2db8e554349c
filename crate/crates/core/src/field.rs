//! Physical and spectral field containers.
//!
//! Both containers are mode-major: the horizontal index `h = ix * ny + iy`
//! is the outer index and the vertical level `iz` the inner one, so a
//! vertical profile is one contiguous slice.

use num_complex::Complex64;

use crate::error::{QgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Shape {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn horizontal(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ny + iy) * self.nz + iz
    }

    pub fn check(&self, other: Shape) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(QgError::ShapeMismatch {
                expected: format!("{self}"),
                found: format!("{other}"),
            })
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Real nodal values on the `(x, y, z)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    shape: Shape,
    data: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(QgError::ShapeMismatch {
                expected: format!("{} values", shape.len()),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.data[self.shape.index(ix, iy, iz)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, v: f64) {
        let i = self.shape.index(ix, iy, iz);
        self.data[i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Horizontal Fourier coefficients per vertical level.
///
/// The coefficient of `e^{i(kx+ly)}` on level `iz` sits at
/// `(h * nz + iz)` where `h` is the FFT index of `(k, l)`. Real fields
/// satisfy `û(-k,-l,z) = conj(û(k,l,z))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    shape: Shape,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(QgError::ShapeMismatch {
                expected: format!("{} coefficients", shape.len()),
                found: format!("{} coefficients", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Vertical profile of horizontal mode `h`.
    pub fn profile(&self, h: usize) -> &[Complex64] {
        let nz = self.shape.nz;
        &self.data[h * nz..(h + 1) * nz]
    }

    pub fn profile_mut(&mut self, h: usize) -> &mut [Complex64] {
        let nz = self.shape.nz;
        &mut self.data[h * nz..(h + 1) * nz]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|c| *c *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        self.shape.check(other.shape)?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += o * a;
        }
        Ok(())
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Largest coefficient mismatch against Hermitian symmetry.
    pub fn hermitian_defect(&self, conj_index: impl Fn(usize) -> usize) -> f64 {
        let nz = self.shape.nz;
        let mut worst: f64 = 0.0;
        for h in 0..self.shape.horizontal() {
            let hc = conj_index(h);
            for iz in 0..nz {
                let d = self.data[h * nz + iz] - self.data[hc * nz + iz].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Replace every coefficient pair by its Hermitian average.
    pub fn enforce_hermitian(&mut self, conj_index: impl Fn(usize) -> usize) {
        let nz = self.shape.nz;
        for h in 0..self.shape.horizontal() {
            let hc = conj_index(h);
            if hc < h {
                continue;
            }
            for iz in 0..nz {
                let a = self.data[h * nz + iz];
                let b = self.data[hc * nz + iz];
                let avg = (a + b.conj()) * 0.5;
                self.data[h * nz + iz] = avg;
                self.data[hc * nz + iz] = avg.conj();
            }
        }
    }
}
