//! The cube `(0, 2π)³`: horizontal Fourier grid, vertical Sturm–Liouville
//! discretization of the stratified Laplacian, and the transforms and
//! quadrature that tie the two together.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{QgError, Result};
use crate::fft::{Fft2, Fft2Work};
use crate::field::{PhysicalField, Shape, SpectralField};
use crate::tridiag::{symmetric_tridiag_eigen, SymTridiagFactor};

/// Collocation grid with endpoint-inclusive vertical levels
/// `z_j = j·dz`, `dz = 2π/(nz-1)`.
#[derive(Debug, Clone)]
pub struct Grid {
    shape: Shape,
    dz: f64,
    kx: Vec<i64>,
    ky: Vec<i64>,
    kept: Vec<bool>,
    active: Vec<usize>,
    kmax_x: i64,
    kmax_y: i64,
}

fn fft_wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let mut errs = Vec::new();
        if nx < 8 || !nx.is_multiple_of(2) {
            errs.push(format!("nx must be even and >= 8 (got {nx})"));
        }
        if ny < 8 || !ny.is_multiple_of(2) {
            errs.push(format!("ny must be even and >= 8 (got {ny})"));
        }
        if nz < 5 {
            errs.push(format!("nz must be >= 5 (got {nz})"));
        }
        if !errs.is_empty() {
            return Err(QgError::InvalidInput(errs.join("; ")));
        }
        let shape = Shape::new(nx, ny, nz);
        let kx: Vec<i64> = (0..nx).map(|i| fft_wavenumber(i, nx)).collect();
        let ky: Vec<i64> = (0..ny).map(|i| fft_wavenumber(i, ny)).collect();
        let kmax_x = (nx / 3) as i64;
        let kmax_y = (ny / 3) as i64;
        let mut kept = vec![false; nx * ny];
        let mut active = Vec::new();
        for ix in 0..nx {
            for iy in 0..ny {
                let h = ix * ny + iy;
                if kx[ix].abs() <= kmax_x && ky[iy].abs() <= kmax_y {
                    kept[h] = true;
                    active.push(h);
                }
            }
        }
        Ok(Self {
            shape,
            dz: TAU / (nz - 1) as f64,
            kx,
            ky,
            kept,
            active,
            kmax_x,
            kmax_y,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn nx(&self) -> usize {
        self.shape.nx
    }

    pub fn ny(&self) -> usize {
        self.shape.ny
    }

    pub fn nz(&self) -> usize {
        self.shape.nz
    }

    pub fn dx(&self) -> f64 {
        TAU / self.shape.nx as f64
    }

    pub fn dy(&self) -> f64 {
        TAU / self.shape.ny as f64
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.dy()
    }

    pub fn z(&self, iz: usize) -> f64 {
        iz as f64 * self.dz
    }

    /// Integer wavenumbers `(k, l)` of horizontal index `h`.
    pub fn wavenumbers(&self, h: usize) -> (i64, i64) {
        let ny = self.shape.ny;
        (self.kx[h / ny], self.ky[h % ny])
    }

    pub fn k2(&self, h: usize) -> u64 {
        let (k, l) = self.wavenumbers(h);
        (k * k + l * l) as u64
    }

    pub fn index_of(&self, k: i64, l: i64) -> Option<usize> {
        let (nx, ny) = (self.shape.nx as i64, self.shape.ny as i64);
        if k.abs() > nx / 2 || l.abs() > ny / 2 {
            return None;
        }
        let ix = k.rem_euclid(nx) as usize;
        let iy = l.rem_euclid(ny) as usize;
        let h = ix * self.shape.ny + iy;
        (self.wavenumbers(h) == (k, l)).then_some(h)
    }

    /// Index of the mode `(-k, -l)`.
    pub fn conj_index(&self, h: usize) -> usize {
        let (nx, ny) = (self.shape.nx, self.shape.ny);
        let ix = h / ny;
        let iy = h % ny;
        ((nx - ix) % nx) * ny + (ny - iy) % ny
    }

    /// Whether mode `h` survives the 2/3-rule truncation.
    pub fn is_kept(&self, h: usize) -> bool {
        self.kept[h]
    }

    /// Horizontal indices kept by the dealiasing mask, ascending.
    pub fn active_modes(&self) -> &[usize] {
        &self.active
    }

    pub fn dealias_limits(&self) -> (i64, i64) {
        (self.kmax_x, self.kmax_y)
    }
}

/// Coriolis parameter and buoyancy frequency sampled on the vertical levels.
#[derive(Debug, Clone, PartialEq)]
pub struct StratificationProfile {
    f0: f64,
    n: Vec<f64>,
    f: Vec<f64>,
}

impl StratificationProfile {
    pub fn new(f0: f64, n_levels: Vec<f64>) -> Result<Self> {
        if !f0.is_finite() || f0 == 0.0 {
            return Err(QgError::InvalidInput(format!(
                "f0 must be finite and nonzero (got {f0})"
            )));
        }
        if let Some((i, v)) = n_levels
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(QgError::InvalidInput(format!(
                "N(z) must be positive and finite at every level (level {i}: {v})"
            )));
        }
        let f: Vec<f64> = n_levels.iter().map(|n| f0 * f0 / (n * n)).collect();
        if let Some(v) = f.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(QgError::InvalidInput(format!(
                "F = f0²/N² must be positive and finite (got {v})"
            )));
        }
        Ok(Self { f0, n: n_levels, f })
    }

    pub fn constant(f0: f64, n: f64, nz: usize) -> Result<Self> {
        Self::new(f0, vec![n; nz])
    }

    pub fn from_fn(f0: f64, nz: usize, n_of_z: impl Fn(f64) -> f64) -> Result<Self> {
        let dz = TAU / (nz - 1) as f64;
        Self::new(f0, (0..nz).map(|j| n_of_z(j as f64 * dz)).collect())
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn n_levels(&self) -> &[f64] {
        &self.n
    }

    /// `F(z) = f0² / N²(z)` per level.
    pub fn f_levels(&self) -> &[f64] {
        &self.f
    }

    pub fn nz(&self) -> usize {
        self.n.len()
    }
}

/// Conservative second-order discretization of `-(F(z) ∂z ·)_z` with
/// ghost-point Neumann ends.
///
/// With trapezoid weights `W`, the stiffness matrix `K = W L` is exactly
/// symmetric, so `L` is self-adjoint in the level quadrature and its
/// eigenvectors are `W`-orthonormal.
#[derive(Debug, Clone)]
pub struct VerticalOperator {
    nz: usize,
    dz: f64,
    f_half: Vec<f64>,
    weights: Vec<f64>,
    stiff_diag: Vec<f64>,
    stiff_off: Vec<f64>,
    sym_diag: Vec<f64>,
    sym_off: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<f64>,
}

pub fn build_vertical_operator(
    profile: &StratificationProfile,
    nz: usize,
) -> Result<VerticalOperator> {
    if nz < 5 {
        return Err(QgError::InvalidInput(format!("nz must be >= 5 (got {nz})")));
    }
    if profile.nz() != nz {
        return Err(QgError::ShapeMismatch {
            expected: format!("{nz} levels"),
            found: format!("{} levels in the stratification profile", profile.nz()),
        });
    }
    let f = profile.f_levels();
    if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(QgError::InvalidInput("F(z) must be positive".into()));
    }
    let dz = TAU / (nz - 1) as f64;
    let f_half: Vec<f64> = f.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut weights = vec![dz; nz];
    weights[0] = 0.5 * dz;
    weights[nz - 1] = 0.5 * dz;

    let mut stiff_diag = vec![0.0; nz];
    let stiff_off: Vec<f64> = f_half.iter().map(|fh| -fh / dz).collect();
    for j in 0..nz {
        let below = if j > 0 { f_half[j - 1] } else { 0.0 };
        let above = if j + 1 < nz { f_half[j] } else { 0.0 };
        stiff_diag[j] = (below + above) / dz;
    }
    let sym_diag: Vec<f64> = (0..nz).map(|j| stiff_diag[j] / weights[j]).collect();
    let sym_off: Vec<f64> = (0..nz - 1)
        .map(|j| stiff_off[j] / (weights[j] * weights[j + 1]).sqrt())
        .collect();

    let eig = symmetric_tridiag_eigen(&sym_diag, &sym_off)?;
    let mut eigenvectors = eig.vectors;
    for k in 0..nz {
        let s = weights[k].sqrt().recip();
        for m in 0..nz {
            eigenvectors[k * nz + m] *= s;
        }
    }
    // Constant mode comes out with either sign; make it positive.
    if eigenvectors[0] < 0.0 {
        for k in 0..nz {
            eigenvectors[k * nz] = -eigenvectors[k * nz];
        }
    }

    Ok(VerticalOperator {
        nz,
        dz,
        f_half,
        weights,
        stiff_diag,
        stiff_off,
        sym_diag,
        sym_off,
        eigenvalues: eig.values,
        eigenvectors,
    })
}

impl VerticalOperator {
    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Trapezoid weights of the level quadrature (they sum to 2π).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `F` at the cell interfaces `z_{j+1/2}`.
    pub fn f_half(&self) -> &[f64] {
        &self.f_half
    }

    /// Symmetric tridiagonal form `W^{-1/2} K W^{-1/2}` as `(diag, off)`.
    pub fn symmetric_matrix(&self) -> (&[f64], &[f64]) {
        (&self.sym_diag, &self.sym_off)
    }

    /// Stiffness matrix `K = W L` as `(diag, off)`.
    pub fn stiffness(&self) -> (&[f64], &[f64]) {
        (&self.stiff_diag, &self.stiff_off)
    }

    /// `μ_0 ≤ μ_1 ≤ …`
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Value of eigenvector `m` on level `k`.
    pub fn eigenvector(&self, m: usize, k: usize) -> f64 {
        self.eigenvectors[k * self.nz + m]
    }

    /// Coefficient of the discrete flux `2F_{n-1/2}/dz` that a prescribed
    /// top-face normal derivative contributes to the last row.
    pub fn top_flux_gain(&self) -> f64 {
        2.0 * self.f_half[self.nz - 2] / self.dz
    }

    /// `L x`, the discrete `-(F x')'` with homogeneous Neumann ends.
    pub fn apply<T>(&self, x: &[T], out: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let n = self.nz;
        for j in 0..n {
            let mut acc = x[j] * self.stiff_diag[j];
            if j > 0 {
                acc = acc + x[j - 1] * self.stiff_off[j - 1];
            }
            if j + 1 < n {
                acc = acc + x[j + 1] * self.stiff_off[j];
            }
            out[j] = acc * self.weights[j].recip();
        }
    }
}

/// Smallest eigenvalue of `A` on the mean-zero subspace.
pub fn compute_lambda1(vop: &VerticalOperator) -> f64 {
    // (1,0,m=0) has eigenvalue exactly 1; (0,0,m=1) has μ_1.
    vop.eigenvalues()[1].min(1.0)
}

/// Grid, vertical operator, FFT plans and the Helmholtz factorizations
/// `(k²+l²) W + K` for every horizontal wavenumber magnitude.
#[derive(Debug)]
pub struct Domain {
    grid: Grid,
    profile: StratificationProfile,
    vertical: VerticalOperator,
    fft: Fft2,
    helmholtz: BTreeMap<u64, SymTridiagFactor>,
    pinned: SymTridiagFactor,
}

impl Domain {
    pub fn new(grid: Grid, profile: StratificationProfile) -> Result<Self> {
        let vertical = build_vertical_operator(&profile, grid.nz())?;
        let fft = Fft2::new(grid.nx(), grid.ny());
        let (kd, ko) = vertical.stiffness();
        let w = vertical.weights();
        let mut helmholtz = BTreeMap::new();
        for h in 0..grid.shape().horizontal() {
            let k2 = grid.k2(h);
            if k2 == 0 || helmholtz.contains_key(&k2) {
                continue;
            }
            let diag: Vec<f64> = kd.iter().zip(w).map(|(k, w)| k + k2 as f64 * w).collect();
            helmholtz.insert(k2, SymTridiagFactor::new(&diag, ko)?);
        }
        // Neumann problem with the bottom level pinned to zero.
        let pinned = SymTridiagFactor::new(&kd[1..], &ko[1..])?;
        Ok(Self {
            grid,
            profile,
            vertical,
            fft,
            helmholtz,
            pinned,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> Shape {
        self.grid.shape()
    }

    pub fn profile(&self) -> &StratificationProfile {
        &self.profile
    }

    pub fn vertical(&self) -> &VerticalOperator {
        &self.vertical
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn lambda1(&self) -> f64 {
        compute_lambda1(&self.vertical)
    }

    /// Solve `(k² + L) x = rhs` in place for `k² > 0`.
    pub fn solve_helmholtz(&self, k2: u64, rhs: &mut [Complex64]) {
        let w = self.vertical.weights();
        for (r, w) in rhs.iter_mut().zip(w) {
            *r *= *w;
        }
        self.helmholtz[&k2].solve_in_place(rhs);
    }

    /// Solve `L x = rhs` for a `W`-mean-zero right-hand side; returns the
    /// `W`-mean-zero solution.
    pub fn solve_neumann(&self, rhs: &mut [Complex64]) {
        let w = self.vertical.weights();
        let n = rhs.len();
        let mut tail: Vec<Complex64> = (1..n).map(|j| rhs[j] * w[j]).collect();
        self.pinned.solve_in_place(&mut tail);
        rhs[0] = Complex64::new(0.0, 0.0);
        rhs[1..].copy_from_slice(&tail);
        let mean = weighted_sum(rhs, w) / TAU;
        rhs.iter_mut().for_each(|r| *r -= mean);
    }

    pub fn forward_transform(&self, f: &PhysicalField) -> Result<SpectralField> {
        let shape = self.shape();
        shape.check(f.shape())?;
        let (nx, ny, nz) = (shape.nx, shape.ny, shape.nz);
        let norm = ((nx * ny) as f64).recip();
        let mut out = SpectralField::zeros(shape);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
        let mut work = Fft2Work::default();
        for iz in 0..nz {
            for h in 0..nx * ny {
                buf[h] = Complex64::new(f.data()[h * nz + iz], 0.0);
            }
            self.fft.forward(&mut buf, &mut work);
            let data = out.data_mut();
            for h in 0..nx * ny {
                data[h * nz + iz] = buf[h] * norm;
            }
        }
        out.enforce_hermitian(|h| self.grid.conj_index(h));
        Ok(out)
    }

    pub fn inverse_transform(&self, f: &SpectralField) -> Result<PhysicalField> {
        let shape = self.shape();
        shape.check(f.shape())?;
        let (nx, ny, nz) = (shape.nx, shape.ny, shape.nz);
        let mut out = PhysicalField::zeros(shape);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
        let mut work = Fft2Work::default();
        for iz in 0..nz {
            for h in 0..nx * ny {
                buf[h] = f.data()[h * nz + iz];
            }
            self.fft.inverse(&mut buf, &mut work);
            let data = out.data_mut();
            for h in 0..nx * ny {
                data[h * nz + iz] = buf[h].re;
            }
        }
        Ok(out)
    }

    /// `(u, v)_H = ∫_O u v`: exact trigonometric quadrature horizontally,
    /// trapezoid vertically.
    pub fn inner(&self, u: &SpectralField, v: &SpectralField) -> f64 {
        let nz = self.grid.nz();
        let w = self.vertical.weights();
        let mut acc = 0.0;
        for (pu, pv) in u.data().chunks_exact(nz).zip(v.data().chunks_exact(nz)) {
            for j in 0..nz {
                acc += w[j] * (pu[j].re * pv[j].re + pu[j].im * pv[j].im);
            }
        }
        TAU * TAU * acc
    }

    pub fn norm_h(&self, u: &SpectralField) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Domain average `|O|^{-1} ∫_O u`.
    pub fn mean(&self, u: &SpectralField) -> f64 {
        weighted_sum(u.profile(0), self.vertical.weights()).re / TAU
    }

    pub fn project_mean_zero(&self, u: &mut SpectralField) {
        let mean = self.mean(u);
        if mean != 0.0 {
            u.profile_mut(0).iter_mut().for_each(|c| c.re -= mean);
        }
    }

    /// Error unless the domain average vanishes relative to the field size.
    pub fn check_mean_zero(&self, u: &SpectralField) -> Result<()> {
        let mean = self.mean(u);
        let vol = TAU * TAU * TAU;
        let scale = self.norm_h(u) / vol.sqrt();
        if mean.abs() <= 1e-9 * scale || mean.abs() < 1e-300 {
            Ok(())
        } else {
            Err(QgError::NotMeanZero { mean })
        }
    }

    /// Spectral `∂x`.
    pub fn dx(&self, u: &SpectralField) -> SpectralField {
        self.derivative(u, true)
    }

    /// Spectral `∂y`.
    pub fn dy(&self, u: &SpectralField) -> SpectralField {
        self.derivative(u, false)
    }

    fn derivative(&self, u: &SpectralField, along_x: bool) -> SpectralField {
        let nx = self.grid.nx() as i64;
        let ny = self.grid.ny() as i64;
        let mut out = u.clone();
        for h in 0..self.shape().horizontal() {
            let (k, l) = self.grid.wavenumbers(h);
            let (wn, n) = if along_x { (k, nx) } else { (l, ny) };
            // The Nyquist derivative of a real field is zero.
            let factor = if wn.abs() * 2 == n { 0.0 } else { wn as f64 };
            out.profile_mut(h)
                .iter_mut()
                .for_each(|c| *c = Complex64::new(-c.im * factor, c.re * factor));
        }
        out
    }

    /// Coefficients of each vertical profile in the `W`-orthonormal
    /// eigenbasis, `c_m = Σ_z φ_m(z) w_z û(z)`.
    pub fn to_modal(&self, u: &SpectralField) -> SpectralField {
        let nz = self.grid.nz();
        let w = self.vertical.weights();
        let mut out = SpectralField::zeros(u.shape());
        let mut weighted = vec![Complex64::new(0.0, 0.0); nz];
        for (src, dst) in u.data().chunks_exact(nz).zip(out.data_mut().chunks_exact_mut(nz)) {
            if src.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            for j in 0..nz {
                weighted[j] = src[j] * w[j];
            }
            for (m, d) in dst.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, wk) in weighted.iter().enumerate() {
                    acc += wk * self.vertical.eigenvector(m, k);
                }
                *d = acc;
            }
        }
        out
    }

    pub fn from_modal(&self, c: &SpectralField) -> SpectralField {
        let nz = self.grid.nz();
        let mut out = SpectralField::zeros(c.shape());
        for (src, dst) in c.data().chunks_exact(nz).zip(out.data_mut().chunks_exact_mut(nz)) {
            if src.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            for (k, d) in dst.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, s) in src.iter().enumerate() {
                    acc += s * self.vertical.eigenvector(m, k);
                }
                *d = acc;
            }
        }
        out
    }

    /// Eigenvalue of `A` for horizontal mode `h` and vertical mode `m`.
    pub fn a_eigenvalue(&self, h: usize, m: usize) -> f64 {
        self.grid.k2(h) as f64 + self.vertical.eigenvalues()[m]
    }
}

fn weighted_sum(x: &[Complex64], w: &[f64]) -> Complex64 {
    x.iter().zip(w).map(|(x, w)| x * w).sum()
}
