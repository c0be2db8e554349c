//! Harmonic lifting `G̃`: the solution of `Δ̃u = 0` with `u_z = flux` on the
//! top face, `u_z = 0` on the bottom, periodic sideways.

use num_complex::Complex64;

use crate::domain::{Domain, Grid};
use crate::error::{QgError, Result};
use crate::field::{Shape, SpectralField};

/// Top-face Neumann data, one complex coefficient per horizontal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux {
    coeffs: Vec<Complex64>,
}

impl BoundaryFlux {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); grid.shape().horizontal()],
        }
    }

    /// Hermitian symmetry is enforced; a nonzero `(0,0)` coefficient is an
    /// incompatible Neumann problem.
    pub fn new(grid: &Grid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.shape().horizontal() {
            return Err(QgError::ShapeMismatch {
                expected: format!("{} flux coefficients", grid.shape().horizontal()),
                found: format!("{}", coeffs.len()),
            });
        }
        if coeffs[0].norm() > 0.0 {
            return Err(QgError::IncompatibleFlux);
        }
        for h in 0..coeffs.len() {
            let hc = grid.conj_index(h);
            if hc > h {
                let avg = (coeffs[h] + coeffs[hc].conj()) * 0.5;
                coeffs[h] = avg;
                coeffs[hc] = avg.conj();
            } else if hc == h {
                coeffs[h] = Complex64::new(coeffs[h].re, 0.0);
            }
        }
        Ok(Self { coeffs })
    }

    /// Flux of one real boundary basis function times `amplitude`.
    pub fn from_mode(grid: &Grid, mode: BoundaryMode, amplitude: f64) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.shape().horizontal()];
        let h = grid
            .index_of(mode.k, mode.l)
            .ok_or_else(|| QgError::InvalidInput(format!("mode ({}, {}) not on grid", mode.k, mode.l)))?;
        let hc = grid.conj_index(h);
        let (plus, minus) = mode.coefficients();
        coeffs[h] += plus * amplitude;
        coeffs[hc] += minus * amplitude;
        Self::new(grid, coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    Cos,
    Sin,
}

/// Real horizontal Fourier function `cos(kx+ly)` or `sin(kx+ly)` on the
/// top face (unnormalized).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryMode {
    pub k: i64,
    pub l: i64,
    pub kind: ModeKind,
}

impl BoundaryMode {
    /// Spectral coefficients at `(k, l)` and `(-k, -l)`.
    pub fn coefficients(&self) -> (Complex64, Complex64) {
        match self.kind {
            ModeKind::Cos => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
            ModeKind::Sin => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
        }
    }

    pub fn wavenumber_sq(&self) -> i64 {
        self.k * self.k + self.l * self.l
    }
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            ModeKind::Cos => "cos",
            ModeKind::Sin => "sin",
        };
        write!(f, "{kind}({},{})", self.k, self.l)
    }
}

/// Real boundary modes on the dealiased half-plane, ordered by `k²+l²`,
/// then `(k, l)`, cosine before sine.
pub fn boundary_basis(grid: &Grid) -> Vec<BoundaryMode> {
    let mut out = Vec::new();
    for &h in grid.active_modes() {
        let (k, l) = grid.wavenumbers(h);
        if k > 0 || (k == 0 && l > 0) {
            out.push(BoundaryMode { k, l, kind: ModeKind::Cos });
            out.push(BoundaryMode { k, l, kind: ModeKind::Sin });
        }
    }
    out.sort_by_key(|m| (m.wavenumber_sq(), m.k, m.l, m.kind == ModeKind::Sin));
    out
}

/// Harmonic field carrying a prescribed top flux.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftField {
    field: SpectralField,
    flux: BoundaryFlux,
}

impl LiftField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            field: SpectralField::zeros(grid.shape()),
            flux: BoundaryFlux::zeros(grid),
        }
    }

    pub fn field(&self) -> &SpectralField {
        &self.field
    }

    pub fn flux(&self) -> &BoundaryFlux {
        &self.flux
    }

    pub fn shape(&self) -> Shape {
        self.field.shape()
    }

    pub(crate) fn from_parts(field: SpectralField, flux: BoundaryFlux) -> Self {
        Self { field, flux }
    }

    pub fn into_field(self) -> SpectralField {
        self.field
    }

    /// `Σ c_i lifts_i`; the result is harmonic by linearity.
    pub fn combine(grid: &Grid, coeffs: &[f64], lifts: &[LiftField]) -> Result<LiftField> {
        if coeffs.len() != lifts.len() {
            return Err(QgError::ShapeMismatch {
                expected: format!("{} coefficients", lifts.len()),
                found: format!("{}", coeffs.len()),
            });
        }
        let mut out = LiftField::zeros(grid);
        for (c, l) in coeffs.iter().zip(lifts) {
            if *c == 0.0 {
                continue;
            }
            out.field.axpy(*c, &l.field)?;
            for (a, b) in out.flux.coeffs.iter_mut().zip(&l.flux.coeffs) {
                *a += b * *c;
            }
        }
        Ok(out)
    }

    /// Largest per-mode residual of `(k²+L)u - b_top` relative to the
    /// profile size.
    pub fn harmonic_residual(&self, domain: &Domain) -> f64 {
        let grid = domain.grid();
        let vop = domain.vertical();
        let nz = grid.nz();
        let gain = vop.top_flux_gain();
        let mut lu = vec![Complex64::new(0.0, 0.0); nz];
        let mut worst: f64 = 0.0;
        for h in 0..grid.shape().horizontal() {
            let p = self.field.profile(h);
            let scale = p.iter().fold(0.0f64, |m, c| m.max(c.norm()));
            if scale == 0.0 {
                continue;
            }
            vop.apply(p, &mut lu);
            let k2 = grid.k2(h) as f64;
            let mut r: f64 = 0.0;
            for j in 0..nz {
                let mut v = lu[j] + p[j] * k2;
                if j == nz - 1 {
                    v -= self.flux.coeffs[h] * gain;
                }
                r = r.max(v.norm());
            }
            // Row entries scale like |u| times the largest diagonal of k² + L.
            let diag = k2 + vop.symmetric_matrix().0.iter().fold(0.0f64, |m, v| m.max(*v));
            worst = worst.max(r / (scale * diag));
        }
        worst
    }

    /// One-sided second-order estimate of `u_z` at the top face per mode.
    pub fn top_derivative(&self, domain: &Domain, h: usize) -> Complex64 {
        let nz = domain.grid().nz();
        let dz = domain.grid().dz();
        let p = self.field.profile(h);
        (p[nz - 1] * 3.0 - p[nz - 2] * 4.0 + p[nz - 3]) / (2.0 * dz)
    }
}

/// `G̃(flux)` by one tridiagonal solve per forced horizontal mode.
pub fn solve_lift(domain: &Domain, flux: &BoundaryFlux) -> Result<LiftField> {
    let grid = domain.grid();
    let shape = grid.shape();
    if flux.coeffs.len() != shape.horizontal() {
        return Err(QgError::ShapeMismatch {
            expected: format!("{} flux coefficients", shape.horizontal()),
            found: format!("{}", flux.coeffs.len()),
        });
    }
    if flux.coeffs[0].norm() > 0.0 {
        return Err(QgError::IncompatibleFlux);
    }
    let nz = grid.nz();
    let gain = domain.vertical().top_flux_gain();
    let mut field = SpectralField::zeros(shape);
    for (h, f) in flux.coeffs.iter().enumerate() {
        if f.re == 0.0 && f.im == 0.0 {
            continue;
        }
        let prof = field.profile_mut(h);
        prof[nz - 1] = f * gain;
        domain.solve_helmholtz(grid.k2(h), prof);
    }
    Ok(LiftField {
        field,
        flux: flux.clone(),
    })
}

/// Lifts of the first `n_modes` boundary basis functions.
pub fn precompute_mode_lifts(domain: &Domain, n_modes: usize) -> Result<Vec<LiftField>> {
    let basis = boundary_basis(domain.grid());
    if n_modes > basis.len() {
        return Err(QgError::InvalidInput(format!(
            "{n_modes} boundary modes requested but only {} are resolved",
            basis.len()
        )));
    }
    basis[..n_modes]
        .iter()
        .map(|m| solve_lift(domain, &BoundaryFlux::from_mode(domain.grid(), *m, 1.0)?))
        .collect()
}
