//! Linear operators `A`, `G = Δ̃⁻¹ = -A⁻¹`, the dealiased Jacobian and the
//! composite terms of the transformed evolution equation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::domain::Domain;
use crate::error::{QgError, Result};
use crate::fft::Fft2Work;
use crate::field::SpectralField;
use crate::lift::LiftField;

/// `‖u‖_H`, `‖u‖_V = ⟨Au,u⟩^{1/2}`, `‖u‖_{V'} = ⟨A⁻¹u,u⟩^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub h: f64,
    pub v: f64,
    pub vdual: f64,
}

/// Jacobian together with the largest gradient components of its first
/// argument (the advecting streamfunction).
#[derive(Debug, Clone)]
pub struct JacobianOutput {
    pub field: SpectralField,
    pub max_ax: f64,
    pub max_ay: f64,
}

#[derive(Debug, Clone)]
pub struct OperatorContext {
    domain: Arc<Domain>,
    nu: f64,
    beta: f64,
}

impl OperatorContext {
    pub fn new(domain: Arc<Domain>, nu: f64, beta: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(QgError::InvalidInput(format!(
                "viscosity must be positive (got {nu})"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(QgError::InvalidInput(format!(
                "beta must be nonnegative (got {beta})"
            )));
        }
        Ok(Self { domain, nu, beta })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda1(&self) -> f64 {
        self.domain.lambda1()
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.domain.clone(), self.nu, beta)
    }

    pub fn apply_a(&self, u: &SpectralField) -> Result<SpectralField> {
        self.domain.shape().check(u.shape())?;
        self.domain.check_mean_zero(u)?;
        Ok(self.apply_a_unchecked(u))
    }

    pub(crate) fn apply_a_unchecked(&self, u: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(u.shape());
        if u.is_zero() {
            return out;
        }
        let grid = self.domain.grid();
        let vop = self.domain.vertical();
        for h in 0..grid.shape().horizontal() {
            let src = u.profile(h);
            if src.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            let k2 = grid.k2(h) as f64;
            let dst = out.profile_mut(h);
            vop.apply(src, dst);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * k2;
            }
        }
        out
    }

    /// `G f`, the mean-zero solution of `Δ̃ξ = f` with homogeneous Neumann
    /// ends; equal to `-A⁻¹ f`.
    pub fn apply_g(&self, f: &SpectralField) -> Result<SpectralField> {
        self.domain.shape().check(f.shape())?;
        self.domain.check_mean_zero(f)?;
        Ok(self.apply_g_unchecked(f))
    }

    pub(crate) fn apply_g_unchecked(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        if f.is_zero() {
            return out;
        }
        let grid = self.domain.grid();
        for h in 0..grid.shape().horizontal() {
            let prof = out.profile_mut(h);
            if prof.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            let k2 = grid.k2(h);
            if k2 == 0 {
                self.domain.solve_neumann(prof);
            } else {
                self.domain.solve_helmholtz(k2, prof);
            }
            prof.iter_mut().for_each(|c| *c = -*c);
        }
        out
    }

    /// `J(a, b) = a_x b_y - a_y b_x`, evaluated level by level on the
    /// collocation grid from the 2/3-truncated inputs and truncated again.
    pub fn jacobian(&self, a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
        Ok(self.jacobian_full(a, b)?.field)
    }

    pub fn jacobian_full(&self, a: &SpectralField, b: &SpectralField) -> Result<JacobianOutput> {
        let shape = self.domain.shape();
        shape.check(a.shape())?;
        shape.check(b.shape())?;
        let mut out = JacobianOutput {
            field: SpectralField::zeros(shape),
            max_ax: 0.0,
            max_ay: 0.0,
        };
        if a.is_zero() {
            return Ok(out);
        }
        let grid = self.domain.grid();
        let fft = self.domain.fft();
        let (nx, ny, nz) = (shape.nx, shape.ny, shape.nz);
        let norm = ((nx * ny) as f64).recip();
        let active = grid.active_modes();
        let zero = Complex64::new(0.0, 0.0);
        let mut pa = vec![zero; nx * ny];
        let mut pb = vec![zero; nx * ny];
        let mut work = Fft2Work::default();
        let b_zero = b.is_zero();

        for iz in 0..nz {
            pa.fill(zero);
            pb.fill(zero);
            for &h in active {
                let (k, l) = grid.wavenumbers(h);
                let (k, l) = (k as f64, l as f64);
                // ik·c - l·c packs the x and y derivatives into one transform.
                let ca = a.data()[h * nz + iz];
                pa[h] = Complex64::new(-k * ca.im - l * ca.re, k * ca.re - l * ca.im);
                let cb = b.data()[h * nz + iz];
                pb[h] = Complex64::new(-k * cb.im - l * cb.re, k * cb.re - l * cb.im);
            }
            fft.inverse(&mut pa, &mut work);
            for p in &pa {
                out.max_ax = out.max_ax.max(p.re.abs());
                out.max_ay = out.max_ay.max(p.im.abs());
            }
            if b_zero {
                continue;
            }
            fft.inverse(&mut pb, &mut work);
            for (x, y) in pa.iter_mut().zip(&pb) {
                // Im(conj(a_x + i a_y)(b_x + i b_y)) = a_x b_y - a_y b_x
                *x = Complex64::new(x.re * y.im - x.im * y.re, 0.0);
            }
            fft.forward(&mut pa, &mut work);
            let data = out.field.data_mut();
            for &h in active {
                data[h * nz + iz] = pa[h] * norm;
            }
        }
        out.field.enforce_hermitian(|h| grid.conj_index(h));
        self.domain.project_mean_zero(&mut out.field);
        Ok(out)
    }

    /// `B(u) = J(G u, u)`.
    pub fn apply_b(&self, u: &SpectralField) -> Result<SpectralField> {
        let gu = self.apply_g(u)?;
        self.jacobian(&gu, u)
    }

    /// `C(lift, u) = J(lift, u)`.
    pub fn apply_c(&self, lift: &LiftField, u: &SpectralField) -> Result<SpectralField> {
        self.jacobian(lift.field(), u)
    }

    /// `D(u) = β ∂x G(u)`.
    pub fn apply_d(&self, u: &SpectralField) -> Result<SpectralField> {
        self.domain.shape().check(u.shape())?;
        self.domain.check_mean_zero(u)?;
        Ok(self.apply_d_unchecked(u))
    }

    pub(crate) fn apply_d_unchecked(&self, u: &SpectralField) -> SpectralField {
        if self.beta == 0.0 || u.is_zero() {
            return SpectralField::zeros(u.shape());
        }
        let mut out = self.domain.dx(&self.apply_g_unchecked(u));
        out.scale(self.beta);
        out
    }

    /// `f = β(G(Δ̃η)_x - η_x) = -β ∂x lift`.
    pub fn forcing_f(&self, lift: &LiftField) -> SpectralField {
        let mut out = self.domain.dx(lift.field());
        out.scale(-self.beta);
        self.domain.project_mean_zero(&mut out);
        out
    }

    pub fn norms(&self, u: &SpectralField) -> Result<Norms> {
        self.domain.shape().check(u.shape())?;
        self.domain.check_mean_zero(u)?;
        Ok(self.norms_unchecked(u))
    }

    pub(crate) fn norms_unchecked(&self, u: &SpectralField) -> Norms {
        if u.is_zero() {
            return Norms {
                h: 0.0,
                v: 0.0,
                vdual: 0.0,
            };
        }
        let h2 = self.domain.inner(u, u);
        let v2 = self.domain.inner(&self.apply_a_unchecked(u), u);
        let d2 = -self.domain.inner(&self.apply_g_unchecked(u), u);
        Norms {
            h: h2.max(0.0).sqrt(),
            v: v2.max(0.0).sqrt(),
            vdual: d2.max(0.0).sqrt(),
        }
    }

    /// `‖u‖²_{V'}`.
    pub fn vdual_sq(&self, u: &SpectralField) -> f64 {
        if u.is_zero() {
            return 0.0;
        }
        (-self.domain.inner(&self.apply_g_unchecked(u), u)).max(0.0)
    }
}
