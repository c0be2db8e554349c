//! Time stepping of `u_t + νAu + B(u) + C(t,u) + D(u) = f(t)`, the energy
//! budget and the scalar comparison process `ξ`.

use num_complex::Complex64;

use crate::error::{QgError, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::forcing::{Forcing, OUBoundaryState};
use crate::lift::LiftField;
use crate::operators::OperatorContext;

/// Which parts of the nonlinear/forcing term are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub b: bool,
    pub c: bool,
    pub d: bool,
    pub f: bool,
}

impl Terms {
    pub fn all() -> Self {
        Self {
            b: true,
            c: true,
            d: true,
            f: true,
        }
    }

    pub fn none() -> Self {
        Self {
            b: false,
            c: false,
            d: false,
            f: false,
        }
    }
}

impl Default for Terms {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: SpectralField,
    pub tick: i64,
    pub t: f64,
    pub ou: OUBoundaryState,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub h: f64,
    pub v: f64,
    pub vdual_liftx: f64,
    pub xi: f64,
    pub residual: f64,
    pub dt: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [self.t, self.h, self.v, self.vdual_liftx, self.xi, self.residual, self.dt]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: SimState,
    pub record: DiagnosticsRecord,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, SpectralField)>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
}

/// Integrating-factor Heun scheme on the tick grid of the forcing.
///
/// With `E = e^{-νA dt}` applied exactly in the separable eigenbasis,
/// `u* = E(u + dt N(u, t))` and
/// `u⁺ = E(u + dt/2 N(u, t)) + dt/2 N(u*, t + dt)`.
#[derive(Debug, Clone)]
pub struct Integrator {
    ctx: OperatorContext,
    forcing: Forcing,
    terms: Terms,
    dt: f64,
    /// `e^{-νk²dt}` per horizontal mode.
    decay_h: Vec<f64>,
    /// `Φ diag(e^{-νμ_m dt}) Φᵀ W`, row-major.
    decay_v: Vec<f64>,
    check_cfl: bool,
}

struct Rhs {
    value: SpectralField,
    max_ax: f64,
    max_ay: f64,
}

impl Integrator {
    pub fn new(ctx: OperatorContext, forcing: Forcing, terms: Terms) -> Result<Self> {
        let dt = forcing.dt();
        let domain = ctx.domain();
        let grid = domain.grid();
        let nz = grid.nz();
        let vop = domain.vertical();
        let decay_h = (0..grid.shape().horizontal())
            .map(|h| (-ctx.nu() * grid.k2(h) as f64 * dt).exp())
            .collect();
        let ev: Vec<f64> = vop.eigenvalues().iter().map(|mu| (-ctx.nu() * mu * dt).exp()).collect();
        let w = vop.weights();
        let mut decay_v = vec![0.0; nz * nz];
        for i in 0..nz {
            for j in 0..nz {
                decay_v[i * nz + j] = (0..nz)
                    .map(|m| vop.eigenvector(m, i) * ev[m] * vop.eigenvector(m, j))
                    .sum::<f64>()
                    * w[j];
            }
        }
        Ok(Self {
            ctx,
            forcing,
            terms,
            dt,
            decay_h,
            decay_v,
            check_cfl: true,
        })
    }

    /// Same integrator driven by `θ_s ω`, `s = ticks·dt`.
    pub fn shifted(&self, ticks: i64) -> Self {
        let mut out = self.clone();
        out.forcing = self.forcing.shifted(ticks);
        out
    }

    pub fn with_cfl_check(mut self, on: bool) -> Self {
        self.check_cfl = on;
        self
    }

    pub fn ctx(&self) -> &OperatorContext {
        &self.ctx
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn terms(&self) -> Terms {
        self.terms
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// State at `tick` with `ξ` started at `‖u0‖²_H`.
    pub fn initial_state(&self, u0: SpectralField, tick: i64) -> Result<SimState> {
        let d = self.ctx.domain();
        d.shape().check(u0.shape())?;
        d.check_mean_zero(&u0)?;
        if !u0.is_finite() {
            return Err(QgError::NonFinite {
                t: self.forcing.time(tick),
                what: "initial field".into(),
            });
        }
        let xi = d.inner(&u0, &u0);
        Ok(SimState {
            u: u0,
            tick,
            t: self.forcing.time(tick),
            ou: self.forcing.ou_state(tick)?,
            xi,
        })
    }

    /// `e^{-νA dt} x`.
    pub fn apply_decay(&self, x: &SpectralField) -> SpectralField {
        let nz = self.ctx.domain().grid().nz();
        let mut out = SpectralField::zeros(x.shape());
        for (h, (src, dst)) in x.data().chunks_exact(nz).zip(out.data_mut().chunks_exact_mut(nz)).enumerate() {
            if src.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            let eh = self.decay_h[h];
            for (i, d) in dst.iter_mut().enumerate() {
                let row = &self.decay_v[i * nz..(i + 1) * nz];
                let (mut re, mut im) = (0.0, 0.0);
                for (a, c) in row.iter().zip(src) {
                    re += a * c.re;
                    im += a * c.im;
                }
                *d = Complex64::new(eh * re, eh * im);
            }
        }
        out
    }

    fn rhs(&self, u: &SpectralField, lift: &LiftField) -> Result<Rhs> {
        let d = self.ctx.domain();
        let gu = (self.terms.b || self.terms.d).then(|| self.ctx.apply_g_unchecked(u));
        let mut stream = match (&gu, self.terms.b) {
            (Some(g), true) => g.clone(),
            _ => SpectralField::zeros(u.shape()),
        };
        if self.terms.c {
            stream.axpy(1.0, lift.field())?;
        }
        let jac = self.ctx.jacobian_full(&stream, u)?;
        let mut value = jac.field;
        value.scale(-1.0);
        // -D(u) + f = -β ∂x (G u + lift)
        let mut drift = SpectralField::zeros(u.shape());
        if let (Some(g), true) = (&gu, self.terms.d) {
            drift.axpy(1.0, g)?;
        }
        if self.terms.f {
            drift.axpy(1.0, lift.field())?;
        }
        if self.ctx.beta() != 0.0 && !drift.is_zero() {
            value.axpy(-self.ctx.beta(), &d.dx(&drift))?;
        }
        d.project_mean_zero(&mut value);
        Ok(Rhs {
            value,
            max_ax: jac.max_ax,
            max_ay: jac.max_ay,
        })
    }

    /// `N(u, t) = f - B(u) - C(t,u) - D(u)` with the configured terms.
    pub fn nonlinear(&self, u: &SpectralField, tick: i64) -> Result<SpectralField> {
        let lift = self.forcing.lift(tick)?;
        Ok(self.rhs(u, &lift)?.value)
    }

    /// `⟨N(u, t), u⟩`; only the forcing contributes when the conservation
    /// identities hold.
    pub fn energy_rate(&self, u: &SpectralField, tick: i64) -> Result<f64> {
        Ok(self.ctx.domain().inner(&self.nonlinear(u, tick)?, u))
    }

    fn cfl(&self, rhs: &Rhs, t: f64) -> Result<()> {
        if !self.check_cfl {
            return Ok(());
        }
        let d = self.ctx.domain().grid();
        let lim_x = if rhs.max_ay > 0.0 { d.dx() / rhs.max_ay } else { f64::INFINITY };
        let lim_y = if rhs.max_ax > 0.0 { d.dy() / rhs.max_ax } else { f64::INFINITY };
        let limit = 0.5 * lim_x.min(lim_y);
        if self.dt > limit {
            return Err(QgError::Cfl {
                t,
                dt: self.dt,
                suggested: limit,
            });
        }
        Ok(())
    }

    /// One step without diagnostics; returns the new state and the
    /// forcing coefficients at both ends.
    fn step_core(&self, state: &SimState) -> Result<(SimState, Vec<f64>, Vec<f64>, f64)> {
        let d = self.ctx.domain();
        let dt = self.dt;
        let g0 = state.tick;
        let g1 = g0 + 1;
        let t1 = self.forcing.time(g1);
        let c0 = self.forcing.coefficients(g0)?;
        let c1 = self.forcing.coefficients(g1)?;
        let lift0 = self.forcing.lift_from_coefficients(&c0);
        let lift1 = self.forcing.lift_from_coefficients(&c1);

        let n0 = self.rhs(&state.u, &lift0)?;
        self.cfl(&n0, state.t)?;
        let mut half = state.u.clone();
        half.axpy(0.5 * dt, &n0.value)?;
        let e_half = self.apply_decay(&half);
        let e_n0 = self.apply_decay(&n0.value);
        let mut star = e_half.clone();
        star.axpy(0.5 * dt, &e_n0)?;
        d.project_mean_zero(&mut star);

        let n1 = self.rhs(&star, &lift1)?;
        self.cfl(&n1, t1)?;
        let mut u1 = e_half;
        u1.axpy(0.5 * dt, &n1.value)?;
        d.project_mean_zero(&mut u1);

        if !u1.is_finite() {
            return Err(QgError::NonFinite {
                t: t1,
                what: "state u".into(),
            });
        }

        let s0 = self.forcing.source_from_coefficients(&c0);
        let s1 = self.forcing.source_from_coefficients(&c1);
        let xi = xi_step(state.xi, s0, s1, dt, &self.ctx);

        let norm_sq = d.inner(&u1, &u1);
        let limit = 1e3 * (2.0 * xi.max(1e-300)).sqrt();
        if norm_sq.sqrt() > limit && norm_sq > 1e-20 {
            return Err(QgError::BlowUp {
                t: t1,
                norm: norm_sq.sqrt(),
                limit,
            });
        }

        let next = SimState {
            u: u1,
            tick: g1,
            t: t1,
            ou: self.forcing.ou_state(g1)?,
            xi,
        };
        Ok((next, c0, c1, s1))
    }

    pub fn step(&self, state: &SimState) -> Result<StepOutput> {
        let dt = self.dt;
        let (next, c0, c1, s1) = self.step_core(state)?;
        let t1 = next.t;
        let xi = next.xi;
        let cmid: Vec<f64> = c0.iter().zip(&c1).map(|(a, b)| 0.5 * (a + b)).collect();
        let lift_mid = self.forcing.lift_from_coefficients(&cmid);
        let residual = energy_budget(&self.ctx, state, &next, &lift_mid, dt);
        let norms = self.ctx.norms_unchecked(&next.u);
        let record = DiagnosticsRecord {
            t: t1,
            h: norms.h,
            v: norms.v,
            vdual_liftx: s1.sqrt(),
            xi,
            residual,
            dt,
        };
        if !record.is_finite() {
            return Err(QgError::NonFinite {
                t: t1,
                what: "diagnostics".into(),
            });
        }
        Ok(StepOutput {
            state: next,
            record,
        })
    }

    /// Advance `n_steps` without recording anything.
    pub fn advance(&self, mut state: SimState, n_steps: usize) -> Result<SimState> {
        self.forcing.check_ticks(state.tick, state.tick + n_steps as i64)?;
        for _ in 0..n_steps {
            state = self.step_core(&state)?.0;
        }
        Ok(state)
    }

    /// Run from `t0` to `t1`, keeping a snapshot every `snapshot_every`
    /// steps (0 keeps only the endpoints) and a diagnostics record per step.
    pub fn simulate(&self, u0: SpectralField, t0: f64, t1: f64, snapshot_every: usize) -> Result<Trajectory> {
        if !(t0 < t1) {
            return Err(QgError::InvalidInput(format!("need t0 < t1 (got {t0}, {t1})")));
        }
        let g0 = self.forcing.tick_of(t0)?;
        let g1 = self.forcing.tick_of(t1)?;
        self.forcing.check_ticks(g0, g1)?;
        let mut state = self.initial_state(u0, g0)?;
        let mut snapshots = vec![(state.t, state.u.clone())];
        let mut diagnostics = Vec::with_capacity((g1 - g0) as usize);
        for k in 1..=(g1 - g0) as usize {
            let out = self.step(&state)?;
            state = out.state;
            diagnostics.push(out.record);
            if ((snapshot_every > 0 && k % snapshot_every == 0) || k == (g1 - g0) as usize)
                && snapshots.last().map(|s| s.0) != Some(state.t) {
                    snapshots.push((state.t, state.u.clone()));
                }
        }
        Ok(Trajectory {
            snapshots,
            diagnostics,
            final_state: state,
        })
    }
}

/// Discrete energy balance over one step, with the midpoint rule for the
/// dissipation and forcing work:
/// `Δ‖u‖² + 2ν‖u_mid‖²_V Δt + 2β⟨lift_x, u_mid⟩Δt`.
pub fn energy_budget(ctx: &OperatorContext, prev: &SimState, next: &SimState, lift_mid: &LiftField, dt: f64) -> f64 {
    let d = ctx.domain();
    if prev.u.is_zero() && next.u.is_zero() {
        return 0.0;
    }
    let mut mid = prev.u.clone();
    mid.axpy(1.0, &next.u).expect("same shape");
    mid.scale(0.5);
    let dh = d.inner(&next.u, &next.u) - d.inner(&prev.u, &prev.u);
    let v2 = d.inner(&ctx.apply_a_unchecked(&mid), &mid);
    let lx = d.dx(lift_mid.field());
    dh + 2.0 * ctx.nu() * v2 * dt + 2.0 * ctx.beta() * d.inner(&lx, &mid) * dt
}

/// `h φ₁(x)` weights for a source varying linearly over the step:
/// returns `(a0, a1)` with `∫₀ʰ e^{-κ(h-s)} S(s) ds = a0 S0 + a1 S1`.
fn linear_source_weights(kappa: f64, h: f64) -> (f64, f64) {
    let x = kappa * h;
    if x.abs() < 1e-4 {
        // Series in x to O(x³).
        let a0 = h * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        let a1 = h * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0);
        return (a0, a1);
    }
    let em = (-x).exp();
    let phi1 = -(-x).exp_m1() / x;
    let a0 = h * (1.0 - em * (1.0 + x)) / (x * x);
    (a0, h * phi1 - a0)
}

/// Exact solution of `ξ' + νλ₁ξ = (β²/ν) S(t)` over one step with `S`
/// linear between its endpoint values. For `S0 = S1` this is the usual
/// exponential update with the source frozen.
pub fn xi_step(xi: f64, source0: f64, source1: f64, dt: f64, ctx: &OperatorContext) -> f64 {
    let kappa = ctx.nu() * ctx.lambda1();
    let gain = ctx.beta() * ctx.beta() / ctx.nu();
    let (a0, a1) = linear_source_weights(kappa, dt);
    (-kappa * dt).exp() * xi + gain * (a0 * source0 + a1 * source1)
}

/// `Δ̃ψ` for a field whose top flux is `flux`: `-(k² + L)ψ` plus the
/// ghost-point flux contribution.
pub fn modified_laplacian(ctx: &OperatorContext, psi: &SpectralField, flux: &[Complex64]) -> SpectralField {
    let d = ctx.domain();
    let nz = d.grid().nz();
    let gain = d.vertical().top_flux_gain();
    let mut out = ctx.apply_a_unchecked(psi);
    out.scale(-1.0);
    for (h, f) in flux.iter().enumerate() {
        out.profile_mut(h)[nz - 1] += f * gain;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub psi_hat: SpectralField,
    pub psi: PhysicalField,
    pub pv: PhysicalField,
}

/// `ψ = G(u) + lift` and the potential vorticity `u + f₀ + βy`.
pub fn reconstruct_streamfunction(u: &SpectralField, lift: &LiftField, ctx: &OperatorContext) -> Result<Reconstruction> {
    let d = ctx.domain();
    let mut psi_hat = ctx.apply_g(u)?;
    psi_hat.axpy(1.0, lift.field())?;
    let psi = d.inverse_transform(&psi_hat)?;
    let mut pv = d.inverse_transform(u)?;
    let f0 = d.profile().f0();
    let g = d.grid();
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let y = g.y(iy);
            for iz in 0..g.nz() {
                let v = pv.get(ix, iy, iz) + f0 + ctx.beta() * y;
                pv.set(ix, iy, iz, v);
            }
        }
    }
    Ok(Reconstruction { psi_hat, psi, pv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Grid, StratificationProfile};
    use crate::forcing::{NoiseModel, NoisePath};
    use std::sync::Arc;

    fn setup(nu: f64, beta: f64, q0: f64, terms: Terms) -> Integrator {
        let grid = Grid::new(16, 16, 9).unwrap();
        let d = Domain::new(grid, StratificationProfile::constant(1.0, 1.0, 9).unwrap()).unwrap();
        let ctx = OperatorContext::new(Arc::new(d), nu, beta).unwrap();
        let model = NoiseModel::new(ctx.domain().grid(), 4, q0, 3.0, 1.0, 0.05).unwrap();
        let path = NoisePath::generate(9, 4, 0.05, 0, 200).unwrap();
        let f = Forcing::new(&ctx, model, Some(&path), None, 0.025).unwrap();
        Integrator::new(ctx, f, terms).unwrap()
    }

    fn eigenmode(it: &Integrator, k: i64, l: i64, m: usize) -> (SpectralField, f64) {
        let d = it.ctx().domain();
        let h = d.grid().index_of(k, l).unwrap();
        let hc = d.grid().conj_index(h);
        let mut u = SpectralField::zeros(d.shape());
        for iz in 0..d.grid().nz() {
            let v = d.vertical().eigenvector(m, iz);
            u.profile_mut(h)[iz] = Complex64::new(v, 0.0);
            u.profile_mut(hc)[iz] = Complex64::new(v, 0.0);
        }
        (u, d.a_eigenvalue(h, m))
    }

    #[test]
    fn linear_decay_is_exact() {
        let it = setup(0.3, 0.0, 0.0, Terms::none());
        let (u, lam) = eigenmode(&it, 2, 1, 3);
        let s = it.initial_state(u.clone(), 0).unwrap();
        let out = it.advance(s, 10).unwrap();
        let want = u.scaled((-0.3 * lam * 10.0 * it.dt()).exp());
        let err = out.u.sub(&want).unwrap();
        assert!(it.ctx().domain().norm_h(&err) < 1e-13 * it.ctx().domain().norm_h(&u));
    }

    #[test]
    fn zero_stays_zero() {
        let it = setup(0.3, 1.0, 0.0, Terms::all());
        let s = it.initial_state(SpectralField::zeros(it.ctx().domain().shape()), 0).unwrap();
        let out = it.advance(s, 5).unwrap();
        assert!(out.u.is_zero());
        assert_eq!(out.xi, 0.0);
    }

    #[test]
    fn xi_fixed_point_and_decay() {
        let it = setup(0.5, 2.0, 1.0, Terms::all());
        let ctx = it.ctx();
        let kappa = 0.5 * ctx.lambda1();
        let x = xi_step(3.0, 0.0, 0.0, 0.1, ctx);
        assert!((x - 3.0 * (-kappa * 0.1).exp()).abs() < 1e-15);
        let c = 0.7;
        let star = 4.0 * c / (0.25 * ctx.lambda1());
        assert!((xi_step(star, c, c, 0.1, ctx) - star).abs() < 1e-12 * star);
        // Series branch agrees with the closed form near the switch.
        let (a0, a1) = linear_source_weights(1.0, 0.99e-4);
        let (b0, b1) = linear_source_weights(1.0, 1.01e-4);
        assert!((a0 / 0.99 - b0 / 1.01).abs() < 1e-9 && (a1 / 0.99 - b1 / 1.01).abs() < 1e-9);
    }

    #[test]
    fn neutral_terms_leave_energy_rate() {
        let full = setup(0.4, 1.0, 1.0, Terms::all());
        let only_f = setup(0.4, 1.0, 1.0, Terms { b: false, c: false, d: false, f: true });
        let (mut u, _) = eigenmode(&full, 1, 2, 1);
        let (w, _) = eigenmode(&full, 3, -1, 2);
        u.axpy(0.7, &w).unwrap();
        let a = full.energy_rate(&u, 3).unwrap();
        let b = only_f.energy_rate(&u, 3).unwrap();
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn bound_holds_along_run() {
        let it = setup(0.5, 1.0, 2.0, Terms::all());
        let (u, _) = eigenmode(&it, 1, 0, 2);
        let tr = it.simulate(u.scaled(0.3), 0.0, 3.0, 0).unwrap();
        for r in &tr.diagnostics {
            assert!(r.h * r.h <= r.xi * (1.0 + 1e-6) + 1e-10, "{r:?}");
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let it = setup(0.5, 1.0, 2.0, Terms::all());
        let (u, _) = eigenmode(&it, 1, 1, 1);
        let a = it.simulate(u.clone(), 0.0, 1.0, 10).unwrap();
        let b = it.simulate(u, 0.0, 1.0, 10).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn reconstruction_inverts() {
        let it = setup(0.5, 1.0, 2.0, Terms::all());
        let (u, lam) = eigenmode(&it, 2, 0, 1);
        let lift = it.forcing().lift(7).unwrap();
        let r = reconstruct_streamfunction(&u, &lift, it.ctx()).unwrap();
        let back = modified_laplacian(it.ctx(), &r.psi_hat, lift.flux().coeffs());
        let err = back.sub(&u).unwrap();
        let d = it.ctx().domain();
        assert!(d.norm_h(&err) < 1e-10 * d.norm_h(&u));
        let zero = LiftField::zeros(d.grid());
        let r0 = reconstruct_streamfunction(&u, &zero, it.ctx()).unwrap();
        let want = u.scaled(-1.0 / lam);
        assert!(d.norm_h(&r0.psi_hat.sub(&want).unwrap()) < 1e-12);
    }

    #[test]
    fn cfl_violation_reported() {
        let it = setup(0.01, 0.0, 0.0, Terms::all());
        let (u, _) = eigenmode(&it, 3, 2, 0);
        let s = it.initial_state(u.scaled(5e3), 0).unwrap();
        match it.step(&s) {
            Err(QgError::Cfl { suggested, .. }) => assert!(suggested < it.dt()),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }
}
