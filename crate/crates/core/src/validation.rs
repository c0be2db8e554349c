//! Invariant suite behind `qgsim validate`: cheap checks of the algebraic
//! identities, solvers, lifts, noise bookkeeping, time stepping and cocycle.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::attractor::{cocycle_check, default_xi_horizon, estimate_xi_star, xi_path, SampleBasis};
use crate::config::SimConfig;
use crate::domain::Domain;
use crate::error::Result;
use crate::field::SpectralField;
use crate::forcing::{Forcing, NoiseModel, NoisePath};
use crate::integrator::{modified_laplacian, reconstruct_streamfunction, Integrator, Terms};
use crate::operators::OperatorContext;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn le(suite: &'static str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<5} {:<15} {:<44} {:>12.3e} <= {:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.tolerance
        )
    }
}

/// Random real, dealiased, mean-zero field with coefficient amplitude
/// `(1 + k² + l² + m²)^(-smooth)`.
pub fn random_field(domain: &Domain, rng: &mut impl Rng, smooth: f64) -> SpectralField {
    let grid = domain.grid();
    let nz = grid.nz();
    let mut u = SpectralField::zeros(domain.shape());
    for &h in grid.active_modes() {
        let hc = grid.conj_index(h);
        if hc < h {
            continue;
        }
        let k2 = grid.k2(h) as f64;
        for iz in 0..nz {
            let amp = (1.0 + k2 + (iz * iz) as f64).powf(-smooth);
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let c = if hc == h {
                Complex64::new(re * amp, 0.0)
            } else {
                Complex64::new(re * amp, im * amp)
            };
            u.profile_mut(h)[iz] = c;
            if hc != h {
                u.profile_mut(hc)[iz] = c.conj();
            }
        }
    }
    domain.project_mean_zero(&mut u);
    u
}

fn rel(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num.abs()
    } else {
        num.abs() / den
    }
}

fn algebra(ctx: &OperatorContext, forcing: &Forcing, rng: &mut ChaCha20Rng, n: usize, out: &mut Vec<Check>) -> Result<()> {
    let d = ctx.domain();
    let lift = forcing.lift(0)?;
    let (mut jj, mut tri, mut cc, mut dd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let a = random_field(d, rng, 1.0);
        let v = random_field(d, rng, 1.0);
        let w = random_field(d, rng, 1.0);
        let jv = ctx.jacobian(&a, &v)?;
        let jw = ctx.jacobian(&a, &w)?;
        jj = jj.max(rel(d.inner(&jv, &v), d.norm_h(&jv) * d.norm_h(&v)));
        tri = tri.max(rel(
            d.inner(&jv, &w) + d.inner(&jw, &v),
            d.norm_h(&jv) * d.norm_h(&w) + d.norm_h(&jw) * d.norm_h(&v),
        ));
        let c = ctx.apply_c(&lift, &v)?;
        cc = cc.max(rel(d.inner(&c, &v), d.norm_h(&c) * d.norm_h(&v)));
        let du = ctx.apply_d(&v)?;
        dd = dd.max(rel(d.inner(&du, &v), d.norm_h(&du) * d.norm_h(&v)));
    }
    out.push(Check::le("algebra", "<J(a,v),v> relative", jj, 1e-12));
    out.push(Check::le("algebra", "<J(a,v),w> + <J(a,w),v> relative", tri, 1e-12));
    out.push(Check::le("algebra", "<C(lift,u),u> relative", cc, 1e-12));
    out.push(Check::le("algebra", "(D(u),u) relative", dd, 1e-12));
    Ok(())
}

fn inverse(ctx: &OperatorContext, rng: &mut ChaCha20Rng, n: usize, out: &mut Vec<Check>) -> Result<()> {
    let d = ctx.domain();
    let (mut inv, mut coer) = (0.0f64, f64::INFINITY);
    for _ in 0..n {
        let f = random_field(d, rng, 0.5);
        let mut g = ctx.apply_g(&f)?;
        g.scale(-1.0);
        let back = ctx.apply_a(&g)?;
        inv = inv.max(d.norm_h(&back.sub(&f)?) / d.norm_h(&f));
        coer = coer.min(d.inner(&ctx.apply_a(&f)?, &f) / d.inner(&f, &f));
    }
    out.push(Check::le("inverse", "|A(-G f) - f| / |f|", inv, 1e-11));
    out.push(Check::le(
        "inverse",
        "lambda1 - min <Au,u>/|u|^2 (coercivity)",
        ctx.lambda1() - coer,
        1e-12 * ctx.lambda1(),
    ));
    let lead = SampleBasis::new(d, 1)?.field(d, &[1.0]);
    let rq = d.inner(&ctx.apply_a(&lead)?, &lead) / d.inner(&lead, &lead);
    out.push(Check::le(
        "inverse",
        "Rayleigh quotient at the lambda1 mode",
        (rq - ctx.lambda1()).abs() / ctx.lambda1(),
        1e-10,
    ));
    // Eigen-residual of the vertical problem K φ = μ W φ.
    let vop = d.vertical();
    let (kd, ko) = vop.stiffness();
    let w = vop.weights();
    let nz = kd.len();
    let mut worst = 0.0f64;
    for m in 0..nz {
        let mu = vop.eigenvalues()[m];
        let phi: Vec<f64> = (0..nz).map(|k| vop.eigenvector(m, k)).collect();
        for i in 0..nz {
            let mut kphi = kd[i] * phi[i];
            if i > 0 {
                kphi += ko[i - 1] * phi[i - 1];
            }
            if i + 1 < nz {
                kphi += ko[i] * phi[i + 1];
            }
            worst = worst.max((kphi - mu * w[i] * phi[i]).abs() / (1.0 + mu.abs()));
        }
    }
    out.push(Check::le("inverse", "vertical eigen-residual", worst, 1e-10));
    Ok(())
}

fn lifts(forcing: &Forcing, domain: &Domain, out: &mut Vec<Check>) -> Result<()> {
    let n = forcing.model().n_modes();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        let l = forcing.lift_from_coefficients(&c);
        worst = worst.max(l.harmonic_residual(domain));
    }
    out.push(Check::le("lift", "max harmonic residual (relative)", worst, 1e-10));
    Ok(())
}

fn noise(cfg: &SimConfig, path: &NoisePath, out: &mut Vec<Check>) -> Result<()> {
    let again = NoisePath::generate(path.seed(), path.n_modes(), path.dt_noise(), path.start_index(), path.n_steps())?;
    out.push(Check::le(
        "noise",
        "path regeneration differs",
        if &again == path { 0.0 } else { 1.0 },
        0.0,
    ));
    let longer = path.extended(10)?;
    let prefix_equal = (0..path.n_modes()).all(|m| {
        longer.init_draw(m) == path.init_draw(m)
            && (0..path.n_steps()).all(|i| longer.increment(m, i) == path.increment(m, i))
    });
    out.push(Check::le(
        "noise",
        "extension changes stored prefix",
        if prefix_equal { 0.0 } else { 1.0 },
        0.0,
    ));
    if !cfg.periodic.is_empty() {
        let ctx = cfg.context()?;
        let model = NoiseModel::new(ctx.domain().grid(), 0, cfg.q0, cfg.p, cfg.tau_c, cfg.dt_noise)?;
        let periodic = cfg.periodic_flux(ctx.domain())?;
        let det = Forcing::new(&ctx, model, None, periodic.as_ref(), cfg.dt)?;
        let per = det.tick_of(1.0)?;
        let mut worst = 0.0f64;
        for g in 0..per {
            let a = det.lift(g)?;
            let b = det.lift(g + per)?;
            worst = worst.max(ctx.domain().norm_h(&a.field().sub(b.field())?));
        }
        out.push(Check::le("noise", "periodic lift: |lift(t+1) - lift(t)|", worst, 0.0));
    }
    Ok(())
}

fn integrator_checks(it: &Integrator, rng: &mut ChaCha20Rng, out: &mut Vec<Check>) -> Result<()> {
    let ctx = it.ctx();
    let d = ctx.domain();
    // Linear part alone, on one eigenmode.
    let lin = Integrator::new(ctx.clone(), it.forcing().clone(), Terms::none())?;
    let grid = d.grid();
    let h = grid.index_of(1, 2).unwrap_or(grid.active_modes()[1]);
    let mut u = SpectralField::zeros(d.shape());
    for iz in 0..grid.nz() {
        let v = d.vertical().eigenvector(1, iz);
        u.profile_mut(h)[iz] = Complex64::new(v, 0.0);
        u.profile_mut(grid.conj_index(h))[iz] = Complex64::new(v, 0.0);
    }
    let s = lin.initial_state(u.clone(), 0)?;
    let s1 = lin.step(&s)?.state;
    let factor = (-ctx.nu() * d.a_eigenvalue(h, 1) * it.dt()).exp();
    let err = d.norm_h(&s1.u.sub(&u.scaled(factor))?) / d.norm_h(&u);
    out.push(Check::le("integrator", "eigenmode decay vs exp(-nu lambda dt)", err, 1e-13));

    // Energy inequality and reproducibility along a short full run.
    let u0 = random_field(d, rng, 1.5);
    let n = it.forcing().tick_of(1.0)?.max(1) as usize;
    let mut state = it.initial_state(u0.clone(), 0)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n {
        let step = it.step(&state)?;
        let r = step.record;
        worst = worst.max(r.h * r.h - (r.xi * (1.0 + 1e-6) + 1e-10));
        state = step.state;
    }
    out.push(Check::le("integrator", "max |u|^2 - xi(1+1e-6) - 1e-10 over 1 time unit", worst, 0.0));
    let again = it.advance(it.initial_state(u0, 0)?, n)?;
    out.push(Check::le(
        "integrator",
        "bitwise reproducibility (1 = differs)",
        if again.u == state.u { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(())
}

fn dynamics(cfg: &SimConfig, it: &Integrator, rng: &mut ChaCha20Rng, out: &mut Vec<Check>) -> Result<()> {
    let ctx = it.ctx();
    let f = it.forcing();
    let d = ctx.domain();
    let x = random_field(d, rng, 1.5);
    let s = f.tick_of(cfg.cocycle_s)?;
    let t = f.tick_of(cfg.cocycle_t)?;
    let r = cocycle_check(it, 0, s, t, &x)?;
    out.push(Check::le(
        "dynamics",
        format!("cocycle deviation (s={}, t={})", cfg.cocycle_s, cfg.cocycle_t),
        r.deviation,
        0.0,
    ));

    let h = cfg.xi_horizon.unwrap_or_else(|| default_xi_horizon(ctx));
    let kappa = ctx.nu() * ctx.lambda1();
    let x1 = estimate_xi_star(f, ctx, 0.0, h)?;
    let x2 = estimate_xi_star(f, ctx, 0.0, 2.0 * h)?;
    let tol = x2.truncation_bound * (kappa * x1.horizon).exp();
    out.push(Check::le(
        "dynamics",
        "xi* horizon H vs 2H minus tail bound",
        (x1.value - x2.value).abs() - tol,
        1e-12 * x2.value.max(1.0),
    ));

    let g = (4.0 / kappa / f.dt()).ceil() as i64;
    let start = estimate_xi_star(f, ctx, -f.time(g), h)?;
    let x0 = 3.0 * start.value + 1.0;
    let pulled = xi_path(f, ctx, -g, 0, x0)?;
    let bound = (-kappa * f.time(g)).exp() * (x0 - start.value).abs() + start.truncation_bound + x1.truncation_bound;
    out.push(Check::le(
        "dynamics",
        "|xi(T, theta_-T w, x0) - xi*| minus bound",
        (pulled - x1.value).abs() - bound,
        1e-12 * x1.value.max(1.0),
    ));
    Ok(())
}

fn reconstruction(it: &Integrator, rng: &mut ChaCha20Rng, out: &mut Vec<Check>) -> Result<()> {
    let ctx = it.ctx();
    let d = ctx.domain();
    let u = random_field(d, rng, 1.0);
    let lift = it.forcing().lift(0)?;
    let rec = reconstruct_streamfunction(&u, &lift, ctx)?;
    let back = modified_laplacian(ctx, &rec.psi_hat, lift.flux().coeffs());
    out.push(Check::le(
        "reconstruction",
        "|Lap(G u + lift) - u| / |u|",
        d.norm_h(&back.sub(&u)?) / d.norm_h(&u),
        1e-10,
    ));
    Ok(())
}

/// Path range the suite reads.
pub fn suite_span(cfg: &SimConfig, lambda1: f64) -> (f64, f64) {
    let kappa = cfg.nu * lambda1;
    let h = cfg.xi_horizon.unwrap_or(20.0 / kappa);
    (
        -(2.0 * h + 4.0 / kappa + h) - 2.0 * cfg.dt_noise,
        cfg.cocycle_s + cfg.cocycle_t + 2.0 + 2.0 * cfg.dt_noise,
    )
}

/// Run every check; `samples` random fields per algebraic check.
pub fn run_suite(cfg: &SimConfig, path: &NoisePath, samples: usize) -> Result<Vec<Check>> {
    let it = cfg.integrator(Some(path))?;
    let ctx = it.ctx();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let mut out = Vec::new();
    algebra(ctx, it.forcing(), &mut rng, samples, &mut out)?;
    inverse(ctx, &mut rng, samples, &mut out)?;
    lifts(it.forcing(), ctx.domain(), &mut out)?;
    noise(cfg, path, &mut out)?;
    integrator_checks(&it, &mut rng, &mut out)?;
    dynamics(cfg, &it, &mut rng, &mut out)?;
    reconstruction(&it, &mut rng, &mut out)?;
    Ok(out)
}
