//! Random-dynamical-systems layer: `ξ*`, the absorbing ball, cocycle
//! checks, pullback ensembles and their convergence diagnostics.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::Domain;
use crate::error::{QgError, Result};
use crate::field::SpectralField;
use crate::forcing::Forcing;
use crate::integrator::{xi_step, Integrator};
use crate::operators::OperatorContext;
use crate::stats::{ols, LinearFit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiStar {
    pub value: f64,
    /// `e^{-νλ₁H} (β²/ν) sup S / (νλ₁)` over the sampled window.
    pub truncation_bound: f64,
    pub horizon: f64,
}

/// Default quadrature horizon `20/(νλ₁)`.
pub fn default_xi_horizon(ctx: &OperatorContext) -> f64 {
    20.0 / (ctx.nu() * ctx.lambda1())
}

/// `ξ` carried from `from` to `to` (ticks) by the exact affine recursion.
pub fn xi_path(forcing: &Forcing, ctx: &OperatorContext, from: i64, to: i64, xi0: f64) -> Result<f64> {
    forcing.check_ticks(from.min(to), to.max(from))?;
    let mut xi = xi0;
    let mut s0 = forcing.source(from)?;
    for g in from..to {
        let s1 = forcing.source(g + 1)?;
        xi = xi_step(xi, s0, s1, forcing.dt(), ctx);
        s0 = s1;
    }
    Ok(xi)
}

/// `ξ*(θ_at ω) = (β²/ν) ∫_{-∞}^{0} e^{νλ₁τ} S(θ_{at+τ} ω) dτ`, truncated to
/// `horizon` and evaluated with the exponential-trapezoid rule (exact for
/// a source linear between ticks).
pub fn estimate_xi_star(forcing: &Forcing, ctx: &OperatorContext, at: f64, horizon: f64) -> Result<XiStar> {
    let kappa = ctx.nu() * ctx.lambda1();
    if !(horizon.is_finite() && horizon * kappa >= 10.0 * (1.0 - 1e-12)) {
        return Err(QgError::InvalidInput(format!(
            "xi* horizon {horizon} is shorter than 10/(nu lambda1) = {}",
            10.0 / kappa
        )));
    }
    let g_at = forcing.tick_of(at)?;
    let n = (horizon / forcing.dt()).ceil() as i64;
    let from = g_at - n;
    forcing.check_ticks(from, g_at)?;
    let mut xi = 0.0;
    let mut sup: f64 = 0.0;
    let mut s0 = forcing.source(from)?;
    sup = sup.max(s0);
    for g in from..g_at {
        let s1 = forcing.source(g + 1)?;
        sup = sup.max(s1);
        xi = xi_step(xi, s0, s1, forcing.dt(), ctx);
        s0 = s1;
    }
    let h = n as f64 * forcing.dt();
    let gain = ctx.beta() * ctx.beta() / ctx.nu();
    Ok(XiStar {
        value: xi,
        truncation_bound: (-kappa * h).exp() * gain * sup / kappa,
        horizon: h,
    })
}

/// Squared-`H`-norm threshold of the absorbing ball.
pub fn absorbing_ball(xi_star: f64) -> Result<f64> {
    if !(xi_star.is_finite() && xi_star >= 0.0) {
        return Err(QgError::InvalidInput(format!("xi* must be >= 0 (got {xi_star})")));
    }
    Ok(2.0 * xi_star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocycleReport {
    pub deviation: f64,
    pub bitwise_equal: bool,
}

/// Compare `φ(t+s, ω, x)` with `φ(t, θ_s ω, φ(s, ω, x))`, both started at
/// tick `start`.
pub fn cocycle_check(integrator: &Integrator, start: i64, s_ticks: i64, t_ticks: i64, x: &SpectralField) -> Result<CocycleReport> {
    if s_ticks < 0 || t_ticks < 0 {
        return Err(QgError::Misaligned("s and t must be nonnegative".into()));
    }
    let s0 = integrator.initial_state(x.clone(), start)?;
    let direct = integrator.advance(s0.clone(), (s_ticks + t_ticks) as usize)?;
    let mid = integrator.advance(s0, s_ticks as usize)?;
    let shifted = integrator.shifted(s_ticks);
    let restart = shifted.initial_state(mid.u, start)?;
    let composed = shifted.advance(restart, t_ticks as usize)?;
    let diff = direct.u.sub(&composed.u)?;
    Ok(CocycleReport {
        deviation: integrator.ctx().domain().norm_h(&diff),
        bitwise_equal: direct.u == composed.u,
    })
}

/// Leading `A`-eigenfunctions as real fields of unit `H` norm.
#[derive(Debug, Clone)]
pub struct SampleBasis {
    /// `(h, conj h, vertical mode, is_sine, eigenvalue)`
    entries: Vec<(usize, usize, usize, bool, f64)>,
}

impl SampleBasis {
    pub fn new(domain: &Domain, n: usize) -> Result<Self> {
        let grid = domain.grid();
        let nz = grid.nz();
        let mut all = Vec::new();
        for &h in grid.active_modes() {
            let (k, l) = grid.wavenumbers(h);
            let hc = grid.conj_index(h);
            if k == 0 && l == 0 {
                for m in 1..nz {
                    all.push((h, hc, m, false, domain.a_eigenvalue(h, m)));
                }
            } else if k > 0 || (k == 0 && l > 0) {
                for m in 0..nz {
                    let lam = domain.a_eigenvalue(h, m);
                    all.push((h, hc, m, false, lam));
                    all.push((h, hc, m, true, lam));
                }
            }
        }
        all.sort_by(|a, b| a.4.total_cmp(&b.4).then((a.0, a.2, a.3).cmp(&(b.0, b.2, b.3))));
        if n == 0 || n > all.len() {
            return Err(QgError::InvalidInput(format!(
                "sampling basis size must be in 1..={} (got {n})",
                all.len()
            )));
        }
        all.truncate(n);
        Ok(Self { entries: all })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ c_i e_i` for unit-norm eigenfunctions `e_i`.
    pub fn field(&self, domain: &Domain, coeffs: &[f64]) -> SpectralField {
        let nz = domain.grid().nz();
        let vop = domain.vertical();
        let mut out = SpectralField::zeros(domain.shape());
        let tau = std::f64::consts::TAU;
        for (c, &(h, hc, m, sine, _)) in coeffs.iter().zip(&self.entries) {
            if h == hc {
                let a = c / tau;
                for iz in 0..nz {
                    out.profile_mut(h)[iz] += Complex64::new(a * vop.eigenvector(m, iz), 0.0);
                }
            } else {
                let a = c * std::f64::consts::SQRT_2 / tau * 0.5;
                let (plus, minus) = if sine {
                    (Complex64::new(0.0, -a), Complex64::new(0.0, a))
                } else {
                    (Complex64::new(a, 0.0), Complex64::new(a, 0.0))
                };
                for iz in 0..nz {
                    let v = vop.eigenvector(m, iz);
                    out.profile_mut(h)[iz] += plus * v;
                    out.profile_mut(hc)[iz] += minus * v;
                }
            }
        }
        out
    }
}

/// Rule for drawing one initial condition of squared norm at most `r2`
/// from coefficients on a [`SampleBasis`].
pub trait InitialSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn coefficients(&self, dim: usize, r2: f64, member: usize, rng: &mut ChaCha20Rng) -> Vec<f64>;
}

fn gaussian_direction(dim: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform on the sphere of squared radius `r2`.
pub struct SphereSampler;

impl InitialSampler for SphereSampler {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn coefficients(&self, dim: usize, r2: f64, _member: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let r = r2.sqrt();
        gaussian_direction(dim, rng).into_iter().map(|x| x * r).collect()
    }
}

/// Uniform in the ball of squared radius `r2`.
pub struct BallSampler;

impl InitialSampler for BallSampler {
    fn name(&self) -> &'static str {
        "ball"
    }

    fn coefficients(&self, dim: usize, r2: f64, _member: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let r = r2.sqrt() * u.powf(1.0 / dim as f64);
        gaussian_direction(dim, rng).into_iter().map(|x| x * r).collect()
    }
}

/// `±√r2` along the basis axes in turn.
pub struct AxesSampler;

impl InitialSampler for AxesSampler {
    fn name(&self) -> &'static str {
        "axes"
    }

    fn coefficients(&self, dim: usize, r2: f64, member: usize, _rng: &mut ChaCha20Rng) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        let sign = if (member / dim).is_multiple_of(2) { 1.0 } else { -1.0 };
        v[member % dim] = sign * r2.sqrt();
        v
    }
}

pub struct SamplerRegistry {
    samplers: BTreeMap<&'static str, Box<dyn InitialSampler>>,
}

impl fmt::Debug for SamplerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.samplers.keys()).finish()
    }
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        let mut r = Self {
            samplers: BTreeMap::new(),
        };
        r.register(Box::new(SphereSampler));
        r.register(Box::new(BallSampler));
        r.register(Box::new(AxesSampler));
        r
    }
}

impl SamplerRegistry {
    pub fn register(&mut self, s: Box<dyn InitialSampler>) {
        self.samplers.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn InitialSampler> {
        self.samplers.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            QgError::InvalidInput(format!(
                "unknown sampling rule '{name}' (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.samplers.keys().copied().collect()
    }
}

/// Squared radius of the initial family as a function of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule {
    /// `2ξ*(θ_{-T}ω)`
    AbsorbingBall,
    /// `2ξ*(θ_{-T}ω) (1+T)^p`, a tempered family.
    Polynomial(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackConfig {
    pub horizons: Vec<f64>,
    pub ensemble: usize,
    pub sampler: String,
    pub basis_modes: usize,
    pub radius: RadiusRule,
    pub seed: u64,
    pub xi_horizon: Option<f64>,
}

impl PullbackConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.horizons.is_empty() {
            errs.push("at least one pullback horizon is required".to_string());
        }
        if self.horizons.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            errs.push("pullback horizons must be finite and nonnegative".to_string());
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            errs.push("pullback horizons must be strictly increasing".to_string());
        }
        if self.ensemble < 8 {
            errs.push(format!("ensemble size must be >= 8 (got {})", self.ensemble));
        }
        if self.basis_modes == 0 {
            errs.push("sampling basis must have at least one mode".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(QgError::Config(errs))
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttractorEstimate {
    pub horizons: Vec<f64>,
    pub endpoints: Vec<Vec<SpectralField>>,
    pub diameter: Vec<f64>,
    /// Hausdorff distance to the previous horizon's set (NaN for the first).
    pub hausdorff_prev: Vec<f64>,
    /// `ξ*(θ_{-T}ω)` used for each initial ball.
    pub xi_star_start: Vec<f64>,
    /// `ξ*(ω)` at the observation time.
    pub xi_star: f64,
    /// Largest squared endpoint norm per horizon.
    pub max_norm_sq: Vec<f64>,
    /// Observation tick.
    pub at: i64,
}

impl AttractorEstimate {
    /// Convergence tolerance of the last horizon: its diameter plus the
    /// change from the previous horizon.
    pub fn tolerance(&self) -> f64 {
        let n = self.horizons.len();
        let hp = self.hausdorff_prev[n - 1];
        self.diameter[n - 1] + if hp.is_finite() { hp } else { 0.0 }
    }

    pub fn last(&self) -> &[SpectralField] {
        self.endpoints.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

pub fn diameter(domain: &Domain, set: &[SpectralField]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..set.len() {
        for j in 0..i {
            d = d.max(distance(domain, &set[i], &set[j]));
        }
    }
    d
}

fn distance(domain: &Domain, a: &SpectralField, b: &SpectralField) -> f64 {
    let nz = domain.grid().nz();
    let w = domain.vertical().weights();
    let mut acc = 0.0;
    for (pa, pb) in a.data().chunks_exact(nz).zip(b.data().chunks_exact(nz)) {
        for j in 0..nz {
            acc += w[j] * (pa[j] - pb[j]).norm_sqr();
        }
    }
    std::f64::consts::TAU * acc.sqrt()
}

/// `sup_{a∈A} inf_{b∈B} ‖a-b‖_H`.
pub fn hausdorff_one_sided(domain: &Domain, a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| distance(domain, x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

pub fn hausdorff(domain: &Domain, a: &[SpectralField], b: &[SpectralField]) -> f64 {
    hausdorff_one_sided(domain, a, b).max(hausdorff_one_sided(domain, b, a))
}

fn member_rng(seed: u64, horizon_idx: usize, member: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((horizon_idx as u64) << 32) | member as u64);
    rng
}

/// Pullback ensembles observed at time `at`: for every horizon `T`, draw
/// initial states at `at - T` from the ball of squared radius given by the
/// radius rule and flow them to `at` under the same realization.
pub fn pullback_run(
    integrator: &Integrator,
    config: &PullbackConfig,
    registry: &SamplerRegistry,
    at: f64,
) -> Result<AttractorEstimate> {
    config.validate()?;
    let ctx = integrator.ctx();
    let domain = ctx.domain();
    let forcing = integrator.forcing();
    let sampler = registry.get(&config.sampler)?;
    let basis = SampleBasis::new(domain, config.basis_modes)?;
    let xi_h = config.xi_horizon.unwrap_or_else(|| default_xi_horizon(ctx));
    let g_at = forcing.tick_of(at)?;
    let xi_star = estimate_xi_star(forcing, ctx, at, xi_h)?.value;

    let mut endpoints: Vec<Vec<SpectralField>> = Vec::new();
    let mut diameters = Vec::new();
    let mut hausdorff_prev = Vec::new();
    let mut xi_start = Vec::new();
    let mut max_norm_sq = Vec::new();
    for (hi, &t_back) in config.horizons.iter().enumerate() {
        let n_steps = forcing.tick_of(t_back)?;
        let g0 = g_at - n_steps;
        let xs = estimate_xi_star(forcing, ctx, forcing.time(g0), xi_h)?.value;
        let r2 = match config.radius {
            RadiusRule::AbsorbingBall => 2.0 * xs,
            RadiusRule::Polynomial(p) => 2.0 * xs * (1.0 + t_back).powf(p),
        };
        let ends: Vec<SpectralField> = (0..config.ensemble)
            .into_par_iter()
            .map(|member| {
                let mut rng = member_rng(config.seed, hi, member);
                let c = sampler.coefficients(basis.len(), r2, member, &mut rng);
                let u0 = basis.field(domain, &c);
                let s = integrator.initial_state(u0, g0)?;
                Ok(integrator.advance(s, n_steps as usize)?.u)
            })
            .collect::<Result<Vec<_>>>()?;
        diameters.push(diameter(domain, &ends));
        hausdorff_prev.push(match endpoints.last() {
            Some(prev) => hausdorff(domain, &ends, prev),
            None => f64::NAN,
        });
        max_norm_sq.push(ends.iter().map(|u| domain.inner(u, u)).fold(0.0, f64::max));
        xi_start.push(xs);
        endpoints.push(ends);
    }
    Ok(AttractorEstimate {
        horizons: config.horizons.clone(),
        endpoints,
        diameter: diameters,
        hausdorff_prev,
        xi_star_start: xi_start,
        xi_star,
        max_norm_sq,
        at: g_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    /// `dist_H(φ(t,ω,A(ω)), A(θ_t ω))`
    pub distance: f64,
    /// Sum of the two estimates' convergence tolerances.
    pub budget: f64,
}

/// Flow the last-horizon estimate of `A(ω)` forward by `t` and compare it
/// with a fresh pullback estimate of `A(θ_t ω)`.
pub fn invariance_check(
    estimate: &AttractorEstimate,
    integrator: &Integrator,
    config: &PullbackConfig,
    registry: &SamplerRegistry,
    t: f64,
) -> Result<InvarianceReport> {
    let forcing = integrator.forcing();
    let n = forcing.tick_of(t)?;
    if n == 0 {
        return Ok(InvarianceReport {
            distance: 0.0,
            budget: estimate.tolerance(),
        });
    }
    let flowed: Vec<SpectralField> = estimate
        .last()
        .par_iter()
        .map(|u| {
            let s = integrator.initial_state(u.clone(), estimate.at)?;
            Ok(integrator.advance(s, n as usize)?.u)
        })
        .collect::<Result<Vec<_>>>()?;
    let at = forcing.time(estimate.at + n);
    let later = pullback_run(integrator, config, registry, at)?;
    let domain = integrator.ctx().domain();
    Ok(InvarianceReport {
        distance: hausdorff_one_sided(domain, &flowed, later.last()),
        budget: estimate.tolerance() + later.tolerance(),
    })
}

/// Largest `‖·‖_H` over the flowed set at the integer times `1..=n_times`
/// after the observation time.
pub fn growth_series(estimate: &AttractorEstimate, integrator: &Integrator, n_times: usize) -> Result<Vec<(f64, f64)>> {
    let forcing = integrator.forcing();
    let per = forcing.tick_of(1.0)?;
    let domain = integrator.ctx().domain();
    let tracks: Vec<Vec<f64>> = estimate
        .last()
        .par_iter()
        .map(|u| {
            let mut s = integrator.initial_state(u.clone(), estimate.at)?;
            let mut out = Vec::with_capacity(n_times);
            for _ in 0..n_times {
                s = integrator.advance(s, per as usize)?;
                out.push(domain.norm_h(&s.u));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..n_times)
        .map(|k| {
            let t = forcing.time(estimate.at + (k as i64 + 1) * per);
            (t, tracks.iter().map(|v| v[k]).fold(0.0, f64::max))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub fit: LinearFit,
    pub n_points: usize,
}

/// Tail slope of `log⁺ dist_H(A(θ_t ω), {0})` against `|t|`.
pub fn growth_diagnostic(series: &[(f64, f64)]) -> Result<GrowthReport> {
    if series.len() < 50 {
        return Err(QgError::InvalidInput(format!(
            "growth diagnostic needs at least 50 time points (got {})",
            series.len()
        )));
    }
    let tail = &series[series.len() / 2..];
    let x: Vec<f64> = tail.iter().map(|(t, _)| t.abs()).collect();
    let y: Vec<f64> = tail.iter().map(|(_, d)| if *d > 1.0 { d.ln() } else { 0.0 }).collect();
    Ok(GrowthReport {
        fit: ols(&x, &y),
        n_points: series.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionReport {
    pub horizons: Vec<f64>,
    pub max_norm_sq: Vec<f64>,
    pub threshold: f64,
    pub absorbed: Vec<bool>,
    /// Smallest horizon from which every larger one is absorbed.
    pub t0: Option<f64>,
}

/// Absorption of a pullback estimate into the ball `‖u‖² ≤ 2ξ*(ω)(1+tol)`.
pub fn absorption(estimate: &AttractorEstimate, tol: f64) -> AbsorptionReport {
    let threshold = 2.0 * estimate.xi_star * (1.0 + tol);
    let absorbed: Vec<bool> = estimate.max_norm_sq.iter().map(|n| *n <= threshold).collect();
    let t0 = (0..absorbed.len())
        .find(|&i| absorbed[i..].iter().all(|a| *a))
        .map(|i| estimate.horizons[i]);
    AbsorptionReport {
        horizons: estimate.horizons.clone(),
        max_norm_sq: estimate.max_norm_sq.clone(),
        threshold,
        absorbed,
        t0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid, StratificationProfile};
    use crate::forcing::{NoiseModel, NoisePath};
    use crate::integrator::Terms;
    use std::sync::Arc;

    fn setup(q0: f64) -> Integrator {
        let grid = Grid::new(8, 8, 5).unwrap();
        let d = Domain::new(grid, StratificationProfile::constant(2.0, 1.0, 5).unwrap()).unwrap();
        let ctx = OperatorContext::new(Arc::new(d), 1.0, 1.0).unwrap();
        let model = NoiseModel::new(ctx.domain().grid(), 4, q0, 2.0, 0.5, 0.1).unwrap();
        let path = NoisePath::generate(4, 4, 0.1, -400, 500).unwrap();
        let f = Forcing::new(&ctx, model, Some(&path), None, 0.05).unwrap();
        Integrator::new(ctx, f, Terms::all()).unwrap()
    }

    #[test]
    fn sample_basis_unit_norm() {
        let it = setup(1.0);
        let d = it.ctx().domain();
        let b = SampleBasis::new(d, 12).unwrap();
        for i in 0..12 {
            let mut c = vec![0.0; 12];
            c[i] = 1.0;
            let f = b.field(d, &c);
            assert!((d.norm_h(&f) - 1.0).abs() < 1e-12);
            assert!(d.check_mean_zero(&f).is_ok());
        }
    }

    #[test]
    fn registry_lookup() {
        let r = SamplerRegistry::default();
        assert_eq!(r.names(), vec!["axes", "ball", "sphere"]);
        assert!(r.get("cube").is_err());
        let mut rng = member_rng(1, 0, 0);
        let c = r.get("sphere").unwrap().coefficients(5, 4.0, 0, &mut rng);
        assert!((c.iter().map(|x| x * x).sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn xi_star_zero_without_forcing() {
        let it = setup(0.0);
        let h = default_xi_horizon(it.ctx());
        let x = estimate_xi_star(it.forcing(), it.ctx(), 0.0, h).unwrap();
        assert_eq!(x.value, 0.0);
        assert!(estimate_xi_star(it.forcing(), it.ctx(), 0.0, 1.0).is_err());
    }

    #[test]
    fn cocycle_identity_for_t_zero() {
        let it = setup(1.0);
        let b = SampleBasis::new(it.ctx().domain(), 4).unwrap();
        let x = b.field(it.ctx().domain(), &[0.1, -0.2, 0.05, 0.3]);
        let r = cocycle_check(&it, 0, 6, 0, &x).unwrap();
        assert!(r.bitwise_equal);
        let r = cocycle_check(&it, -20, 7, 9, &x).unwrap();
        assert!(r.bitwise_equal);
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn hausdorff_basic() {
        let it = setup(1.0);
        let d = it.ctx().domain();
        let b = SampleBasis::new(d, 2).unwrap();
        let a = vec![b.field(d, &[1.0, 0.0])];
        let c = vec![b.field(d, &[1.0, 0.0]), b.field(d, &[0.0, 1.0])];
        assert!(hausdorff_one_sided(d, &a, &c) < 1e-15);
        assert!((hausdorff(d, &a, &c) - 2f64.sqrt()).abs() < 1e-12);
        assert!((diameter(d, &c) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn growth_needs_fifty_points() {
        let s: Vec<(f64, f64)> = (1..40).map(|t| (t as f64, 2.0)).collect();
        assert!(growth_diagnostic(&s).is_err());
        let s: Vec<(f64, f64)> = (1..80).map(|t| (t as f64, 2.0)).collect();
        assert!(growth_diagnostic(&s).unwrap().fit.slope.abs() < 1e-12);
    }
}
