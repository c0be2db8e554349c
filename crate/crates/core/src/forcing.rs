//! Driving processes: colored Ornstein–Uhlenbeck flux on the top face, the
//! periodic flux `u₀ sin(2πt)`, persisted noise paths and the resulting
//! harmonic lift along a realization.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{Domain, Grid};
use crate::error::{QgError, Result};
use crate::field::SpectralField;
use crate::lift::{boundary_basis, precompute_mode_lifts, solve_lift, BoundaryFlux, BoundaryMode, LiftField};
use crate::operators::OperatorContext;
use crate::stats::{ols, LinearFit};

/// How the colored flux is started at the beginning of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Exact draw from the stationary standard normal.
    Stationary,
    /// Start from zero; only stationary after a few correlation times.
    BurnIn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    modes: Vec<BoundaryMode>,
    q: Vec<f64>,
    q0: f64,
    p: f64,
    tau_c: f64,
    dt_noise: f64,
    init: InitMode,
}

impl NoiseModel {
    /// `q_i = q0 (1 + k² + l²)^(-p)` on the first `n_modes` boundary modes.
    pub fn new(grid: &Grid, n_modes: usize, q0: f64, p: f64, tau_c: f64, dt_noise: f64) -> Result<Self> {
        let mut errs = Vec::new();
        if !(q0.is_finite() && q0 >= 0.0) {
            errs.push(format!("q0 must be nonnegative (got {q0})"));
        }
        if !p.is_finite() {
            errs.push(format!("spectral exponent must be finite (got {p})"));
        }
        if !(tau_c.is_finite() && tau_c > 0.0) {
            errs.push(format!("correlation time must be positive (got {tau_c})"));
        }
        if !(dt_noise.is_finite() && dt_noise > 0.0) {
            errs.push(format!("dt_noise must be positive (got {dt_noise})"));
        }
        let basis = boundary_basis(grid);
        if n_modes > basis.len() {
            errs.push(format!(
                "{n_modes} noise modes requested but only {} are resolved",
                basis.len()
            ));
        }
        if !errs.is_empty() {
            return Err(QgError::InvalidInput(errs.join("; ")));
        }
        let modes = basis[..n_modes].to_vec();
        let q = modes
            .iter()
            .map(|m| q0 * (1.0 + m.wavenumber_sq() as f64).powf(-p))
            .collect();
        Ok(Self {
            modes,
            q,
            q0,
            p,
            tau_c,
            dt_noise,
            init: InitMode::Stationary,
        })
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[BoundaryMode] {
        &self.modes
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn tau_c(&self) -> f64 {
        self.tau_c
    }

    pub fn dt_noise(&self) -> f64 {
        self.dt_noise
    }

    pub fn init_mode(&self) -> InitMode {
        self.init
    }

    /// Trace of the truncated covariance.
    pub fn trace(&self) -> f64 {
        self.q.iter().sum()
    }
}

fn mode_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Wiener increments of every boundary mode on the grid
/// `t_j = j·dt_noise`, `j = start_index ..= start_index + n_steps`.
///
/// Per mode the data holds one standard normal used for the stationary
/// start, followed by the `n_steps` increments. Mode `i` is drawn from
/// ChaCha stream `i` of the seed, so a longer path extends a shorter one.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    n_modes: usize,
    dt_noise: f64,
    start_index: i64,
    n_steps: usize,
    data: Vec<f64>,
}

impl NoisePath {
    pub fn generate(seed: u64, n_modes: usize, dt_noise: f64, start_index: i64, n_steps: usize) -> Result<Self> {
        if !(dt_noise.is_finite() && dt_noise > 0.0) {
            return Err(QgError::InvalidInput(format!(
                "dt_noise must be positive (got {dt_noise})"
            )));
        }
        let sq = dt_noise.sqrt();
        let mut data = Vec::with_capacity(n_modes * (n_steps + 1));
        for mode in 0..n_modes {
            let mut rng = mode_stream(seed, mode as u64);
            let init: f64 = StandardNormal.sample(&mut rng);
            data.push(init);
            for _ in 0..n_steps {
                let g: f64 = StandardNormal.sample(&mut rng);
                data.push(sq * g);
            }
        }
        Ok(Self {
            seed,
            n_modes,
            dt_noise,
            start_index,
            n_steps,
            data,
        })
    }

    /// Smallest path on the noise grid that covers `[t_min, t_max]`.
    pub fn covering(seed: u64, n_modes: usize, dt_noise: f64, t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min <= t_max) {
            return Err(QgError::InvalidInput(format!(
                "path range [{t_min}, {t_max}] is empty"
            )));
        }
        let start = (t_min / dt_noise + 1e-9).floor() as i64;
        let end = (t_max / dt_noise - 1e-9).ceil() as i64;
        Self::generate(seed, n_modes, dt_noise, start, (end - start).max(0) as usize)
    }

    pub fn from_raw(
        seed: u64,
        n_modes: usize,
        dt_noise: f64,
        start_index: i64,
        n_steps: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != n_modes * (n_steps + 1) {
            return Err(QgError::Format(format!(
                "noise path holds {} values, expected {}",
                data.len(),
                n_modes * (n_steps + 1)
            )));
        }
        if !(dt_noise.is_finite() && dt_noise > 0.0) {
            return Err(QgError::Format(format!("bad dt_noise {dt_noise}")));
        }
        Ok(Self {
            seed,
            n_modes,
            dt_noise,
            start_index,
            n_steps,
            data,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dt_noise(&self) -> f64 {
        self.dt_noise
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn end_index(&self) -> i64 {
        self.start_index + self.n_steps as i64
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_min(&self) -> f64 {
        self.start_index as f64 * self.dt_noise
    }

    pub fn t_max(&self) -> f64 {
        self.end_index() as f64 * self.dt_noise
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Standard normal reserved for the stationary start of `mode`.
    pub fn init_draw(&self, mode: usize) -> f64 {
        self.data[mode * (self.n_steps + 1)]
    }

    /// Increment over `[t_{s+i}, t_{s+i+1}]` with `s` the start index.
    pub fn increment(&self, mode: usize, i: usize) -> f64 {
        self.data[mode * (self.n_steps + 1) + 1 + i]
    }

    /// `θ_s ω` for `s = steps·dt_noise`: the same increments relabeled so
    /// that label `t` of the result is label `t + s` of `self`.
    pub fn shifted(&self, steps: i64) -> Self {
        let mut out = self.clone();
        out.start_index -= steps;
        out
    }

    /// The same realization continued for `extra` more steps.
    pub fn extended(&self, extra: usize) -> Result<Self> {
        Self::generate(
            self.seed,
            self.n_modes,
            self.dt_noise,
            self.start_index,
            self.n_steps + extra,
        )
    }

    /// Integer grid index of `t`, or an alignment error.
    pub fn grid_index(&self, t: f64) -> Result<i64> {
        grid_index(t, self.dt_noise)
    }
}

fn grid_index(t: f64, dt_noise: f64) -> Result<i64> {
    let x = t / dt_noise;
    let j = x.round();
    if (x - j).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(QgError::Misaligned(format!(
            "t = {t} is not on the noise grid of spacing {dt_noise}"
        )));
    }
    Ok(j as i64)
}

fn step_count(dt: f64, dt_noise: f64) -> Result<i64> {
    let x = dt / dt_noise;
    let k = x.round();
    if k < 0.0 || (x - k).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(QgError::Misaligned(format!(
            "dt = {dt} is not a nonnegative multiple of dt_noise = {dt_noise}"
        )));
    }
    Ok(k as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OUBoundaryState {
    pub zeta: Vec<f64>,
    pub index: i64,
    pub t: f64,
}

fn check_model_path(model: &NoiseModel, path: &NoisePath) -> Result<()> {
    if path.n_modes() < model.n_modes() {
        return Err(QgError::InvalidInput(format!(
            "noise path has {} modes, model needs {}",
            path.n_modes(),
            model.n_modes()
        )));
    }
    if (path.dt_noise() - model.dt_noise()).abs() > 1e-12 * model.dt_noise() {
        return Err(QgError::Misaligned(format!(
            "path dt_noise {} differs from model dt_noise {}",
            path.dt_noise(),
            model.dt_noise()
        )));
    }
    Ok(())
}

fn coverage_error(path: &NoisePath, need_min: f64, need_max: f64) -> QgError {
    QgError::PathCoverage {
        need_min,
        need_max,
        have_min: path.t_min(),
        have_max: path.t_max(),
    }
}

fn ou_step(model: &NoiseModel, path: &NoisePath, zeta: &mut [f64], rel: usize) {
    let h = model.dt_noise;
    let a = (-h / model.tau_c).exp();
    let s = (-(-2.0 * h / model.tau_c).exp_m1()).sqrt() / h.sqrt();
    for (i, z) in zeta.iter_mut().enumerate() {
        *z = a * *z + s * path.increment(i, rel);
    }
}

/// Colored-flux state at grid time `t`, started at the path's first point.
pub fn init_ou_state(model: &NoiseModel, path: &NoisePath, t: f64) -> Result<OUBoundaryState> {
    check_model_path(model, path)?;
    let j = path.grid_index(t)?;
    if j < path.start_index() || j > path.end_index() {
        return Err(coverage_error(path, t, t));
    }
    let mut zeta: Vec<f64> = match model.init {
        InitMode::Stationary => (0..model.n_modes()).map(|i| path.init_draw(i)).collect(),
        InitMode::BurnIn => vec![0.0; model.n_modes()],
    };
    for rel in 0..(j - path.start_index()) as usize {
        ou_step(model, path, &mut zeta, rel);
    }
    Ok(OUBoundaryState {
        zeta,
        index: j,
        t: j as f64 * path.dt_noise(),
    })
}

/// Exact OU update over `dt` (a multiple of `dt_noise`) from the stored
/// increments, one noise step at a time.
pub fn advance_ou(model: &NoiseModel, state: &OUBoundaryState, dt: f64, path: &NoisePath) -> Result<OUBoundaryState> {
    check_model_path(model, path)?;
    let k = step_count(dt, path.dt_noise())?;
    let end = state.index + k;
    if state.index < path.start_index() || end > path.end_index() {
        return Err(coverage_error(path, state.t, state.t + dt));
    }
    if state.zeta.len() != model.n_modes() {
        return Err(QgError::ShapeMismatch {
            expected: format!("{} OU modes", model.n_modes()),
            found: format!("{}", state.zeta.len()),
        });
    }
    let mut zeta = state.zeta.clone();
    for j in state.index..end {
        ou_step(model, path, &mut zeta, (j - path.start_index()) as usize);
    }
    Ok(OUBoundaryState {
        zeta,
        index: end,
        t: end as f64 * path.dt_noise(),
    })
}

/// Deterministic flux `u₀ sin(2π(t + phase))` with its precomputed lift.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFlux {
    amplitude: BoundaryFlux,
    lift: LiftField,
    phase: f64,
}

impl PeriodicFlux {
    pub fn new(domain: &Domain, amplitude: BoundaryFlux, phase: f64) -> Result<Self> {
        if !(phase.is_finite() && (0.0..1.0).contains(&phase)) {
            return Err(QgError::InvalidInput(format!(
                "periodic phase must lie in [0, 1) (got {phase})"
            )));
        }
        let lift = solve_lift(domain, &amplitude)?;
        Ok(Self {
            amplitude,
            lift,
            phase,
        })
    }

    pub fn amplitude(&self) -> &BoundaryFlux {
        &self.amplitude
    }

    pub fn lift(&self) -> &LiftField {
        &self.lift
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn value(&self, t: f64) -> f64 {
        (TAU * (t + self.phase)).sin()
    }
}

/// `Σ √q_i ζ_i l_i + sin(2π(t+phase)) G̃(u₀)` at the state's time.
pub fn lift_at(
    grid: &Grid,
    state: &OUBoundaryState,
    periodic: Option<&PeriodicFlux>,
    model: &NoiseModel,
    lifts: &[LiftField],
) -> Result<LiftField> {
    if lifts.len() != model.n_modes() || state.zeta.len() != model.n_modes() {
        return Err(QgError::ShapeMismatch {
            expected: format!("{} modes", model.n_modes()),
            found: format!("{} lifts, {} OU states", lifts.len(), state.zeta.len()),
        });
    }
    let mut coeffs: Vec<f64> = state
        .zeta
        .iter()
        .zip(model.q())
        .map(|(z, q)| q.sqrt() * z)
        .collect();
    let mut all: Vec<LiftField> = lifts.to_vec();
    if let Some(p) = periodic {
        coeffs.push(p.value(state.t));
        all.push(p.lift().clone());
    }
    LiftField::combine(grid, &coeffs, &all)
}

#[derive(Debug)]
struct ForcingTables {
    dt: f64,
    ticks_per_noise: i64,
    period_ticks: Option<i64>,
    phase: f64,
    model: NoiseModel,
    start_index: i64,
    n_steps: usize,
    track: Vec<f64>,
    sqrt_q: Vec<f64>,
    bridge: Vec<(f64, f64)>,
    lifts: Vec<LiftField>,
    supports: Vec<Vec<usize>>,
    gram_vdual: Vec<f64>,
    gram_h: Vec<f64>,
    grid: Grid,
}

/// The lift process `g ↦ lift(g·dt)` along one noise realization, on the
/// integer tick grid of the time step `dt`.
///
/// Between noise grid points the colored flux is the conditional mean of
/// the OU bridge, so the lift is a deterministic function of the stored
/// path. `shifted(s)` realizes `θ_s`: it reads tick `g + s` of `self`,
/// for the noise and the periodic phase alike.
#[derive(Debug, Clone)]
pub struct Forcing {
    tables: Arc<ForcingTables>,
    offset: i64,
}

impl Forcing {
    pub fn new(
        ctx: &OperatorContext,
        model: NoiseModel,
        path: Option<&NoisePath>,
        periodic: Option<&PeriodicFlux>,
        dt: f64,
    ) -> Result<Self> {
        let domain = ctx.domain();
        if !(dt.is_finite() && dt > 0.0) {
            return Err(QgError::InvalidInput(format!("dt must be positive (got {dt})")));
        }
        let m = {
            let x = model.dt_noise() / dt;
            let k = x.round();
            if k < 1.0 || (x - k).abs() > 1e-9 * x {
                return Err(QgError::Misaligned(format!(
                    "dt = {dt} does not divide dt_noise = {}",
                    model.dt_noise()
                )));
            }
            k as i64
        };
        let period_ticks = {
            let x = 1.0 / dt;
            let k = x.round();
            ((x - k).abs() <= 1e-9 * x && k >= 1.0).then_some(k as i64)
        };

        let n = model.n_modes();
        let (start_index, n_steps, track) = match path {
            Some(path) => {
                check_model_path(&model, path)?;
                let mut track = vec![0.0; n * (path.n_steps() + 1)];
                let mut zeta = init_ou_state(&model, path, path.t_min())?.zeta;
                for rel in 0..=path.n_steps() {
                    for i in 0..n {
                        track[i * (path.n_steps() + 1) + rel] = zeta[i];
                    }
                    if rel < path.n_steps() {
                        ou_step(&model, path, &mut zeta, rel);
                    }
                }
                (path.start_index(), path.n_steps(), track)
            }
            None if n == 0 => (i64::MIN / 4, usize::MAX / 4, Vec::new()),
            None => {
                return Err(QgError::InvalidInput(
                    "a noise path is required when noise modes are active".into(),
                ))
            }
        };

        let gamma_h = model.dt_noise() / model.tau_c();
        let bridge: Vec<(f64, f64)> = (0..m)
            .map(|r| {
                if r == 0 {
                    return (1.0, 0.0);
                }
                let r = r as f64 / m as f64;
                let s = gamma_h.sinh();
                ((gamma_h * (1.0 - r)).sinh() / s, (gamma_h * r).sinh() / s)
            })
            .collect();

        let mut lifts = precompute_mode_lifts(domain, n)?;
        if let Some(p) = periodic {
            lifts.push(p.lift().clone());
        }
        let supports: Vec<Vec<usize>> = lifts
            .iter()
            .map(|l| {
                (0..domain.shape().horizontal())
                    .filter(|&h| l.field().profile(h).iter().any(|c| c.norm() > 0.0))
                    .collect()
            })
            .collect();
        let nl = lifts.len();
        let lx: Vec<SpectralField> = lifts.iter().map(|l| domain.dx(l.field())).collect();
        let glx: Vec<SpectralField> = lx.iter().map(|f| ctx.apply_g_unchecked(f)).collect();
        let mut gram_vdual = vec![0.0; nl * nl];
        let mut gram_h = vec![0.0; nl * nl];
        for i in 0..nl {
            for j in 0..nl {
                gram_vdual[i * nl + j] = -domain.inner(&glx[i], &lx[j]);
                gram_h[i * nl + j] = domain.inner(lifts[i].field(), lifts[j].field());
            }
        }

        Ok(Self {
            tables: Arc::new(ForcingTables {
                dt,
                ticks_per_noise: m,
                period_ticks,
                phase: periodic.map_or(0.0, |p| p.phase()),
                sqrt_q: model.q().iter().map(|q| q.sqrt()).collect(),
                model,
                start_index,
                n_steps,
                track,
                bridge,
                lifts,
                supports,
                gram_vdual,
                gram_h,
                grid: domain.grid().clone(),
            }),
            offset: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.tables.dt
    }

    pub fn model(&self) -> &NoiseModel {
        &self.tables.model
    }

    pub fn ticks_per_noise(&self) -> i64 {
        self.tables.ticks_per_noise
    }

    /// Ticks per forcing period, when `1/dt` is an integer.
    pub fn period_ticks(&self) -> Option<i64> {
        self.tables.period_ticks
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn time(&self, tick: i64) -> f64 {
        tick as f64 * self.tables.dt
    }

    /// Tick nearest to `t`, or an alignment error.
    pub fn tick_of(&self, t: f64) -> Result<i64> {
        let x = t / self.tables.dt;
        let g = x.round();
        if (x - g).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(QgError::Misaligned(format!(
                "t = {t} is not a multiple of dt = {}",
                self.tables.dt
            )));
        }
        Ok(g as i64)
    }

    /// `θ_s` for `s = ticks·dt`.
    pub fn shifted(&self, ticks: i64) -> Self {
        Self {
            tables: self.tables.clone(),
            offset: self.offset + ticks,
        }
    }

    /// Tick range `[first, last]` on which the lift is defined.
    pub fn tick_range(&self) -> (i64, i64) {
        let t = &self.tables;
        if t.model.n_modes() == 0 {
            return (i64::MIN / 4, i64::MAX / 4);
        }
        (
            t.start_index * t.ticks_per_noise - self.offset,
            (t.start_index + t.n_steps as i64) * t.ticks_per_noise - self.offset,
        )
    }

    pub fn check_ticks(&self, first: i64, last: i64) -> Result<()> {
        let (lo, hi) = self.tick_range();
        if first < lo || last > hi {
            return Err(QgError::PathCoverage {
                need_min: self.time(first),
                need_max: self.time(last),
                have_min: self.time(lo),
                have_max: self.time(hi),
            });
        }
        Ok(())
    }

    fn periodic_value(&self, g: i64) -> f64 {
        let t = &self.tables;
        match t.period_ticks {
            Some(p) => (TAU * (g.rem_euclid(p) as f64 / p as f64 + t.phase)).sin(),
            None => (TAU * (g as f64 * t.dt + t.phase)).sin(),
        }
    }

    /// Colored flux of every noise mode at `tick`.
    pub fn zeta(&self, tick: i64) -> Result<Vec<f64>> {
        self.check_ticks(tick, tick)?;
        let t = &self.tables;
        let g = tick + self.offset;
        let j = g.div_euclid(t.ticks_per_noise) - t.start_index;
        let r = g.rem_euclid(t.ticks_per_noise) as usize;
        let stride = t.n_steps + 1;
        let (w0, w1) = t.bridge[r];
        Ok((0..t.model.n_modes())
            .map(|i| {
                let base = i * stride + j as usize;
                if r == 0 {
                    t.track[base]
                } else {
                    w0 * t.track[base] + w1 * t.track[base + 1]
                }
            })
            .collect())
    }

    pub fn ou_state(&self, tick: i64) -> Result<OUBoundaryState> {
        Ok(OUBoundaryState {
            zeta: self.zeta(tick)?,
            index: (tick + self.offset).div_euclid(self.tables.ticks_per_noise),
            t: self.time(tick),
        })
    }

    /// Weights of the precomputed lifts at `tick`: the noise modes, then
    /// the periodic lift if present.
    pub fn coefficients(&self, tick: i64) -> Result<Vec<f64>> {
        let t = &self.tables;
        let mut c: Vec<f64> = self
            .zeta(tick)?
            .iter()
            .zip(&t.sqrt_q)
            .map(|(z, s)| s * z)
            .collect();
        if t.lifts.len() > t.model.n_modes() {
            c.push(self.periodic_value(tick + self.offset));
        }
        Ok(c)
    }

    pub fn lift_from_coefficients(&self, c: &[f64]) -> LiftField {
        let t = &self.tables;
        let mut field = SpectralField::zeros(t.grid.shape());
        let mut flux = BoundaryFlux::zeros(&t.grid);
        for ((w, lift), support) in c.iter().zip(&t.lifts).zip(&t.supports) {
            if *w == 0.0 {
                continue;
            }
            for &h in support {
                for (d, s) in field.profile_mut(h).iter_mut().zip(lift.field().profile(h)) {
                    *d += s * *w;
                }
                flux.coeffs_mut()[h] += lift.flux().coeffs()[h] * *w;
            }
        }
        LiftField::from_parts(field, flux)
    }

    pub fn lift(&self, tick: i64) -> Result<LiftField> {
        Ok(self.lift_from_coefficients(&self.coefficients(tick)?))
    }

    fn quad(gram: &[f64], c: &[f64]) -> f64 {
        let n = c.len();
        let mut acc = 0.0;
        for i in 0..n {
            if c[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                acc += c[i] * gram[i * n + j] * c[j];
            }
        }
        acc.max(0.0)
    }

    /// `‖lift_x‖²_{V'}` from lift weights.
    pub fn source_from_coefficients(&self, c: &[f64]) -> f64 {
        Self::quad(&self.tables.gram_vdual, c)
    }

    pub fn source(&self, tick: i64) -> Result<f64> {
        Ok(self.source_from_coefficients(&self.coefficients(tick)?))
    }

    pub fn lift_norm_sq(&self, tick: i64) -> Result<f64> {
        Ok(Self::quad(&self.tables.gram_h, &self.coefficients(tick)?))
    }
}

/// An interior `A`-eigenmode `(k, l, m)` whose `(k, l)` is carried by a
/// boundary noise mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorMode {
    pub boundary_mode: usize,
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct InteriorTrajectories {
    pub times: Vec<f64>,
    /// One series per tracked mode.
    pub amplitudes: Vec<Vec<f64>>,
    /// Decay rate `ν λ_k`.
    pub kappa: Vec<f64>,
    /// Drive coefficient `b` in `a' = -κ a + b ζ`.
    pub drive: Vec<f64>,
    /// `b² / (κ (κ + 1/τ_c))`.
    pub stationary_variance: Vec<f64>,
}

fn expm1_over(a: f64, h: f64) -> f64 {
    if a == 0.0 {
        h
    } else {
        (a * h).exp_m1() / a
    }
}

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let panels = 16;
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        for (x, wt) in X.iter().zip(&W) {
            acc += wt * f(mid + 0.5 * w * x);
        }
    }
    0.5 * w * acc
}

/// Joint Gaussian transition of `(ζ, a)` over one noise step: the
/// integral `∫₀ʰ e^{-κ(h-s)} ζ(s) ds` conditioned on both endpoints.
struct JointStep {
    decay: f64,
    mean0: f64,
    mean1: f64,
    resid_sd: f64,
}

fn joint_step(kappa: f64, gamma: f64, h: f64) -> JointStep {
    let rho = (-gamma * h).exp();
    let j0 = (-kappa * h).exp() * expm1_over(kappa - gamma, h);
    let p = expm1_over(-(kappa + gamma), h) - (-(kappa + gamma) * h).exp() * expm1_over(kappa - gamma, h);
    let first = 2.0
        * gauss_legendre(
            |u| (-(kappa + gamma) * u).exp() * expm1_over(gamma - kappa, u),
            0.0,
            h,
        );
    let vi = first - (-2.0 * gamma * h).exp() * expm1_over(gamma - kappa, h).powi(2);
    let vz = -(-2.0 * gamma * h).exp_m1();
    JointStep {
        decay: (-kappa * h).exp(),
        mean0: j0 - p / vz * rho,
        mean1: p / vz,
        resid_sd: (vi - p * p / vz).max(0.0).sqrt(),
    }
}

/// Exact per-mode coefficients of the interior OU expansion driven by the
/// same realization as the boundary flux. Validation only.
///
/// The conditional part of each step that the stored boundary increments
/// do not determine is drawn from a dedicated ChaCha stream of the path
/// seed.
pub fn interior_ou_modes(
    model: &NoiseModel,
    path: &NoisePath,
    domain: &Domain,
    nu: f64,
    modes: &[InteriorMode],
    t_span: (f64, f64),
    init: Option<&[f64]>,
) -> Result<InteriorTrajectories> {
    check_model_path(model, path)?;
    let j0 = path.grid_index(t_span.0)?;
    let j1 = path.grid_index(t_span.1)?;
    if j0 > j1 || j0 < path.start_index() || j1 > path.end_index() {
        return Err(coverage_error(path, t_span.0, t_span.1));
    }
    if let Some(a) = init {
        if a.len() != modes.len() {
            return Err(QgError::ShapeMismatch {
                expected: format!("{} initial amplitudes", modes.len()),
                found: format!("{}", a.len()),
            });
        }
    }
    let grid = domain.grid();
    let vop = domain.vertical();
    let nz = grid.nz();
    let gamma = 1.0 / model.tau_c();
    let h = model.dt_noise();
    let n_pts = (j1 - j0) as usize + 1;

    let mut kappa = Vec::new();
    let mut drive = Vec::new();
    let mut stationary_variance = Vec::new();
    let mut amplitudes = Vec::new();
    for (idx, im) in modes.iter().enumerate() {
        if im.boundary_mode >= model.n_modes() || im.m >= nz {
            return Err(QgError::InvalidInput(format!(
                "interior mode {idx} refers to boundary mode {} / vertical mode {}",
                im.boundary_mode, im.m
            )));
        }
        let bm = model.modes()[im.boundary_mode];
        let lam = bm.wavenumber_sq() as f64 + vop.eigenvalues()[im.m];
        if lam <= 0.0 {
            return Err(QgError::InvalidInput("tracked mode has zero eigenvalue".into()));
        }
        let k = nu * lam;
        let b = nu
            * vop.f_half()[nz - 2]
            * vop.eigenvector(im.m, nz - 1)
            * model.q()[im.boundary_mode].sqrt();
        let var = b * b / (k * (k + gamma));
        let step = joint_step(k, gamma, h);

        let mut rng = mode_stream(path.seed(), (1u64 << 40) + idx as u64);
        let series = {
            let zeta_of = |rel: usize| -> Vec<f64> {
                // ζ of this boundary mode along the whole path.
                let mut z = match model.init_mode() {
                    InitMode::Stationary => path.init_draw(im.boundary_mode),
                    InitMode::BurnIn => 0.0,
                };
                let a = (-h * gamma).exp();
                let s = (-(-2.0 * h * gamma).exp_m1()).sqrt() / h.sqrt();
                let mut out = Vec::with_capacity(rel + 1);
                out.push(z);
                for i in 0..rel {
                    z = a * z + s * path.increment(im.boundary_mode, i);
                    out.push(z);
                }
                out
            };
            let zeta = zeta_of((j1 - path.start_index()) as usize);
            let base = (j0 - path.start_index()) as usize;
            let mut a = match init {
                Some(v) => v[idx],
                None => {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    let c = b / (k + gamma);
                    c * zeta[base] + (var - c * c).max(0.0).sqrt() * g
                }
            };
            let mut out = Vec::with_capacity(n_pts);
            out.push(a);
            for rel in base..base + n_pts - 1 {
                let g: f64 = StandardNormal.sample(&mut rng);
                let integral = step.mean0 * zeta[rel] + step.mean1 * zeta[rel + 1] + step.resid_sd * g;
                a = step.decay * a + b * integral;
                out.push(a);
            }
            out
        };
        kappa.push(k);
        drive.push(b);
        stationary_variance.push(var);
        amplitudes.push(series);
    }
    let times = (0..n_pts).map(|i| (j0 + i as i64) as f64 * h).collect();
    Ok(InteriorTrajectories {
        times,
        amplitudes,
        kappa,
        drive,
        stationary_variance,
    })
}

#[derive(Debug, Clone)]
pub struct TemperednessSeries {
    /// Sample times `-1, -2, …, -horizon`.
    pub t: Vec<f64>,
    pub log_plus_norm: Vec<f64>,
    /// `log⁺‖lift(θ_t ω)‖_H / |t|`.
    pub ratio: Vec<f64>,
    /// OLS fit of `log⁺‖lift‖_H` against `|t|` over the second half.
    pub tail_fit: LinearFit,
}

/// Subexponential-growth diagnostic of the lift along backward shifts.
pub fn temperedness_series(forcing: &Forcing, horizon: usize) -> Result<TemperednessSeries> {
    if horizon < 100 {
        return Err(QgError::InvalidInput(format!(
            "temperedness horizon must cover at least 100 periods (got {horizon})"
        )));
    }
    let mut t = Vec::with_capacity(horizon);
    let mut lp = Vec::with_capacity(horizon);
    let mut ratio = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let tick = forcing.tick_of(-(k as f64))?;
        let norm = forcing.lift_norm_sq(tick)?.sqrt();
        let v = if norm > 1.0 { norm.ln() } else { 0.0 };
        t.push(-(k as f64));
        lp.push(v);
        ratio.push(v / k as f64);
    }
    let half = horizon / 2;
    let abs_t: Vec<f64> = t[half..].iter().map(|v| v.abs()).collect();
    let tail_fit = ols(&abs_t, &lp[half..]);
    Ok(TemperednessSeries {
        t,
        log_plus_norm: lp,
        ratio,
        tail_fit,
    })
}

/// Complex coefficient helper used by tests and the CLI.
pub fn mode_flux(grid: &Grid, mode: BoundaryMode, amplitude: f64) -> Result<BoundaryFlux> {
    BoundaryFlux::from_mode(grid, mode, amplitude)
}
