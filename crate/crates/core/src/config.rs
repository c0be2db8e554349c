//! Run configuration: a TOML document with dotted keys, every key known,
//! every violation reported at once.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::attractor::{PullbackConfig, RadiusRule};
use crate::domain::{Domain, Grid, StratificationProfile};
use crate::error::{QgError, Result};
use crate::forcing::{Forcing, InitMode, NoiseModel, NoisePath, PeriodicFlux};
use crate::integrator::{Integrator, Terms};
use crate::lift::{boundary_basis, BoundaryFlux, BoundaryMode, ModeKind};
use crate::operators::OperatorContext;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Stratification {
    Constant(f64),
    /// `N` at each vertical level, bottom to top.
    Table(Vec<f64>),
}

/// One boundary mode of the periodic flux amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicMode {
    pub mode: BoundaryMode,
    pub amplitude: f64,
}

impl PeriodicMode {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || format!("periodic mode '{s}' must read '<cos|sin> <k> <l> <amplitude>'");
        if parts.len() != 4 {
            return Err(bad());
        }
        let kind = match parts[0] {
            "cos" => ModeKind::Cos,
            "sin" => ModeKind::Sin,
            _ => return Err(bad()),
        };
        let k: i64 = parts[1].parse().map_err(|_| bad())?;
        let l: i64 = parts[2].parse().map_err(|_| bad())?;
        let amplitude: f64 = parts[3].parse().map_err(|_| bad())?;
        if !amplitude.is_finite() {
            return Err(bad());
        }
        Ok(Self {
            mode: BoundaryMode { k, l, kind },
            amplitude,
        })
    }

    fn render(&self) -> String {
        let kind = match self.mode.kind {
            ModeKind::Cos => "cos",
            ModeKind::Sin => "sin",
        };
        format!("{kind} {} {} {:?}", self.mode.k, self.mode.l, self.amplitude)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nu: f64,
    pub beta: f64,
    pub f0: f64,
    pub stratification: Stratification,
    pub n_modes: usize,
    pub q0: f64,
    pub p: f64,
    pub tau_c: f64,
    pub dt_noise: f64,
    pub noise_init: InitMode,
    pub periodic: Vec<PeriodicMode>,
    pub phase: f64,
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
    pub snapshot_every: usize,
    pub cfl_check: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Noise path file; generated from `seed` when absent.
    pub noise_path: Option<PathBuf>,
    pub horizons: Vec<f64>,
    pub ensemble: usize,
    pub sampler: String,
    pub basis_modes: usize,
    /// Exponent of the tempered radius growth; 0 uses the absorbing ball.
    pub radius_power: f64,
    pub xi_horizon: Option<f64>,
    pub invariance_t: f64,
    pub growth_points: usize,
    pub cocycle_s: f64,
    pub cocycle_t: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            nz: 17,
            nu: 0.5,
            beta: 1.0,
            f0: 1.0,
            stratification: Stratification::Constant(1.0),
            n_modes: 8,
            q0: 1.0,
            p: 3.0,
            tau_c: 0.5,
            dt_noise: 0.05,
            noise_init: InitMode::Stationary,
            periodic: Vec::new(),
            phase: 0.0,
            dt: 0.025,
            t0: 0.0,
            t1: 10.0,
            snapshot_every: 40,
            cfl_check: true,
            seed: 1,
            output_dir: PathBuf::from("out"),
            noise_path: None,
            horizons: vec![2.0, 4.0, 8.0, 16.0],
            ensemble: 8,
            sampler: "sphere".into(),
            basis_modes: 16,
            radius_power: 0.0,
            xi_horizon: None,
            invariance_t: 1.0,
            growth_points: 0,
            cocycle_s: 1.0,
            cocycle_t: 1.0,
        }
    }
}

const KEYS: &[&str] = &[
    "grid.nx",
    "grid.ny",
    "grid.nz",
    "physics.nu",
    "physics.beta",
    "physics.f0",
    "stratification.kind",
    "stratification.n",
    "stratification.table",
    "noise.n_modes",
    "noise.q0",
    "noise.p",
    "noise.tau_c",
    "noise.dt_noise",
    "noise.init",
    "periodic.modes",
    "periodic.phase",
    "time.dt",
    "time.t0",
    "time.t1",
    "time.snapshot_every",
    "time.cfl_check",
    "run.seed",
    "output.dir",
    "output.noise_path",
    "pullback.horizons",
    "pullback.ensemble",
    "pullback.sampler",
    "pullback.basis_modes",
    "pullback.radius_power",
    "pullback.xi_horizon",
    "pullback.invariance_t",
    "pullback.growth_points",
    "cocycle.s",
    "cocycle.t",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

struct Reader<'a> {
    entries: &'a [(String, toml::Value)],
    errors: Vec<String>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(toml::Value::Float(x)) => *x,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(v) => {
                self.errors.push(format!("{key}: expected a number, found {}", v.type_str()));
                default
            }
        }
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        self.get(key)?;
        Some(self.float(key, f64::NAN))
    }

    fn uint(&mut self, key: &str, default: usize) -> usize {
        match self.get(key) {
            None => default,
            Some(toml::Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(v) => {
                self.errors.push(format!("{key}: expected a nonnegative integer, found {v}"));
                default
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(toml::Value::Boolean(b)) => *b,
            Some(v) => {
                self.errors.push(format!("{key}: expected a boolean, found {}", v.type_str()));
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.errors.push(format!("{key}: expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn float_array(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.get(key) {
            None => None,
            Some(toml::Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for v in a {
                    match v {
                        toml::Value::Float(x) => out.push(*x),
                        toml::Value::Integer(i) => out.push(*i as f64),
                        _ => {
                            self.errors.push(format!("{key}: expected an array of numbers"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(v) => {
                self.errors.push(format!("{key}: expected an array, found {}", v.type_str()));
                None
            }
        }
    }

    fn string_array(&mut self, key: &str) -> Option<Vec<String>> {
        match self.get(key) {
            None => None,
            Some(toml::Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for v in a {
                    match v {
                        toml::Value::String(s) => out.push(s.clone()),
                        _ => {
                            self.errors.push(format!("{key}: expected an array of strings"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(v) => {
                self.errors.push(format!("{key}: expected an array, found {}", v.type_str()));
                None
            }
        }
    }
}

fn divides(dt: f64, span: f64) -> bool {
    let x = span / dt;
    let k = x.round();
    k >= 1.0 && (x - k).abs() <= 1e-9 * x
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    parse_config_with(text, &[])
}

/// As [`parse_config`], with `key = value` overrides applied on top.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<SimConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| QgError::Config(vec![format!("syntax: {e}")]))?;
    let mut bad = Vec::new();
    for o in overrides {
        match toml::from_str::<toml::Table>(o) {
            Ok(t) => merge(&mut table, t),
            // A bare string value, e.g. a path: quote it and retry.
            Err(_) => match o.split_once('=').map(|(k, v)| {
                let quoted = format!("{} = {}", k.trim(), toml::Value::String(v.trim().to_string()));
                toml::from_str::<toml::Table>(&quoted)
            }) {
                Some(Ok(t)) => merge(&mut table, t),
                _ => bad.push(format!("override '{o}' is not a 'key = value' line")),
            },
        }
    }
    if !bad.is_empty() {
        return Err(QgError::Config(bad));
    }
    let mut entries = Vec::new();
    flatten("", &table, &mut entries);
    let mut errors: Vec<String> = entries
        .iter()
        .filter(|(k, _)| !KEYS.contains(&k.as_str()))
        .map(|(k, _)| format!("unknown key '{k}'"))
        .collect();

    let d = SimConfig::default();
    let mut r = Reader {
        entries: &entries,
        errors: Vec::new(),
    };
    let mut c = SimConfig {
        nx: r.uint("grid.nx", d.nx),
        ny: r.uint("grid.ny", d.ny),
        nz: r.uint("grid.nz", d.nz),
        nu: r.float("physics.nu", d.nu),
        beta: r.float("physics.beta", d.beta),
        f0: r.float("physics.f0", d.f0),
        n_modes: r.uint("noise.n_modes", d.n_modes),
        q0: r.float("noise.q0", d.q0),
        p: r.float("noise.p", d.p),
        tau_c: r.float("noise.tau_c", d.tau_c),
        dt_noise: r.float("noise.dt_noise", d.dt_noise),
        phase: r.float("periodic.phase", d.phase),
        dt: r.float("time.dt", d.dt),
        t0: r.float("time.t0", d.t0),
        t1: r.float("time.t1", d.t1),
        snapshot_every: r.uint("time.snapshot_every", d.snapshot_every),
        cfl_check: r.boolean("time.cfl_check", d.cfl_check),
        seed: match r.get("run.seed").cloned() {
            None => d.seed,
            Some(toml::Value::Integer(i)) if i >= 0 => i as u64,
            Some(toml::Value::String(s)) => s.parse().unwrap_or_else(|_| {
                r.errors.push(format!("run.seed: '{s}' is not an unsigned integer"));
                d.seed
            }),
            Some(v) => {
                r.errors.push(format!("run.seed: expected an integer, found {}", v.type_str()));
                d.seed
            }
        },
        ensemble: r.uint("pullback.ensemble", d.ensemble),
        basis_modes: r.uint("pullback.basis_modes", d.basis_modes),
        radius_power: r.float("pullback.radius_power", d.radius_power),
        xi_horizon: r.opt_float("pullback.xi_horizon"),
        invariance_t: r.float("pullback.invariance_t", d.invariance_t),
        growth_points: r.uint("pullback.growth_points", d.growth_points),
        cocycle_s: r.float("cocycle.s", d.cocycle_s),
        cocycle_t: r.float("cocycle.t", d.cocycle_t),
        ..d.clone()
    };
    c.noise_init = match r.string("noise.init").as_deref() {
        None | Some("stationary") => InitMode::Stationary,
        Some("burn-in") => InitMode::BurnIn,
        Some(other) => {
            r.errors.push(format!("noise.init: '{other}' is not one of stationary, burn-in"));
            d.noise_init
        }
    };
    let kind = r.string("stratification.kind");
    let n_const = r.float("stratification.n", 1.0);
    let table_vals = r.float_array("stratification.table");
    c.stratification = match kind.as_deref() {
        None | Some("constant") => {
            if table_vals.is_some() {
                r.errors.push("stratification.table requires stratification.kind = \"table\"".into());
            }
            Stratification::Constant(n_const)
        }
        Some("table") => match table_vals {
            Some(t) => Stratification::Table(t),
            None => {
                r.errors.push("stratification.kind = \"table\" requires stratification.table".into());
                Stratification::Constant(n_const)
            }
        },
        Some(other) => {
            r.errors.push(format!("stratification.kind: '{other}' is not one of constant, table"));
            Stratification::Constant(n_const)
        }
    };
    if let Some(modes) = r.string_array("periodic.modes") {
        for m in modes {
            match PeriodicMode::parse(&m) {
                Ok(pm) => c.periodic.push(pm),
                Err(e) => r.errors.push(format!("periodic.modes: {e}")),
            }
        }
    }
    if let Some(s) = r.string("output.dir") {
        c.output_dir = PathBuf::from(s);
    }
    c.noise_path = r.string("output.noise_path").map(PathBuf::from);
    if let Some(h) = r.float_array("pullback.horizons") {
        c.horizons = h;
    }
    if let Some(s) = r.string("pullback.sampler") {
        c.sampler = s;
    }
    errors.extend(r.errors);
    errors.extend(c.violations());
    if errors.is_empty() {
        Ok(c)
    } else {
        Err(QgError::Config(errors))
    }
}

impl SimConfig {
    /// Every constraint violation of the configuration.
    pub fn violations(&self) -> Vec<String> {
        let mut e = Vec::new();
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        for (name, n) in [("grid.nx", self.nx), ("grid.ny", self.ny)] {
            if n < 8 || n % 2 != 0 {
                e.push(format!("{name} must be even and >= 8 (got {n})"));
            }
        }
        if self.nz < 5 {
            e.push(format!("grid.nz must be >= 5 (got {})", self.nz));
        }
        if !pos(self.nu) {
            e.push(format!("viscosity must be positive (physics.nu = {})", self.nu));
        }
        if !nonneg(self.beta) {
            e.push(format!("physics.beta must be >= 0 (got {})", self.beta));
        }
        if !pos(self.f0) {
            e.push(format!("physics.f0 must be positive (got {})", self.f0));
        }
        match &self.stratification {
            Stratification::Constant(n) => {
                if !pos(*n) {
                    e.push(format!("stratification.n must be positive (got {n})"));
                }
            }
            Stratification::Table(t) => {
                if t.len() != self.nz {
                    e.push(format!(
                        "stratification.table has {} entries but grid.nz = {}",
                        t.len(),
                        self.nz
                    ));
                }
                if t.iter().any(|n| !pos(*n)) {
                    e.push("stratification.table entries must be positive".into());
                }
            }
        }
        if !nonneg(self.q0) {
            e.push(format!("noise.q0 must be >= 0 (got {})", self.q0));
        }
        if !nonneg(self.p) {
            e.push(format!("noise.p must be >= 0 (got {})", self.p));
        }
        if !pos(self.tau_c) {
            e.push(format!("noise.tau_c must be positive (got {})", self.tau_c));
        }
        if !pos(self.dt_noise) {
            e.push(format!("noise.dt_noise must be positive (got {})", self.dt_noise));
        }
        if !pos(self.dt) {
            e.push(format!("time.dt must be positive (got {})", self.dt));
        } else {
            if pos(self.dt_noise) && !divides(self.dt, self.dt_noise) {
                e.push(format!(
                    "time.dt = {} does not divide noise.dt_noise = {}",
                    self.dt, self.dt_noise
                ));
            }
            if !self.periodic.is_empty() && !divides(self.dt, 1.0) {
                e.push(format!("time.dt = {} must divide the forcing period 1", self.dt));
            }
        }
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t0 < self.t1) {
            e.push(format!("time.t0 = {} must be less than time.t1 = {}", self.t0, self.t1));
        }
        if self.snapshot_every == 0 {
            e.push("time.snapshot_every must be >= 1".into());
        }
        if !(self.phase.is_finite() && (0.0..1.0).contains(&self.phase)) {
            e.push(format!("periodic.phase must lie in [0, 1) (got {})", self.phase));
        }
        if self.nx >= 8 && self.ny >= 8 && self.nx.is_multiple_of(2) && self.ny.is_multiple_of(2) && self.nz >= 5 {
            if let Ok(grid) = Grid::new(self.nx, self.ny, self.nz) {
                let basis = boundary_basis(&grid);
                if self.n_modes > basis.len() {
                    e.push(format!(
                        "noise.n_modes = {} exceeds the {} resolved boundary modes",
                        self.n_modes,
                        basis.len()
                    ));
                }
                for pm in &self.periodic {
                    if !basis.contains(&pm.mode) {
                        e.push(format!("periodic mode {} is not a resolved boundary mode", pm.render()));
                    }
                }
            }
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|t| !nonneg(*t)) {
            e.push("pullback.horizons must be a nonempty list of nonnegative times".into());
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            e.push("pullback.horizons must be strictly increasing".into());
        }
        if self.ensemble < 8 {
            e.push(format!("pullback.ensemble must be >= 8 (got {})", self.ensemble));
        }
        if self.basis_modes == 0 {
            e.push("pullback.basis_modes must be >= 1".into());
        }
        if !nonneg(self.radius_power) {
            e.push(format!("pullback.radius_power must be >= 0 (got {})", self.radius_power));
        }
        if let Some(h) = self.xi_horizon {
            if !pos(h) {
                e.push(format!("pullback.xi_horizon must be positive (got {h})"));
            }
        }
        if !nonneg(self.invariance_t) {
            e.push(format!("pullback.invariance_t must be >= 0 (got {})", self.invariance_t));
        }
        if self.growth_points != 0 && self.growth_points < 50 {
            e.push(format!(
                "pullback.growth_points must be 0 or >= 50 (got {})",
                self.growth_points
            ));
        }
        if !nonneg(self.cocycle_s) || !nonneg(self.cocycle_t) {
            e.push("cocycle.s and cocycle.t must be >= 0".into());
        }
        e
    }

    /// Canonical document: every key, fixed order, shortest round-trip floats.
    pub fn normalize(&self) -> String {
        let f = |x: f64| format!("{x:?}");
        let fl = |v: &[f64]| format!("[{}]", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "));
        let s = |x: &str| toml::Value::String(x.to_string()).to_string();
        let mut o = String::new();
        let _ = writeln!(o, "[grid]\nnx = {}\nny = {}\nnz = {}\n", self.nx, self.ny, self.nz);
        let _ = writeln!(o, "[physics]\nnu = {}\nbeta = {}\nf0 = {}\n", f(self.nu), f(self.beta), f(self.f0));
        match &self.stratification {
            Stratification::Constant(n) => {
                let _ = writeln!(o, "[stratification]\nkind = \"constant\"\nn = {}\n", f(*n));
            }
            Stratification::Table(t) => {
                let _ = writeln!(o, "[stratification]\nkind = \"table\"\ntable = {}\n", fl(t));
            }
        }
        let init = match self.noise_init {
            InitMode::Stationary => "stationary",
            InitMode::BurnIn => "burn-in",
        };
        let _ = writeln!(
            o,
            "[noise]\nn_modes = {}\nq0 = {}\np = {}\ntau_c = {}\ndt_noise = {}\ninit = \"{init}\"\n",
            self.n_modes,
            f(self.q0),
            f(self.p),
            f(self.tau_c),
            f(self.dt_noise)
        );
        let modes: Vec<String> = self.periodic.iter().map(|m| s(&m.render())).collect();
        let _ = writeln!(o, "[periodic]\nmodes = [{}]\nphase = {}\n", modes.join(", "), f(self.phase));
        let _ = writeln!(
            o,
            "[time]\ndt = {}\nt0 = {}\nt1 = {}\nsnapshot_every = {}\ncfl_check = {}\n",
            f(self.dt),
            f(self.t0),
            f(self.t1),
            self.snapshot_every,
            self.cfl_check
        );
        let _ = writeln!(o, "[run]\nseed = {}\n", s(&self.seed.to_string()));
        let _ = writeln!(o, "[output]\ndir = {}", s(&self.output_dir.to_string_lossy()));
        if let Some(p) = &self.noise_path {
            let _ = writeln!(o, "noise_path = {}", s(&p.to_string_lossy()));
        }
        let _ = writeln!(
            o,
            "\n[pullback]\nhorizons = {}\nensemble = {}\nsampler = {}\nbasis_modes = {}\nradius_power = {}",
            fl(&self.horizons),
            self.ensemble,
            s(&self.sampler),
            self.basis_modes,
            f(self.radius_power)
        );
        if let Some(h) = self.xi_horizon {
            let _ = writeln!(o, "xi_horizon = {}", f(h));
        }
        let _ = writeln!(
            o,
            "invariance_t = {}\ngrowth_points = {}\n",
            f(self.invariance_t),
            self.growth_points
        );
        let _ = writeln!(o, "[cocycle]\ns = {}\nt = {}", f(self.cocycle_s), f(self.cocycle_t));
        o
    }

    /// First 16 hex digits of the SHA-256 of the normalized document.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.normalize().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.nz)
    }

    pub fn profile(&self) -> Result<StratificationProfile> {
        match &self.stratification {
            Stratification::Constant(n) => StratificationProfile::constant(self.f0, *n, self.nz),
            Stratification::Table(t) => StratificationProfile::new(self.f0, t.clone()),
        }
    }

    pub fn context(&self) -> Result<OperatorContext> {
        let domain = Domain::new(self.grid()?, self.profile()?)?;
        OperatorContext::new(Arc::new(domain), self.nu, self.beta)
    }

    pub fn noise_model(&self, grid: &Grid) -> Result<NoiseModel> {
        Ok(NoiseModel::new(grid, self.n_modes, self.q0, self.p, self.tau_c, self.dt_noise)?.with_init(self.noise_init))
    }

    pub fn periodic_flux(&self, domain: &Domain) -> Result<Option<PeriodicFlux>> {
        if self.periodic.is_empty() {
            return Ok(None);
        }
        let grid = domain.grid();
        let mut flux = BoundaryFlux::zeros(grid);
        for pm in &self.periodic {
            let one = BoundaryFlux::from_mode(grid, pm.mode, pm.amplitude)?;
            let mut c = flux.coeffs().to_vec();
            for (a, b) in c.iter_mut().zip(one.coeffs()) {
                *a += b;
            }
            flux = BoundaryFlux::new(grid, c)?;
        }
        Ok(Some(PeriodicFlux::new(domain, flux, self.phase)?))
    }

    /// A path from `seed` covering `[t_min, t_max]`.
    pub fn generate_path(&self, t_min: f64, t_max: f64) -> Result<NoisePath> {
        NoisePath::covering(self.seed, self.n_modes, self.dt_noise, t_min, t_max)
    }

    pub fn integrator(&self, path: Option<&NoisePath>) -> Result<Integrator> {
        let ctx = self.context()?;
        let model = self.noise_model(ctx.domain().grid())?;
        let periodic = self.periodic_flux(ctx.domain())?;
        let forcing = Forcing::new(&ctx, model, path, periodic.as_ref(), self.dt)?;
        Ok(Integrator::new(ctx, forcing, Terms::all())?.with_cfl_check(self.cfl_check))
    }

    pub fn pullback(&self) -> PullbackConfig {
        PullbackConfig {
            horizons: self.horizons.clone(),
            ensemble: self.ensemble,
            sampler: self.sampler.clone(),
            basis_modes: self.basis_modes,
            radius: if self.radius_power == 0.0 {
                RadiusRule::AbsorbingBall
            } else {
                RadiusRule::Polynomial(self.radius_power)
            },
            seed: self.seed,
            xi_horizon: self.xi_horizon,
        }
    }

    /// Time range the pullback, invariance and growth runs read from the path.
    pub fn pullback_span(&self, lambda1: f64) -> (f64, f64) {
        let xi_h = self.xi_horizon.unwrap_or(20.0 / (self.nu * lambda1));
        let t_max = self.horizons.iter().copied().fold(0.0, f64::max);
        let forward = self.invariance_t.max(self.growth_points as f64);
        (-(t_max + xi_h) - self.dt_noise, forward + self.invariance_t + self.dt_noise)
    }
}
