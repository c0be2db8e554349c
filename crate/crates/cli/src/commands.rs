use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::{json, Value};

use qgsim_core::attractor::{
    cocycle_check, diameter, growth_diagnostic, growth_series, invariance_check, pullback_run,
    SampleBasis,
};
use qgsim_core::io::{self, Provenance};
use qgsim_core::validation::{run_suite, suite_span};
use qgsim_core::{NoisePath, QgError, Result, SamplerRegistry, SimConfig};

/// What a subcommand hands back: a JSON summary and whether every check
/// it ran passed.
pub struct Outcome {
    pub summary: Value,
    pub passed: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, passed: true }
    }
}

pub struct RunContext {
    pub config: SimConfig,
    pub out_dir: PathBuf,
    pub provenance: Provenance,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// The configured noise path file, or one generated from the seed that
    /// covers `[t_min, t_max]`.
    fn noise_path(&self, t_min: f64, t_max: f64) -> Result<NoisePath> {
        match &self.config.noise_path {
            Some(file) => {
                let (path, _) = io::read_noise_path(file)?;
                if path.seed() != self.config.seed {
                    return Err(QgError::InvalidInput(format!(
                        "noise path {} was generated with seed {} but the config uses {}",
                        file.display(),
                        path.seed(),
                        self.config.seed
                    )));
                }
                Ok(path)
            }
            None => self.config.generate_path(t_min, t_max),
        }
    }
}

pub trait Subcommand {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn args(&self, cmd: Command) -> Command {
        cmd
    }
    fn run(&self, ctx: &RunContext, m: &ArgMatches) -> Result<Outcome>;
}

pub struct Registry {
    commands: Vec<Box<dyn Subcommand>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self { commands: Vec::new() };
        r.register(Box::new(Simulate));
        r.register(Box::new(Pullback));
        r.register(Box::new(CocycleCheck));
        r.register(Box::new(Validate));
        r.register(Box::new(Spectrum));
        r.register(Box::new(GenNoise));
        r
    }
}

impl Registry {
    pub fn register(&mut self, c: Box<dyn Subcommand>) {
        self.commands.push(c);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Subcommand> {
        self.commands.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn cli(&self) -> Command {
        let mut root = Command::new("qgsim")
            .version(env!("CARGO_PKG_VERSION"))
            .about("Stochastically forced stratified quasigeostrophic flow and its pullback attractor")
            .subcommand_required(true)
            .arg_required_else_help(true);
        for c in &self.commands {
            let sub = Command::new(c.name())
                .about(c.about())
                .arg(
                    Arg::new("config")
                        .long("config")
                        .short('c')
                        .value_name("FILE")
                        .help("TOML configuration; defaults are used when omitted"),
                )
                .arg(
                    Arg::new("set")
                        .long("set")
                        .value_name("KEY=VALUE")
                        .action(ArgAction::Append)
                        .help("Override one configuration key, e.g. --set physics.nu=0.3"),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .short('o')
                        .value_name("DIR")
                        .help("Output directory (overrides output.dir)"),
                );
            root = root.subcommand(c.args(sub));
        }
        root
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn init_field(m: &ArgMatches, it: &qgsim_core::Integrator) -> Result<qgsim_core::SpectralField> {
    match m.get_one::<String>("init") {
        Some(file) => {
            let snap = io::read_snapshot(Path::new(file))?;
            it.ctx().domain().shape().check(snap.field.shape())?;
            Ok(snap.field)
        }
        None => Ok(qgsim_core::SpectralField::zeros(it.ctx().domain().shape())),
    }
}

fn init_arg(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("init")
            .long("init")
            .value_name("SNAPSHOT")
            .help("Initial state snapshot; the zero field when omitted"),
    )
}

struct Simulate;

impl Subcommand for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn about(&self) -> &'static str {
        "Integrate from time.t0 to time.t1 and write diagnostics and snapshots"
    }

    fn args(&self, cmd: Command) -> Command {
        init_arg(cmd)
    }

    fn run(&self, ctx: &RunContext, m: &ArgMatches) -> Result<Outcome> {
        let c = &ctx.config;
        let path = ctx.noise_path(c.t0 - c.dt_noise, c.t1 + c.dt_noise)?;
        let it = c.integrator(Some(&path))?;
        let u0 = init_field(m, &it)?;
        let traj = it.simulate(u0, c.t0, c.t1, c.snapshot_every)?;
        let mut csv = Vec::new();
        io::write_diagnostics_csv(&mut csv, &traj.diagnostics, &ctx.provenance)?;
        fs::write(ctx.path("diagnostics.csv"), &csv)?;
        let snap_dir = ctx.path("snapshots");
        fs::create_dir_all(&snap_dir)?;
        for (i, (t, u)) in traj.snapshots.iter().enumerate() {
            io::write_snapshot(&snap_dir.join(format!("snap_{i:05}.bin")), u, *t, &ctx.provenance)?;
        }
        let final_bytes = io::encode_snapshot(&traj.final_state.u, traj.final_state.t, &ctx.provenance);
        fs::write(ctx.path("final.bin"), &final_bytes)?;
        let worst = traj
            .diagnostics
            .iter()
            .map(|r| r.h * r.h - (r.xi * (1.0 + 1e-6) + 1e-10))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Outcome::ok(json!({
            "steps": traj.diagnostics.len(),
            "snapshots": traj.snapshots.len(),
            "t_final": traj.final_state.t,
            "norm_h_final": traj.diagnostics.last().map(|r| r.h),
            "xi_final": traj.final_state.xi,
            "energy_bound_margin": worst,
            "final_checksum": io::sha256_hex(&final_bytes),
            "diagnostics_checksum": io::sha256_hex(&csv),
        })))
    }
}

struct Pullback;

impl Subcommand for Pullback {
    fn name(&self) -> &'static str {
        "pullback"
    }

    fn about(&self) -> &'static str {
        "Pullback ensembles at time 0 for each horizon, with invariance and growth diagnostics"
    }

    fn run(&self, ctx: &RunContext, _m: &ArgMatches) -> Result<Outcome> {
        let c = &ctx.config;
        let lambda1 = c.context()?.lambda1();
        let (a, b) = c.pullback_span(lambda1);
        let path = ctx.noise_path(a, b)?;
        let it = c.integrator(Some(&path))?;
        let registry = SamplerRegistry::default();
        let pc = c.pullback();
        let est = pullback_run(&it, &pc, &registry, 0.0)?;

        let mut summary = json!({
            "horizons": est.horizons,
            "diameter": est.diameter,
            "hausdorff_prev": est.hausdorff_prev.iter().map(|x| if x.is_finite() { json!(x) } else { Value::Null }).collect::<Vec<_>>(),
            "xi_star_start": est.xi_star_start,
            "xi_star": est.xi_star,
            "absorbing_ball_sq": 2.0 * est.xi_star,
            "max_norm_sq": est.max_norm_sq,
        });
        if c.invariance_t > 0.0 {
            let inv = invariance_check(&est, &it, &pc, &registry, c.invariance_t)?;
            summary["invariance"] = json!({"t": c.invariance_t, "distance": inv.distance, "budget": inv.budget});
        }
        let mut slope = f64::NAN;
        if c.growth_points >= 50 {
            let series = growth_series(&est, &it, c.growth_points)?;
            let g = growth_diagnostic(&series)?;
            slope = g.fit.slope;
            summary["growth"] = json!({"slope": g.fit.slope, "slope_se": g.fit.slope_se, "points": g.n_points});
        }
        let rows: Vec<[f64; 5]> = (0..est.horizons.len())
            .map(|i| [est.horizons[i], est.diameter[i], est.hausdorff_prev[i], est.xi_star_start[i], slope])
            .collect();
        let mut csv = Vec::new();
        io::write_attractor_csv(&mut csv, &rows, &ctx.provenance)?;
        fs::write(ctx.path("attractor.csv"), &csv)?;
        let dir = ctx.path("endpoints");
        fs::create_dir_all(&dir)?;
        for (i, set) in est.endpoints.iter().enumerate() {
            for (k, u) in set.iter().enumerate() {
                io::write_snapshot(&dir.join(format!("T{i:02}_m{k:03}.bin")), u, 0.0, &ctx.provenance)?;
            }
        }
        let d = it.ctx().domain();
        summary["final_diameter_check"] = json!(diameter(d, est.last()));
        Ok(Outcome::ok(summary))
    }
}

struct CocycleCheck;

impl Subcommand for CocycleCheck {
    fn name(&self) -> &'static str {
        "cocycle-check"
    }

    fn about(&self) -> &'static str {
        "Compare phi(t+s, w, x) with phi(t, theta_s w, phi(s, w, x))"
    }

    fn args(&self, cmd: Command) -> Command {
        init_arg(cmd)
    }

    fn run(&self, ctx: &RunContext, m: &ArgMatches) -> Result<Outcome> {
        let c = &ctx.config;
        let path = ctx.noise_path(-c.dt_noise, c.cocycle_s + c.cocycle_t + c.dt_noise)?;
        let it = c.integrator(Some(&path))?;
        let d = it.ctx().domain();
        let x = match m.get_one::<String>("init") {
            Some(_) => init_field(m, &it)?,
            None => {
                let basis = SampleBasis::new(d, c.basis_modes)?;
                basis.field(d, &vec![0.5; basis.len()])
            }
        };
        let f = it.forcing();
        let r = cocycle_check(&it, 0, f.tick_of(c.cocycle_s)?, f.tick_of(c.cocycle_t)?, &x)?;
        Ok(Outcome {
            summary: json!({"s": c.cocycle_s, "t": c.cocycle_t, "deviation": r.deviation, "bitwise_equal": r.bitwise_equal}),
            passed: r.bitwise_equal,
        })
    }
}

struct Validate;

impl Subcommand for Validate {
    fn name(&self) -> &'static str {
        "validate"
    }

    fn about(&self) -> &'static str {
        "Run the invariant suite and print a summary table"
    }

    fn args(&self, cmd: Command) -> Command {
        cmd.arg(
            Arg::new("samples")
                .long("samples")
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .default_value("10")
                .help("Random fields per algebraic check"),
        )
    }

    fn run(&self, ctx: &RunContext, m: &ArgMatches) -> Result<Outcome> {
        let c = &ctx.config;
        let lambda1 = c.context()?.lambda1();
        let (a, b) = suite_span(c, lambda1);
        let path = ctx.noise_path(a, b)?;
        let samples = *m.get_one::<usize>("samples").unwrap_or(&10);
        let checks = run_suite(c, &path, samples)?;
        let mut table = String::new();
        for ch in &checks {
            table.push_str(&ch.to_string());
            table.push('\n');
        }
        eprint!("{table}");
        write_text(&ctx.path("validate.txt"), &format!("{}\n{table}", ctx.provenance.csv_line()))?;
        let passed = checks.iter().all(|c| c.pass);
        Ok(Outcome {
            summary: json!({
                "checks": checks.len(),
                "failed": checks.iter().filter(|c| !c.pass).map(|c| format!("{}: {}", c.suite, c.name)).collect::<Vec<_>>(),
            }),
            passed,
        })
    }
}

struct Spectrum;

impl Subcommand for Spectrum {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn about(&self) -> &'static str {
        "Report lambda1 and the vertical Sturm-Liouville modes"
    }

    fn run(&self, ctx: &RunContext, _m: &ArgMatches) -> Result<Outcome> {
        let opctx = ctx.config.context()?;
        let d = opctx.domain();
        let vop = d.vertical();
        let mut csv = format!("{}\nm,mu", ctx.provenance.csv_line());
        for (m, mu) in vop.eigenvalues().iter().enumerate() {
            csv.push_str(&format!("\n{m},{mu:?}"));
        }
        csv.push('\n');
        write_text(&ctx.path("spectrum.csv"), &csv)?;
        Ok(Outcome::ok(json!({
            "lambda1": opctx.lambda1(),
            "vertical_eigenvalues": vop.eigenvalues(),
            "top_flux_gain": vop.top_flux_gain(),
        })))
    }
}

struct GenNoise;

impl Subcommand for GenNoise {
    fn name(&self) -> &'static str {
        "gen-noise"
    }

    fn about(&self) -> &'static str {
        "Create a noise path file, or extend an existing one forward in time"
    }

    fn args(&self, cmd: Command) -> Command {
        cmd.arg(
            Arg::new("t-min")
                .long("t-min")
                .value_parser(clap::value_parser!(f64))
                .allow_negative_numbers(true)
                .help("Earliest time covered (default time.t0)"),
        )
        .arg(
            Arg::new("t-max")
                .long("t-max")
                .value_parser(clap::value_parser!(f64))
                .allow_negative_numbers(true)
                .help("Latest time covered (default time.t1)"),
        )
        .arg(
            Arg::new("extend")
                .long("extend")
                .value_name("FILE")
                .help("Existing path to extend to --t-max"),
        )
        .arg(
            Arg::new("file")
                .long("file")
                .value_name("FILE")
                .help("Output file (default output.noise_path, else <out>/noise.bin)"),
        )
    }

    fn run(&self, ctx: &RunContext, m: &ArgMatches) -> Result<Outcome> {
        let c = &ctx.config;
        let t_min = m.get_one::<f64>("t-min").copied().unwrap_or(c.t0);
        let t_max = m.get_one::<f64>("t-max").copied().unwrap_or(c.t1);
        let path = match m.get_one::<String>("extend") {
            Some(file) => {
                let (old, _) = io::read_noise_path(Path::new(file))?;
                let need = ((t_max / old.dt_noise()) - 1e-9).ceil() as i64 - old.end_index();
                old.extended(need.max(0) as usize)?
            }
            None => c.generate_path(t_min, t_max)?,
        };
        let file = m
            .get_one::<String>("file")
            .map(PathBuf::from)
            .or_else(|| c.noise_path.clone())
            .unwrap_or_else(|| ctx.path("noise.bin"));
        let bytes = io::encode_noise_path(&path, &ctx.provenance);
        fs::write(&file, &bytes)?;
        Ok(Outcome::ok(json!({
            "file": file.display().to_string(),
            "seed": path.seed(),
            "n_modes": path.n_modes(),
            "dt_noise": path.dt_noise(),
            "t_min": path.t_min(),
            "t_max": path.t_max(),
            "checksum": io::sha256_hex(&bytes),
        })))
    }
}
