//! Flat `section.key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated. Every key must be known to the command being
//! run, and every problem found is reported, not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use frbd_core::arm::{ControllerGains, Pendulum, ReferenceSignal, TrackingInit};
use frbd_core::calibration::{FreeParam, InitialState, ParamId};
use frbd_core::{
    canonical_sls_to_gkv, canonical_sls_to_gm, FrbdModel, FrictionLaw, GkvParams, GmParams, InputSignal, Method,
    Regularization, Rheology, SlsCanonical, SolverConfig,
};

use crate::Command;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DT: f64 = frbd_core::ode::DEFAULT_DT;

/// All problems found while reading a config, one message per entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Raw key/value pairs plus error accumulation and used-key tracking.
#[derive(Debug)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    errors: Vec<String>,
    base: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                errors.push(format!("line {line}: expected `key = value`, got `{content}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                errors.push(format!("line {line}: invalid key `{key}`"));
                continue;
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                errors.push(format!("{key}: duplicate key (lines {} and {line})", prev.line));
                continue;
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string(), used: false });
        }
        Self { entries, errors, base: PathBuf::new() }
    }

    /// Reads a path; relative paths are taken from the config's directory.
    pub fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.string(key).map(|p| self.base.join(p))
    }

    pub fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    pub fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    pub fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(_, v)| v)
    }

    pub fn number(&mut self, key: &str) -> Option<f64> {
        let (line, raw) = self.take(key)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.errors.push(format!("{key} (line {line}): expected a finite number, got `{raw}`"));
                None
            }
        }
    }

    pub fn number_or(&mut self, key: &str, default: f64) -> f64 {
        if self.entries.contains_key(key) {
            self.number(key).unwrap_or(default)
        } else {
            default
        }
    }

    /// Reads `key` (or `default`) and requires it to be strictly positive.
    pub fn positive_or(&mut self, key: &str, default: f64) -> f64 {
        let v = self.number_or(key, default);
        if v.is_nan() || v <= 0.0 {
            self.errors.push(format!("{key}: must be > 0, got {v}"));
        }
        v
    }

    pub fn require_number(&mut self, key: &str) -> Option<f64> {
        if !self.entries.contains_key(key) {
            self.errors.push(format!("{key}: required key is missing"));
            return None;
        }
        self.number(key)
    }

    pub fn integer(&mut self, key: &str) -> Option<u64> {
        let (line, raw) = self.take(key)?;
        match raw.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{key} (line {line}): expected a non-negative integer, got `{raw}`"));
                None
            }
        }
    }

    pub fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let (line, raw) = self.take(key)?;
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim) {
            match item.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.errors.push(format!("{key} (line {line}): expected a list of finite numbers, got `{item}`"));
                    return None;
                }
            }
        }
        Some(out)
    }

    pub fn words(&mut self, key: &str) -> Option<Vec<String>> {
        self.string(key).map(|raw| raw.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    /// Reads a keyword restricted to `choices`.
    pub fn choice(&mut self, key: &str, choices: &[&str], default: &str) -> String {
        match self.take(key) {
            None => default.to_string(),
            Some((line, v)) if choices.contains(&v.as_str()) => {
                let _ = line;
                v
            }
            Some((line, v)) => {
                self.errors.push(format!("{key} (line {line}): expected one of {}, got `{v}`", choices.join("|")));
                default.to_string()
            }
        }
    }

    /// Runs a core constructor and files its error under `key`.
    pub fn check<T>(&mut self, key: &str, result: frbd_core::Result<T>) -> Option<T> {
        result.map_err(|e| self.errors.push(format!("{key}: {e}"))).ok()
    }

    /// Fails on keys nobody read and returns every collected error.
    pub fn finish(mut self) -> Result<(), ValidationErrors> {
        for (key, e) in &self.entries {
            if !e.used {
                self.errors.push(format!("{key} (line {}): unknown key for this command", e.line));
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(self.errors))
        }
    }
}

/// Solver block with the values that were actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub config: SolverConfig,
    pub defaulted: bool,
}

impl SolverBlock {
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = vec![("solver.defaulted".to_string(), self.defaulted.to_string())];
        match self.config.method {
            Method::FixedRk4 { dt } => {
                out.push(("solver.method".into(), "rk4".into()));
                out.push(("solver.dt".into(), crate::output::fmt_f64(dt)));
            }
            Method::AdaptiveRk45 { rtol, atol, dt_min, dt_max } => {
                out.push(("solver.method".into(), "rk45".into()));
                out.push(("solver.rtol".into(), crate::output::fmt_f64(rtol)));
                out.push(("solver.atol".into(), crate::output::fmt_f64(atol)));
                out.push(("solver.dt_min".into(), crate::output::fmt_f64(dt_min)));
                out.push(("solver.dt_max".into(), crate::output::fmt_f64(dt_max)));
            }
        }
        out.push(("solver.stride".into(), self.config.record_stride.to_string()));
        out
    }
}

fn read_solver(raw: &mut RawConfig) -> SolverBlock {
    let defaulted = !raw.has_section("solver");
    let method = raw.choice("solver.method", &["rk4", "rk45"], "rk4");
    let stride = raw.integer("solver.stride").unwrap_or(1);
    if stride == 0 {
        raw.error("solver.stride: must be >= 1");
    }
    let method = if method == "rk4" {
        Method::FixedRk4 { dt: raw.number_or("solver.dt", DEFAULT_DT) }
    } else {
        Method::AdaptiveRk45 {
            rtol: raw.number_or("solver.rtol", 1e-8),
            atol: raw.number_or("solver.atol", 1e-12),
            dt_min: raw.number_or("solver.dt_min", 1e-12),
            dt_max: raw.number_or("solver.dt_max", 1e-3),
        }
    };
    let config = SolverConfig { method, t0: 0.0, t1: 1.0, record_stride: stride.max(1) as usize };
    if let Err(e) = config.validate() {
        raw.error(format!("solver: {e}"));
    }
    SolverBlock { config, defaulted }
}

fn read_model(raw: &mut RawConfig) -> Option<FrbdModel> {
    if !raw.has_section("model") {
        raw.error("model: required section is missing");
        return None;
    }
    let rheology_kind = raw.choice("model.rheology", &["gm", "gkv"], "gm");
    let canonical = ["model.sigma0", "model.sigma1", "model.gamma1"].iter().any(|k| raw.entries.contains_key(*k));
    let direct = ["model.k0", "model.k", "model.tau", "model.c"].iter().any(|k| raw.entries.contains_key(*k));
    let rheology = if canonical && direct {
        raw.error("model: give either sigma0/sigma1/gamma1 or k0/k/tau|c, not both");
        let _ = (raw.take("model.k0"), raw.take("model.k"), raw.take("model.tau"), raw.take("model.c"));
        let _ = (raw.take("model.sigma0"), raw.take("model.sigma1"), raw.take("model.gamma1"));
        None
    } else if canonical {
        let (s0, s1, g1) = (
            raw.require_number("model.sigma0"),
            raw.require_number("model.sigma1"),
            raw.require_number("model.gamma1"),
        );
        match (s0, s1, g1) {
            (Some(s0), Some(s1), Some(g1)) => raw.check("model.sigma0", SlsCanonical::new(s0, s1, g1)).and_then(|c| {
                if rheology_kind == "gm" {
                    raw.check("model.sigma0", canonical_sls_to_gm(&c)).map(Rheology::Gm)
                } else {
                    raw.check("model.sigma0", canonical_sls_to_gkv(&c)).map(Rheology::Gkv)
                }
            }),
            _ => None,
        }
    } else {
        let k0 = raw.require_number("model.k0");
        let ks = raw.list("model.k").unwrap_or_default();
        let (time_key, other) = if rheology_kind == "gm" { ("model.tau", "model.c") } else { ("model.c", "model.tau") };
        if raw.take(other).is_some() {
            raw.error(format!("{other}: not used by rheology `{rheology_kind}` (use {time_key})"));
        }
        let times = raw.list(time_key).unwrap_or_default();
        if ks.len() != times.len() {
            raw.error(format!("{time_key}: expected {} entries to match model.k, got {}", ks.len(), times.len()));
            None
        } else {
            k0.and_then(|k0| {
                if rheology_kind == "gm" {
                    raw.check("model.k0", GmParams::from_slices(k0, &ks, &times)).map(Rheology::Gm)
                } else {
                    raw.check("model.k0", GkvParams::from_slices(k0, &ks, &times)).map(Rheology::Gkv)
                }
            })
        }
    };
    let law_kind = raw.choice("model.law", &["stribeck", "constant"], "stribeck");
    let law = if law_kind == "stribeck" {
        let (d, s) = (raw.require_number("model.mu_d"), raw.require_number("model.mu_s"));
        let vs = raw.number_or("model.v_s", 0.0);
        let delta = raw.number_or("model.delta", 2.0);
        match (d, s) {
            (Some(d), Some(s)) => raw.check("model.mu_d", FrictionLaw::stribeck(d, s, vs, delta)),
            _ => None,
        }
    } else {
        raw.require_number("model.mu").and_then(|mu| raw.check("model.mu", FrictionLaw::constant(mu)))
    };
    let eps = raw.number_or("model.epsilon", 0.0);
    let reg = if eps == 0.0 {
        Some(Regularization::exact())
    } else {
        raw.check("model.epsilon", Regularization::smooth(eps))
    };
    let p = raw.number_or("model.p", 1.0);
    match (rheology, law, reg) {
        (Some(r), Some(l), Some(g)) => raw.check("model.p", FrbdModel::new(r, l, g, p)),
        _ => None,
    }
}

fn read_input(raw: &mut RawConfig, seed: u64, duration: f64) -> Option<InputSignal> {
    let kind = raw.choice("input.kind", &["constant", "sinusoid", "random", "file"], "constant");
    match kind.as_str() {
        "constant" => raw.require_number("input.value").map(InputSignal::Constant),
        "sinusoid" => {
            let bias = raw.number_or("input.bias", 0.0);
            let amplitude = raw.require_number("input.amplitude")?;
            let freq = raw.require_number("input.freq")?;
            let phase = raw.number_or("input.phase", 0.0);
            Some(InputSignal::Sinusoid { bias, amplitude, freq, phase })
        }
        "random" => {
            let bound = raw.require_number("input.bound")?;
            let knots = raw.integer("input.knots").unwrap_or(100).max(1) as usize;
            if bound < 0.0 {
                raw.error("input.bound: must be >= 0");
            }
            Some(InputSignal::random_bounded(seed, bound, 0.0, duration, knots))
        }
        _ => {
            let path = raw.path("input.path");
            let Some(path) = path else {
                raw.error("input.path: required key is missing");
                return None;
            };
            match crate::output::read_columns(&path, &["t", "v"]) {
                Ok(cols) => raw.check("input.path", InputSignal::sampled(cols[0].clone(), cols[1].clone())),
                Err(e) => {
                    raw.error(format!("input.path: {e:#}"));
                    None
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub input: InputSignal,
    pub duration: f64,
    pub steady_start: bool,
    pub skip: f64,
}

#[derive(Debug, Clone)]
pub struct PreSlidingSpec {
    pub mass: f64,
    pub force_ratio: f64,
    pub freqs: Vec<f64>,
    pub cycles: usize,
}

#[derive(Debug, Clone)]
pub struct LagSpec {
    pub v_bias: f64,
    pub v_amp: f64,
    pub freqs: Vec<f64>,
    pub cycles: usize,
}

#[derive(Debug, Clone)]
pub struct ArmSpec {
    pub pendulum: Pendulum,
    pub radius: f64,
    pub gains: ControllerGains,
    pub reference: ReferenceSignal,
    pub init: TrackingInit,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrateSpec {
    pub data: PathBuf,
    pub trace: frbd_core::calibration::Trace,
    pub free: Vec<FreeParam>,
    pub x0: InitialState,
    pub max_iterations: usize,
    pub max_dt: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub velocities: Vec<f64>,
    pub duration: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct AuditSpec {
    pub trajectory: PathBuf,
    pub skip: f64,
}

#[derive(Debug, Clone)]
pub enum Experiment {
    Simulate(SimulateSpec),
    PreSliding(PreSlidingSpec),
    Lag(LagSpec),
    Arm(ArmSpec),
    Calibrate(CalibrateSpec),
    SteadySweep(SweepSpec),
    Audit(AuditSpec),
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub model: Option<FrbdModel>,
    pub solver: SolverBlock,
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    pub channels: Option<Vec<String>>,
    /// Hex SHA-256 of the config file contents.
    pub config_hash: String,
}

/// Parses and validates a config for `command`. Command-line overrides for
/// the output directory and seed take precedence over the file.
pub fn parse_config_text(
    text: &str,
    base: &Path,
    command: Command,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunConfig, ValidationErrors> {
    let mut raw = RawConfig::parse(text);
    raw.base = base.to_path_buf();
    if let Some(named) = raw.string("command") {
        if named != command.name() {
            raw.error(format!("command: config is for `{named}` but `{}` was requested", command.name()));
        }
    }
    let seed = raw.integer("seed").unwrap_or(DEFAULT_SEED);
    let seed = seed_override.unwrap_or(seed);
    let out_dir = raw.string("output.dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or(out_dir);
    let channels = raw.words("output.channels");
    let solver = read_solver(&mut raw);
    let needs_model = !matches!(command, Command::Audit) || raw.has_section("model");
    let model = if needs_model { read_model(&mut raw) } else { None };

    let experiment = match command {
        Command::Simulate => {
            let duration = raw.positive_or("experiment.duration", 1.0);
            let x0 = raw.choice("experiment.x0", &["zero", "steady"], "zero");
            let skip = raw.number_or("experiment.skip", 0.0);
            read_input(&mut raw, seed, duration)
                .map(|input| Experiment::Simulate(SimulateSpec { input, duration, steady_start: x0 == "steady", skip }))
        }
        Command::Presliding => {
            let mass = raw.number_or("experiment.mass", 1.0);
            let force_ratio = raw.number_or("experiment.force_ratio", 0.9);
            let freqs = raw.list("experiment.freqs").unwrap_or_else(|| vec![1.0, 5.0, 10.0]);
            let cycles = raw.integer("experiment.cycles").unwrap_or(5) as usize;
            Some(Experiment::PreSliding(PreSlidingSpec { mass, force_ratio, freqs, cycles }))
        }
        Command::Lag => {
            let v_bias = raw.number_or("experiment.v_bias", frbd_core::experiments::DEFAULT_LAG_BIAS);
            let v_amp = raw.number_or("experiment.v_amp", frbd_core::experiments::DEFAULT_LAG_AMPLITUDE);
            let freqs = raw.list("experiment.freqs").unwrap_or_else(|| vec![25.0, 50.0, 100.0]);
            let cycles = raw.integer("experiment.cycles").unwrap_or(6) as usize;
            Some(Experiment::Lag(LagSpec { v_bias, v_amp, freqs, cycles }))
        }
        Command::Arm => read_arm(&mut raw, model.as_ref()),
        Command::Calibrate => read_calibrate(&mut raw, model.as_ref()),
        Command::SteadySweep => {
            let velocities =
                raw.list("sweep.velocities").unwrap_or_else(|| vec![-1.0, -0.1, -0.01, -0.001, 0.001, 0.01, 0.1, 1.0]);
            let duration = raw.positive_or("sweep.duration", 1.0);
            let tolerance = raw.positive_or("sweep.tolerance", 1e-6);
            Some(Experiment::SteadySweep(SweepSpec { velocities, duration, tolerance }))
        }
        Command::Audit => {
            let skip = raw.number_or("audit.skip", 0.0);
            match raw.path("audit.trajectory") {
                Some(p) if p.is_file() => Some(Experiment::Audit(AuditSpec { trajectory: p, skip })),
                Some(p) => {
                    raw.error(format!("audit.trajectory: file `{}` does not exist", p.display()));
                    None
                }
                None => {
                    raw.error("audit.trajectory: required key is missing");
                    None
                }
            }
        }
    };
    validate_experiment(&mut raw, experiment.as_ref(), model.as_ref(), &solver);
    let config_hash = crate::output::sha256_hex(text.as_bytes());
    raw.finish()?;
    Ok(RunConfig {
        command,
        seed,
        model,
        solver,
        experiment: experiment.expect("validated"),
        out_dir,
        channels,
        config_hash,
    })
}

fn validate_experiment(raw: &mut RawConfig, exp: Option<&Experiment>, model: Option<&FrbdModel>, solver: &SolverBlock) {
    let Some(model) = model else { return };
    match exp {
        Some(Experiment::PreSliding(p)) => {
            let cfg = frbd_core::PreSlidingConfig {
                mass: p.mass,
                force_ratio: p.force_ratio,
                freqs: p.freqs.clone(),
                cycles: p.cycles,
                model: model.clone(),
                solver: solver.config,
            };
            raw.check("experiment", cfg.validate());
        }
        Some(Experiment::Lag(l)) => {
            let cfg = frbd_core::LagConfig {
                v_bias: l.v_bias,
                v_amp: l.v_amp,
                freqs: l.freqs.clone(),
                cycles: l.cycles,
                model: model.clone(),
                solver: solver.config,
            };
            raw.check("experiment", cfg.validate());
        }
        _ => {}
    }
}

fn read_arm(raw: &mut RawConfig, model: Option<&FrbdModel>) -> Option<Experiment> {
    let d = Pendulum::default();
    let pendulum = Pendulum {
        inertia: raw.number_or("arm.inertia", d.inertia),
        mass: raw.number_or("arm.mass", d.mass),
        length: raw.number_or("arm.length", d.length),
        gravity_accel: raw.number_or("arm.gravity", d.gravity_accel),
        coriolis_gain: raw.number_or("arm.coriolis", d.coriolis_gain),
    };
    raw.check("arm", pendulum.validate());
    let radius = raw.positive_or("arm.radius", 0.05);
    let g = ControllerGains::default();
    let (lambda, k1, k2) =
        (raw.number_or("arm.lambda", g.lambda), raw.number_or("arm.k1", g.k1), raw.number_or("arm.k2", g.k2));
    let gains = raw.check("arm", ControllerGains::new(lambda, k1, k2));
    let reference = match raw.choice("arm.reference", &["sinusoid", "constant"], "sinusoid").as_str() {
        "constant" => ReferenceSignal::Constant(raw.number_or("arm.ref_value", 0.0)),
        _ => {
            let ReferenceSignal::Sinusoid { bias, amplitude, freq } = ReferenceSignal::default() else {
                unreachable!()
            };
            ReferenceSignal::Sinusoid {
                bias: raw.number_or("arm.ref_bias", bias),
                amplitude: raw.number_or("arm.ref_amplitude", amplitude),
                freq: raw.number_or("arm.ref_freq", freq),
            }
        }
    };
    let duration = raw.positive_or("arm.duration", 20.0);
    let dim = model.map(FrbdModel::dim).unwrap_or(2);
    let mut state = |key: &str, default: Vec<f64>| {
        let v = raw.list(key).unwrap_or(default);
        if v.len() != dim {
            raw.error(format!("{key}: expected {dim} entries (friction state dimension), got {}", v.len()));
        }
        v
    };
    let mut friction0 = vec![0.0; dim];
    if dim == 2 {
        friction0 = vec![1.5e-4, 0.5];
    }
    let friction = state("arm.friction0", friction0);
    let observer = state("arm.observer0", vec![0.0; dim]);
    let init = TrackingInit { q: raw.number_or("arm.q0", 0.1), qd: raw.number_or("arm.qd0", 0.0), friction, observer };
    Some(Experiment::Arm(ArmSpec { pendulum, radius, gains: gains?, reference, init, duration }))
}

fn read_calibrate(raw: &mut RawConfig, model: Option<&FrbdModel>) -> Option<Experiment> {
    let data = raw.path("calibrate.data");
    let names = raw.words("calibrate.free").unwrap_or_default();
    let lo = raw.list("calibrate.lo");
    let hi = raw.list("calibrate.hi");
    let x0 = match raw.choice("calibrate.x0", &["zero", "steady"], "steady").as_str() {
        "zero" => InitialState::ZeroState,
        _ => InitialState::SteadyStateAtFirstSample,
    };
    let max_iterations = raw.integer("calibrate.max_iterations").unwrap_or(200) as usize;
    let max_dt = raw.positive_or("calibrate.max_dt", 1e-4);
    let Some(data) = data else {
        raw.error("calibrate.data: required key is missing");
        return None;
    };
    let trace = match crate::output::read_columns(&data, &["t", "v", "pf"]) {
        Ok(mut cols) => {
            let pf = cols.pop().unwrap();
            let v = cols.pop().unwrap();
            let t = cols.pop().unwrap();
            let trace = frbd_core::calibration::Trace { t, v, pf };
            raw.check("calibrate.data", trace.validate()).map(|_| trace)
        }
        Err(e) => {
            raw.error(format!("calibrate.data: {e:#}"));
            None
        }
    };
    if names.is_empty() {
        raw.error("calibrate.free: list at least one parameter");
    }
    for (key, list) in [("calibrate.lo", &lo), ("calibrate.hi", &hi)] {
        if let Some(l) = list {
            if l.len() != names.len() {
                raw.error(format!("{key}: expected {} entries to match calibrate.free, got {}", names.len(), l.len()));
            }
        }
    }
    let model = model?;
    let mut free = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let Some(id) = raw.check("calibrate.free", name.parse::<ParamId>()) else { continue };
        let Some(start) = raw.check("calibrate.free", id.get(model)) else { continue };
        let lo = lo.as_ref().and_then(|l| l.get(i).copied()).unwrap_or(start / 10.0);
        let hi = hi.as_ref().and_then(|h| h.get(i).copied()).unwrap_or(start * 10.0);
        if let Some(p) = raw.check("calibrate.lo", FreeParam::new(id, lo, hi)) {
            if !(lo..=hi).contains(&start) {
                raw.error(format!("calibrate.lo: start value {start} of {name} lies outside [{lo}, {hi}]"));
            }
            free.push(p);
        }
    }
    Some(Experiment::Calibrate(CalibrateSpec { data, trace: trace?, free, x0, max_iterations, max_dt }))
}
