//! Executes a validated [`RunConfig`] and assembles its output files.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use frbd_core::arm::{run_tracking, ArmPlant, TrackingRun};
use frbd_core::calibration::{fit, FitOptions, FitProblem, FitResult};
use frbd_core::experiments::{run_frictional_lag, run_presliding, LagConfig, PreSlidingConfig};
use frbd_core::{
    boundedness_audit, integrate, passivity_audit, passivity_tolerance, FrbdModel, FrictionLaw, InputSignal, Rheology,
    Trajectory,
};

use crate::config::{
    parse_config_text, ArmSpec, AuditSpec, CalibrateSpec, Experiment, LagSpec, PreSlidingSpec, RunConfig, SimulateSpec,
    SweepSpec, ValidationErrors,
};
use crate::output::{fmt_f64, Outputs, Report, Table};
use crate::Command;

/// Relative error allowed in the closed-form dissipation identity.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Allowed ratio of `sup V` to `max(V(0), trailing-half sup V)`.
pub const BOUNDEDNESS_FACTOR: f64 = 10.0;

/// Why a run did not finish cleanly. Maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// The config is invalid; nothing was written.
    Validation(ValidationErrors),
    /// Integration or fitting broke down.
    Numerical(anyhow::Error),
    /// Outputs were written but at least one audit check failed.
    Audit { failed: Vec<String>, written: Vec<PathBuf> },
    /// Output files could not be written.
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Numerical(_) | Self::Io(_) => 2,
            Self::Audit { .. } => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(e) => write!(f, "{e}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e:#}"),
            Self::Io(e) => write!(f, "could not write outputs: {e:#}"),
            Self::Audit { failed, .. } => write!(f, "audit failed: {}", failed.join(", ")),
        }
    }
}

impl std::error::Error for Failure {}

/// Reads and validates `config`, then runs `command`.
pub fn run_file(
    command: Command,
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<PathBuf>, Failure> {
    let text = std::fs::read_to_string(config).map_err(|e| {
        Failure::Validation(ValidationErrors(vec![format!("{}: cannot read config: {e}", config.display())]))
    })?;
    let base = config.parent().unwrap_or(Path::new(""));
    let cfg = parse_config_text(&text, base, command, out, seed).map_err(Failure::Validation)?;
    run(&cfg)
}

/// Runs a validated config and writes its outputs.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    let (outputs, failed) = execute(cfg).map_err(Failure::Numerical)?;
    if let Some(ch) = &cfg.channels {
        outputs.check_channels(ch).map_err(|e| Failure::Validation(ValidationErrors(vec![format!("{e:#}")])))?;
    }
    let written = outputs.write(&cfg.out_dir, cfg.channels.as_deref()).map_err(Failure::Io)?;
    if failed.is_empty() {
        Ok(written)
    } else {
        Err(Failure::Audit { failed, written })
    }
}

/// Computes every output in memory; returns the names of failed checks.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<(Outputs, Vec<String>)> {
    let mut out = Outputs::default();
    provenance(cfg, &mut out.report);
    let model = cfg.model.as_ref();
    let need = || model.ok_or_else(|| anyhow!("model block required"));
    match &cfg.experiment {
        Experiment::Simulate(s) => simulate(cfg, need()?, s, &mut out)?,
        Experiment::PreSliding(p) => presliding(cfg, need()?, p, &mut out)?,
        Experiment::Lag(l) => lag(cfg, need()?, l, &mut out)?,
        Experiment::Arm(a) => arm(cfg, need()?, a, &mut out)?,
        Experiment::Calibrate(c) => calibrate(need()?, c, &mut out)?,
        Experiment::SteadySweep(s) => sweep(cfg, need()?, s, &mut out)?,
        Experiment::Audit(a) => audit(model, a, &mut out)?,
    }
    let failed = out
        .report
        .entries
        .iter()
        .filter(|(k, v)| k.ends_with("_pass") && v == "false")
        .map(|(k, _)| k.clone())
        .collect();
    Ok((out, failed))
}

fn provenance(cfg: &RunConfig, r: &mut Report) {
    r.set("command", cfg.command.name());
    r.set("version", env!("CARGO_PKG_VERSION"));
    r.set("config_sha256", &cfg.config_hash);
    r.set("seed", cfg.seed);
    for (k, v) in cfg.solver.describe() {
        r.set(k, v);
    }
    if let Some(m) = &cfg.model {
        for (k, v) in model_entries(m) {
            r.set(k, v);
        }
    }
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_f64).collect::<Vec<_>>().join(", ")
}

/// The model in config syntax, so a report can seed a new config.
pub fn model_entries(m: &FrbdModel) -> Vec<(String, String)> {
    let mut out = vec![("model.rheology".to_string(), m.rheology().name().to_string())];
    match m.rheology() {
        Rheology::Gm(p) => {
            out.push(("model.k0".into(), fmt_f64(p.k0())));
            out.push(("model.k".into(), join(p.branches().iter().map(|b| b.stiffness))));
            out.push(("model.tau".into(), join(p.branches().iter().map(|b| b.relaxation_time))));
        }
        Rheology::Gkv(p) => {
            out.push(("model.k0".into(), fmt_f64(p.k0())));
            out.push(("model.k".into(), join(p.branches().iter().map(|b| b.stiffness))));
            out.push(("model.c".into(), join(p.branches().iter().map(|b| b.damping))));
        }
    }
    match *m.law() {
        FrictionLaw::Stribeck { mu_d, mu_s, v_stribeck, delta } => {
            out.push(("model.law".into(), "stribeck".into()));
            out.push(("model.mu_d".into(), fmt_f64(mu_d)));
            out.push(("model.mu_s".into(), fmt_f64(mu_s)));
            out.push(("model.v_s".into(), fmt_f64(v_stribeck)));
            out.push(("model.delta".into(), fmt_f64(delta)));
        }
        FrictionLaw::Constant { mu } => {
            out.push(("model.law".into(), "constant".into()));
            out.push(("model.mu".into(), fmt_f64(mu)));
        }
    }
    out.push(("model.epsilon".into(), fmt_f64(m.regularization().epsilon())));
    out.push(("model.p".into(), fmt_f64(m.normal_force())));
    out
}

fn state_names(model: &FrbdModel) -> Vec<String> {
    let branch = match model.rheology() {
        Rheology::Gm(_) => "f",
        Rheology::Gkv(_) => "z",
    };
    std::iter::once("z".to_string()).chain((1..=model.rheology().n()).map(|i| format!("{branch}{i}"))).collect()
}

/// Worst relative gap between `∇V·ẋ` and the closed-form `V̇` over the samples.
fn identity_error(model: &FrbdModel, states: &[Vec<f64>], v: &[f64]) -> anyhow::Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, &v) in states.iter().zip(v) {
        let grad = model.storage_gradient(x)?;
        let dx = model.rhs(x, v)?;
        let chain: f64 = grad.iter().zip(&dx).map(|(g, d)| g * d).sum();
        let (supply, slip, branch) = model.power_balance(x, v)?;
        let scale = supply.abs() + slip + branch;
        if scale > 0.0 {
            worst = worst.max((chain - (supply - slip - branch)).abs() / scale);
        }
    }
    Ok(worst)
}

fn audit_trajectory(prefix: &str, traj: &Trajectory, v_bound: f64, skip: f64, r: &mut Report) -> anyhow::Result<()> {
    let margin = passivity_audit(traj)?;
    let tol = passivity_tolerance(traj);
    r.num(format!("{prefix}passivity_margin"), margin);
    r.num(format!("{prefix}passivity_tolerance"), tol);
    r.set(format!("{prefix}passivity_pass"), margin >= -tol);
    let b = boundedness_audit(traj, v_bound, skip);
    r.num(format!("{prefix}boundedness_v_bound"), b.v_bound);
    r.num(format!("{prefix}boundedness_sup_V"), b.sup);
    let envelope = b.initial.max(b.trailing_bound);
    r.num(format!("{prefix}boundedness_bound"), envelope);
    r.set(format!("{prefix}boundedness_within_bound"), b.bounded);
    r.set(
        format!("{prefix}boundedness_pass"),
        b.all_finite && b.sup < BOUNDEDNESS_FACTOR * envelope.max(f64::MIN_POSITIVE),
    );
    Ok(())
}

fn friction_table(model: &FrbdModel, traj: &Trajectory, leading: &[&str], lead: impl Fn(usize) -> Vec<f64>) -> Table {
    let mut cols: Vec<&str> = vec!["t"];
    cols.extend_from_slice(leading);
    cols.extend_from_slice(&["f", "pf", "V", "W_in"]);
    let mut table = Table::new(&cols);
    let p = model.normal_force();
    for k in 0..traj.len() {
        let mut row = vec![traj.t[k]];
        row.extend(lead(k));
        row.extend([traj.f[k], p * traj.f[k], traj.storage[k], traj.supplied[k]]);
        table.push(row);
    }
    table
}

fn simulate(cfg: &RunConfig, model: &FrbdModel, s: &SimulateSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let x0 = if s.steady_start { model.steady_state(s.input.eval(0.0)).state } else { model.zero_state() };
    let solver = cfg.solver.config.with_span(0.0, s.duration);
    let traj = integrate(model, &x0, &s.input, &solver)?;
    let names = state_names(model);
    let mut leading: Vec<&str> = vec!["v"];
    leading.extend(names.iter().map(String::as_str));
    let table = friction_table(model, &traj, &leading, |k| {
        std::iter::once(traj.v[k]).chain(traj.states[k].iter().copied()).collect()
    });
    let r = &mut out.report;
    r.num("experiment.duration", s.duration);
    r.set("experiment.x0", if s.steady_start { "steady" } else { "zero" });
    r.num("experiment.skip", s.skip);
    r.set("samples", traj.len());
    audit_trajectory("", &traj, s.input.sup_abs(), s.skip, r)?;
    let err = identity_error(model, &traj.states, &traj.v)?;
    r.num("dissipation_identity_max_relerr", err);
    r.set("dissipation_identity_pass", err <= IDENTITY_TOL);
    out.tables.push(("simulate.csv".into(), table));
    Ok(())
}

fn freq_tag(freq: f64) -> String {
    format!("{freq}hz")
}

fn presliding(cfg: &RunConfig, model: &FrbdModel, p: &PreSlidingSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let exp = PreSlidingConfig {
        mass: p.mass,
        force_ratio: p.force_ratio,
        freqs: p.freqs.clone(),
        cycles: p.cycles,
        model: model.clone(),
        solver: cfg.solver.config,
    };
    let runs = run_presliding(&exp)?;
    let r = &mut out.report;
    r.num("experiment.mass", p.mass);
    r.num("experiment.force_ratio", p.force_ratio);
    r.set("experiment.cycles", p.cycles);
    r.num("breakaway_force", frbd_core::breakaway_force(model));
    for run in &runs {
        let tag = freq_tag(run.freq);
        let traj = &run.trajectory;
        out.tables.push((
            format!("presliding_{tag}.csv"),
            friction_table(model, traj, &["x", "v"], |k| vec![traj.states[k][0], traj.v[k]]),
        ));
        let pre = format!("presliding.{tag}.");
        r.num(format!("{pre}loop_area"), run.metrics.area);
        r.num(format!("{pre}peak_force"), run.metrics.peak_force);
        r.num(format!("{pre}width_at_mid"), run.metrics.width_at_mid);
        r.num(format!("{pre}closure"), run.closure);
        r.num(format!("{pre}sup_velocity"), run.sup_velocity);
        audit_trajectory(&pre, traj, run.sup_velocity, 0.0, r)?;
    }
    Ok(())
}

fn lag(cfg: &RunConfig, model: &FrbdModel, l: &LagSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let exp = LagConfig {
        v_bias: l.v_bias,
        v_amp: l.v_amp,
        freqs: l.freqs.clone(),
        cycles: l.cycles,
        model: model.clone(),
        solver: cfg.solver.config,
    };
    let runs = run_frictional_lag(&exp)?;
    let r = &mut out.report;
    r.num("experiment.v_bias", l.v_bias);
    r.num("experiment.v_amp", l.v_amp);
    r.set("experiment.cycles", l.cycles);
    for run in &runs {
        let tag = freq_tag(run.freq);
        let traj = &run.trajectory;
        out.tables.push((format!("lag_{tag}.csv"), friction_table(model, traj, &["v"], |k| vec![traj.v[k]])));
        let pre = format!("lag.{tag}.");
        r.num(format!("{pre}loop_area"), run.metrics.area);
        r.num(format!("{pre}peak_force"), run.metrics.peak_force);
        r.num(format!("{pre}width_at_mid"), run.metrics.width_at_mid);
        audit_trajectory(&pre, traj, l.v_bias + l.v_amp, 0.0, r)?;
    }
    Ok(())
}

fn arm_table(run: &TrackingRun, a: &ArmSpec) -> Table {
    let mut table = Table::new(&[
        "t",
        "q",
        "qd",
        "q_ref",
        "q_tilde",
        "s",
        "U",
        "F",
        "F_hat",
        "F_tilde",
        "int_s2",
        "int_Ftilde_s",
        "V_obs",
    ]);
    for k in 0..run.t.len() {
        let x = &run.states[k];
        table.push(vec![
            run.t[k],
            x[0],
            x[1],
            a.reference.eval(run.t[k]).q,
            run.q_tilde[k],
            run.s[k],
            run.control[k],
            run.torque[k],
            run.estimate[k],
            run.torque[k] - run.estimate[k],
            run.s_squared_integral[k],
            run.error_supply[k],
            run.observer_storage[k],
        ]);
    }
    table
}

fn arm(cfg: &RunConfig, model: &FrbdModel, a: &ArmSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let plant = ArmPlant::new(a.pendulum, a.radius, model.clone())?;
    let solver = cfg.solver.config.with_span(0.0, a.duration);
    let run = run_tracking(&plant, &a.reference, &a.gains, &solver, &a.init)?;
    let r = &mut out.report;
    r.num("arm.radius", a.radius);
    r.num("arm.lambda", a.gains.lambda);
    r.num("arm.k1", a.gains.k1);
    r.num("arm.k2", a.gains.k2);
    r.num("arm.coriolis", a.pendulum.coriolis_gain);
    r.num("arm.duration", a.duration);
    let late = run.index_at(0.75 * a.duration);
    let sup_late = run.q_tilde[late..].iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let sup_all = run.q_tilde.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    r.num("tracking_sup_q_tilde", sup_all);
    r.num("tracking_sup_q_tilde_last_quarter", sup_late);
    let total = run.s_squared_integral.last().copied().unwrap_or(0.0);
    r.num("tracking_int_s2", total);
    let err = run.torque_error();
    let max_supply = err.iter().zip(&run.s).map(|(f, s)| (f * s).abs()).fold(0.0, f64::max);
    let tol = run.max_step.powi(2) * a.duration * max_supply;
    let margin = run.observer_passivity_margin();
    r.num("observer_passivity_margin", margin);
    r.num("observer_passivity_tolerance", tol);
    r.set("observer_passivity_pass", margin >= -tol);
    out.tables.push(("arm.csv".into(), arm_table(&run, a)));
    Ok(())
}

fn calibrate(model: &FrbdModel, c: &CalibrateSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let options = FitOptions { max_iterations: c.max_iterations, max_dt: c.max_dt, ..FitOptions::default() };
    let problem = FitProblem::new(c.trace.clone(), model.clone(), c.free.clone(), c.x0, options)?;
    let res: FitResult = fit(&problem)?;
    let fitted = problem.model_at(&res.params.iter().map(|p| p.1).collect::<Vec<_>>())?;
    let sim = problem.simulate(&fitted)?;
    let mut table = Table::new(&["t", "v", "pf_data", "pf_fit", "residual"]);
    for (((t, v), data), fit) in c.trace.t.iter().zip(&c.trace.v).zip(&c.trace.pf).zip(&sim) {
        table.push(vec![*t, *v, *data, *fit, fit - data]);
    }
    let r = &mut out.report;
    r.set("calibrate.data", c.data.display());
    r.set("fit.converged", res.converged);
    r.set("fit.message", &res.message);
    r.set("fit.iterations", res.iterations);
    r.num("fit.rmse", res.rmse);
    r.num("fit.rmse_start", res.rmse_history.first().copied().unwrap_or(res.rmse));
    for (((id, value), cov), ill) in res.params.iter().zip(&res.covariance_proxy).zip(&res.ill_conditioned) {
        let name = id.name_for(fitted.rheology());
        r.num(format!("fit.{name}"), *value);
        r.num(format!("fit.{name}.covariance_proxy"), *cov);
        r.set(format!("fit.{name}.ill_conditioned"), ill);
    }
    for (k, v) in model_entries(&fitted) {
        r.set(format!("fitted.{k}"), v);
    }
    out.tables.push(("calibrate.csv".into(), table));
    Ok(())
}

fn sweep(cfg: &RunConfig, model: &FrbdModel, s: &SweepSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let solver = cfg.solver.config.with_span(0.0, s.duration);
    let mut table = Table::new(&["v", "f_steady", "f_final", "force_err", "state_err"]);
    let mut worst: f64 = 0.0;
    for &v in &s.velocities {
        let traj = integrate(model, &model.zero_state(), &InputSignal::Constant(v), &solver)
            .with_context(|| format!("sweep at v = {v}"))?;
        let steady = model.steady_state(v);
        let last = traj.states.last().context("empty trajectory")?;
        let f_final = *traj.f.last().context("empty trajectory")?;
        let force_err = (f_final - steady.force).abs();
        let state_err = last.iter().zip(&steady.state).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(force_err);
        table.push(vec![v, steady.force, f_final, force_err, state_err]);
    }
    let r = &mut out.report;
    r.num("sweep.duration", s.duration);
    r.num("sweep.tolerance", s.tolerance);
    r.num("steady_state_max_force_err", worst);
    r.set("steady_state_pass", worst < s.tolerance);
    out.tables.push(("steady_sweep.csv".into(), table));
    Ok(())
}

fn audit(model: Option<&FrbdModel>, a: &AuditSpec, out: &mut Outputs) -> anyhow::Result<()> {
    let table = Table::read(&a.trajectory)?;
    let col = |n: &str| table.column(n).with_context(|| format!("{}: missing column `{n}`", a.trajectory.display()));
    let (t, v, pf, storage, supplied) = (col("t")?, col("v")?, col("pf")?, col("V")?, col("W_in")?);
    if t.len() < 2 {
        return Err(anyhow!("{}: need at least two samples", a.trajectory.display()));
    }
    let max_step = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let max_supply_power = pf.iter().zip(&v).map(|(f, v)| (f * v).abs()).fold(0.0, f64::max);
    let v_bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut traj = Trajectory {
        t,
        states: Vec::new(),
        v,
        f: pf,
        storage,
        supplied,
        normal_force: 1.0,
        max_step,
        max_supply_power,
    };
    let r = &mut out.report;
    r.set("audit.trajectory", a.trajectory.display());
    r.num("audit.skip", a.skip);
    r.set("samples", traj.len());
    if let Some(model) = model {
        let names = state_names(model);
        if let Some(cols) = names.iter().map(|n| table.column(n)).collect::<Option<Vec<_>>>() {
            traj.states = (0..traj.len()).map(|k| cols.iter().map(|c| c[k]).collect()).collect();
            let err = identity_error(model, &traj.states, &traj.v)?;
            r.num("dissipation_identity_max_relerr", err);
            r.set("dissipation_identity_pass", err <= IDENTITY_TOL);
        } else {
            r.set("dissipation_identity_max_relerr", "n/a");
        }
    }
    audit_trajectory("", &traj, v_bound, a.skip, r)?;
    Ok(())
}
