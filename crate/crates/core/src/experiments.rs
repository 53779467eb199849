//! Hysteresis experiments: pre-sliding displacement of a mass under a
//! sub-breakaway sinusoidal force, and frictional lag under an imposed
//! unidirectional oscillating velocity.

use rayon::prelude::*;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::model::FrbdModel;
use crate::ode::{
    integrate, integrate_with, passivity_audit, passivity_tolerance, FrictionSample, InputSignal, OdeSystem,
    SolverConfig, Trajectory,
};

/// Peak static friction force `p·μ_s` (the supremum of `p·μ`).
pub fn breakaway_force(model: &FrbdModel) -> f64 {
    model.normal_force() * model.law().mu_max()
}

/// Signed shoelace area of the closed polygon through `points`;
/// counter-clockwise loops are positive.
pub fn loop_area(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Experiment(format!("a loop needs at least 3 points, got {}", points.len())));
    }
    let twice: f64 = points.iter().zip(points.iter().cycle().skip(1)).map(|(a, b)| a.0 * b.1 - b.0 * a.1).sum();
    Ok(0.5 * twice)
}

/// Vertical thickness of the closed loop at the middle of its abscissa range.
pub fn width_at_mid(points: &[(f64, f64)]) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let mid = 0.5 * (lo + hi);
    let crossings: Vec<f64> = points
        .iter()
        .zip(points.iter().cycle().skip(1))
        .filter_map(|(a, b)| {
            let (da, db) = (a.0 - mid, b.0 - mid);
            if da == 0.0 {
                Some(a.1)
            } else if da * db < 0.0 {
                Some(a.1 + (b.1 - a.1) * da / (da - db))
            } else {
                None
            }
        })
        .collect();
    if crossings.len() < 2 {
        return 0.0;
    }
    let max = crossings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = crossings.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopMetrics {
    /// Signed area; clockwise loops are negative.
    pub area: f64,
    /// Largest friction force on the loop, N.
    pub peak_force: f64,
    pub width_at_mid: f64,
}

impl LoopMetrics {
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Ok(Self {
            area: loop_area(points)?,
            peak_force: points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
            width_at_mid: width_at_mid(points),
        })
    }
}

/// Sample range `[start, end]` covering the final full excitation cycle.
fn final_cycle(traj: &Trajectory, freq: f64, cycles: usize) -> (usize, usize) {
    let t0 = traj.t[0];
    let start = traj.index_at(t0 + (cycles - 1) as f64 / freq);
    (start, traj.len() - 1)
}

fn check_common(freqs: &[f64], cycles: usize) -> Result<()> {
    if freqs.is_empty() {
        return Err(invalid("freqs", "at least one frequency is required"));
    }
    for &f in freqs {
        ensure_positive("freqs", f)?;
    }
    if cycles < 4 {
        return Err(invalid(
            "cycles",
            format!("must be >= 4 so three transient cycles can be discarded, got {cycles}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreSlidingConfig {
    pub mass: f64,
    /// Force amplitude as a fraction of the breakaway force.
    pub force_ratio: f64,
    pub freqs: Vec<f64>,
    pub cycles: usize,
    pub model: FrbdModel,
    /// Step settings; the time span is set per frequency.
    pub solver: SolverConfig,
}

impl PreSlidingConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("mass", self.mass)?;
        if !(self.force_ratio > 0.0 && self.force_ratio < 1.0) {
            return Err(invalid("force_ratio", format!("must lie in (0, 1), got {}", self.force_ratio)));
        }
        check_common(&self.freqs, self.cycles)
    }
}

/// A mass on a friction contact: `m ẍ = U(t) − p f`, with `ẋ` driving the
/// friction element. State layout `[x, ẋ, friction state…]`.
pub struct MassOnContact<'a> {
    pub model: &'a FrbdModel,
    pub mass: f64,
    pub force: InputSignal,
}

impl OdeSystem for MassOnContact<'_> {
    fn dim(&self) -> usize {
        2 + self.model.dim()
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let v = x[1];
        let friction = self.model.normal_force() * self.model.force_unchecked(&x[2..]);
        dx[0] = v;
        dx[1] = (self.force.eval(t) - friction) / self.mass;
        self.model.rhs_with_injection(&x[2..], v, 0.0, &mut dx[2..]);
    }
}

#[derive(Debug, Clone)]
pub struct PreSlidingRun {
    pub freq: f64,
    /// Full state `[x, ẋ, z, b…]` with friction channels.
    pub trajectory: Trajectory,
    /// Metrics of the final-cycle `(x, pf)` loop.
    pub metrics: LoopMetrics,
    /// `|x(end) − x(start)|` over the final cycle divided by its displacement range.
    pub closure: f64,
    pub sup_velocity: f64,
    pub passivity_margin: f64,
    pub passivity_tolerance: f64,
}

impl PreSlidingRun {
    pub fn displacement(&self) -> Vec<f64> {
        self.trajectory.state_component(0)
    }

    /// Final-cycle `(x, pf)` points.
    pub fn final_loop(&self, cycles: usize) -> Vec<(f64, f64)> {
        let (a, b) = final_cycle(&self.trajectory, self.freq, cycles);
        let p = self.trajectory.normal_force;
        (a..=b).map(|k| (self.trajectory.states[k][0], p * self.trajectory.f[k])).collect()
    }
}

fn run_presliding_at(cfg: &PreSlidingConfig, freq: f64) -> Result<PreSlidingRun> {
    let model = &cfg.model;
    let amplitude = cfg.force_ratio * breakaway_force(model);
    let sys = MassOnContact { model, mass: cfg.mass, force: InputSignal::sinusoid(0.0, amplitude, freq) };
    let solver = cfg.solver.with_span(0.0, cfg.cycles as f64 / freq);
    let x0 = vec![0.0; sys.dim()];
    let trajectory = integrate_with(&sys, &x0, &solver, model.normal_force(), |_, x| FrictionSample {
        v: x[1],
        f: model.force_unchecked(&x[2..]),
        storage: model.storage_unchecked(&x[2..]),
    })?;
    let mut run = PreSlidingRun {
        freq,
        sup_velocity: trajectory.v.iter().fold(0.0, |m, v| m.max(v.abs())),
        passivity_margin: passivity_audit(&trajectory)?,
        passivity_tolerance: passivity_tolerance(&trajectory),
        trajectory,
        metrics: LoopMetrics { area: 0.0, peak_force: 0.0, width_at_mid: 0.0 },
        closure: 0.0,
    };
    let points = run.final_loop(cfg.cycles);
    run.metrics = LoopMetrics::from_points(&points)?;
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let drift = (points[points.len() - 1].0 - points[0].0).abs();
    run.closure = if hi > lo { drift / (hi - lo) } else { 0.0 };
    Ok(run)
}

/// Runs the pre-sliding experiment for every configured frequency, from rest.
pub fn run_presliding(cfg: &PreSlidingConfig) -> Result<Vec<PreSlidingRun>> {
    cfg.validate()?;
    cfg.freqs.par_iter().map(|&f| run_presliding_at(cfg, f)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagConfig {
    pub v_bias: f64,
    pub v_amp: f64,
    pub freqs: Vec<f64>,
    pub cycles: usize,
    pub model: FrbdModel,
    pub solver: SolverConfig,
}

/// Default lag profile `v(t) = 1.0 + 0.99 sin(2πωt)` m/s: unidirectional,
/// dipping to the reference Stribeck velocity at its minimum.
pub const DEFAULT_LAG_BIAS: f64 = 1.0;
pub const DEFAULT_LAG_AMPLITUDE: f64 = 0.99;

impl LagConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_amp >= 0.0 && self.v_bias > self.v_amp) {
            return Err(invalid(
                "v_bias",
                format!(
                    "motion must stay unidirectional: need v_bias > v_amp >= 0, got {} and {}",
                    self.v_bias, self.v_amp
                ),
            ));
        }
        check_common(&self.freqs, self.cycles)
    }
}

#[derive(Debug, Clone)]
pub struct LagRun {
    pub freq: f64,
    pub trajectory: Trajectory,
    /// Metrics of the final-cycle `(v, pf)` loop.
    pub metrics: LoopMetrics,
    pub passivity_margin: f64,
    pub passivity_tolerance: f64,
}

impl LagRun {
    pub fn final_loop(&self, cycles: usize) -> Vec<(f64, f64)> {
        let (a, b) = final_cycle(&self.trajectory, self.freq, cycles);
        let p = self.trajectory.normal_force;
        (a..=b).map(|k| (self.trajectory.v[k], p * self.trajectory.f[k])).collect()
    }
}

fn run_lag_at(cfg: &LagConfig, freq: f64) -> Result<LagRun> {
    let input = InputSignal::sinusoid(cfg.v_bias, cfg.v_amp, freq);
    let solver = cfg.solver.with_span(0.0, cfg.cycles as f64 / freq);
    let trajectory = integrate(&cfg.model, &cfg.model.zero_state(), &input, &solver)?;
    let mut run = LagRun {
        freq,
        passivity_margin: passivity_audit(&trajectory)?,
        passivity_tolerance: passivity_tolerance(&trajectory),
        trajectory,
        metrics: LoopMetrics { area: 0.0, peak_force: 0.0, width_at_mid: 0.0 },
    };
    run.metrics = LoopMetrics::from_points(&run.final_loop(cfg.cycles))?;
    Ok(run)
}

/// Runs the frictional-lag experiment for every configured frequency, from rest.
pub fn run_frictional_lag(cfg: &LagConfig) -> Result<Vec<LagRun>> {
    cfg.validate()?;
    cfg.freqs.par_iter().map(|&f| run_lag_at(cfg, f)).collect()
}
