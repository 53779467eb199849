//! Tracking control of a 1-DOF manipulator with FrBD joint friction.
//!
//! Plant:
//!
//! ```text
//! m(q) q̈ = −c(q, q̇) q̇ − g(q) − F + U,    F = r p f
//! ```
//!
//! with the friction state driven by `q̇`. The controller uses the sliding
//! variable `s = q̃̇ + λq̃` (`q̃ = q − q_ref`), a friction observer that copies
//! the friction dynamics with an extra `−k₂s` injection on the bristle row,
//! and the feedback law
//!
//! ```text
//! U = −k₁s + F̂ + m(q)[q̈_ref − λq̃̇] + c(q, q̇)[q̇_ref − λq̃] + g(q)
//! ```
//!
//! Closed-loop states are laid out as `[q, q̇, friction…, observer…]`.

use crate::error::{ensure_nonnegative, ensure_positive, invalid, Error, Result};
use crate::model::FrbdModel;
use crate::ode::{solve, OdeSystem, SolverConfig};

/// Rigid-body terms of a single joint.
pub trait ArmDynamics {
    /// `m(q) > 0`.
    fn inertia(&self, q: f64) -> f64;
    /// Coefficient `c(q, q̇)` multiplying `q̇`.
    fn coriolis(&self, q: f64, qd: f64) -> f64;
    /// Gravitational torque `g(q)`.
    fn gravity(&self, q: f64) -> f64;
}

/// Point-mass pendulum with an optional velocity-dependent term
/// `c(q, q̇) = c₀ cos(q) q̇`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum {
    pub inertia: f64,
    pub mass: f64,
    pub length: f64,
    pub gravity_accel: f64,
    pub coriolis_gain: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self { inertia: 1.0, mass: 1.0, length: 0.5, gravity_accel: 9.81, coriolis_gain: 0.0 }
    }
}

impl Pendulum {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("inertia", self.inertia)?;
        ensure_nonnegative("mass", self.mass)?;
        ensure_nonnegative("length", self.length)?;
        ensure_nonnegative("gravity", self.gravity_accel)?;
        if !self.coriolis_gain.is_finite() {
            return Err(invalid("coriolis", "must be finite"));
        }
        Ok(())
    }
}

impl ArmDynamics for Pendulum {
    fn inertia(&self, _q: f64) -> f64 {
        self.inertia
    }

    fn coriolis(&self, q: f64, qd: f64) -> f64 {
        self.coriolis_gain * q.cos() * qd
    }

    fn gravity(&self, q: f64) -> f64 {
        self.mass * self.gravity_accel * self.length * q.sin()
    }
}

/// Joint with rigid-body terms, joint radius `r` and FrBD friction.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPlant<D> {
    pub dynamics: D,
    pub radius: f64,
    pub friction: FrbdModel,
}

impl<D: ArmDynamics> ArmPlant<D> {
    pub fn new(dynamics: D, radius: f64, friction: FrbdModel) -> Result<Self> {
        ensure_positive("radius", radius)?;
        Ok(Self { dynamics, radius, friction })
    }

    /// Torque `r p f` produced by a (plant or observer) friction state.
    pub fn friction_torque(&self, friction_state: &[f64]) -> f64 {
        self.radius * self.friction.normal_force() * self.friction.force_unchecked(friction_state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
}

impl ControllerGains {
    pub fn new(lambda: f64, k1: f64, k2: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("k1", k1)?;
        ensure_positive("k2", k2)?;
        Ok(Self { lambda, k1, k2 })
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { lambda: 5.0, k1: 10.0, k2: 100.0 }
    }
}

/// Reference position with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub q: f64,
    pub qd: f64,
    pub qdd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSignal {
    Constant(f64),
    /// `bias + amplitude · sin(2π·freq·t)`.
    Sinusoid {
        bias: f64,
        amplitude: f64,
        freq: f64,
    },
}

impl ReferenceSignal {
    pub fn eval(&self, t: f64) -> RefSample {
        match *self {
            Self::Constant(q) => RefSample { q, qd: 0.0, qdd: 0.0 },
            Self::Sinusoid { bias, amplitude, freq } => {
                let w = std::f64::consts::TAU * freq;
                let (sin, cos) = (w * t).sin_cos();
                RefSample { q: bias + amplitude * sin, qd: amplitude * w * cos, qdd: -amplitude * w * w * sin }
            }
        }
    }
}

impl Default for ReferenceSignal {
    /// `0.5 sin(2π · 0.25 t)` rad.
    fn default() -> Self {
        Self::Sinusoid { bias: 0.0, amplitude: 0.5, freq: 0.25 }
    }
}

/// Tracking error `q̃ = q − q_ref` and sliding variable `s = q̃̇ + λq̃`.
pub fn tracking_vars(q: f64, qd: f64, reference: &RefSample, lambda: f64) -> (f64, f64) {
    let q_tilde = q - reference.q;
    let qd_tilde = qd - reference.qd;
    (q_tilde, qd_tilde + lambda * q_tilde)
}

/// Control torque `U` given the friction estimate `F̂`.
pub fn control_law<D: ArmDynamics>(
    dynamics: &D,
    gains: &ControllerGains,
    q: f64,
    qd: f64,
    reference: &RefSample,
    friction_estimate: f64,
) -> f64 {
    let (q_tilde, s) = tracking_vars(q, qd, reference, gains.lambda);
    let qd_tilde = qd - reference.qd;
    -gains.k1 * s
        + friction_estimate
        + dynamics.inertia(q) * (reference.qdd - gains.lambda * qd_tilde)
        + dynamics.coriolis(q, qd) * (reference.qd - gains.lambda * q_tilde)
        + dynamics.gravity(q)
}

/// Observer derivative: the friction dynamics driven by the measured `q̇`
/// with `−k₂s` added to the bristle row. Branch rows use the injected `ż̂`.
pub fn observer_rhs(friction: &FrbdModel, observer: &[f64], qd: f64, s: f64, k2: f64, out: &mut [f64]) -> Result<()> {
    if observer.len() != friction.dim() || out.len() != friction.dim() {
        return Err(Error::DimensionMismatch { expected: friction.dim(), got: observer.len().min(out.len()) });
    }
    friction.rhs_with_injection(observer, qd, -k2 * s, out);
    Ok(())
}

/// Plant, friction, observer and controller as one ODE.
pub struct ClosedLoop<'a, D> {
    pub plant: &'a ArmPlant<D>,
    pub reference: &'a ReferenceSignal,
    pub gains: &'a ControllerGains,
}

impl<D: ArmDynamics> ClosedLoop<'_, D> {
    fn split<'x>(&self, x: &'x [f64]) -> (f64, f64, &'x [f64], &'x [f64]) {
        let n = self.plant.friction.dim();
        (x[0], x[1], &x[2..2 + n], &x[2 + n..2 + 2 * n])
    }

    /// Control torque applied at `(t, x)`.
    pub fn control(&self, t: f64, x: &[f64]) -> f64 {
        let (q, qd, _, observer) = self.split(x);
        let estimate = self.plant.friction_torque(observer);
        control_law(&self.plant.dynamics, self.gains, q, qd, &self.reference.eval(t), estimate)
    }
}

impl<D: ArmDynamics> OdeSystem for ClosedLoop<'_, D> {
    fn dim(&self) -> usize {
        2 + 2 * self.plant.friction.dim()
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let n = self.plant.friction.dim();
        let (q, qd, friction, observer) = self.split(x);
        let reference = self.reference.eval(t);
        let (_, s) = tracking_vars(q, qd, &reference, self.gains.lambda);
        let torque = self.plant.friction_torque(friction);
        let estimate = self.plant.friction_torque(observer);
        let u = control_law(&self.plant.dynamics, self.gains, q, qd, &reference, estimate);
        let dyn_ = &self.plant.dynamics;
        dx[0] = qd;
        dx[1] = (-dyn_.coriolis(q, qd) * qd - dyn_.gravity(q) - torque + u) / dyn_.inertia(q);
        let (plant_rows, observer_rows) = dx[2..].split_at_mut(n);
        self.plant.friction.rhs_with_injection(friction, qd, 0.0, plant_rows);
        self.plant.friction.rhs_with_injection(observer, qd, -self.gains.k2 * s, observer_rows);
    }
}

/// Initial conditions of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingInit {
    pub q: f64,
    pub qd: f64,
    pub friction: Vec<f64>,
    pub observer: Vec<f64>,
}

impl TrackingInit {
    pub fn to_state(&self) -> Vec<f64> {
        [self.q, self.qd]
            .into_iter()
            .chain(self.friction.iter().copied())
            .chain(self.observer.iter().copied())
            .collect()
    }
}

/// Closed-loop channels recorded by [`run_tracking`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackingRun {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub q_tilde: Vec<f64>,
    pub s: Vec<f64>,
    /// Friction torque `F = r p f`.
    pub torque: Vec<f64>,
    /// Observer estimate `F̂ = r p f̂`.
    pub estimate: Vec<f64>,
    /// Control torque `U`.
    pub control: Vec<f64>,
    /// `∫ s² dτ`.
    pub s_squared_integral: Vec<f64>,
    /// `∫ F̃ s dτ`.
    pub error_supply: Vec<f64>,
    /// Storage of the observer-error system seen from `s ↦ F̃`:
    /// `(r/k₂)·V(z̃, f̃)`, with `V` the friction model's storage function.
    pub observer_storage: Vec<f64>,
    pub max_step: f64,
}

impl TrackingRun {
    /// `F̃ = F − F̂`.
    pub fn torque_error(&self) -> Vec<f64> {
        self.torque.iter().zip(&self.estimate).map(|(a, b)| a - b).collect()
    }

    pub fn index_at(&self, time: f64) -> usize {
        self.t.partition_point(|&s| s < time)
    }

    /// `min_k ∫F̃s(t_k) + V_obs(0)`; nonnegative when the observer-error
    /// branch is passive.
    pub fn observer_passivity_margin(&self) -> f64 {
        let v0 = self.observer_storage.first().copied().unwrap_or(0.0);
        self.error_supply.iter().map(|w| w + v0).fold(f64::INFINITY, f64::min)
    }
}

/// Simulates the closed loop over the solver span.
pub fn run_tracking<D: ArmDynamics>(
    plant: &ArmPlant<D>,
    reference: &ReferenceSignal,
    gains: &ControllerGains,
    solver: &SolverConfig,
    init: &TrackingInit,
) -> Result<TrackingRun> {
    let n = plant.friction.dim();
    if init.friction.len() != n || init.observer.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if init.friction.len() != n { init.friction.len() } else { init.observer.len() },
        });
    }
    let system = ClosedLoop { plant, reference, gains };
    let scale = plant.radius / gains.k2;
    let mut run = TrackingRun::default();
    let (mut s_sq, mut supply) = (0.0, 0.0);
    let (mut last_s_sq, mut last_supply) = (0.0, 0.0);
    let mut error = vec![0.0; n];
    let mut counter = 0usize;
    let stride = solver.record_stride;

    let stats = solve(&system, &init.to_state(), solver, |t, x, h| {
        let (q, qd, friction, observer) = system.split(x);
        let (q_tilde, s) = tracking_vars(q, qd, &reference.eval(t), gains.lambda);
        let torque = plant.friction_torque(friction);
        let estimate = plant.friction_torque(observer);
        let s2 = s * s;
        let ps = (torque - estimate) * s;
        if h > 0.0 {
            s_sq += 0.5 * h * (last_s_sq + s2);
            supply += 0.5 * h * (last_supply + ps);
        }
        last_s_sq = s2;
        last_supply = ps;
        if !(s_sq.is_finite() && supply.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        let record = h == 0.0 || counter.is_multiple_of(stride) || t >= solver.t1;
        counter += 1;
        if record {
            for ((e, a), b) in error.iter_mut().zip(friction).zip(observer) {
                *e = a - b;
            }
            run.t.push(t);
            run.states.push(x.to_vec());
            run.q_tilde.push(q_tilde);
            run.s.push(s);
            run.torque.push(torque);
            run.estimate.push(estimate);
            run.control.push(system.control(t, x));
            run.s_squared_integral.push(s_sq);
            run.error_supply.push(supply);
            run.observer_storage.push(scale * plant.friction.storage_unchecked(&error));
        }
        Ok(())
    })?;
    run.max_step = stats.max_step;
    Ok(run)
}
