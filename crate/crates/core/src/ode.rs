//! Time integration, trajectory recording and the passivity/boundedness audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::model::FrbdModel;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical four-stage Runge-Kutta with a constant step.
    FixedRk4 { dt: f64 },
    /// Dormand-Prince embedded 5(4) pair with step-size control.
    AdaptiveRk45 { rtol: f64, atol: f64, dt_min: f64, dt_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub t0: f64,
    pub t1: f64,
    /// Record every `record_stride`-th accepted step. The final step is
    /// always recorded; supplied energy is accumulated on every step.
    pub record_stride: usize,
}

/// Default fixed step, two decades below the fastest time constant of the reference parameter set.
pub const DEFAULT_DT: f64 = 1e-5;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

impl SolverConfig {
    pub fn rk4(dt: f64, t0: f64, t1: f64) -> Self {
        Self { method: Method::FixedRk4 { dt }, t0, t1, record_stride: 1 }
    }

    pub fn rk45(rtol: f64, atol: f64, dt_min: f64, dt_max: f64, t0: f64, t1: f64) -> Self {
        Self { method: Method::AdaptiveRk45 { rtol, atol, dt_min, dt_max }, t0, t1, record_stride: 1 }
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    pub fn with_span(mut self, t0: f64, t1: f64) -> Self {
        self.t0 = t0;
        self.t1 = t1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return Err(invalid("t1", format!("must exceed t0 = {}, got {}", self.t0, self.t1)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        match self.method {
            Method::FixedRk4 { dt } => ensure_positive("dt", dt),
            Method::AdaptiveRk45 { rtol, atol, dt_min, dt_max } => {
                ensure_positive("rtol", rtol)?;
                ensure_positive("atol", atol)?;
                ensure_positive("dt_min", dt_min)?;
                ensure_positive("dt_max", dt_max)?;
                if dt_min > dt_max {
                    return Err(invalid("dt_min", format!("must not exceed dt_max = {dt_max}")));
                }
                Ok(())
            }
        }
    }

    /// Largest step the scheme may take.
    pub fn max_step(&self) -> f64 {
        match self.method {
            Method::FixedRk4 { dt } => dt,
            Method::AdaptiveRk45 { dt_max, .. } => dt_max,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::rk4(DEFAULT_DT, 0.0, 1.0)
    }
}

/// A first-order system `ẋ = F(t, x)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.1)(t, x, dx)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_step: f64,
}

/// Scratch space for the Runge-Kutta stages.
struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], next: vec![0.0; n], err: vec![0.0; n] }
    }
}

/// One classical RK4 step of size `h`, in place.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, x: &mut [f64], h: f64) {
    let mut stages = Stages::new(x.len());
    rk4_step_with(sys, t, x, h, &mut stages);
}

fn rk4_step_with<S: OdeSystem + ?Sized>(sys: &S, t: f64, x: &mut [f64], h: f64, s: &mut Stages) {
    let [k1, k2, k3, k4, ..] = &mut s.k;
    let tmp = &mut s.tmp;
    sys.rhs(t, x, k1);
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, tmp, k2);
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, tmp, k3);
    for i in 0..x.len() {
        tmp[i] = x[i] + h * k3[i];
    }
    sys.rhs(t + h, tmp, k4);
    for i in 0..x.len() {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Attempts one Dormand-Prince step; returns the scaled RMS error estimate.
#[allow(clippy::needless_range_loop)]
fn dopri_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, x: &[f64], h: f64, rtol: f64, atol: f64, s: &mut Stages) -> f64 {
    let n = x.len();
    sys.rhs(t, x, &mut s.k[0]);
    for stage in 1..7 {
        for i in 0..n {
            let mut acc = x[i];
            for (j, a) in A[stage][..stage].iter().enumerate() {
                acc += h * a * s.k[j][i];
            }
            s.tmp[i] = acc;
        }
        sys.rhs(t + C[stage] * h, &s.tmp, &mut s.k[stage]);
    }
    let mut sum = 0.0;
    for i in 0..n {
        let mut hi = x[i];
        let mut lo = x[i];
        for j in 0..7 {
            hi += h * B5[j] * s.k[j][i];
            lo += h * B4[j] * s.k[j][i];
        }
        s.next[i] = hi;
        s.err[i] = hi - lo;
        let scale = atol + rtol * x[i].abs().max(hi.abs());
        sum += (s.err[i] / scale).powi(2);
    }
    (sum / n as f64).sqrt()
}

/// Integrates `sys` from `x0` over the configured span.
///
/// `on_step(t, x, h)` is called once at `t0` with `h = 0` and after every
/// accepted step with the size of that step.
pub fn solve<S, F>(sys: &S, x0: &[f64], cfg: &SolverConfig, mut on_step: F) -> Result<SolveStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64], f64) -> Result<()>,
{
    cfg.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: x0.len() });
    }
    let mut x = x0.to_vec();
    let mut t = cfg.t0;
    let mut stages = Stages::new(x.len());
    let mut stats = SolveStats::default();
    on_step(t, &x, 0.0)?;

    match cfg.method {
        Method::FixedRk4 { dt } => {
            let span = cfg.t1 - cfg.t0;
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for k in 1..=steps {
                rk4_step_with(sys, t, &mut x, h, &mut stages);
                t = if k == steps { cfg.t1 } else { cfg.t0 + k as f64 * h };
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t });
                }
                stats.accepted += 1;
                stats.max_step = h;
                on_step(t, &x, h)?;
            }
        }
        Method::AdaptiveRk45 { rtol, atol, dt_min, dt_max } => {
            let mut h = dt_max.min((cfg.t1 - cfg.t0) / 100.0).max(dt_min);
            while t < cfg.t1 {
                let last = t + h >= cfg.t1;
                let step = if last { cfg.t1 - t } else { h };
                let err = dopri_step(sys, t, &x, step, rtol, atol, &mut stages);
                if !err.is_finite() {
                    if step <= dt_min {
                        return Err(Error::NonFinite { t });
                    }
                    h = (step * FAC_MIN).max(dt_min);
                    stats.rejected += 1;
                    continue;
                }
                let factor = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
                if err <= 1.0 {
                    t = if last { cfg.t1 } else { t + step };
                    x.copy_from_slice(&stages.next);
                    stats.accepted += 1;
                    stats.max_step = stats.max_step.max(step);
                    on_step(t, &x, step)?;
                    h = (step * factor).min(dt_max);
                    if !last {
                        h = h.max(dt_min);
                    }
                } else {
                    stats.rejected += 1;
                    let proposal = step * factor.min(1.0);
                    if proposal < dt_min {
                        return Err(Error::StepUnderflow { t, dt: proposal, dt_min });
                    }
                    h = proposal;
                }
            }
        }
    }
    Ok(stats)
}

/// Prescribed relative velocity `v(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Constant(f64),
    /// `bias + amplitude · sin(2π·freq·t + phase)`.
    Sinusoid {
        bias: f64,
        amplitude: f64,
        freq: f64,
        phase: f64,
    },
    /// Piecewise-linear interpolation, held constant outside the samples.
    Sampled {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// Sum of components.
    Composite(Vec<InputSignal>),
}

impl InputSignal {
    pub fn sinusoid(bias: f64, amplitude: f64, freq: f64) -> Self {
        Self::Sinusoid { bias, amplitude, freq, phase: 0.0 }
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(invalid("times", "need equally many (≥1) times and values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        Ok(Self::Sampled { times, values })
    }

    /// Piecewise-linear signal through `knots + 1` uniformly spaced points
    /// drawn uniformly from `[-bound, bound]`.
    pub fn random_bounded(seed: u64, bound: f64, t0: f64, t1: f64, knots: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let knots = knots.max(1);
        let times = (0..=knots).map(|k| t0 + (t1 - t0) * k as f64 / knots as f64).collect();
        let values = (0..=knots).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::Sampled { times, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Sinusoid { bias, amplitude, freq, phase } => {
                bias + amplitude * (std::f64::consts::TAU * freq * t + phase).sin()
            }
            Self::Sampled { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[last] {
                    return values[last];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
            Self::Composite(parts) => parts.iter().map(|p| p.eval(t)).sum(),
        }
    }

    /// Upper bound on `|v(t)|` over all `t`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Self::Constant(v) => v.abs(),
            Self::Sinusoid { bias, amplitude, .. } => bias.abs() + amplitude.abs(),
            Self::Sampled { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Self::Composite(parts) => parts.iter().map(Self::sup_abs).sum(),
        }
    }
}

/// A friction model driven by a prescribed velocity.
pub struct DrivenModel<'a> {
    pub model: &'a FrbdModel,
    pub input: &'a InputSignal,
}

impl OdeSystem for DrivenModel<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let v = self.input.eval(t);
        self.model.rhs_with_injection(x, v, 0.0, dx);
    }
}

/// Per-sample friction quantities extracted from a (possibly larger) system state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionSample {
    /// Relative velocity `v` entering the friction element.
    pub v: f64,
    /// Nondimensional force `f`.
    pub f: f64,
    /// Storage `V`.
    pub storage: f64,
}

/// Recorded solution with the friction channels used by the audits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    /// Storage `V` at each sample.
    pub storage: Vec<f64>,
    /// Cumulative supplied energy `W_in = ∫ p f v dτ` (trapezoid on every solver step).
    pub supplied: Vec<f64>,
    pub normal_force: f64,
    /// Largest step taken by the solver.
    pub max_step: f64,
    /// `max |p f v|` over every solver step.
    pub max_supply_power: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Friction force `p·f` per sample.
    pub fn pf(&self) -> Vec<f64> {
        self.f.iter().map(|f| self.normal_force * f).collect()
    }

    /// Component `i` of the recorded state.
    pub fn state_component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Index of the first sample with `t ≥ time`.
    pub fn index_at(&self, time: f64) -> usize {
        self.t.partition_point(|&s| s < time)
    }
}

/// Integrates `sys` and records friction channels through `probe`, which
/// maps `(t, x)` to the friction element's velocity, force and storage.
pub fn integrate_with<S, P>(
    sys: &S,
    x0: &[f64],
    cfg: &SolverConfig,
    normal_force: f64,
    mut probe: P,
) -> Result<Trajectory>
where
    S: OdeSystem + ?Sized,
    P: FnMut(f64, &[f64]) -> FrictionSample,
{
    let mut traj = Trajectory { normal_force, ..Trajectory::default() };
    let mut energy = 0.0;
    let mut last_power = 0.0;
    let mut counter = 0usize;
    let stride = cfg.record_stride;
    let t_end = cfg.t1;
    let mut pending: Option<(f64, Vec<f64>, FrictionSample, f64)> = None;

    let stats = solve(sys, x0, cfg, |t, x, h| {
        let sample = probe(t, x);
        let power = normal_force * sample.f * sample.v;
        if !power.is_finite() || !sample.storage.is_finite() {
            return Err(Error::NonFinite { t });
        }
        if h > 0.0 {
            energy += 0.5 * h * (last_power + power);
        }
        last_power = power;
        traj.max_supply_power = traj.max_supply_power.max(power.abs());
        let record = h == 0.0 || counter.is_multiple_of(stride) || t >= t_end;
        counter += 1;
        if record {
            traj.t.push(t);
            traj.states.push(x.to_vec());
            traj.v.push(sample.v);
            traj.f.push(sample.f);
            traj.storage.push(sample.storage);
            traj.supplied.push(energy);
            pending = None;
        } else {
            pending = Some((t, x.to_vec(), sample, energy));
        }
        Ok(())
    })?;
    if let Some((t, x, sample, energy)) = pending {
        traj.t.push(t);
        traj.states.push(x);
        traj.v.push(sample.v);
        traj.f.push(sample.f);
        traj.storage.push(sample.storage);
        traj.supplied.push(energy);
    }
    traj.max_step = stats.max_step;
    Ok(traj)
}

/// Simulates a velocity-driven friction model from `x0`.
pub fn integrate(model: &FrbdModel, x0: &[f64], input: &InputSignal, cfg: &SolverConfig) -> Result<Trajectory> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x0.len() });
    }
    let sys = DrivenModel { model, input };
    integrate_with(&sys, x0, cfg, model.normal_force(), |t, x| FrictionSample {
        v: input.eval(t),
        f: model.force_unchecked(x),
        storage: model.storage_unchecked(x),
    })
}

/// Fixed step small enough for explicit RK4 on `model` with `|v| ≤ v_bound`:
/// a fraction of the inverse of the fastest linearized rate, capped at `cap`.
pub fn suggested_step(model: &FrbdModel, v_bound: f64, cap: f64) -> f64 {
    use crate::model::Rheology;
    let speed = model.regularization().abs(v_bound.abs());
    let gain = speed / model.law().mu_min();
    let rate = match model.rheology() {
        Rheology::Gm(p) => {
            let stiff: f64 = p.k0() + p.branches().iter().map(|b| b.stiffness).sum::<f64>();
            let relax = p.branches().iter().map(|b| 1.0 / b.relaxation_time).fold(0.0, f64::max);
            gain * stiff + relax
        }
        Rheology::Gkv(p) => {
            let branch = p.branches().iter().map(|b| (b.stiffness + p.k0()) / b.damping).fold(0.0, f64::max);
            gain * p.k0() + branch * (1 + p.n()) as f64
        }
    };
    if rate > 0.0 {
        (0.5 / rate).min(cap)
    } else {
        cap
    }
}

/// Quadrature tolerance for the passivity margin: `dt² · T · max|p f v|`.
pub fn passivity_tolerance(traj: &Trajectory) -> f64 {
    traj.max_step.powi(2) * traj.duration() * traj.max_supply_power
}

/// `min_k W_in[k] − (V[k] − V[0])`. Nonnegative for a passive element up to
/// quadrature error.
pub fn passivity_audit(traj: &Trajectory) -> Result<f64> {
    if traj.storage.is_empty() || traj.storage.len() != traj.t.len() {
        return Err(Error::MissingChannel("V"));
    }
    if traj.supplied.len() != traj.t.len() {
        return Err(Error::MissingChannel("W_in"));
    }
    let v0 = traj.storage[0];
    Ok(traj.supplied.iter().zip(&traj.storage).map(|(w, v)| w - (v - v0)).fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessReport {
    pub initial: f64,
    pub sup: f64,
    /// Largest storage over the trailing half of the horizon.
    pub trailing_bound: f64,
    pub all_finite: bool,
    /// `sup V ≤ max(V(0), trailing bound)` up to rounding.
    pub bounded: bool,
    /// The input bound the run was produced under.
    pub v_bound: f64,
}

/// Checks the storage along `traj` against `max(V(0), B)`, where `B` is the
/// largest storage over the trailing half of the horizon.
///
/// `skip` excludes an initial transient window `[t0, t0 + skip)` from the
/// supremum.
pub fn boundedness_audit(traj: &Trajectory, v_bound: f64, skip: f64) -> BoundednessReport {
    let all_finite = traj.states.iter().flatten().chain(&traj.storage).all(|v| v.is_finite());
    let initial = traj.storage.first().copied().unwrap_or(0.0);
    let t0 = traj.t.first().copied().unwrap_or(0.0);
    let half = traj.index_at(t0 + 0.5 * traj.duration());
    let trailing_bound =
        traj.storage[half.min(traj.storage.len().saturating_sub(1))..].iter().copied().fold(0.0, f64::max);
    let start = traj.index_at(t0 + skip);
    let sup = traj.storage[start.min(traj.storage.len())..].iter().copied().fold(0.0, f64::max);
    let bound = initial.max(trailing_bound);
    BoundednessReport {
        initial,
        sup,
        trailing_bound,
        all_finite,
        bounded: all_finite && sup <= bound * (1.0 + 1e-12),
        v_bound,
    }
}
