//! Parameter identification from measured velocity/force traces.
//!
//! The model is integrated along the measured velocity (linearly
//! interpolated between samples) and the residual `p f_sim(t_k) − pf_k` is
//! minimised with a bounded Levenberg–Marquardt iteration. Every free
//! parameter is strictly positive and is optimised as `θ = ln(value)`, so
//! bounds become a box in `θ` and positivity holds by construction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::friction::{FrictionLaw, GkvParams, GmParams};
use crate::model::{FrbdModel, Rheology};
use crate::ode::{rk4_step, DrivenModel, InputSignal};

/// A model parameter addressable by the fitter. Branch indices start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    K0,
    Stiffness(usize),
    /// `τ_i` for GM models, `c̄_i` for GKV models.
    Timescale(usize),
    MuD,
    MuS,
    VStribeck,
    Delta,
}

impl ParamId {
    /// Name under the given rheology (`tau1` for GM, `c1` for GKV).
    pub fn name_for(&self, rheology: &Rheology) -> String {
        match (self, rheology) {
            (Self::Timescale(i), Rheology::Gkv(_)) => format!("c{i}"),
            _ => self.to_string(),
        }
    }

    pub fn get(&self, model: &FrbdModel) -> Result<f64> {
        let branch = |i: usize| -> Result<usize> {
            (1..=model.rheology().n())
                .contains(&i)
                .then_some(i - 1)
                .ok_or_else(|| invalid("param", format!("branch {i} does not exist")))
        };
        let stribeck = || match *model.law() {
            FrictionLaw::Stribeck { mu_d, mu_s, v_stribeck, delta } => Ok([mu_d, mu_s, v_stribeck, delta]),
            FrictionLaw::Constant { .. } => Err(invalid("param", "Stribeck parameters need a Stribeck law")),
        };
        Ok(match (*self, model.rheology()) {
            (Self::K0, r) => r.k0(),
            (Self::Stiffness(i), Rheology::Gm(p)) => p.branches()[branch(i)?].stiffness,
            (Self::Stiffness(i), Rheology::Gkv(p)) => p.branches()[branch(i)?].stiffness,
            (Self::Timescale(i), Rheology::Gm(p)) => p.branches()[branch(i)?].relaxation_time,
            (Self::Timescale(i), Rheology::Gkv(p)) => p.branches()[branch(i)?].damping,
            (Self::MuD, _) => stribeck()?[0],
            (Self::MuS, _) => stribeck()?[1],
            (Self::VStribeck, _) => stribeck()?[2],
            (Self::Delta, _) => stribeck()?[3],
        })
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::K0 => write!(f, "k0"),
            Self::Stiffness(i) => write!(f, "k{i}"),
            Self::Timescale(i) => write!(f, "tau{i}"),
            Self::MuD => write!(f, "mu_d"),
            Self::MuS => write!(f, "mu_s"),
            Self::VStribeck => write!(f, "v_s"),
            Self::Delta => write!(f, "delta"),
        }
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let indexed = |rest: &str| -> Result<usize> {
            rest.parse::<usize>()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| invalid("param", format!("unknown parameter `{s}`")))
        };
        match s {
            "k0" => Ok(Self::K0),
            "mu_d" => Ok(Self::MuD),
            "mu_s" => Ok(Self::MuS),
            "v_s" => Ok(Self::VStribeck),
            "delta" => Ok(Self::Delta),
            _ => {
                if let Some(rest) = s.strip_prefix("tau") {
                    indexed(rest).map(Self::Timescale)
                } else if let Some(rest) = s.strip_prefix('c') {
                    indexed(rest).map(Self::Timescale)
                } else if let Some(rest) = s.strip_prefix('k') {
                    indexed(rest).map(Self::Stiffness)
                } else {
                    Err(invalid("param", format!("unknown parameter `{s}`")))
                }
            }
        }
    }
}

/// Returns a copy of `model` with the listed parameters replaced.
pub fn with_params(model: &FrbdModel, values: &[(ParamId, f64)]) -> Result<FrbdModel> {
    let mut k0 = model.rheology().k0();
    let (mut stiff, mut times): (Vec<f64>, Vec<f64>) = match model.rheology() {
        Rheology::Gm(p) => p.branches().iter().map(|b| (b.stiffness, b.relaxation_time)).unzip(),
        Rheology::Gkv(p) => p.branches().iter().map(|b| (b.stiffness, b.damping)).unzip(),
    };
    let mut law = *model.law();
    for &(id, value) in values {
        id.get(model)?;
        match id {
            ParamId::K0 => k0 = value,
            ParamId::Stiffness(i) => stiff[i - 1] = value,
            ParamId::Timescale(i) => times[i - 1] = value,
            _ => {
                if let FrictionLaw::Stribeck { mu_d, mu_s, v_stribeck, delta } = &mut law {
                    *match id {
                        ParamId::MuD => mu_d,
                        ParamId::MuS => mu_s,
                        ParamId::VStribeck => v_stribeck,
                        _ => delta,
                    } = value;
                }
            }
        }
    }
    let rheology = match model.rheology() {
        Rheology::Gm(_) => Rheology::Gm(GmParams::from_slices(k0, &stiff, &times)?),
        Rheology::Gkv(_) => Rheology::Gkv(GkvParams::from_slices(k0, &stiff, &times)?),
    };
    FrbdModel::new(rheology, law, *model.regularization(), model.normal_force())
}

/// Measured trace: sample times, sliding velocity and friction force `p f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub pf: Vec<f64>,
}

impl Trace {
    pub fn validate(&self) -> Result<()> {
        if self.t.len() < 2 || self.v.len() != self.t.len() || self.pf.len() != self.t.len() {
            return Err(invalid("data", "t, v and pf need equal lengths of at least 2"));
        }
        if self.t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("data", "time must be strictly increasing"));
        }
        if self.t.iter().chain(&self.v).chain(&self.pf).any(|x| !x.is_finite()) {
            return Err(invalid("data", "samples must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    ZeroState,
    #[default]
    SteadyStateAtFirstSample,
}

/// Free parameter with its box constraint `lo ≤ value ≤ hi`, `lo > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParam {
    pub id: ParamId,
    pub lo: f64,
    pub hi: f64,
}

impl FreeParam {
    pub fn new(id: ParamId, lo: f64, hi: f64) -> Result<Self> {
        ensure_positive("lo", lo)?;
        if !(hi.is_finite() && hi > lo) {
            return Err(invalid("hi", format!("bound for {id} must be finite and > {lo}")));
        }
        Ok(Self { id, lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Largest RK4 substep between samples.
    pub max_dt: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, gradient_tol: 1e-8, step_tol: 1e-10, fd_step: 1e-6, max_dt: 1e-4 }
    }
}

/// A calibration problem. `model` carries both the fixed parameters and the
/// starting values of the free ones.
#[derive(Debug, Clone)]
pub struct FitProblem {
    data: Trace,
    input: InputSignal,
    model: FrbdModel,
    free: Vec<FreeParam>,
    x0_policy: InitialState,
    options: FitOptions,
}

impl FitProblem {
    pub fn new(
        data: Trace,
        model: FrbdModel,
        free: Vec<FreeParam>,
        x0_policy: InitialState,
        options: FitOptions,
    ) -> Result<Self> {
        data.validate()?;
        ensure_positive("max_dt", options.max_dt)?;
        ensure_positive("fd_step", options.fd_step)?;
        for (i, p) in free.iter().enumerate() {
            let start = p.id.get(&model)?;
            if free[..i].iter().any(|q| q.id == p.id) {
                return Err(invalid("free", format!("parameter {} listed twice", p.id)));
            }
            if !(p.lo..=p.hi).contains(&start) {
                return Err(invalid("free", format!("start value {start} of {} outside [{}, {}]", p.id, p.lo, p.hi)));
            }
        }
        let input = InputSignal::sampled(data.t.clone(), data.v.clone())?;
        Ok(Self { data, input, model, free, x0_policy, options })
    }

    pub fn data(&self) -> &Trace {
        &self.data
    }

    pub fn model(&self) -> &FrbdModel {
        &self.model
    }

    pub fn free(&self) -> &[FreeParam] {
        &self.free
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    /// Starting values of the free parameters.
    pub fn start(&self) -> Vec<f64> {
        self.free.iter().map(|p| p.id.get(&self.model).expect("checked in new")).collect()
    }

    /// The model with the free parameters set to `values`.
    pub fn model_at(&self, values: &[f64]) -> Result<FrbdModel> {
        if values.len() != self.free.len() {
            return Err(Error::DimensionMismatch { expected: self.free.len(), got: values.len() });
        }
        let pairs: Vec<_> = self.free.iter().map(|p| p.id).zip(values.iter().copied()).collect();
        with_params(&self.model, &pairs)
    }

    /// `p f_sim(t_k)` along the data for the given model.
    pub fn simulate(&self, model: &FrbdModel) -> Result<Vec<f64>> {
        simulate_trace(model, &self.data.t, &self.input, self.x0_policy, self.options.max_dt)
    }
}

/// Integrates `model` along `input` and samples `p f` at `times`.
pub fn simulate_trace(
    model: &FrbdModel,
    times: &[f64],
    input: &InputSignal,
    x0_policy: InitialState,
    max_dt: f64,
) -> Result<Vec<f64>> {
    ensure_positive("max_dt", max_dt)?;
    let mut x = match x0_policy {
        InitialState::ZeroState => model.zero_state(),
        InitialState::SteadyStateAtFirstSample => {
            model.steady_state(input.eval(times.first().copied().unwrap_or(0.0))).state
        }
    };
    let system = DrivenModel { model, input };
    let p = model.normal_force();
    let mut out = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let t_prev = times[k - 1];
            let span = t - t_prev;
            let m = (span / max_dt).ceil().max(1.0) as usize;
            let h = span / m as f64;
            for j in 0..m {
                rk4_step(&system, t_prev + j as f64 * h, &mut x, h);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        out.push(p * model.force_unchecked(&x));
    }
    Ok(out)
}

/// `r_k = p f_sim(t_k) − pf_k` with the free parameters set to `values`.
pub fn residual(problem: &FitProblem, values: &[f64]) -> Result<Vec<f64>> {
    for (p, v) in problem.free.iter().zip(values) {
        if !(p.lo..=p.hi).contains(v) {
            return Err(invalid("params", format!("{} = {v} outside [{}, {}]", p.id, p.lo, p.hi)));
        }
    }
    let model = problem.model_at(values)?;
    let sim = problem.simulate(&model)?;
    Ok(sim.iter().zip(&problem.data.pf).map(|(a, b)| a - b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<(ParamId, f64)>,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal of `(JᵀJ)⁻¹` in log coordinates, i.e. a relative variance
    /// proxy per parameter. Infinite when the data do not constrain it.
    pub covariance_proxy: Vec<f64>,
    pub ill_conditioned: Vec<bool>,
    /// RMSE after the start and after every accepted step.
    pub rmse_history: Vec<f64>,
    pub message: String,
}

impl FitResult {
    pub fn value(&self, id: ParamId) -> Option<f64> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, v)| *v)
    }

    pub fn any_ill_conditioned(&self) -> bool {
        self.ill_conditioned.iter().any(|&b| b)
    }
}

const NULL_EIGEN_RATIO: f64 = 1e-10;
const NULL_WEIGHT: f64 = 1e-6;

fn rmse(r: &[f64]) -> f64 {
    (r.iter().map(|x| x * x).sum::<f64>() / r.len().max(1) as f64).sqrt()
}

/// Bounded Levenberg–Marquardt fit in log coordinates. Non-convergence is
/// reported through `converged`; only an invalid start is an error.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    let opts = problem.options;
    let m = problem.free.len();
    let lo: Vec<f64> = problem.free.iter().map(|p| p.lo.ln()).collect();
    let hi: Vec<f64> = problem.free.iter().map(|p| p.hi.ln()).collect();
    let clamp = |theta: &mut [f64]| {
        for ((t, l), h) in theta.iter_mut().zip(&lo).zip(&hi) {
            *t = t.clamp(*l, *h);
        }
    };
    let to_values = |theta: &[f64]| -> Vec<f64> {
        theta.iter().zip(&problem.free).map(|(t, p)| t.exp().clamp(p.lo, p.hi)).collect()
    };
    let eval = |theta: &[f64]| residual(problem, &to_values(theta));

    let mut theta: Vec<f64> = problem.start().iter().map(|v| v.ln()).collect();
    let mut r = eval(&theta)?;
    let mut cost = 0.5 * r.iter().map(|x| x * x).sum::<f64>();
    let mut history = vec![rmse(&r)];
    let mut mu = 1e-3;
    let mut converged = m == 0;
    let mut message = String::from(if m == 0 { "no free parameters" } else { "iteration limit reached" });
    let mut iterations = 0;
    let mut jac = DMatrix::<f64>::zeros(r.len(), m);

    while m > 0 && iterations < opts.max_iterations {
        iterations += 1;
        match jacobian(&eval, &theta, &lo, &hi, opts.fd_step, r.len()) {
            Ok(j) => jac = j,
            Err(e) => {
                message = format!("jacobian evaluation failed: {e}");
                break;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let g = jac.tr_mul(&rv);
        if g.amax() < opts.gradient_tol {
            converged = true;
            message = "gradient below tolerance".into();
            break;
        }
        let a = jac.tr_mul(&jac);
        let diag_floor = a.diagonal().max().max(1.0) * 1e-12;
        let mut accepted = false;
        let mut tiny_step = false;
        while mu < 1e16 {
            let mut damped = a.clone();
            for i in 0..m {
                damped[(i, i)] += mu * a[(i, i)].max(diag_floor);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 4.0;
                continue;
            };
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            clamp(&mut trial);
            let moved = trial.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if moved < opts.step_tol {
                tiny_step = true;
                break;
            }
            if let Ok(rt) = eval(&trial) {
                let trial_cost = 0.5 * rt.iter().map(|x| x * x).sum::<f64>();
                if trial_cost.is_finite() && trial_cost < cost {
                    theta = trial;
                    r = rt;
                    cost = trial_cost;
                    history.push(rmse(&r));
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    tiny_step = moved < opts.step_tol;
                    break;
                }
            }
            mu *= 4.0;
        }
        if tiny_step {
            converged = true;
            message = "step below tolerance".into();
            break;
        }
        if !accepted {
            converged = g.amax() < opts.gradient_tol.sqrt();
            message = "damping limit reached without descent".into();
            break;
        }
    }

    let (covariance_proxy, ill_conditioned) = covariance(&jac.tr_mul(&jac));
    let values = to_values(&theta);
    Ok(FitResult {
        params: problem.free.iter().map(|p| p.id).zip(values).collect(),
        rmse: rmse(&r),
        iterations,
        converged,
        covariance_proxy,
        ill_conditioned,
        rmse_history: history,
        message,
    })
}

fn jacobian<F>(eval: &F, theta: &[f64], lo: &[f64], hi: &[f64], h: f64, rows: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let columns: Vec<Result<Vec<f64>>> = (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[j] = (theta[j] + h).min(hi[j]);
            minus[j] = (theta[j] - h).max(lo[j]);
            let width = plus[j] - minus[j];
            let (rp, rm) = (eval(&plus)?, eval(&minus)?);
            Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / width).collect())
        })
        .collect();
    let mut jac = DMatrix::zeros(rows, theta.len());
    for (j, col) in columns.into_iter().enumerate() {
        jac.set_column(j, &DVector::from_vec(col?));
    }
    Ok(jac)
}

/// Pseudo-inverse diagonal of `JᵀJ` and a per-parameter flag marking
/// parameters with weight on (numerically) null directions.
fn covariance(a: &DMatrix<f64>) -> (Vec<f64>, Vec<bool>) {
    let m = a.nrows();
    if m == 0 {
        return (Vec::new(), Vec::new());
    }
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.amax();
    let null = |lambda: f64| top.is_nan() || top <= 0.0 || lambda <= NULL_EIGEN_RATIO * top;
    (0..m)
        .map(|i| {
            let mut var = 0.0;
            let mut null_weight = 0.0;
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                let w = eig.eigenvectors[(i, k)].powi(2);
                if null(lambda) {
                    null_weight += w;
                } else {
                    var += w / lambda;
                }
            }
            if null_weight > NULL_WEIGHT {
                (f64::INFINITY, true)
            } else {
                (var, false)
            }
        })
        .unzip()
}
