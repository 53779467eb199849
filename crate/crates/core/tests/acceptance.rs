//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//!
//! Runs without the libtest harness so every criterion executes even when an
//! earlier one fails; the process exits non-zero if any criterion fails.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use frbd_core::arm::{run_tracking, ArmPlant, ControllerGains, Pendulum, ReferenceSignal, TrackingInit};
use frbd_core::calibration::{fit, simulate_trace, FitOptions, FitProblem, FreeParam, InitialState, ParamId, Trace};
use frbd_core::experiments::{
    run_frictional_lag, run_presliding, LagConfig, PreSlidingConfig, DEFAULT_LAG_AMPLITUDE, DEFAULT_LAG_BIAS,
};
use frbd_core::ode::{rk4_step, suggested_step, DrivenModel};
use frbd_core::{
    boundedness_audit, canonical_sls_to_gkv, canonical_sls_to_gm, integrate, passivity_audit, passivity_tolerance,
    solve, FrbdModel, FrictionLaw, GkvParams, GmParams, InputSignal, Regularization, Rheology, SlsCanonical,
    SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ─── Shared fixtures ─────────────────────────────────────────────────────────

fn reference_law() -> FrictionLaw {
    FrictionLaw::stribeck(1.0, 1.5, 0.01, 2.0).unwrap()
}

/// Reference set (σ₀ = 1e4, σ₁ = 64.5, γ₁ = 1e-3) in GM form, computed by hand:
/// k̄₀ = σ₀, k̄₁ = σ₁/γ₁ − σ₀, τ₁ = γ₁.
fn reference_gm(p: f64, eps: f64) -> FrbdModel {
    let reg = if eps > 0.0 { Regularization::smooth(eps).unwrap() } else { Regularization::exact() };
    FrbdModel::new(
        Rheology::Gm(GmParams::from_slices(1e4, &[64.5 / 1e-3 - 1e4], &[1e-3]).unwrap()),
        reference_law(),
        reg,
        p,
    )
    .unwrap()
}

/// Reference set in GKV form: k̄₀ = σ₁/γ₁, k̄₁ = σ₀k̄₀/(k̄₀ − σ₀), c̄₁ = γ₁(k̄₀ + k̄₁).
fn reference_gkv() -> FrbdModel {
    let k0: f64 = 64.5 / 1e-3;
    let k1 = 1e4 * k0 / (k0 - 1e4);
    FrbdModel::new(
        Rheology::Gkv(GkvParams::from_slices(k0, &[k1], &[1e-3 * (k0 + k1)]).unwrap()),
        reference_law(),
        Regularization::exact(),
        1.0,
    )
    .unwrap()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Random valid model with `n` branches.
fn random_model(rng: &mut ChaCha8Rng, gkv: bool, n: usize) -> FrbdModel {
    let k0 = log_uniform(rng, 1e2, 3e4);
    let ks: Vec<f64> = (0..n).map(|_| log_uniform(rng, 1e2, 3e4)).collect();
    let taus: Vec<f64> = (0..n).map(|_| log_uniform(rng, 1e-4, 1e-1)).collect();
    let rheology = if gkv {
        let cs: Vec<f64> = ks.iter().zip(&taus).map(|(k, t)| (k0 + k) * t).collect();
        Rheology::Gkv(GkvParams::from_slices(k0, &ks, &cs).unwrap())
    } else {
        Rheology::Gm(GmParams::from_slices(k0, &ks, &taus).unwrap())
    };
    let mu_d = rng.random_range(0.5..1.5);
    let law = FrictionLaw::stribeck(
        mu_d,
        mu_d * rng.random_range(1.0..2.0),
        log_uniform(rng, 1e-3, 1e-1),
        rng.random_range(0.5..3.0),
    )
    .unwrap();
    let reg = if rng.random_bool(0.5) {
        Regularization::exact()
    } else {
        Regularization::smooth(log_uniform(rng, 1e-6, 1e-2)).unwrap()
    };
    FrbdModel::new(rheology, law, reg, rng.random_range(0.5..10.0)).unwrap()
}

/// Random state on the natural force scale of `model`.
fn random_state(rng: &mut ChaCha8Rng, model: &FrbdModel) -> Vec<f64> {
    let mu = model.law().mu_max();
    let mut x = vec![mu / model.rheology().k0() * rng.random_range(-2.0..2.0)];
    match model.rheology() {
        Rheology::Gm(p) => x.extend(p.branches().iter().map(|_| mu * rng.random_range(-2.0..2.0))),
        Rheology::Gkv(p) => x.extend(p.branches().iter().map(|b| mu / b.stiffness * rng.random_range(-2.0..2.0))),
    }
    x
}

// ─── Independent oracles ─────────────────────────────────────────────────────

/// `∇V` from the storage formulas, written out per rheology.
fn storage_gradient_oracle(model: &FrbdModel, x: &[f64]) -> Vec<f64> {
    let p = model.normal_force();
    match model.rheology() {
        Rheology::Gm(gm) => {
            let mut g = vec![p * gm.k0() * x[0]];
            g.extend(x[1..].iter().zip(gm.branches()).map(|(f, b)| p * f / b.stiffness));
            g
        }
        Rheology::Gkv(gkv) => {
            let z0 = x[0] - x[1..].iter().sum::<f64>();
            let mut g = vec![p * gkv.k0() * z0];
            g.extend(x[1..].iter().zip(gkv.branches()).map(|(z, b)| p * (b.stiffness * z - gkv.k0() * z0)));
            g
        }
    }
}

/// `sgn_ε(v) μ(v)` evaluated directly from the reference Stribeck curve.
fn steady_force_oracle(v: f64) -> f64 {
    let mu = 1.0 + 0.5 * (-(v.abs() / 0.01).powi(2)).exp();
    v.signum() * mu
}

// ─── Criteria ────────────────────────────────────────────────────────────────

fn criterion_1_steady_state() -> Outcome {
    let speeds = [-1.0, -0.1, -0.01, -0.001, 0.001, 0.01, 0.1, 1.0];
    let models = [("GM", reference_gm(1.0, 0.0)), ("GKV", reference_gkv())];
    let mut worst_f: f64 = 0.0;
    let mut worst_x: f64 = 0.0;
    let mut failures = Vec::new();
    for (name, model) in &models {
        for &v in &speeds {
            let traj = integrate(
                model,
                &model.zero_state(),
                &InputSignal::Constant(v),
                &SolverConfig::rk4(1e-5, 0.0, 1.0).with_stride(100_000),
            )
            .unwrap();
            let x = traj.states.last().unwrap();
            let f_target = steady_force_oracle(v);
            // Steady state by hand: GM z = f/k̄₀, f₁ = 0; GKV z = f/k̄₀ + f/k̄₁, z₁ = f/k̄₁.
            let x_target = match model.rheology() {
                Rheology::Gm(p) => vec![f_target / p.k0(), 0.0],
                Rheology::Gkv(p) => {
                    let k1 = p.branches()[0].stiffness;
                    vec![f_target / p.k0() + f_target / k1, f_target / k1]
                }
            };
            let df = (traj.f.last().unwrap() - f_target).abs();
            let dx = x.iter().zip(&x_target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_f = worst_f.max(df);
            worst_x = worst_x.max(dx);
            if df >= 1e-6 || dx >= 1e-6 {
                failures.push(format!("{name} v={v}: |Δf|={df:.2e} |Δx|={dx:.2e}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("max |Δf| = {worst_f:.2e}, max |Δx| = {worst_x:.2e} (tol 1e-6); failing: [{}]", failures.join("; ")),
    )
}

fn criterion_2_dissipation_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_chain, mut worst_fd): (f64, f64) = (0.0, 0.0);
    let h = 1e-7;
    for k in 0..1000 {
        let model = random_model(&mut rng, k % 2 == 1, [1, 2, 4][k % 3]);
        let x = random_state(&mut rng, &model);
        let v = rng.random_range(-1.0..1.0);
        let (pfv, slip, branch) = model.power_balance(&x, v).unwrap();
        let scale = pfv.abs() + slip + branch;
        let analytic = model.dissipation_rate(&x, v).unwrap();
        let dx = model.rhs(&x, v).unwrap();
        let chain: f64 = storage_gradient_oracle(&model, &x).iter().zip(&dx).map(|(g, d)| g * d).sum();
        worst_chain = worst_chain.max((analytic - chain).abs() / scale);

        let input = InputSignal::Constant(v);
        let sys = DrivenModel { model: &model, input: &input };
        let (mut fwd, mut bwd) = (x.clone(), x.clone());
        rk4_step(&sys, 0.0, &mut fwd, h);
        rk4_step(&sys, 0.0, &mut bwd, -h);
        let fd = (model.storage(&fwd).unwrap() - model.storage(&bwd).unwrap()) / (2.0 * h);
        worst_fd = worst_fd.max((analytic - fd).abs() / scale);
    }
    outcome(
        worst_chain < 1e-10 && worst_fd < 1e-4,
        format!(
            "1000 samples: chain-rule relerr {worst_chain:.2e} (tol 1e-10), flow FD relerr {worst_fd:.2e} (tol 1e-4)"
        ),
    )
}

fn criterion_3_passivity() -> Outcome {
    let results: Vec<(u64, f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let model = random_model(&mut rng, seed % 2 == 1, [1, 2, 4][(seed / 2 % 3) as usize]);
            let input = InputSignal::random_bounded(seed, 1.0, 0.0, 5.0, 100);
            let dt = suggested_step(&model, 1.0, 1e-4);
            let cfg = SolverConfig::rk4(dt, 0.0, 5.0).with_stride(50);
            let traj = integrate(&model, &model.zero_state(), &input, &cfg).unwrap();
            (seed, passivity_audit(&traj).unwrap(), passivity_tolerance(&traj))
        })
        .collect();
    let bad: Vec<_> = results.iter().filter(|(_, m, tol)| *m < -tol).collect();
    let worst = results.iter().map(|(_, m, tol)| m / tol.max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min);
    outcome(bad.is_empty(), format!("100 runs, {} violations; min margin/tol_num = {worst:.3e}", bad.len()))
}

fn criterion_4_boundedness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut models = vec![reference_gm(1.0, 0.0), reference_gkv()];
    for (gkv, n) in [(false, 2), (true, 2), (false, 4), (true, 4)] {
        models.push(random_model(&mut rng, gkv, n));
    }
    let reports: Vec<_> = models
        .par_iter()
        .enumerate()
        .map(|(i, model)| {
            let input = InputSignal::random_bounded(40 + i as u64, 1.0, 0.0, 100.0, 2000);
            let dt = suggested_step(model, 1.0, 1e-4);
            let cfg = SolverConfig::rk4(dt, 0.0, 100.0).with_stride(200);
            let x0 = random_state(&mut ChaCha8Rng::seed_from_u64(400 + i as u64), model);
            let traj = integrate(model, &x0, &input, &cfg).unwrap();
            boundedness_audit(&traj, 1.0, 10.0)
        })
        .collect();
    let pass = reports.iter().all(|r| r.all_finite && r.bounded);
    let ratio = reports.iter().map(|r| r.sup / r.initial.max(r.trailing_bound)).fold(0.0, f64::max);
    outcome(pass, format!("{} runs of 100 s; max sup V / max(V(0), attractor bound) = {ratio:.4}", reports.len()))
}

fn criterion_5_sls_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for set in 0..20 {
        let sigma0 = log_uniform(&mut rng, 1e2, 3e4);
        let gamma1 = log_uniform(&mut rng, 1e-4, 1e-2);
        let sigma1 = gamma1 * sigma0 * rng.random_range(1.5..20.0);
        let canonical = SlsCanonical::new(sigma0, sigma1, gamma1).unwrap();
        let law = reference_law();
        let reg = Regularization::smooth(1e-4).unwrap();
        let gm = FrbdModel::new(Rheology::Gm(canonical_sls_to_gm(&canonical).unwrap()), law, reg, 1.0).unwrap();
        let gkv = FrbdModel::new(Rheology::Gkv(canonical_sls_to_gkv(&canonical).unwrap()), law, reg, 1.0).unwrap();
        for k in 0..5u64 {
            let input = if k < 3 {
                InputSignal::random_bounded(100 * set + k, 0.5, 0.0, 1.0, 40)
            } else {
                InputSignal::sinusoid(0.01 * k as f64, 0.05, 2.0 + k as f64)
            };
            let x_gm = if k == 0 { gm.zero_state() } else { random_state(&mut rng, &gm) };
            // Consistent GKV state: same bristle deflection and force, z₁ = z − f/k̄₀.
            let f0 = gm.force(&x_gm).unwrap();
            let x_gkv = vec![x_gm[0], x_gm[0] - f0 / gkv.rheology().k0()];
            let dt = suggested_step(&gm, 0.5, 1e-4).min(suggested_step(&gkv, 0.5, 1e-4));
            let cfg = SolverConfig::rk4(dt, 0.0, 1.0).with_stride(10);
            let a = integrate(&gm, &x_gm, &input, &cfg).unwrap();
            let b = integrate(&gkv, &x_gkv, &input, &cfg).unwrap();
            let scale = a.f.iter().fold(0.0f64, |m, f| m.max(f.abs()));
            let err = a.f.iter().zip(&b.f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
            worst = worst.max(err);
        }
    }
    outcome(worst < 1e-6, format!("20 sets x 5 inputs; max relative force deviation {worst:.2e} (tol 1e-6)"))
}

fn criterion_6_presliding() -> Outcome {
    let cfg = PreSlidingConfig {
        mass: 1.0,
        force_ratio: 0.9,
        freqs: vec![1.0, 5.0, 10.0],
        cycles: 5,
        model: reference_gm(1.0, 0.0),
        solver: SolverConfig::rk4(1e-5, 0.0, 1.0).with_stride(10),
    };
    let runs = run_presliding(&cfg).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for run in &runs {
        let points = run.final_loop(cfg.cycles);
        let (f_lo, f_hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let f_closure = (points[points.len() - 1].1 - points[0].1).abs() / (f_hi - f_lo);
        let ok = run.closure < 0.01
            && f_closure < 0.01
            && run.sup_velocity < 10.0 * 0.01
            && run.passivity_margin >= -run.passivity_tolerance;
        pass &= ok;
        lines.push(format!(
            "{} Hz: closure x {:.1e} pf {:.1e}, sup|v| {:.3}, margin {:.1e}",
            run.freq, run.closure, f_closure, run.sup_velocity, run.passivity_margin
        ));
    }
    outcome(pass, lines.join("; "))
}

fn criterion_7_frictional_lag() -> Outcome {
    let cfg = LagConfig {
        v_bias: DEFAULT_LAG_BIAS,
        v_amp: DEFAULT_LAG_AMPLITUDE,
        freqs: vec![25.0, 50.0, 100.0],
        cycles: 6,
        model: reference_gm(1.0, 0.0),
        solver: SolverConfig::rk4(1e-6, 0.0, 1.0).with_stride(1),
    };
    let runs = run_frictional_lag(&cfg).unwrap();
    let peaks: Vec<f64> = runs.iter().map(|r| r.metrics.peak_force).collect();
    let areas: Vec<f64> = runs.iter().map(|r| r.metrics.area.abs()).collect();
    let peaks_down = peaks.windows(2).all(|w| w[1] < w[0]);
    let areas_up = areas.windows(2).all(|w| w[1] > w[0]);
    let passive = runs.iter().all(|r| r.passivity_margin >= -r.passivity_tolerance);
    outcome(
        peaks_down && areas_up && passive,
        format!("peak pf {peaks:.5?} (strictly decreasing: {peaks_down}); |area| {areas:?} (strictly increasing: {areas_up})"),
    )
}

fn criterion_8_arm_tracking() -> Outcome {
    let plant = ArmPlant::new(Pendulum::default(), 0.05, reference_gm(100.0, 1e-6)).unwrap();
    let init = TrackingInit { q: 0.1, qd: 0.0, friction: vec![1.5e-4, 0.5], observer: vec![0.0, 0.0] };
    let solver = SolverConfig::rk4(1e-5, 0.0, 20.0).with_stride(100);
    let run = run_tracking(&plant, &ReferenceSignal::default(), &ControllerGains::default(), &solver, &init).unwrap();
    let late = run.index_at(15.0);
    let sup_q = run.q_tilde[late..].iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let total = *run.s_squared_integral.last().unwrap();
    let trailing = total - run.s_squared_integral[run.index_at(18.0)];
    let v0 = run.observer_storage[0];
    let err = run.torque_error();
    let max_supply = err.iter().zip(&run.s).map(|(f, s)| (f * s).abs()).fold(0.0, f64::max);
    let tol = run.max_step.powi(2) * 20.0 * max_supply;
    let worst = run.error_supply.iter().map(|w| w + v0).fold(f64::INFINITY, f64::min);
    outcome(
        sup_q < 1e-3 && trailing < 0.01 * total && worst >= -tol,
        format!(
            "sup |q̃| on [15,20] = {sup_q:.2e}; trailing ∫s² share {:.2e}; min ∫F̃s + V_obs(0) = {worst:.2e} (V_obs(0) = {v0:.2e})",
            trailing / total
        ),
    )
}

fn criterion_9_calibration() -> Outcome {
    let truth = reference_gm(1.0, 0.0);
    let rate = 2000.0;
    let t: Vec<f64> = (0..=2000).map(|k| k as f64 / rate).collect();
    let v: Vec<f64> = t.iter().map(|&t| 0.004 * (TAU * 2.0 * t).sin() + 0.002 * (TAU * 60.0 * t).sin()).collect();
    let input = InputSignal::sampled(t.clone(), v.clone()).unwrap();
    let clean = simulate_trace(&truth, &t, &input, InitialState::ZeroState, 1e-4).unwrap();
    let peak = clean.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = Normal::new(0.0, 0.01 * peak).unwrap();
    let noisy: Vec<f64> = clean.iter().map(|x| x + normal.sample(&mut rng)).collect();

    let ids = [ParamId::K0, ParamId::Stiffness(1), ParamId::Timescale(1)];
    let targets = [1e4, 54_500.0, 1e-3];
    let start = frbd_core::calibration::with_params(
        &truth,
        &[(ids[0], targets[0] * 1.05), (ids[1], targets[1] * 0.95), (ids[2], targets[2] * 1.05)],
    )
    .unwrap();
    let free: Vec<FreeParam> =
        ids.iter().zip(targets).map(|(id, v)| FreeParam::new(*id, v / 10.0, v * 10.0).unwrap()).collect();
    let mut detail = Vec::new();
    let mut pass = true;
    for (label, pf, tol) in [("noise-free", clean, 0.01), ("1% noise", noisy, 0.05)] {
        let problem = FitProblem::new(
            Trace { t: t.clone(), v: v.clone(), pf },
            start.clone(),
            free.clone(),
            InitialState::ZeroState,
            FitOptions::default(),
        )
        .unwrap();
        let res = fit(&problem).unwrap();
        let errs: Vec<f64> = res.params.iter().zip(targets).map(|((_, got), want)| (got / want - 1.0).abs()).collect();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        pass &= worst < tol;
        detail.push(format!("{label}: max rel err {worst:.2e} (tol {tol}) in {} iterations", res.iterations));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_10_solver_order() -> Outcome {
    let decay = (1usize, |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
    let exact = (-1.0f64).exp();
    let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let mut last = 0.0;
            solve(&decay, &[1.0], &SolverConfig::rk4(dt, 0.0, 1.0), |_, x, _| {
                last = x[0];
                Ok(())
            })
            .unwrap();
            (last - exact).abs()
        })
        .collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);

    let (rtol, atol) = (1e-6, 1e-9);
    let model = reference_gm(1.0, 0.0);
    let input = InputSignal::sinusoid(0.0, 0.05, 2.0);
    let sys = DrivenModel { model: &model, input: &input };
    let final_state = |cfg: SolverConfig| {
        let mut last = Vec::new();
        solve(&sys, &model.zero_state(), &cfg, |_, x, _| {
            last = x.to_vec();
            Ok(())
        })
        .unwrap();
        last
    };
    let mut adaptive_ok = true;
    let mut worst: f64 = 0.0;
    for t1 in [0.25, 0.5, 1.0] {
        let reference = final_state(SolverConfig::rk4(1e-6, 0.0, t1));
        let adaptive = final_state(SolverConfig::rk45(rtol, atol, 1e-12, 1e-2, 0.0, t1));
        for (a, r) in adaptive.iter().zip(&reference) {
            let bound = 10.0 * (rtol * r.abs() + atol);
            worst = worst.max((a - r).abs() / bound);
            adaptive_ok &= (a - r).abs() <= bound;
        }
    }
    outcome(
        order >= 3.9 && adaptive_ok,
        format!("RK4 observed order {order:.3} (min 3.9); adaptive error / 10(rtol|x|+atol) = {worst:.3}"),
    )
}

type CriterionEntry = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [CriterionEntry; 10] = [
        ("steady-state reproduction", criterion_1_steady_state, Some(Duration::from_secs(10))),
        ("dissipation identity", criterion_2_dissipation_identity, None),
        ("passivity sweep", criterion_3_passivity, Some(Duration::from_secs(120))),
        ("long-horizon boundedness", criterion_4_boundedness, None),
        ("GM/GKV SLS equivalence", criterion_5_sls_equivalence, None),
        ("pre-sliding hysteresis", criterion_6_presliding, None),
        ("frictional lag orderings", criterion_7_frictional_lag, None),
        ("arm tracking", criterion_8_arm_tracking, Some(Duration::from_secs(60))),
        ("calibration recovery", criterion_9_calibration, None),
        ("solver order", criterion_10_solver_order, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_budget = budget.is_none_or(|b| elapsed < b);
        let pass = result.pass && in_budget;
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {:<28} {} [{:.2?}{}] {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed,
            if in_budget { "" } else { ", over time budget" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
