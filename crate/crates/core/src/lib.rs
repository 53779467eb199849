//! Rate-and-state friction models built on linear viscoelastic bristle
//! elements (FrBD-GM and FrBD-GKV), with numerical audits of their
//! steady-state, boundedness and passivity properties, hysteresis
//! experiments, an observer-based tracking controller for a 1-DOF arm, and
//! shooting-based parameter identification.

pub mod arm;
pub mod calibration;
pub mod error;
pub mod experiments;
pub mod friction;
pub mod model;
pub mod ode;

pub use arm::{
    control_law, observer_rhs, run_tracking, tracking_vars, ArmDynamics, ArmPlant, ControllerGains, Pendulum,
    RefSample, ReferenceSignal, TrackingInit, TrackingRun,
};
pub use calibration::{
    fit, residual, simulate_trace, FitOptions, FitProblem, FitResult, FreeParam, InitialState, ParamId, Trace,
};
pub use error::{Error, Result};
pub use experiments::{
    breakaway_force, loop_area, run_frictional_lag, run_presliding, LagConfig, LagRun, LoopMetrics, PreSlidingConfig,
    PreSlidingRun,
};
pub use friction::{
    canonical_sls_to_gkv, canonical_sls_to_gm, gkv_to_canonical_sls, gm_to_canonical_sls, FrictionLaw, GkvParams,
    GmParams, KelvinVoigtBranch, MaxwellBranch, RegForm, Regularization, SlsCanonical,
};
pub use model::{FrbdModel, Rheology, SteadyState};
pub use ode::{
    boundedness_audit, integrate, integrate_with, passivity_audit, passivity_tolerance, solve, suggested_step,
    BoundednessReport, FrictionSample, InputSignal, Method, OdeSystem, SolverConfig, Trajectory,
};
