//! The FrBD-GM and FrBD-GKV friction models.
//!
//! Both models share the bristle rate law
//!
//! ```text
//! ż = −(|v|_ε / μ(v)) f + v
//! ```
//!
//! and differ in how the nondimensional force `f` is produced by the
//! viscoelastic element. States are flat slices laid out as
//! `[z, b₁, …, bₙ]`, where `bᵢ` is the branch force `fᵢ` (GM) or the branch
//! deflection `zᵢ` (GKV).

use crate::error::{ensure_positive, Error, Result};
use crate::friction::{FrictionLaw, GkvParams, GmParams, Regularization};

#[derive(Debug, Clone, PartialEq)]
pub enum Rheology {
    Gm(GmParams),
    Gkv(GkvParams),
}

impl Rheology {
    pub fn n(&self) -> usize {
        match self {
            Self::Gm(p) => p.n(),
            Self::Gkv(p) => p.n(),
        }
    }

    pub fn k0(&self) -> f64 {
        match self {
            Self::Gm(p) => p.k0(),
            Self::Gkv(p) => p.k0(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gm(_) => "gm",
            Self::Gkv(_) => "gkv",
        }
    }
}

/// Friction force with its matching equilibrium state.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub force: f64,
    pub state: Vec<f64>,
}

/// A complete FrBD friction element: rheology, friction law, regularization
/// and normal force `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrbdModel {
    rheology: Rheology,
    law: FrictionLaw,
    reg: Regularization,
    normal_force: f64,
}

impl FrbdModel {
    pub fn new(rheology: Rheology, law: FrictionLaw, reg: Regularization, normal_force: f64) -> Result<Self> {
        ensure_positive("p", normal_force)?;
        law.validate()?;
        Ok(Self { rheology, law, reg, normal_force })
    }

    pub fn rheology(&self) -> &Rheology {
        &self.rheology
    }

    pub fn law(&self) -> &FrictionLaw {
        &self.law
    }

    pub fn regularization(&self) -> &Regularization {
        &self.reg
    }

    pub fn normal_force(&self) -> f64 {
        self.normal_force
    }

    /// Returns a copy with a different normal force.
    pub fn with_normal_force(&self, normal_force: f64) -> Result<Self> {
        Self::new(self.rheology.clone(), self.law, self.reg, normal_force)
    }

    /// State dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.rheology.n() + 1
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() })
        }
    }

    /// Sliding gain `|v|_ε / μ(v)` multiplying the force in the bristle law.
    pub fn sliding_gain(&self, v: f64) -> f64 {
        self.reg.abs(v) / self.law.eval(v)
    }

    /// Nondimensional friction force `f` for state `x`.
    pub fn force(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.force_unchecked(x))
    }

    pub(crate) fn force_unchecked(&self, x: &[f64]) -> f64 {
        let (z, branches) = (x[0], &x[1..]);
        match &self.rheology {
            Rheology::Gm(p) => p.k0() * z + branches.iter().sum::<f64>(),
            Rheology::Gkv(p) => p.k0() * (z - branches.iter().sum::<f64>()),
        }
    }

    /// Friction force `p·f` in newtons.
    pub fn friction_force(&self, x: &[f64]) -> Result<f64> {
        Ok(self.normal_force * self.force(x)?)
    }

    /// Evaluates the state derivative into `dx`.
    ///
    /// The bristle row is evaluated first; the GM branch rows reuse that `ż`.
    pub fn rhs_into(&self, x: &[f64], v: f64, dx: &mut [f64]) -> Result<()> {
        self.check(x)?;
        if dx.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: dx.len() });
        }
        self.rhs_with_injection(x, v, 0.0, dx);
        Ok(())
    }

    /// Bristle dynamics with an additive term `injection` on the `ż` row.
    /// The observer in [`crate::arm`] uses this with `injection = −k₂s`.
    pub(crate) fn rhs_with_injection(&self, x: &[f64], v: f64, injection: f64, dx: &mut [f64]) {
        let gain = self.sliding_gain(v);
        let (z, branches) = (x[0], &x[1..]);
        match &self.rheology {
            Rheology::Gm(p) => {
                let f = p.k0() * z + branches.iter().sum::<f64>();
                let zdot = -gain * f + v + injection;
                dx[0] = zdot;
                for ((d, fi), b) in dx[1..].iter_mut().zip(branches).zip(p.branches()) {
                    *d = -fi / b.relaxation_time + b.stiffness * zdot;
                }
            }
            Rheology::Gkv(p) => {
                let z0 = z - branches.iter().sum::<f64>();
                dx[0] = -gain * p.k0() * z0 + v + injection;
                for ((d, zi), b) in dx[1..].iter_mut().zip(branches).zip(p.branches()) {
                    *d = (-b.stiffness * zi + p.k0() * z0) / b.damping;
                }
            }
        }
    }

    pub fn rhs(&self, x: &[f64], v: f64) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; x.len()];
        self.rhs_into(x, v, &mut dx)?;
        Ok(dx)
    }

    /// Equilibrium reached under a constant sliding velocity `v`:
    /// `f = sgn_ε(v) μ(v)`.
    pub fn steady_state(&self, v: f64) -> SteadyState {
        let force = self.reg.sgn(v) * self.law.eval(v);
        let state = match &self.rheology {
            Rheology::Gm(p) => {
                let mut s = vec![0.0; p.n() + 1];
                s[0] = force / p.k0();
                s
            }
            Rheology::Gkv(p) => {
                let branches: Vec<f64> = p.branches().iter().map(|b| force / b.stiffness).collect();
                let z = force / p.k0() + branches.iter().sum::<f64>();
                std::iter::once(z).chain(branches).collect()
            }
        };
        SteadyState { force, state }
    }

    /// Storage function `V(x)` in joules.
    ///
    /// GM: `½pk̄₀z² + ½Σ(p/k̄ᵢ)fᵢ²`; GKV: `½pk̄₀z₀² + ½Σpk̄ᵢzᵢ²` with `z₀ = z − Σzᵢ`.
    pub fn storage(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.storage_unchecked(x))
    }

    pub(crate) fn storage_unchecked(&self, x: &[f64]) -> f64 {
        let p = self.normal_force;
        let (z, branches) = (x[0], &x[1..]);
        match &self.rheology {
            Rheology::Gm(gm) => {
                0.5 * p * gm.k0() * z * z
                    + branches.iter().zip(gm.branches()).map(|(fi, b)| 0.5 * p * fi * fi / b.stiffness).sum::<f64>()
            }
            Rheology::Gkv(gkv) => {
                let z0 = z - branches.iter().sum::<f64>();
                0.5 * p * gkv.k0() * z0 * z0
                    + branches.iter().zip(gkv.branches()).map(|(zi, b)| 0.5 * p * b.stiffness * zi * zi).sum::<f64>()
            }
        }
    }

    /// Gradient `∇V(x)`.
    pub fn storage_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let p = self.normal_force;
        let (z, branches) = (x[0], &x[1..]);
        Ok(match &self.rheology {
            Rheology::Gm(gm) => std::iter::once(p * gm.k0() * z)
                .chain(branches.iter().zip(gm.branches()).map(|(fi, b)| p * fi / b.stiffness))
                .collect(),
            Rheology::Gkv(gkv) => {
                let z0 = z - branches.iter().sum::<f64>();
                std::iter::once(p * gkv.k0() * z0)
                    .chain(branches.iter().zip(gkv.branches()).map(|(zi, b)| p * (b.stiffness * zi - gkv.k0() * z0)))
                    .collect()
            }
        })
    }

    /// The three terms of `V̇ = pfv − D_slip − D_branch`, returned as
    /// `(pfv, D_slip, D_branch)` with both dissipation terms nonnegative.
    pub fn power_balance(&self, x: &[f64], v: f64) -> Result<(f64, f64, f64)> {
        self.check(x)?;
        let p = self.normal_force;
        let f = self.force_unchecked(x);
        let slip = p * self.sliding_gain(v) * f * f;
        let (z, branches) = (x[0], &x[1..]);
        let branch = match &self.rheology {
            Rheology::Gm(gm) => {
                branches.iter().zip(gm.branches()).map(|(fi, b)| p * fi * fi / (b.relaxation_time * b.stiffness)).sum()
            }
            Rheology::Gkv(gkv) => {
                let z0 = z - branches.iter().sum::<f64>();
                branches
                    .iter()
                    .zip(gkv.branches())
                    .map(|(zi, b)| {
                        let r = b.stiffness * zi - gkv.k0() * z0;
                        p * r * r / b.damping
                    })
                    .sum()
            }
        };
        Ok((p * f * v, slip, branch))
    }

    /// Closed-form `V̇` along the flow.
    pub fn dissipation_rate(&self, x: &[f64], v: f64) -> Result<f64> {
        let (supply, slip, branch) = self.power_balance(x, v)?;
        Ok(supply - slip - branch)
    }

    /// Supplied power `p·f·v`.
    pub fn supplied_power(&self, x: &[f64], v: f64) -> Result<f64> {
        Ok(self.normal_force * self.force(x)? * v)
    }

    /// State of this model with bristle deflection `z` and total force `f`.
    /// Only defined for single-branch (SLS) elements, where `(z, f)` fixes
    /// the branch variable.
    pub fn sls_state(&self, z: f64, f: f64) -> Result<Vec<f64>> {
        match &self.rheology {
            Rheology::Gm(p) if p.n() == 1 => Ok(vec![z, f - p.k0() * z]),
            Rheology::Gkv(p) if p.n() == 1 => Ok(vec![z, z - f / p.k0()]),
            other => Err(Error::BranchCount(other.n())),
        }
    }

    /// Maps a state of `self` onto the equivalent state of `target` by
    /// matching bristle deflection and force. Both models must be SLS.
    pub fn equivalent_state(&self, target: &FrbdModel, x: &[f64]) -> Result<Vec<f64>> {
        if self.rheology.n() != 1 {
            return Err(Error::BranchCount(self.rheology.n()));
        }
        let f = self.force(x)?;
        target.sls_state(x[0], f)
    }
}
