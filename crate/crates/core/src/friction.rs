//! Friction-coefficient laws, the regularized absolute value, and the
//! rheological parameter sets of the Generalized Maxwell (GM) and
//! Generalized Kelvin-Voigt (GKV) bristle elements.
//!
//! For a single dissipative branch both elements reduce to the Standard
//! Linear Solid, whose differential constitutive law reads
//!
//! ```text
//! f + γ₁ ḟ = σ₀ z + σ₁ ż
//! ```
//!
//! Eliminating the branch variable gives the forward maps
//!
//! ```text
//! GM : σ₀ = k̄₀,              σ₁ = τ₁ (k̄₀ + k̄₁),        γ₁ = τ₁
//! GKV: σ₀ = k̄₀k̄₁/(k̄₀ + k̄₁), σ₁ = k̄₀c̄₁/(k̄₀ + k̄₁),    γ₁ = c̄₁/(k̄₀ + k̄₁)
//! ```
//!
//! Some literature quotes `σ₀ = k̄₁` for the GM parametrization; the
//! elimination above yields `σ₀ = k̄₀`, which is what this module implements.

use crate::error::{ensure_nonnegative, ensure_positive, invalid, Error, Result};

/// Velocity-dependent friction coefficient `μ(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrictionLaw {
    /// `μ(v) = μ_d + (μ_s − μ_d) exp(−(|v|/v_S)^δ)`.
    Stribeck {
        mu_d: f64,
        mu_s: f64,
        v_stribeck: f64,
        delta: f64,
    },
    Constant {
        mu: f64,
    },
}

impl FrictionLaw {
    pub fn stribeck(mu_d: f64, mu_s: f64, v_stribeck: f64, delta: f64) -> Result<Self> {
        ensure_positive("mu_d", mu_d)?;
        ensure_positive("mu_s", mu_s)?;
        if mu_s < mu_d {
            return Err(invalid("mu_s", format!("must be >= mu_d ({mu_d}), got {mu_s}")));
        }
        ensure_nonnegative("v_s", v_stribeck)?;
        ensure_nonnegative("delta", delta)?;
        Ok(Self::Stribeck { mu_d, mu_s, v_stribeck, delta })
    }

    pub fn constant(mu: f64) -> Result<Self> {
        ensure_positive("mu", mu)?;
        Ok(Self::Constant { mu })
    }

    /// Lower bound `μ_min` of the law.
    pub fn mu_min(&self) -> f64 {
        match *self {
            Self::Stribeck { mu_d, .. } => mu_d,
            Self::Constant { mu } => mu,
        }
    }

    /// Supremum of the law over all velocities (attained at rest).
    pub fn mu_max(&self) -> f64 {
        match *self {
            Self::Stribeck { mu_s, .. } => mu_s,
            Self::Constant { mu } => mu,
        }
    }

    /// Evaluates `μ(v)`.
    ///
    /// Degenerate Stribeck shapes use their limits instead of producing NaN:
    /// with `v_S = 0` the exponential term is 1 at rest and 0 elsewhere, and
    /// with `δ = 0` it is 1 at rest and `e⁻¹` elsewhere.
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            Self::Constant { mu } => mu,
            Self::Stribeck { mu_d, mu_s, v_stribeck, delta } => {
                let speed = v.abs();
                let decay = if speed == 0.0 {
                    1.0
                } else if v_stribeck == 0.0 {
                    0.0
                } else {
                    (-(speed / v_stribeck).powf(delta)).exp()
                };
                mu_d + (mu_s - mu_d) * decay
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Self::Stribeck { mu_d, mu_s, v_stribeck, delta } => {
                Self::stribeck(mu_d, mu_s, v_stribeck, delta).map(|_| ())
            }
            Self::Constant { mu } => Self::constant(mu).map(|_| ()),
        }
    }
}

/// Shape of the regularized absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegForm {
    /// `|y|_ε = sqrt(y² + ε)`.
    SmoothSqrt,
    /// `|y|_ε = |y|`; ε is ignored.
    Exact,
}

/// Regularization `|·|_ε` of the absolute value. Satisfies `|y|_ε ≥ |y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    epsilon: f64,
    form: RegForm,
}

impl Regularization {
    pub fn smooth(epsilon: f64) -> Result<Self> {
        ensure_nonnegative("epsilon", epsilon)?;
        Ok(Self { epsilon, form: RegForm::SmoothSqrt })
    }

    pub fn exact() -> Self {
        Self { epsilon: 0.0, form: RegForm::Exact }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn form(&self) -> RegForm {
        self.form
    }

    pub fn abs(&self, y: f64) -> f64 {
        match self.form {
            RegForm::SmoothSqrt => (y * y + self.epsilon).sqrt(),
            RegForm::Exact => y.abs(),
        }
    }

    /// `sgn_ε(v) = v / |v|_ε`, with `sgn_ε(0) = 0`.
    pub fn sgn(&self, v: f64) -> f64 {
        let denom = self.abs(v);
        if denom == 0.0 {
            0.0
        } else {
            v / denom
        }
    }
}

impl Default for Regularization {
    fn default() -> Self {
        Self::exact()
    }
}

/// One Maxwell branch: spring `k̄_i` in series with a dashpot, relaxation time `τ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellBranch {
    pub stiffness: f64,
    pub relaxation_time: f64,
}

/// One Kelvin-Voigt branch: spring `k̄_i` in parallel with dashpot `c̄_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelvinVoigtBranch {
    pub stiffness: f64,
    pub damping: f64,
}

/// Generalized Maxwell element: an elastic spring `k̄₀` in parallel with
/// `n` Maxwell branches.
#[derive(Debug, Clone, PartialEq)]
pub struct GmParams {
    k0: f64,
    branches: Vec<MaxwellBranch>,
}

impl GmParams {
    pub fn new(k0: f64, branches: Vec<MaxwellBranch>) -> Result<Self> {
        ensure_positive("k0", k0)?;
        for b in &branches {
            ensure_positive("k_i", b.stiffness)?;
            ensure_positive("tau_i", b.relaxation_time)?;
        }
        Ok(Self { k0, branches })
    }

    /// Convenience constructor from parallel slices of `k̄_i` and `τ_i`.
    pub fn from_slices(k0: f64, stiffness: &[f64], relaxation: &[f64]) -> Result<Self> {
        if stiffness.len() != relaxation.len() {
            return Err(Error::DimensionMismatch { expected: stiffness.len(), got: relaxation.len() });
        }
        let branches = stiffness
            .iter()
            .zip(relaxation)
            .map(|(&stiffness, &relaxation_time)| MaxwellBranch { stiffness, relaxation_time })
            .collect();
        Self::new(k0, branches)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn branches(&self) -> &[MaxwellBranch] {
        &self.branches
    }

    pub fn n(&self) -> usize {
        self.branches.len()
    }
}

/// Generalized Kelvin-Voigt element: an elastic spring `k̄₀` in series with
/// `n` Kelvin-Voigt branches.
#[derive(Debug, Clone, PartialEq)]
pub struct GkvParams {
    k0: f64,
    branches: Vec<KelvinVoigtBranch>,
}

impl GkvParams {
    pub fn new(k0: f64, branches: Vec<KelvinVoigtBranch>) -> Result<Self> {
        ensure_positive("k0", k0)?;
        for b in &branches {
            ensure_positive("k_i", b.stiffness)?;
            ensure_positive("c_i", b.damping)?;
        }
        Ok(Self { k0, branches })
    }

    pub fn from_slices(k0: f64, stiffness: &[f64], damping: &[f64]) -> Result<Self> {
        if stiffness.len() != damping.len() {
            return Err(Error::DimensionMismatch { expected: stiffness.len(), got: damping.len() });
        }
        let branches = stiffness
            .iter()
            .zip(damping)
            .map(|(&stiffness, &damping)| KelvinVoigtBranch { stiffness, damping })
            .collect();
        Self::new(k0, branches)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn branches(&self) -> &[KelvinVoigtBranch] {
        &self.branches
    }

    pub fn n(&self) -> usize {
        self.branches.len()
    }
}

/// Coefficients of the Standard Linear Solid law `f + γ₁ḟ = σ₀z + σ₁ż`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlsCanonical {
    sigma0: f64,
    sigma1: f64,
    gamma1: f64,
}

impl SlsCanonical {
    /// Requires `σ₁ > γ₁σ₀`; otherwise neither element has positive branch parameters.
    pub fn new(sigma0: f64, sigma1: f64, gamma1: f64) -> Result<Self> {
        ensure_positive("sigma0", sigma0)?;
        ensure_positive("sigma1", sigma1)?;
        ensure_positive("gamma1", gamma1)?;
        if sigma1 <= gamma1 * sigma0 {
            return Err(invalid("sigma1", format!("must exceed gamma1 * sigma0 = {}, got {sigma1}", gamma1 * sigma0)));
        }
        Ok(Self { sigma0, sigma1, gamma1 })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
}

pub fn gm_to_canonical_sls(p: &GmParams) -> Result<SlsCanonical> {
    let [branch] = p.branches() else {
        return Err(Error::BranchCount(p.n()));
    };
    let tau = branch.relaxation_time;
    SlsCanonical::new(p.k0(), tau * (p.k0() + branch.stiffness), tau)
}

pub fn gkv_to_canonical_sls(p: &GkvParams) -> Result<SlsCanonical> {
    let [branch] = p.branches() else {
        return Err(Error::BranchCount(p.n()));
    };
    let total = p.k0() + branch.stiffness;
    SlsCanonical::new(p.k0() * branch.stiffness / total, p.k0() * branch.damping / total, branch.damping / total)
}

pub fn canonical_sls_to_gm(c: &SlsCanonical) -> Result<GmParams> {
    let c = SlsCanonical::new(c.sigma0, c.sigma1, c.gamma1)?;
    let k1 = c.sigma1 / c.gamma1 - c.sigma0;
    GmParams::new(c.sigma0, vec![MaxwellBranch { stiffness: k1, relaxation_time: c.gamma1 }])
}

pub fn canonical_sls_to_gkv(c: &SlsCanonical) -> Result<GkvParams> {
    let c = SlsCanonical::new(c.sigma0, c.sigma1, c.gamma1)?;
    let k0 = c.sigma1 / c.gamma1;
    let k1 = c.sigma0 * k0 / (k0 - c.sigma0);
    GkvParams::new(k0, vec![KelvinVoigtBranch { stiffness: k1, damping: c.gamma1 * (k0 + k1) }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_law() -> FrictionLaw {
        FrictionLaw::stribeck(1.0, 1.5, 0.01, 2.0).unwrap()
    }

    #[test]
    fn stribeck_values() {
        let law = reference_law();
        assert_eq!(law.eval(0.0), 1.5);
        assert_relative_eq!(law.eval(1e3), 1.0);
        assert_relative_eq!(law.eval(0.01), 1.0 + 0.5 * (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(law.eval(0.01), 1.18394, epsilon = 1e-5);
        assert_eq!(law.eval(-0.01), law.eval(0.01));
    }

    #[test]
    fn stribeck_degenerate_shapes() {
        let sharp = FrictionLaw::stribeck(1.0, 2.0, 0.0, 2.0).unwrap();
        assert_eq!(sharp.eval(0.0), 2.0);
        assert_eq!(sharp.eval(1e-9), 1.0);
        let flat = FrictionLaw::stribeck(1.0, 2.0, 0.1, 0.0).unwrap();
        assert_eq!(flat.eval(0.0), 2.0);
        assert_relative_eq!(flat.eval(5.0), 1.0 + (-1.0f64).exp());
    }

    #[test]
    fn law_validation() {
        assert!(FrictionLaw::stribeck(0.0, 1.0, 0.01, 2.0).is_err());
        assert!(FrictionLaw::stribeck(1.0, 0.5, 0.01, 2.0).is_err());
        assert!(FrictionLaw::stribeck(1.0, 1.5, -0.01, 2.0).is_err());
        assert!(FrictionLaw::stribeck(1.0, 1.5, 0.01, -1.0).is_err());
        assert!(FrictionLaw::constant(0.0).is_err());
        assert_eq!(FrictionLaw::constant(0.7).unwrap().eval(3.0), 0.7);
    }

    #[test]
    fn regularized_abs_and_sign() {
        let smooth = Regularization::smooth(1e-4).unwrap();
        assert_relative_eq!(smooth.abs(0.0), 0.01, max_relative = 1e-15);
        assert_relative_eq!(smooth.abs(0.01), 2f64.sqrt() * 0.01, max_relative = 1e-15);
        assert_relative_eq!(smooth.sgn(0.01), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_eq!(smooth.sgn(0.0), 0.0);

        let zero = Regularization::smooth(0.0).unwrap();
        assert_eq!(zero.abs(-3.0), 3.0);
        assert_eq!(zero.sgn(2.0), 1.0);
        assert_eq!(zero.sgn(0.0), 0.0);
        assert_eq!(Regularization::exact().sgn(-4.0), -1.0);
        assert!(Regularization::smooth(-1.0).is_err());
    }

    #[test]
    fn reg_abs_converges_uniformly() {
        let grid: Vec<f64> = (-200..=200).map(|i| f64::from(i) * 0.01).collect();
        let mut previous = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
            let reg = Regularization::smooth(eps).unwrap();
            let gap = grid
                .iter()
                .map(|&y| {
                    let r = reg.abs(y);
                    assert!(r >= y.abs());
                    r - y.abs()
                })
                .fold(0.0, f64::max);
            assert!(gap <= eps.sqrt() * (1.0 + 1e-12));
            assert!(gap < previous);
            previous = gap;
        }
    }

    #[test]
    fn gm_reference_interconversion() {
        let gm = GmParams::from_slices(1e4, &[54_500.0], &[0.001]).unwrap();
        let c = gm_to_canonical_sls(&gm).unwrap();
        assert_relative_eq!(c.sigma0(), 1e4);
        assert_relative_eq!(c.sigma1(), 64.5, max_relative = 1e-12);
        assert_relative_eq!(c.gamma1(), 0.001);

        let back = canonical_sls_to_gm(&SlsCanonical::new(1e4, 64.5, 0.001).unwrap()).unwrap();
        assert_relative_eq!(back.k0(), 1e4);
        assert_relative_eq!(back.branches()[0].stiffness, 54_500.0, max_relative = 1e-12);
        assert_relative_eq!(back.branches()[0].relaxation_time, 0.001);

        let unit = GmParams::from_slices(1.0, &[1.0], &[1.0]).unwrap();
        assert_eq!(gm_to_canonical_sls(&unit).unwrap(), SlsCanonical::new(1.0, 2.0, 1.0).unwrap());
    }

    #[test]
    fn gkv_unit_interconversion() {
        let gkv = GkvParams::from_slices(2.0, &[2.0], &[4.0]).unwrap();
        let c = gkv_to_canonical_sls(&gkv).unwrap();
        assert_eq!(c, SlsCanonical::new(1.0, 2.0, 1.0).unwrap());
        assert_eq!(canonical_sls_to_gkv(&c).unwrap(), gkv);
    }

    #[test]
    fn interconversion_rejects_degenerate_and_multi_branch() {
        assert!(SlsCanonical::new(1.0, 1.0, 1.0).is_err());
        assert!(SlsCanonical::new(2.0, 1.0, 1.0).is_err());
        let two = GmParams::from_slices(1.0, &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(gm_to_canonical_sls(&two), Err(Error::BranchCount(2)));
        let none = GkvParams::new(1.0, vec![]).unwrap();
        assert_eq!(gkv_to_canonical_sls(&none), Err(Error::BranchCount(0)));
    }

    #[test]
    fn elimination_oracle_matches_forward_maps() {
        // Drive each element with ż(t) = cos(t), integrate its branch ODE, and
        // check the canonical law f + γ₁ḟ = σ₀z + σ₁ż along the motion with
        // central differences for ḟ.
        let gm = GmParams::from_slices(3.0, &[5.0], &[0.4]).unwrap();
        let gkv = GkvParams::from_slices(3.0, &[5.0], &[0.4]).unwrap();
        let gm_c = gm_to_canonical_sls(&gm).unwrap();
        let gkv_c = gkv_to_canonical_sls(&gkv).unwrap();

        let h = 1e-4;
        let steps = 20_000;
        let z = |t: f64| t.sin();
        let zd = |t: f64| t.cos();
        // GM branch force f₁ and GKV branch deflection z₁ by RK4.
        let gm_rhs = |t: f64, f1: f64| -f1 / 0.4 + 5.0 * zd(t);
        let gkv_rhs = |t: f64, z1: f64| (-5.0 * z1 + 3.0 * (z(t) - z1)) / 0.4;
        let rk4 = |g: &dyn Fn(f64, f64) -> f64, t: f64, y: f64| {
            let k1 = g(t, y);
            let k2 = g(t + h / 2.0, y + h / 2.0 * k1);
            let k3 = g(t + h / 2.0, y + h / 2.0 * k2);
            let k4 = g(t + h, y + h * k3);
            y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        let (mut f1, mut z1) = (0.0, 0.0);
        let mut gm_f = Vec::with_capacity(steps + 1);
        let mut gkv_f = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = k as f64 * h;
            gm_f.push(3.0 * z(t) + f1);
            gkv_f.push(3.0 * (z(t) - z1));
            f1 = rk4(&gm_rhs, t, f1);
            z1 = rk4(&gkv_rhs, t, z1);
        }
        for k in (1..steps).step_by(997) {
            let t = k as f64 * h;
            for (f, c) in [(&gm_f, gm_c), (&gkv_f, gkv_c)] {
                let fd = (f[k + 1] - f[k - 1]) / (2.0 * h);
                let lhs = f[k] + c.gamma1() * fd;
                let rhs = c.sigma0() * z(t) + c.sigma1() * zd(t);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn mu_stays_above_minimum_on_dense_grid() {
        use rand::{Rng, SeedableRng};
        let law = reference_law();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1_000_000 {
            let v: f64 = rng.random_range(-10.0..10.0);
            assert!(law.eval(v) >= law.mu_min(), "{v}");
        }
    }

    proptest! {
        #[test]
        fn mu_bounded_below(mu_d in 1e-3..10.0f64, extra in 0.0..10.0f64, vs in 0.0..1.0f64,
                            delta in 0.0..4.0f64, v in -100.0..100.0f64) {
            let law = FrictionLaw::stribeck(mu_d, mu_d + extra, vs, delta).unwrap();
            let mu = law.eval(v);
            prop_assert!(mu >= law.mu_min() && mu <= law.mu_max());
        }

        #[test]
        fn mu_monotone_in_speed(delta in 1.0..4.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let law = FrictionLaw::stribeck(0.8, 1.3, 0.05, delta).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(law.eval(hi) <= law.eval(-lo));
        }

        #[test]
        fn reg_abs_dominates_and_is_even(eps in 0.0..1.0f64, y in -1e3..1e3f64) {
            let reg = Regularization::smooth(eps).unwrap();
            prop_assert!(reg.abs(y) >= y.abs());
            prop_assert_eq!(reg.abs(y), reg.abs(-y));
            let s = reg.sgn(y);
            prop_assert!(s.abs() <= 1.0 && s * y >= 0.0);
            prop_assert_eq!(reg.sgn(-y), -s);
        }

        #[test]
        fn gm_round_trip(k0 in 1e-2..1e5f64, k1 in 1e-2..1e5f64, tau in 1e-4..10.0f64) {
            let p = GmParams::from_slices(k0, &[k1], &[tau]).unwrap();
            let back = canonical_sls_to_gm(&gm_to_canonical_sls(&p).unwrap()).unwrap();
            prop_assert!((back.k0() - k0).abs() <= 1e-12 * k0);
            // k̄₁ = σ₁/γ₁ − σ₀ loses digits when k̄₁ ≪ k̄₀.
            let cancel = 1.0 + k0 / k1;
            prop_assert!((back.branches()[0].stiffness - k1).abs() <= 1e-14 * cancel * k1 + 1e-12 * k1);
            prop_assert!((back.branches()[0].relaxation_time - tau).abs() <= 1e-12 * tau);
        }

        #[test]
        fn gkv_round_trip(k0 in 1e-2..1e5f64, k1 in 1e-2..1e5f64, c1 in 1e-4..1e3f64) {
            let p = GkvParams::from_slices(k0, &[k1], &[c1]).unwrap();
            let back = canonical_sls_to_gkv(&gkv_to_canonical_sls(&p).unwrap()).unwrap();
            // k̄₀ − σ₀ = k̄₀²/(k̄₀ + k̄₁) cancels when k̄₁ ≫ k̄₀.
            let cancel = 1.0 + k1 / k0;
            prop_assert!((back.k0() - k0).abs() <= 1e-12 * k0);
            prop_assert!((back.branches()[0].stiffness - k1).abs() <= 1e-14 * cancel * k1 + 1e-12 * k1);
            prop_assert!((back.branches()[0].damping - c1).abs() <= 1e-14 * cancel * c1 + 1e-12 * c1);
        }

        #[test]
        fn canonical_round_trip(s0 in 1e-2..1e5f64, ratio in 1.01..1e3f64, g in 1e-4..10.0f64) {
            let c = SlsCanonical::new(s0, ratio * g * s0, g).unwrap();
            for back in [
                gm_to_canonical_sls(&canonical_sls_to_gm(&c).unwrap()).unwrap(),
                gkv_to_canonical_sls(&canonical_sls_to_gkv(&c).unwrap()).unwrap(),
            ] {
                prop_assert!((back.sigma0() - s0).abs() <= 1e-12 * s0);
                prop_assert!((back.sigma1() - c.sigma1()).abs() <= 1e-12 * c.sigma1());
                prop_assert!((back.gamma1() - g).abs() <= 1e-12 * g);
            }
        }
    }
}
