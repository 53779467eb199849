//! Fixtures shared by the benchmarks.

use frbd_core::{FrbdModel, FrictionLaw, GkvParams, GmParams, Regularization, Rheology};

fn stribeck() -> FrictionLaw {
    FrictionLaw::stribeck(1.0, 1.5, 0.01, 2.0).expect("valid law")
}

/// GM element with `n` branches, the first matching the reference set.
pub fn gm(n: usize) -> FrbdModel {
    let k: Vec<f64> = (0..n).map(|i| 54_500.0 / (i + 1) as f64).collect();
    let tau: Vec<f64> = (0..n).map(|i| 1e-3 * 10f64.powi(i as i32)).collect();
    let rheology = Rheology::Gm(GmParams::from_slices(1e4, &k, &tau).expect("valid GM"));
    FrbdModel::new(rheology, stribeck(), Regularization::exact(), 1.0).expect("valid model")
}

/// GKV element with `n` branches.
pub fn gkv(n: usize) -> FrbdModel {
    let k: Vec<f64> = (0..n).map(|i| 11_860.0 * (i + 1) as f64).collect();
    let c: Vec<f64> = k.iter().enumerate().map(|(i, k)| (64_500.0 + k) * 1e-3 * 10f64.powi(i as i32)).collect();
    let rheology = Rheology::Gkv(GkvParams::from_slices(64_500.0, &k, &c).expect("valid GKV"));
    FrbdModel::new(rheology, stribeck(), Regularization::exact(), 1.0).expect("valid model")
}

/// A state with every component nonzero.
pub fn busy_state(model: &FrbdModel) -> Vec<f64> {
    (0..model.dim()).map(|i| 1e-5 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}
