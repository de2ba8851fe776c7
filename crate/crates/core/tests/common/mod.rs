#![allow(dead_code)]

use fishy_core::couplings::{Ar1Kernel, CouplingKind, Normal};
use fishy_core::models::Ar1Model;

pub fn ar1(phi: f64) -> Ar1Kernel {
    Ar1Kernel::new(Ar1Model::new(phi, 1.0).unwrap(), CouplingKind::ReflectionMaximal).unwrap()
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn assert_within_se(values: &[f64], target: f64, k: f64, what: &str) {
    let (m, se) = mean_se(values);
    assert!(
        (m - target).abs() <= k * se + 1e-12,
        "{what}: mean {m} target {target} se {se}"
    );
}

/// Composite Simpson rule on [lo, hi] with n (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

pub fn overlap(p: Normal, q: Normal) -> f64 {
    let lo = (p.mean - 12.0 * p.sd).min(q.mean - 12.0 * q.sd);
    let hi = (p.mean + 12.0 * p.sd).max(q.mean + 12.0 * q.sd);
    simpson(|x| p.ln_pdf(x).min(q.ln_pdf(x)).exp(), lo, hi, 100_000)
}

pub fn two_state() -> fishy_core::models::FiniteChainModel {
    fishy_core::models::FiniteChainModel::new(
        vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        fishy_core::testfn::StateTable::scalar(vec![1.0, 0.0]),
    )
    .unwrap()
}
