//! Interactive curves for the browser page in `www/`. Each exported function
//! returns a flat `Float64Array`; the layout is given on the function.

use fishy_core::bundle::{build_bundle, BundleOp, CouplingSpec, ModelSpec, StateValue};
use fishy_core::diagnostics::tv_curve;
use fishy_core::fishy::fishy_profile;
use fishy_core::oracle::{ar1_fishy_exact, ar1_survival_bound, Ar1TheoryBound};
use fishy_core::sim::{sample_meetings, simulate, SimOptions};
use fishy_core::testfn::Identity;
use fishy_core::{CoupledKernel, InitialDistribution, RngStream, TestFunction};
use wasm_bindgen::prelude::*;

const MAX_REPS: usize = 100_000;

fn ar1_spec(phi: f64) -> ModelSpec {
    ModelSpec {
        name: "ar1".into(),
        phi: Some(phi),
        ..Default::default()
    }
}

fn check_reps(reps: usize) -> Result<(), String> {
    if reps == 0 || reps > MAX_REPS {
        return Err(format!("replicates must lie in 1..={MAX_REPS}"));
    }
    Ok(())
}

/// AR(1) fishy function with h(x) = x on `points` evenly spaced states.
/// Layout: `[x, mean, se, exact]` per point.
pub fn fishy_curve_rows(
    phi: f64,
    y: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    check_reps(reps)?;
    if points < 2 || !(x_min < x_max) {
        return Err("need at least two points and x_min < x_max".into());
    }
    let bundle = build_bundle(&ar1_spec(phi), &CouplingSpec::default(), None).map_err(|e| e.to_string())?;
    let kernel = bundle.ar1_kernel().ok_or("not an AR(1) model")?;
    let grid: Vec<f64> = (0..points)
        .map(|i| x_min + (x_max - x_min) * i as f64 / (points - 1) as f64)
        .collect();
    let rows = fishy_profile(kernel, &Identity, &grid, &y, reps.max(2), &RngStream::new(seed, 0), 1)
        .map_err(|e| e.to_string())?;
    Ok(rows
        .iter()
        .flat_map(|r| [r.x, r.mean, r.se, ar1_fishy_exact(phi, r.x, y)])
        .collect())
}

struct Taus {
    lag: usize,
    reps: usize,
    seed: u64,
}

impl BundleOp for Taus {
    type Output = fishy_core::Result<Vec<usize>>;

    fn run<K>(
        self,
        kernel: &K,
        init: &dyn InitialDistribution<K::State>,
        _h: &dyn TestFunction<K::State>,
    ) -> Self::Output
    where
        K: CoupledKernel,
        K::State: StateValue,
    {
        let samples = sample_meetings(kernel, init, self.lag, self.reps, &RngStream::new(self.seed, 0), 1)?;
        Ok(samples.iter().map(|s| s.tau).collect())
    }
}

/// Upper bound on the TV distance to stationarity at t = 0..=t_max for
/// `ar1` (with `phi`), `cauchy-gibbs` or `cauchy-mrth`. Layout: one bound
/// per t.
pub fn tv_bound_rows(
    model: &str,
    phi: f64,
    lag: usize,
    reps: usize,
    t_max: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    check_reps(reps)?;
    let spec = match model {
        "ar1" => ar1_spec(phi),
        "cauchy-gibbs" | "cauchy-mrth" => ModelSpec {
            name: model.into(),
            ..Default::default()
        },
        other => return Err(format!("unknown model `{other}`")),
    };
    let bundle = build_bundle(&spec, &CouplingSpec::default(), None).map_err(|e| e.to_string())?;
    let taus = bundle.apply(Taus { lag, reps, seed }).map_err(|e| e.to_string())?;
    let curve = tv_curve(&taus, lag, t_max).map_err(|e| e.to_string())?;
    Ok(curve.into_iter().map(|(_, b)| b).collect())
}

/// Empirical P(τ > n) for AR(1) chains started at (x0, y0) next to the
/// analytical bound, n = 0..=n_max. Layout: `[empirical, bound]` per n.
pub fn ar1_survival_rows(phi: f64, x0: f64, y0: f64, reps: usize, n_max: usize, seed: u64) -> Result<Vec<f64>, String> {
    check_reps(reps)?;
    let bound = Ar1TheoryBound::new(phi, 1.0).map_err(|e| e.to_string())?;
    let bundle = build_bundle(&ar1_spec(phi), &CouplingSpec::default(), None).map_err(|e| e.to_string())?;
    let kernel = bundle.ar1_kernel().ok_or("not an AR(1) model")?;
    let root = RngStream::new(seed, 0);
    let mut taus = (0..reps)
        .map(|i| {
            simulate(
                kernel,
                x0,
                y0,
                SimOptions::new(0, 0),
                &mut root.child(i as u64),
                &mut (),
            )
            .map(|s| s.tau)
        })
        .collect::<fishy_core::Result<Vec<usize>>>()
        .map_err(|e| e.to_string())?;
    taus.sort_unstable();
    Ok((0..=n_max)
        .flat_map(|n| {
            let above = taus.len() - taus.partition_point(|&t| t <= n);
            [above as f64 / reps as f64, ar1_survival_bound(&bound, x0, y0, n)]
        })
        .collect())
}

#[wasm_bindgen]
pub fn fishy_curve(
    phi: f64,
    y: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
    reps: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    fishy_curve_rows(phi, y, x_min, x_max, points, reps, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn tv_bound_curve(
    model: &str,
    phi: f64,
    lag: usize,
    reps: usize,
    t_max: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    tv_bound_rows(model, phi, lag, reps, t_max, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ar1_survival(phi: f64, x0: f64, y0: f64, reps: usize, n_max: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    ar1_survival_rows(phi, x0, y0, reps, n_max, seed.into()).map_err(|e| JsError::new(&e))
}
