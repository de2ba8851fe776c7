//! Unbiased estimates of differences of the Poisson-equation solution
//! ("fishy function"): G_y(x) = Σ_{t<τ} h(X_t) - h(Y_t) for lag-0 coupled
//! chains started at (x, y).

use crate::error::{Error, Result};
use crate::kernel::{CoupledKernel, InitialDistribution};
use crate::parallel::replicate;
use crate::rng::RngStream;
use crate::sim::{simulate, RunVisitor, SimOptions, DEFAULT_BUDGET};
use crate::testfn::TestFunction;

#[derive(Clone, Debug, PartialEq)]
pub struct FishyEstimate<S> {
    pub value: Vec<f64>,
    /// The anchor y, or the drawn Y_0 for the randomized variant.
    pub anchor: S,
    pub eval_point: S,
    pub tau: usize,
    /// Two units per coupled transition.
    pub cost_units: u64,
}

struct DifferenceSum<'a, H: ?Sized> {
    h: &'a H,
    acc: Vec<f64>,
    hx: Vec<f64>,
    hy: Vec<f64>,
}

impl<S, H: TestFunction<S> + ?Sized> RunVisitor<S> for DifferenceSum<'_, H> {
    fn on_pair(&mut self, _t: usize, x: &S, y: &S) {
        self.h.eval_into(x, &mut self.hx);
        self.h.eval_into(y, &mut self.hy);
        for i in 0..self.acc.len() {
            self.acc[i] += self.hx[i] - self.hy[i];
        }
    }
}

/// One realization of G_y(x), with a transition budget.
pub fn estimate_fishy_with_budget<K, H>(
    kernel: &K,
    h: &H,
    x: &K::State,
    y: &K::State,
    budget: u64,
    rng: &mut RngStream,
) -> Result<FishyEstimate<K::State>>
where
    K: CoupledKernel + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    let d = h.arity();
    let mut sum = DifferenceSum {
        h,
        acc: vec![0.0; d],
        hx: vec![0.0; d],
        hy: vec![0.0; d],
    };
    let opts = SimOptions::new(0, 0).with_budget(budget);
    let s = simulate(kernel, x.clone(), y.clone(), opts, rng, &mut sum)?;
    Ok(FishyEstimate {
        value: sum.acc,
        anchor: y.clone(),
        eval_point: x.clone(),
        tau: s.tau,
        cost_units: s.cost_units,
    })
}

/// One realization of G_y(x); its expectation is g(x) - g(y) for any
/// solution g of the Poisson equation.
pub fn estimate_fishy<K, H>(
    kernel: &K,
    h: &H,
    x: &K::State,
    y: &K::State,
    rng: &mut RngStream,
) -> Result<FishyEstimate<K::State>>
where
    K: CoupledKernel + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    estimate_fishy_with_budget(kernel, h, x, y, DEFAULT_BUDGET, rng)
}

/// G with a random anchor Y_0 ~ ν; expectation g(x) - ν(g).
pub fn estimate_fishy_randomized<K, H, N>(
    kernel: &K,
    h: &H,
    x: &K::State,
    nu: &N,
    rng: &mut RngStream,
) -> Result<FishyEstimate<K::State>>
where
    K: CoupledKernel + ?Sized,
    H: TestFunction<K::State> + ?Sized,
    N: InitialDistribution<K::State> + ?Sized,
{
    let y = nu.sample(rng);
    estimate_fishy(kernel, h, x, &y, rng)
}

/// Monte Carlo summary of G_y at one evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow<S> {
    pub x: S,
    pub mean: f64,
    pub se: f64,
    /// Raw second moment E[G_y(x)²].
    pub second_moment: f64,
    pub mean_cost: f64,
}

/// Replicate G_y(x) `n_reps` times at each grid point of a scalar test
/// function. Replicate `r` at grid point `i` uses `root.child(i).child(r)`.
pub fn fishy_profile<K, H>(
    kernel: &K,
    h: &H,
    grid: &[K::State],
    y: &K::State,
    n_reps: usize,
    root: &RngStream,
    workers: usize,
) -> Result<Vec<ProfileRow<K::State>>>
where
    K: CoupledKernel + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    if n_reps < 2 {
        return Err(Error::param("n_reps", "fishy_profile needs at least 2 replicates"));
    }
    if h.arity() != 1 {
        return Err(Error::param("h", "fishy_profile expects a scalar test function"));
    }
    grid.iter()
        .enumerate()
        .map(|(i, x)| {
            let stream = root.child(i as u64);
            let draws = replicate(n_reps, workers, |r| {
                let mut rng = stream.child(r as u64);
                estimate_fishy(kernel, h, x, y, &mut rng).map(|e| (e.value[0], e.cost_units))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let n = n_reps as f64;
            let mean = draws.iter().map(|d| d.0).sum::<f64>() / n;
            let second_moment = draws.iter().map(|d| d.0 * d.0).sum::<f64>() / n;
            let var = draws.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let mean_cost = draws.iter().map(|d| d.1 as f64).sum::<f64>() / n;
            Ok(ProfileRow {
                x: x.clone(),
                mean,
                se: (var / n).sqrt(),
                second_moment,
                mean_cost,
            })
        })
        .collect()
}

/// Per-state estimate of E[G_y(z)²], used to tune selection probabilities.
pub trait SecondMomentLookup<S>: Send + Sync {
    fn second_moment(&self, z: &S) -> f64;
}

/// Second moments on a real grid, looked up at the nearest grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl GridTable {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::param(
                "second_moment_table",
                "grid and values must be non-empty and equal length",
            ));
        }
        let mut pairs: Vec<(f64, f64)> = grid.into_iter().zip(values).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (grid, values) = pairs.into_iter().unzip();
        Ok(GridTable { grid, values })
    }

    pub fn from_profile(rows: &[ProfileRow<f64>]) -> Result<Self> {
        GridTable::new(
            rows.iter().map(|r| r.x).collect(),
            rows.iter().map(|r| r.second_moment).collect(),
        )
    }
}

impl SecondMomentLookup<f64> for GridTable {
    fn second_moment(&self, z: &f64) -> f64 {
        let i = self.grid.partition_point(|g| g < z);
        let j = if i == 0 {
            0
        } else if i == self.grid.len() || (z - self.grid[i - 1]) <= (self.grid[i] - z) {
            i - 1
        } else {
            i
        };
        self.values[j]
    }
}

/// Second moments indexed by finite state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMoments(pub Vec<f64>);

impl StateMoments {
    pub fn from_profile(rows: &[ProfileRow<usize>], n_states: usize) -> Result<Self> {
        let mut v = vec![f64::NAN; n_states];
        for r in rows {
            v[r.x] = r.second_moment;
        }
        if v.iter().any(|x| x.is_nan()) {
            return Err(Error::param(
                "second_moment_table",
                "profile does not cover every state",
            ));
        }
        Ok(StateMoments(v))
    }
}

impl SecondMomentLookup<usize> for StateMoments {
    fn second_moment(&self, z: &usize) -> f64 {
        self.0[*z]
    }
}

impl<S, F: Fn(&S) -> f64 + Send + Sync> SecondMomentLookup<S> for F {
    fn second_moment(&self, z: &S) -> f64 {
        self(z)
    }
}
