//! Coupled lagged chains.
//!
//! X starts at `x0` and runs `lag` single steps ahead; then X and Y move
//! jointly through the coupled kernel until X_t = Y_{t-lag}. After the
//! meeting only X is advanced, up to the requested horizon, since Y would
//! repeat it.
//!
//! Cost is counted in single-kernel transitions: one per X-only step and two
//! per coupled step, so a run to horizon ℓ costs
//! `lag + 2 (τ - lag) + max(0, ℓ - τ)`.

use crate::error::{Error, Result};
use crate::kernel::{CoupledKernel, InitialDistribution};
use crate::parallel::replicate;
use crate::rng::RngStream;

/// Default cap on transitions spent in one run.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub lag: usize,
    /// X is extended with single steps until this index if the chains met earlier.
    pub horizon: usize,
    pub budget: u64,
}

impl SimOptions {
    pub fn new(lag: usize, horizon: usize) -> Self {
        SimOptions {
            lag,
            horizon,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

/// Observer of a simulation in progress.
///
/// `on_x(t, X_t)` fires for every generated X state, `t = 0, 1, ...`.
/// `on_pair(t, X_t, Y_{t-lag})` fires for every `lag <= t < τ`, i.e. for
/// every pair that has not met yet, before the coupled step that follows it.
pub trait RunVisitor<S> {
    fn on_x(&mut self, _t: usize, _x: &S) {}
    fn on_pair(&mut self, _t: usize, _x: &S, _y: &S) {}
}

impl<S> RunVisitor<S> for () {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeetingSummary {
    pub tau: usize,
    pub lag: usize,
    pub cost_units: u64,
}

/// Meeting time and cost of a run to `horizon`.
pub fn run_cost(lag: usize, tau: usize, horizon: usize) -> u64 {
    (lag + 2 * (tau - lag.min(tau)) + horizon.saturating_sub(tau)) as u64
}

/// Run the coupled lagged chains, streaming states to `visitor`.
pub fn simulate<K, V>(
    kernel: &K,
    x0: K::State,
    y0: K::State,
    opts: SimOptions,
    rng: &mut RngStream,
    visitor: &mut V,
) -> Result<MeetingSummary>
where
    K: CoupledKernel + ?Sized,
    V: RunVisitor<K::State> + ?Sized,
{
    let lag = opts.lag;
    let mut cost: u64 = 0;
    let mut x = x0;
    let mut y = y0;
    let mut t = 0usize;
    visitor.on_x(0, &x);

    let over_budget = |t: usize, cost: u64| Error::MeetingBudgetExceeded {
        budget: opts.budget,
        lag,
        t,
        cost_units: cost,
    };

    let tau = if lag == 0 && x == y {
        0
    } else {
        while t < lag {
            x = kernel.step(&x, rng);
            t += 1;
            cost += 1;
            visitor.on_x(t, &x);
        }
        loop {
            if cost + 2 > opts.budget {
                return Err(over_budget(t, cost));
            }
            visitor.on_pair(t, &x, &y);
            let (nx, ny) = kernel.coupled_step(&x, &y, rng)?;
            x = nx;
            y = ny;
            t += 1;
            cost += 2;
            visitor.on_x(t, &x);
            if x == y {
                break t;
            }
        }
    };
    while t < opts.horizon {
        if cost + 1 > opts.budget {
            return Err(over_budget(t, cost));
        }
        x = kernel.step(&x, rng);
        t += 1;
        cost += 1;
        visitor.on_x(t, &x);
    }
    Ok(MeetingSummary {
        tau,
        lag,
        cost_units: cost,
    })
}

/// A simulated pair of lagged trajectories kept in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledRun<S> {
    pub lag: usize,
    /// X_0, ..., X_T with T = max(τ, horizon).
    pub x_path: Vec<S>,
    /// Y_0, ..., Y_{τ-lag}; the last entry equals X_τ.
    pub y_path: Vec<S>,
    pub meeting_time: usize,
    pub cost_units: u64,
}

impl<S: Clone> CoupledRun<S> {
    /// Y_s for `s <= τ - lag`, or X_{s+lag} afterwards.
    pub fn y_at(&self, s: usize) -> &S {
        self.y_path.get(s).unwrap_or_else(|| &self.x_path[s + self.lag])
    }

    /// Extend X with single steps until index `horizon` is stored.
    pub fn extend_to<K>(&mut self, kernel: &K, horizon: usize, rng: &mut RngStream)
    where
        K: CoupledKernel<State = S> + ?Sized,
    {
        while self.x_path.len() <= horizon {
            let next = kernel.step(self.x_path.last().expect("path is never empty"), rng);
            self.x_path.push(next);
            self.cost_units += 1;
        }
    }
}

struct PathRecorder<S> {
    x: Vec<S>,
    y: Vec<S>,
}

impl<S: Clone> RunVisitor<S> for PathRecorder<S> {
    fn on_x(&mut self, _t: usize, x: &S) {
        self.x.push(x.clone());
    }
    fn on_pair(&mut self, _t: usize, _x: &S, y: &S) {
        self.y.push(y.clone());
    }
}

/// Run the coupled lagged chains and retain both trajectories.
pub fn run_coupled<K>(
    kernel: &K,
    x0: K::State,
    y0: K::State,
    opts: SimOptions,
    rng: &mut RngStream,
) -> Result<CoupledRun<K::State>>
where
    K: CoupledKernel + ?Sized,
{
    let y_first = y0.clone();
    let mut rec = PathRecorder {
        x: Vec::with_capacity(opts.horizon + 1),
        y: Vec::new(),
    };
    let summary = simulate(kernel, x0, y0, opts, rng, &mut rec)?;
    let mut y_path = rec.y;
    if summary.tau == 0 {
        y_path.push(y_first);
    } else {
        y_path.push(rec.x[summary.tau].clone());
    }
    Ok(CoupledRun {
        lag: opts.lag,
        x_path: rec.x,
        y_path,
        meeting_time: summary.tau,
        cost_units: summary.cost_units,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeetingSample<S> {
    pub rep: usize,
    pub tau: usize,
    pub lag: usize,
    pub cost_units: u64,
    pub x0: S,
    pub y0: S,
}

/// `n_reps` independent meeting runs from `init ⊗ init`; replicate `i`
/// draws everything from `root.child(i)`, so results do not depend on
/// `workers`.
pub fn sample_meetings<K, I>(
    kernel: &K,
    init: &I,
    lag: usize,
    n_reps: usize,
    root: &RngStream,
    workers: usize,
) -> Result<Vec<MeetingSample<K::State>>>
where
    K: CoupledKernel + ?Sized,
    I: InitialDistribution<K::State> + ?Sized,
{
    sample_meetings_each(kernel, init, lag, n_reps, DEFAULT_BUDGET, root, workers)?
        .into_iter()
        .collect()
}

/// Like [`sample_meetings`] with a per-run transition budget, keeping the
/// outcome of every replicate so completed runs survive aborted ones.
#[allow(clippy::too_many_arguments)]
pub fn sample_meetings_each<K, I>(
    kernel: &K,
    init: &I,
    lag: usize,
    n_reps: usize,
    budget: u64,
    root: &RngStream,
    workers: usize,
) -> Result<Vec<Result<MeetingSample<K::State>>>>
where
    K: CoupledKernel + ?Sized,
    I: InitialDistribution<K::State> + ?Sized,
{
    if n_reps == 0 {
        return Err(Error::param("n_reps", "must be at least 1"));
    }
    Ok(replicate(n_reps, workers, |i| {
        let mut rng = root.child(i as u64);
        let x0 = init.sample(&mut rng);
        let y0 = init.sample(&mut rng);
        let opts = SimOptions::new(lag, 0).with_budget(budget);
        let s = simulate(kernel, x0.clone(), y0.clone(), opts, &mut rng, &mut ())?;
        Ok(MeetingSample {
            rep: i,
            tau: s.tau,
            lag,
            cost_units: s.cost_units,
            x0,
            y0,
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{Ar1Kernel, CouplingKind, FiniteKernel};
    use crate::kernel::NormalInit;
    use crate::models::{Ar1Model, FiniteChainModel};
    use crate::testfn::StateTable;

    fn ar1() -> Ar1Kernel {
        Ar1Kernel::new(Ar1Model::new(0.9, 1.0).unwrap(), CouplingKind::ReflectionMaximal).unwrap()
    }

    #[test]
    fn equal_start_without_lag_meets_at_zero() {
        let mut rng = RngStream::new(1, 1);
        let run = run_coupled(&ar1(), 1.0, 1.0, SimOptions::new(0, 0), &mut rng).unwrap();
        assert_eq!(run.meeting_time, 0);
        assert_eq!(run.cost_units, 0);
        assert_eq!(run.x_path, vec![1.0]);
        assert_eq!(run.y_path, vec![1.0]);
    }

    #[test]
    fn cost_and_post_meeting_identity() {
        let k = ar1();
        for lag in [0usize, 1, 3, 10] {
            for rep in 0..200u64 {
                let mut rng = RngStream::new(7, rep);
                let horizon = 25;
                let run = run_coupled(&k, -4.0, 5.0, SimOptions::new(lag, horizon), &mut rng).unwrap();
                let tau = run.meeting_time;
                assert!(lag == 0 || tau > lag);
                assert_eq!(run.cost_units, run_cost(lag, tau, horizon));
                assert_eq!(run.x_path.len(), tau.max(horizon) + 1);
                assert_eq!(run.y_path.len(), tau - lag + 1);
                for t in tau..run.x_path.len() {
                    assert_eq!(&run.x_path[t], run.y_at(t - lag));
                }
                for t in lag..tau {
                    assert_ne!(run.x_path[t], run.y_path[t - lag]);
                }
            }
        }
    }

    #[test]
    fn warmup_consumes_lag_transitions() {
        struct Count(usize, usize);
        impl RunVisitor<f64> for Count {
            fn on_x(&mut self, _t: usize, _x: &f64) {
                self.0 += 1;
            }
            fn on_pair(&mut self, t: usize, _x: &f64, _y: &f64) {
                if self.1 == usize::MAX {
                    self.1 = t;
                }
            }
        }
        let mut c = Count(0, usize::MAX);
        let mut rng = RngStream::new(2, 2);
        let s = simulate(&ar1(), 0.0, 9.0, SimOptions::new(7, 0), &mut rng, &mut c).unwrap();
        assert_eq!(c.1, 7);
        assert_eq!(c.0, s.tau + 1);
        assert_eq!(s.cost_units, 7 + 2 * (s.tau as u64 - 7));
    }

    #[test]
    fn budget_abort() {
        let m =
            FiniteChainModel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], StateTable::scalar(vec![0.0, 1.0])).unwrap();
        // a crude kernel that never lets the pair meet
        struct Never(FiniteKernel);
        impl crate::kernel::MarkovKernel for Never {
            type State = usize;
            fn step(&self, s: &usize, rng: &mut RngStream) -> usize {
                self.0.step(s, rng)
            }
            fn label(&self) -> String {
                "never".into()
            }
        }
        impl CoupledKernel for Never {
            fn coupled_step(&self, _x: &usize, _y: &usize, _rng: &mut RngStream) -> Result<(usize, usize)> {
                Ok((0, 1))
            }
        }
        let k = Never(FiniteKernel::new(m, CouplingKind::MaximalRejection).unwrap());
        let mut rng = RngStream::new(0, 0);
        let err = simulate(&k, 0, 1, SimOptions::new(0, 0).with_budget(100), &mut rng, &mut ()).unwrap_err();
        match err {
            Error::MeetingBudgetExceeded { budget, cost_units, .. } => {
                assert_eq!(budget, 100);
                assert_eq!(cost_units, 100);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn single_rep_matches_direct_run() {
        let k = ar1();
        let init = NormalInit { mean: 0.0, sd: 4.0 };
        let root = RngStream::new(3, 0);
        let samples = sample_meetings(&k, &init, 2, 1, &root, 1).unwrap();
        let mut rng = root.child(0);
        let x0 = init.sample(&mut rng);
        let y0 = init.sample(&mut rng);
        let run = run_coupled(&k, x0, y0, SimOptions::new(2, 0), &mut rng).unwrap();
        assert_eq!(samples[0].tau, run.meeting_time);
        assert_eq!(samples[0].cost_units, run.cost_units);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let k = ar1();
        let init = NormalInit { mean: 0.0, sd: 4.0 };
        let root = RngStream::new(5, 0);
        let a = sample_meetings(&k, &init, 1, 500, &root, 1).unwrap();
        let b = sample_meetings(&k, &init, 1, 500, &root, 8).unwrap();
        assert_eq!(a, b);
    }
}
