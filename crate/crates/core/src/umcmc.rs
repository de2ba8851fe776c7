//! Unbiased estimators of π(h) from lagged coupled chains: the time-averaged
//! estimator H_{k:ℓ}^(L), the signed measure it integrates against, the
//! subsampled estimator S_R and reservoir selection of atoms.

use crate::error::{Error, Result};
use crate::kernel::{CoupledKernel, InitialDistribution};
use crate::models::finite::inverse_cdf;
use crate::rng::RngStream;
use crate::sim::{run_cost, sample_meetings, simulate, CoupledRun, RunVisitor, SimOptions};
use crate::testfn::TestFunction;

/// Number of pairs (s, j) with k ≤ s ≤ ℓ, j ≥ 1 and s + jL = t: the
/// multiplicity of the bias-correction term at time t.
pub fn vt_weight(t: usize, k: usize, ell: usize, lag: usize) -> u64 {
    assert!(lag >= 1 && k <= ell, "vt_weight needs lag >= 1 and k <= ell");
    if t < k + lag {
        return 0;
    }
    let (t, k, ell, lag) = (t as i64, k as i64, ell as i64, lag as i64);
    let lo = lag.max(t - ell);
    let v = (t - k).div_euclid(lag) - (lo + lag - 1).div_euclid(lag) + 1;
    v.max(0) as u64
}

/// Parameters and cost of one signed measure or H estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasureMeta {
    pub k: usize,
    pub ell: usize,
    pub lag: usize,
    pub tau: usize,
    pub cost_units: u64,
    /// Atom count before zero weights are dropped:
    /// (ℓ - k + 1) + 2 max(0, τ - (k + L)).
    pub n_atoms_unpruned: usize,
}

impl MeasureMeta {
    pub fn new(k: usize, ell: usize, lag: usize, tau: usize) -> Self {
        MeasureMeta {
            k,
            ell,
            lag,
            tau,
            cost_units: run_cost(lag, tau, ell),
            n_atoms_unpruned: (ell - k + 1) + 2 * tau.saturating_sub(k + lag),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnbiasedEstimate {
    pub value: Vec<f64>,
    pub cost_units: u64,
    pub meta: MeasureMeta,
}

fn check_kl(k: usize, ell: usize, lag: usize) -> Result<()> {
    if lag == 0 {
        return Err(Error::param("lag", "must be at least 1"));
    }
    if k > ell {
        return Err(Error::param("k", format!("k = {k} exceeds ell = {ell}")));
    }
    Ok(())
}

fn check_coverage<S>(run: &CoupledRun<S>, ell: usize) -> Result<()> {
    if run.x_path.len() <= ell {
        return Err(Error::InsufficientData(format!(
            "run stores X up to index {} but ell = {ell}; extend it with CoupledRun::extend_to",
            run.x_path.len() - 1
        )));
    }
    Ok(())
}

/// H_{k:ℓ}^(L) evaluated directly from a retained run:
/// the ergodic average of h over X_k..X_ℓ plus the weighted bias correction
/// Σ_{t=k+L}^{τ-1} v_t/(ℓ-k+1) (h(X_t) - h(Y_{t-L})).
pub fn h_kl_estimator<S, H>(run: &CoupledRun<S>, h: &H, k: usize, ell: usize) -> Result<UnbiasedEstimate>
where
    S: Clone,
    H: TestFunction<S> + ?Sized,
{
    let lag = run.lag;
    check_kl(k, ell, lag)?;
    check_coverage(run, ell)?;
    let d = h.arity();
    let n = (ell - k + 1) as f64;
    let mut hx = vec![0.0; d];
    let mut hy = vec![0.0; d];
    let mut ergodic = vec![0.0; d];
    for x in &run.x_path[k..=ell] {
        h.eval_into(x, &mut hx);
        for i in 0..d {
            ergodic[i] += hx[i];
        }
    }
    let mut correction = vec![0.0; d];
    for t in (k + lag)..run.meeting_time {
        let v = vt_weight(t, k, ell, lag) as f64;
        if v == 0.0 {
            continue;
        }
        h.eval_into(&run.x_path[t], &mut hx);
        h.eval_into(&run.y_path[t - lag], &mut hy);
        for i in 0..d {
            correction[i] += v * (hx[i] - hy[i]);
        }
    }
    let value = (0..d).map(|i| ergodic[i] / n + correction[i] / n).collect();
    let meta = MeasureMeta::new(k, ell, lag, run.meeting_time);
    Ok(UnbiasedEstimate {
        value,
        cost_units: meta.cost_units,
        meta,
    })
}

/// Run fresh coupled chains from (x0, y0) to horizon ℓ and return H_{k:ℓ}^(L).
#[allow(clippy::too_many_arguments)]
pub fn unbiased_estimate<K, H>(
    kernel: &K,
    h: &H,
    x0: K::State,
    y0: K::State,
    k: usize,
    ell: usize,
    lag: usize,
    rng: &mut RngStream,
) -> Result<UnbiasedEstimate>
where
    K: CoupledKernel + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    check_kl(k, ell, lag)?;
    let run = crate::sim::run_coupled(kernel, x0, y0, SimOptions::new(lag, ell), rng)?;
    h_kl_estimator(&run, h, k, ell)
}

/// Receiver of the atoms of a signed measure as they are produced.
pub trait AtomSink<S> {
    fn push(&mut self, atom: &S, weight: f64);
}

/// Emits the atoms of π̂ while a run is simulated or replayed:
/// X_k..X_ℓ with weight 1/(ℓ-k+1), then for every t in [k+L, τ) with
/// v_t > 0 the pair X_t (+v_t/(ℓ-k+1)) and Y_{t-L} (-v_t/(ℓ-k+1)).
struct MeasureEmitter<'a, A: ?Sized> {
    k: usize,
    ell: usize,
    lag: usize,
    inv_n: f64,
    sink: &'a mut A,
}

impl<S, A: AtomSink<S> + ?Sized> RunVisitor<S> for MeasureEmitter<'_, A> {
    fn on_x(&mut self, t: usize, x: &S) {
        if t >= self.k && t <= self.ell {
            self.sink.push(x, self.inv_n);
        }
    }

    fn on_pair(&mut self, t: usize, x: &S, y: &S) {
        if t >= self.k + self.lag {
            let v = vt_weight(t, self.k, self.ell, self.lag);
            if v > 0 {
                let w = v as f64 * self.inv_n;
                self.sink.push(x, w);
                self.sink.push(y, -w);
            }
        }
    }
}

/// Simulate coupled chains and stream the atoms of π̂ into `sink`.
#[allow(clippy::too_many_arguments)]
pub fn stream_signed_measure<K, A>(
    kernel: &K,
    x0: K::State,
    y0: K::State,
    k: usize,
    ell: usize,
    lag: usize,
    rng: &mut RngStream,
    sink: &mut A,
) -> Result<MeasureMeta>
where
    K: CoupledKernel + ?Sized,
    A: AtomSink<K::State> + ?Sized,
{
    check_kl(k, ell, lag)?;
    let mut em = MeasureEmitter {
        k,
        ell,
        lag,
        inv_n: 1.0 / (ell - k + 1) as f64,
        sink,
    };
    let s = simulate(kernel, x0, y0, SimOptions::new(lag, ell), rng, &mut em)?;
    Ok(MeasureMeta::new(k, ell, lag, s.tau))
}

/// Weighted atoms Z_1..Z_N, ω_1..ω_N approximating π without bias.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedMeasure<S> {
    pub atoms: Vec<S>,
    pub weights: Vec<f64>,
    pub meta: MeasureMeta,
}

/// Sink that retains every atom.
#[derive(Clone, Debug, Default)]
pub struct VecSink<S> {
    pub atoms: Vec<S>,
    pub weights: Vec<f64>,
}

impl<S: Clone> AtomSink<S> for VecSink<S> {
    fn push(&mut self, atom: &S, weight: f64) {
        self.atoms.push(atom.clone());
        self.weights.push(weight);
    }
}

impl<S> SignedMeasure<S> {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// π̂(h) = Σ ω_n h(Z_n).
    pub fn apply<H: TestFunction<S> + ?Sized>(&self, h: &H) -> Vec<f64> {
        let d = h.arity();
        let mut out = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (z, w) in self.atoms.iter().zip(&self.weights) {
            h.eval_into(z, &mut buf);
            for i in 0..d {
                out[i] += w * buf[i];
            }
        }
        out
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Bounds that every nonzero |ω| satisfies:
    /// [1/(ℓ-k+1), (1 + (ℓ-k)/L)/(ℓ-k+1)].
    pub fn weight_bounds(&self) -> (f64, f64) {
        let n = (self.meta.ell - self.meta.k + 1) as f64;
        let span = (self.meta.ell - self.meta.k) as f64;
        (1.0 / n, (1.0 + span / self.meta.lag as f64) / n)
    }
}

/// π̂ from a retained run; atoms agree with what [`stream_signed_measure`]
/// emits for the same randomness.
pub fn signed_measure<S: Clone>(run: &CoupledRun<S>, k: usize, ell: usize) -> Result<SignedMeasure<S>> {
    let lag = run.lag;
    check_kl(k, ell, lag)?;
    check_coverage(run, ell)?;
    let mut sink = VecSink {
        atoms: Vec::new(),
        weights: Vec::new(),
    };
    let mut em = MeasureEmitter {
        k,
        ell,
        lag,
        inv_n: 1.0 / (ell - k + 1) as f64,
        sink: &mut sink,
    };
    for (t, x) in run.x_path.iter().enumerate() {
        em.on_x(t, x);
        if t >= lag && t < run.meeting_time {
            em.on_pair(t, x, &run.y_path[t - lag]);
        }
    }
    Ok(SignedMeasure {
        atoms: sink.atoms,
        weights: sink.weights,
        meta: MeasureMeta::new(k, ell, lag, run.meeting_time),
    })
}

/// Simulate fresh chains and return π̂ with all atoms retained.
#[allow(clippy::too_many_arguments)]
pub fn sample_signed_measure<K>(
    kernel: &K,
    x0: K::State,
    y0: K::State,
    k: usize,
    ell: usize,
    lag: usize,
    rng: &mut RngStream,
) -> Result<SignedMeasure<K::State>>
where
    K: CoupledKernel + ?Sized,
{
    let mut sink = VecSink {
        atoms: Vec::new(),
        weights: Vec::new(),
    };
    let meta = stream_signed_measure(kernel, x0, y0, k, ell, lag, rng, &mut sink)?;
    Ok(SignedMeasure {
        atoms: sink.atoms,
        weights: sink.weights,
        meta,
    })
}

/// Validate selection probabilities: strictly positive, summing to 1.
pub fn validate_selection(xi: &[f64], n: usize) -> Result<()> {
    if xi.len() != n {
        return Err(Error::InvalidSelection(format!(
            "{} probabilities for {n} atoms",
            xi.len()
        )));
    }
    if let Some(p) = xi.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidSelection(format!(
            "probability {p} is not strictly positive"
        )));
    }
    let s: f64 = xi.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSelection(format!("probabilities sum to {s}")));
    }
    Ok(())
}

/// Categorical sampler over atom indices.
#[derive(Clone, Debug)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        Categorical {
            cumulative: probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        inverse_cdf(&self.cumulative, rng.uniform() * total)
    }
}

/// S_R = R⁻¹ Σ_r (ω_I/ξ_I) h(Z_I) with I_r ~ Categorical(ξ) independently.
pub fn subsample_estimator<S, H>(
    pihat: &SignedMeasure<S>,
    h: &H,
    r: usize,
    xi: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>>
where
    H: TestFunction<S> + ?Sized,
{
    validate_selection(xi, pihat.len())?;
    if r == 0 {
        return Err(Error::param("R", "must be at least 1"));
    }
    let cat = Categorical::new(xi);
    let picks: Vec<usize> = (0..r).map(|_| cat.sample(rng)).collect();
    Ok(subsample_given(pihat, h, xi, &picks))
}

/// S_R for a fixed list of selected atom indices.
pub fn subsample_given<S, H>(pihat: &SignedMeasure<S>, h: &H, xi: &[f64], picks: &[usize]) -> Vec<f64>
where
    H: TestFunction<S> + ?Sized,
{
    let d = h.arity();
    let mut out = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for &i in picks {
        h.eval_into(&pihat.atoms[i], &mut buf);
        let w = pihat.weights[i] / xi[i];
        for j in 0..d {
            out[j] += w * buf[j];
        }
    }
    out.iter_mut().for_each(|v| *v /= picks.len() as f64);
    out
}

/// S_R with uniform selection: R⁻¹ Σ_r N ω_I h(Z_I).
pub fn subsample_uniform<S, H>(pihat: &SignedMeasure<S>, h: &H, r: usize, rng: &mut RngStream) -> Result<Vec<f64>>
where
    H: TestFunction<S> + ?Sized,
{
    let n = pihat.len();
    if n == 0 {
        return Err(Error::EmptyStream);
    }
    if r == 0 {
        return Err(Error::param("R", "must be at least 1"));
    }
    let d = h.arity();
    let mut out = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for _ in 0..r {
        let i = rng.index(n);
        h.eval_into(&pihat.atoms[i], &mut buf);
        let w = n as f64 * pihat.weights[i];
        for j in 0..d {
            out[j] += w * buf[j];
        }
    }
    out.iter_mut().for_each(|v| *v /= r as f64);
    Ok(out)
}

/// R independent single-item reservoirs. After item `i` is taken, the next
/// replacement index is ⌊(i+1)/U⌋ with U uniform on (0,1], so each
/// reservoir ends up holding a uniform draw from the whole stream.
#[derive(Clone, Debug)]
pub struct Reservoirs {
    next: Vec<u64>,
    chosen: Vec<usize>,
    seen: u64,
}

impl Reservoirs {
    pub fn new(r: usize) -> Self {
        Reservoirs {
            next: vec![0; r],
            chosen: vec![0; r],
            seen: 0,
        }
    }

    /// Offer the next stream item; calls `take(slot)` for every reservoir
    /// that now holds it.
    pub fn offer(&mut self, rng: &mut RngStream, mut take: impl FnMut(usize)) {
        let i = self.seen;
        for slot in 0..self.next.len() {
            if self.next[slot] == i {
                self.chosen[slot] = i as usize;
                take(slot);
                let u = rng.uniform_pos();
                let jump = ((i + 1) as f64 / u).floor();
                self.next[slot] = if jump >= u64::MAX as f64 { u64::MAX } else { jump as u64 };
            }
        }
        self.seen += 1;
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn indices(&self) -> Result<Vec<usize>> {
        if self.seen == 0 {
            return Err(Error::EmptyStream);
        }
        Ok(self.chosen.clone())
    }
}

/// R independent uniform indices over a stream of unknown length, keeping
/// only R positions in memory.
pub fn reservoir_select<I: IntoIterator>(stream: I, r: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if r == 0 {
        return Err(Error::param("R", "must be at least 1"));
    }
    let mut res = Reservoirs::new(r);
    for _ in stream {
        res.offer(rng, |_| {});
    }
    res.indices()
}

/// Tuning (k, L, ℓ) from a lag-one pilot: k = L = the `quantile` of τ, ℓ = 5k.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PilotChoice {
    pub k: usize,
    #[serde(rename = "L")]
    pub lag: usize,
    pub ell: usize,
    pub tau_quantile: f64,
}

pub fn pilot_tuning<K, I>(
    kernel: &K,
    init: &I,
    n_reps: usize,
    quantile: f64,
    root: &RngStream,
    workers: usize,
) -> Result<PilotChoice>
where
    K: CoupledKernel + ?Sized,
    I: InitialDistribution<K::State> + ?Sized,
{
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::param("quantile", "must lie in (0, 1]"));
    }
    let samples = sample_meetings(kernel, init, 1, n_reps, root, workers)?;
    let mut taus: Vec<usize> = samples.iter().map(|s| s.tau).collect();
    taus.sort_unstable();
    let idx = ((quantile * n_reps as f64).ceil() as usize).clamp(1, n_reps) - 1;
    let q = taus[idx].max(1);
    Ok(PilotChoice {
        k: q,
        lag: q,
        ell: 5 * q,
        tau_quantile: quantile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{Ar1Kernel, CouplingKind};
    use crate::models::Ar1Model;
    use crate::sim::run_coupled;
    use crate::testfn::{Identity, Powers};

    fn brute(t: usize, k: usize, ell: usize, lag: usize) -> u64 {
        (k..=ell)
            .map(|s| (1..=t).filter(|j| s + j * lag == t).count() as u64)
            .sum()
    }

    #[test]
    fn vt_examples() {
        assert_eq!(vt_weight(3, 0, 4, 1), 3);
        assert_eq!(vt_weight(250, 100, 500, 100), 1);
        assert_eq!(vt_weight(4, 5, 8, 2), 0);
    }

    #[test]
    fn vt_matches_brute_force_small() {
        for lag in 1..=4 {
            for k in 0..=8 {
                for ell in k..=12 {
                    for t in 0..=25 {
                        assert_eq!(
                            vt_weight(t, k, ell, lag),
                            brute(t, k, ell, lag),
                            "t={t} k={k} l={ell} L={lag}"
                        );
                    }
                }
            }
        }
    }

    fn kernel() -> Ar1Kernel {
        Ar1Kernel::new(Ar1Model::new(0.8, 1.0).unwrap(), CouplingKind::ReflectionMaximal).unwrap()
    }

    #[test]
    fn measure_reproduces_estimator() {
        let k = kernel();
        let h = Powers(vec![1, 2]);
        for rep in 0..100u64 {
            let mut rng = RngStream::new(11, rep);
            let run = run_coupled(&k, 8.0, -8.0, SimOptions::new(2, 12), &mut rng).unwrap();
            let est = h_kl_estimator(&run, &h, 3, 12).unwrap();
            let m = signed_measure(&run, 3, 12).unwrap();
            let v = m.apply(&h);
            for i in 0..2 {
                assert!((v[i] - est.value[i]).abs() < 1e-12);
            }
            assert!((m.weight_sum() - 1.0).abs() < 1e-12);
            let (lo, hi) = m.weight_bounds();
            for w in &m.weights {
                assert!(w.abs() >= lo - 1e-15 && w.abs() <= hi + 1e-15);
            }
            assert!(m.len() <= m.meta.n_atoms_unpruned);
        }
    }

    #[test]
    fn streamed_measure_matches_replayed() {
        let k = kernel();
        let mut a = RngStream::new(12, 0);
        let mut b = RngStream::new(12, 0);
        let streamed = sample_signed_measure(&k, 5.0, -5.0, 2, 10, 1, &mut a).unwrap();
        let run = run_coupled(&k, 5.0, -5.0, SimOptions::new(1, 10), &mut b).unwrap();
        assert_eq!(streamed, signed_measure(&run, 2, 10).unwrap());
    }

    #[test]
    fn short_run_is_reported() {
        let mut rng = RngStream::new(1, 0);
        let mut run = run_coupled(&kernel(), 0.0, 0.1, SimOptions::new(1, 0), &mut rng).unwrap();
        let ell = run.x_path.len() + 5;
        assert!(h_kl_estimator(&run, &Identity, 0, ell).is_err());
        run.extend_to(&kernel(), ell, &mut rng);
        assert!(h_kl_estimator(&run, &Identity, 0, ell).is_ok());
    }

    #[test]
    fn selection_validation() {
        assert!(validate_selection(&[0.5, 0.5], 2).is_ok());
        assert!(validate_selection(&[1.0, 0.0], 2).is_err());
        assert!(validate_selection(&[0.5, 0.4], 2).is_err());
        assert!(validate_selection(&[0.5], 2).is_err());
    }

    #[test]
    fn single_atom_subsample_is_exact() {
        let m = SignedMeasure {
            atoms: vec![3.0],
            weights: vec![1.0],
            meta: MeasureMeta::new(0, 0, 1, 0),
        };
        let mut rng = RngStream::new(0, 0);
        assert_eq!(
            subsample_estimator(&m, &Identity, 7, &[1.0], &mut rng).unwrap(),
            vec![3.0]
        );
    }

    #[test]
    fn reservoir_edge_cases() {
        let mut rng = RngStream::new(0, 0);
        assert_eq!(reservoir_select(0..1, 5, &mut rng).unwrap(), vec![0; 5]);
        assert!(matches!(reservoir_select(0..0, 5, &mut rng), Err(Error::EmptyStream)));
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| reservoir_select(0..2, 1, &mut rng).unwrap()[0] == 1)
            .count() as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * se);
    }
}
