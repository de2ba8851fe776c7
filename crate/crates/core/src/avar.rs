//! Asymptotic-variance estimation: the unbiased SUAVE estimator built from
//! two signed measures and subsampled fishy estimates, the long-run EPAVE
//! estimator, selection probabilities, and inefficiency summaries.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::diagnostics::{bootstrap_statistics, percentile_interval};
use crate::error::{Error, Result};
use crate::fishy::{estimate_fishy, SecondMomentLookup};
use crate::kernel::{CoupledKernel, InitialDistribution};
use crate::parallel::replicate;
use crate::rng::RngStream;
use crate::testfn::TestFunction;
use crate::umcmc::{sample_signed_measure, stream_signed_measure, AtomSink, Categorical, Reservoirs, SignedMeasure};

/// Floor applied to optimal selection probabilities, relative to 1/N.
pub const XI_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiKind {
    Uniform,
    ProportionalToAbsOmega,
    Optimal,
}

impl FromStr for XiKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(XiKind::Uniform),
            "proportional" | "proportional-to-abs-omega" => Ok(XiKind::ProportionalToAbsOmega),
            "optimal" => Ok(XiKind::Optimal),
            other => Err(Error::param(
                "xi",
                format!("unknown selection `{other}`; expected uniform, proportional or optimal"),
            )),
        }
    }
}

impl fmt::Display for XiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            XiKind::Uniform => "uniform",
            XiKind::ProportionalToAbsOmega => "proportional",
            XiKind::Optimal => "optimal",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionProbs {
    pub xi: Vec<f64>,
    pub kind: XiKind,
}

/// Weighted first and second moments of h - c under a signed measure.
#[derive(Clone, Debug, PartialEq)]
struct Moments {
    /// Σ ω (h - c)
    m1: Vec<f64>,
    /// Σ ω (h - c)(h - c)ᵀ, row-major
    m2: Vec<f64>,
}

impl Moments {
    fn zero(d: usize) -> Self {
        Moments {
            m1: vec![0.0; d],
            m2: vec![0.0; d * d],
        }
    }

    fn add(&mut self, w: f64, hv: &[f64], shift: &[f64]) {
        let d = hv.len();
        for a in 0..d {
            let da = hv[a] - shift[a];
            self.m1[a] += w * da;
            for b in 0..d {
                self.m2[a * d + b] += w * da * (hv[b] - shift[b]);
            }
        }
    }

    fn of_measure<S, H: TestFunction<S> + ?Sized>(p: &SignedMeasure<S>, h: &H, shift: &[f64]) -> Self {
        let d = h.arity();
        let mut m = Moments::zero(d);
        let mut buf = vec![0.0; d];
        for (z, w) in p.atoms.iter().zip(&p.weights) {
            h.eval_into(z, &mut buf);
            m.add(*w, &buf, shift);
        }
        m
    }

    /// π̂(h) = Σ ω (h - c) + c.
    fn mean(&self, shift: &[f64]) -> Vec<f64> {
        self.m1.iter().zip(shift).map(|(a, c)| a + c).collect()
    }
}

/// ½{π̂¹(hhᵀ) + π̂²(hhᵀ)} - ½{π̂¹(h)π̂²(h)ᵀ + π̂²(h)π̂¹(h)ᵀ}, computed on h
/// shifted by a common constant (the result does not depend on it because
/// both weight vectors sum to one).
fn target_variance_from_moments(a: &Moments, b: &Moments, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = 0.5 * (a.m2[i * d + j] + b.m2[i * d + j]) - 0.5 * (a.m1[i] * b.m1[j] + b.m1[i] * a.m1[j]);
        }
    }
    v
}

/// Unbiased estimate of var_π(h) (a d×d row-major matrix) from two
/// independent signed measures; for scalar h this is
/// ½{π̂¹(h²)+π̂²(h²)} - π̂¹(h)π̂²(h).
pub fn unbiased_target_variance<S, H>(p1: &SignedMeasure<S>, p2: &SignedMeasure<S>, h: &H) -> Vec<f64>
where
    H: TestFunction<S> + ?Sized,
{
    let d = h.arity();
    let shift = p1.atoms.first().map(|z| h.eval(z)).unwrap_or_else(|| vec![0.0; d]);
    let a = Moments::of_measure(p1, h, &shift);
    let b = Moments::of_measure(p2, h, &shift);
    target_variance_from_moments(&a, &b, d)
}

/// ξ ∝ √α, floored at ε/N and renormalized; all-zero α gives uniform.
pub fn optimal_xi(alpha: &[f64]) -> Vec<f64> {
    let n = alpha.len();
    let roots: Vec<f64> = alpha.iter().map(|a| a.max(0.0).sqrt()).collect();
    let total: f64 = roots.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        log::warn!("all selection scores are zero; falling back to uniform selection");
        return vec![1.0 / n as f64; n];
    }
    let floor = XI_FLOOR / n as f64;
    let floored: Vec<f64> = roots.iter().map(|r| (r / total).max(floor)).collect();
    let s: f64 = floored.iter().sum();
    floored.into_iter().map(|x| x / s).collect()
}

/// Selection probabilities over the atoms of `pihat` for a scalar h.
///
/// `optimal` uses α_n = {ω_n (h(Z_n) - π̂_other(h))}² E[G(Z_n)²] with the
/// second moments looked up in `table`.
pub fn selection_probs<S, H>(
    pihat: &SignedMeasure<S>,
    h: &H,
    pihat_other_mean: f64,
    table: Option<&dyn SecondMomentLookup<S>>,
    kind: XiKind,
) -> Result<SelectionProbs>
where
    H: TestFunction<S> + ?Sized,
{
    let n = pihat.len();
    if n == 0 {
        return Err(Error::EmptyStream);
    }
    let xi = match kind {
        XiKind::Uniform => vec![1.0 / n as f64; n],
        XiKind::ProportionalToAbsOmega => {
            let s: f64 = pihat.weights.iter().map(|w| w.abs()).sum();
            pihat.weights.iter().map(|w| w.abs() / s).collect()
        }
        XiKind::Optimal => {
            let table = table
                .ok_or_else(|| Error::param("second_moment_table", "optimal selection needs a second-moment table"))?;
            let alpha: Vec<f64> = pihat
                .atoms
                .iter()
                .zip(&pihat.weights)
                .map(|(z, w)| {
                    let c = w * (h.eval_scalar(z) - pihat_other_mean);
                    c * c * table.second_moment(z)
                })
                .collect();
            optimal_xi(&alpha)
        }
    };
    Ok(SelectionProbs { xi, kind })
}

/// Settings shared by every SUAVE replicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuaveConfig {
    pub k: usize,
    pub ell: usize,
    pub lag: usize,
    pub r: usize,
    pub xi: XiKind,
}

impl SuaveConfig {
    fn validate(&self) -> Result<()> {
        if self.lag == 0 {
            return Err(Error::param("L", "must be at least 1"));
        }
        if self.k > self.ell {
            return Err(Error::param("k", "must not exceed ell"));
        }
        if self.r == 0 {
            return Err(Error::param("R", "must be at least 1"));
        }
        Ok(())
    }
}

/// One asymptotic-variance estimate with its cost breakdown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AvarEstimate {
    /// d×d row-major; a single entry for scalar h.
    pub value: Vec<f64>,
    pub d: usize,
    pub cost_total: u64,
    pub cost_fishy: u64,
    pub cost_signed_measures: u64,
    #[serde(rename = "R")]
    pub r: usize,
}

impl AvarEstimate {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.value[i * self.d + j]
    }
}

/// An atom picked for fishy estimation, with its importance weight ω/ξ.
struct Selected<S> {
    atom: S,
    weight: f64,
    hval: Vec<f64>,
}

/// Streams atoms into R single-item reservoirs while accumulating moments.
struct ReservoirSink<'a, S, H: ?Sized> {
    h: &'a H,
    shift: &'a [f64],
    res: Reservoirs,
    rng: RngStream,
    held: Vec<Option<(S, f64)>>,
    moments: Moments,
    buf: Vec<f64>,
}

impl<S: Clone, H: TestFunction<S> + ?Sized> AtomSink<S> for ReservoirSink<'_, S, H> {
    fn push(&mut self, atom: &S, weight: f64) {
        self.h.eval_into(atom, &mut self.buf);
        self.moments.add(weight, &self.buf, self.shift);
        let held = &mut self.held;
        self.res
            .offer(&mut self.rng, |slot| held[slot] = Some((atom.clone(), weight)));
    }
}

struct MeasureSummary<S> {
    moments: Moments,
    selected: Vec<Selected<S>>,
    cost: u64,
}

/// SUAVE, for test functions of any arity: returns the d×d estimate of the
/// asymptotic covariance
/// -(π(h hᵀ) - π(h)π(h)ᵀ) + E_π[(h - π(h)) gᵀ + g (h - π(h))ᵀ].
///
/// Streams: runs use `root.child(0|1)`, atom selection `root.child(2|3)`,
/// the fishy estimate for draw `r` of measure `m` uses
/// `root.child(10 + m).child(r)`. Every fishy run is shared by all d
/// coordinates.
pub fn suave_multivariate<K, I, H>(
    kernel: &K,
    init: &I,
    h: &H,
    anchor: &K::State,
    cfg: &SuaveConfig,
    table: Option<&dyn SecondMomentLookup<K::State>>,
    root: &RngStream,
) -> Result<AvarEstimate>
where
    K: CoupledKernel + ?Sized,
    I: InitialDistribution<K::State> + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    cfg.validate()?;
    let d = h.arity();
    if cfg.xi == XiKind::Optimal && d != 1 {
        return Err(Error::param(
            "xi",
            "optimal selection is defined for scalar test functions only",
        ));
    }
    let shift = h.eval(anchor);

    let summaries: [MeasureSummary<K::State>; 2] = if cfg.xi == XiKind::Uniform {
        let mut out = Vec::with_capacity(2);
        for m in 0..2u64 {
            let mut rng = root.child(m);
            let x0 = init.sample(&mut rng);
            let y0 = init.sample(&mut rng);
            let mut sink = ReservoirSink {
                h,
                shift: &shift,
                res: Reservoirs::new(cfg.r),
                rng: root.child(2 + m),
                held: vec![None; cfg.r],
                moments: Moments::zero(d),
                buf: vec![0.0; d],
            };
            let meta = stream_signed_measure(kernel, x0, y0, cfg.k, cfg.ell, cfg.lag, &mut rng, &mut sink)?;
            let n = sink.res.seen() as f64;
            let selected = sink
                .held
                .into_iter()
                .map(|slot| {
                    let (atom, w) = slot.expect("every reservoir holds an atom");
                    let hval = h.eval(&atom);
                    Selected {
                        atom,
                        weight: n * w,
                        hval,
                    }
                })
                .collect();
            out.push(MeasureSummary {
                moments: sink.moments,
                selected,
                cost: meta.cost_units,
            });
        }
        out.try_into().ok().expect("two measures")
    } else {
        let mut measures = Vec::with_capacity(2);
        for m in 0..2u64 {
            let mut rng = root.child(m);
            let x0 = init.sample(&mut rng);
            let y0 = init.sample(&mut rng);
            measures.push(sample_signed_measure(
                kernel, x0, y0, cfg.k, cfg.ell, cfg.lag, &mut rng,
            )?);
        }
        let moments: Vec<Moments> = measures.iter().map(|p| Moments::of_measure(p, h, &shift)).collect();
        let mut out = Vec::with_capacity(2);
        for m in 0..2 {
            let p = &measures[m];
            let other_mean = moments[1 - m].mean(&shift)[0];
            let probs = selection_probs(p, h, other_mean, table, cfg.xi)?;
            let cat = Categorical::new(&probs.xi);
            let mut sel_rng = root.child(2 + m as u64);
            let selected = (0..cfg.r)
                .map(|_| {
                    let i = cat.sample(&mut sel_rng);
                    Selected {
                        atom: p.atoms[i].clone(),
                        weight: p.weights[i] / probs.xi[i],
                        hval: h.eval(&p.atoms[i]),
                    }
                })
                .collect();
            out.push(MeasureSummary {
                moments: moments[m].clone(),
                selected,
                cost: p.meta.cost_units,
            });
        }
        out.try_into().ok().expect("two measures")
    };

    let means = [summaries[0].moments.mean(&shift), summaries[1].moments.mean(&shift)];
    let mut value = target_variance_from_moments(&summaries[0].moments, &summaries[1].moments, d);
    value.iter_mut().for_each(|v| *v = -*v);

    let mut cost_fishy = 0u64;
    let scale = 1.0 / (2.0 * cfg.r as f64);
    for (m, summary) in summaries.iter().enumerate() {
        let other = &means[1 - m];
        let fishy_root = root.child(10 + m as u64);
        for (r, sel) in summary.selected.iter().enumerate() {
            let mut rng = fishy_root.child(r as u64);
            let g = estimate_fishy(kernel, h, &sel.atom, anchor, &mut rng)?;
            cost_fishy += g.cost_units;
            for a in 0..d {
                let ca = sel.hval[a] - other[a];
                for b in 0..d {
                    let cb = sel.hval[b] - other[b];
                    value[a * d + b] += scale * sel.weight * (ca * g.value[b] + g.value[a] * cb);
                }
            }
        }
    }
    for a in 0..d {
        for b in (a + 1)..d {
            let s = 0.5 * (value[a * d + b] + value[b * d + a]);
            value[a * d + b] = s;
            value[b * d + a] = s;
        }
    }
    let cost_signed_measures = summaries[0].cost + summaries[1].cost;
    Ok(AvarEstimate {
        value,
        d,
        cost_total: cost_signed_measures + cost_fishy,
        cost_fishy,
        cost_signed_measures,
        r: cfg.r,
    })
}

/// SUAVE for a scalar test function:
/// -v̂(π,h) + R⁻¹ Σ_{i≠j} Σ_r (ω/ξ)(h(Z) - π̂^(i)(h)) G_y(Z),
/// with the atoms Z drawn from measure j.
pub fn suave<K, I, H>(
    kernel: &K,
    init: &I,
    h: &H,
    anchor: &K::State,
    cfg: &SuaveConfig,
    table: Option<&dyn SecondMomentLookup<K::State>>,
    root: &RngStream,
) -> Result<AvarEstimate>
where
    K: CoupledKernel + ?Sized,
    I: InitialDistribution<K::State> + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    if h.arity() != 1 {
        return Err(Error::param(
            "h",
            "suave expects a scalar test function; use suave_multivariate",
        ));
    }
    suave_multivariate(kernel, init, h, anchor, cfg, table, root)
}

/// `reps` SUAVE replicates; replicate `i` uses `root.child(i)`.
#[allow(clippy::too_many_arguments)]
pub fn suave_replicates<K, I, H>(
    kernel: &K,
    init: &I,
    h: &H,
    anchor: &K::State,
    cfg: &SuaveConfig,
    table: Option<&dyn SecondMomentLookup<K::State>>,
    reps: usize,
    root: &RngStream,
    workers: usize,
) -> Result<Vec<AvarEstimate>>
where
    K: CoupledKernel + ?Sized,
    I: InitialDistribution<K::State> + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    replicate(reps, workers, |i| {
        suave_multivariate(kernel, init, h, anchor, cfg, table, &root.child(i as u64))
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpaveConfig {
    /// Steps used after burn-in, t ≥ 2.
    pub t_steps: usize,
    pub burn_in: usize,
    /// A fishy estimate is drawn at every `thin`-th retained step.
    pub thin: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpaveEstimate {
    pub value: f64,
    pub n_fishy: usize,
    pub cost_chain: u64,
    pub cost_fishy: u64,
}

/// Long-run estimator -v^MC(h) + (2/t') Σ_s (h(X_s) - π^MC(h)) G_y(X_s)
/// over the thinned steps s, keeping four running sums.
///
/// The chain uses `root.child(0)`; the fishy estimate at step s uses
/// `root.child(1).child(s)`.
pub fn epave<K, H>(
    kernel: &K,
    h: &H,
    x0: K::State,
    anchor: &K::State,
    cfg: &EpaveConfig,
    root: &RngStream,
) -> Result<EpaveEstimate>
where
    K: CoupledKernel + ?Sized,
    H: TestFunction<K::State> + ?Sized,
{
    if cfg.t_steps < 2 {
        return Err(Error::param("t_steps", "must be at least 2"));
    }
    if cfg.thin == 0 {
        return Err(Error::param("thin", "must be at least 1"));
    }
    if h.arity() != 1 {
        return Err(Error::param("h", "epave expects a scalar test function"));
    }
    let mut rng = root.child(0);
    let fishy_root = root.child(1);
    let mut x = x0;
    for _ in 0..cfg.burn_in {
        x = kernel.step(&x, &mut rng);
    }
    let (mut sum_h, mut sum_h2, mut sum_hg, mut sum_g) = (0.0, 0.0, 0.0, 0.0);
    let mut shift = None;
    let mut n_fishy = 0usize;
    let mut cost_fishy = 0u64;
    for s in 1..=cfg.t_steps {
        x = kernel.step(&x, &mut rng);
        let hv = h.eval_scalar(&x);
        let c = *shift.get_or_insert(hv);
        let hc = hv - c;
        sum_h += hc;
        sum_h2 += hc * hc;
        if s % cfg.thin == 0 {
            let mut frng = fishy_root.child(s as u64);
            let g = estimate_fishy(kernel, h, &x, anchor, &mut frng)?;
            sum_hg += hc * g.value[0];
            sum_g += g.value[0];
            cost_fishy += g.cost_units;
            n_fishy += 1;
        }
    }
    let t = cfg.t_steps as f64;
    let mean = sum_h / t;
    let v_mc = sum_h2 / t - mean * mean;
    let correction = if n_fishy > 0 {
        2.0 / n_fishy as f64 * (sum_hg - mean * sum_g)
    } else {
        0.0
    };
    Ok(EpaveEstimate {
        value: -v_mc + correction,
        n_fishy,
        cost_chain: (cfg.burn_in + cfg.t_steps) as u64,
        cost_fishy,
    })
}

/// Variance, mean cost and their product (the inefficiency) across
/// replicates, with joint percentile bootstrap intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InefficiencySummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_cost: f64,
    pub inefficiency: f64,
    pub ci_mean: (f64, f64),
    pub ci_variance: (f64, f64),
    pub ci_mean_cost: (f64, f64),
    pub ci_inefficiency: (f64, f64),
    pub level: f64,
    pub n_resamples: usize,
}

fn summary_stats(values: &[f64], costs: &[f64], idx: Option<&[usize]>) -> [f64; 4] {
    let n = idx.map_or(values.len(), |i| i.len());
    let get = |k: usize| idx.map_or(k, |i| i[k]);
    let nf = n as f64;
    let mean = (0..n).map(|k| values[get(k)]).sum::<f64>() / nf;
    let var = (0..n).map(|k| (values[get(k)] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let cost = (0..n).map(|k| costs[get(k)]).sum::<f64>() / nf;
    [mean, var, cost, var * cost]
}

pub fn inefficiency(
    values: &[f64],
    costs: &[f64],
    n_resamples: usize,
    level: f64,
    rng: &RngStream,
) -> Result<InefficiencySummary> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(
            "inefficiency needs at least 2 replicates".into(),
        ));
    }
    if values.len() != costs.len() {
        return Err(Error::param("costs", "one cost per estimate is required"));
    }
    if values.len() < 30 {
        log::warn!(
            "only {} replicates; bootstrap intervals will be unreliable",
            values.len()
        );
    }
    let point = summary_stats(values, costs, None);
    let boot = bootstrap_statistics(values.len(), n_resamples.max(1), rng, |idx| {
        summary_stats(values, costs, Some(idx)).to_vec()
    });
    let ci = |j: usize| {
        let mut col: Vec<f64> = boot.iter().map(|b| b[j]).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        percentile_interval(&col, level)
    };
    Ok(InefficiencySummary {
        n: values.len(),
        mean: point[0],
        variance: point[1],
        mean_cost: point[2],
        inefficiency: point[3],
        ci_mean: ci(0),
        ci_variance: ci(1),
        ci_mean_cost: ci(2),
        ci_inefficiency: ci(3),
        level,
        n_resamples,
    })
}
