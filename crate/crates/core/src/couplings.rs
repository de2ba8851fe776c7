//! Couplings of pairs of distributions and faithful coupled kernels for the
//! built-in models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{CoupledKernel, MarkovKernel};
use crate::models::mrth::mrth_accept;
use crate::models::{Ar1Model, CauchyNormalModel, FiniteChainModel};
use crate::rng::RngStream;

/// Default cap on the rejection loop of [`maximal_coupling`].
pub const DEFAULT_REJECTION_CAP: u64 = 10_000_000;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// How the two chains of a pair are coupled at each step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CouplingKind {
    /// Rejection-sampling maximal coupling of the two transition laws.
    MaximalRejection,
    /// Reflection-maximal coupling of equal-variance Normal moves.
    ReflectionMaximal,
    /// Same random numbers fed to both chains.
    CommonRandomNumbers,
    /// Common random numbers while the standardized distance between the
    /// Normal moves exceeds `threshold`, reflection-maximal below it.
    SwitchToCrnComposite { threshold: f64 },
    /// Independent transitions; only meaningful on finite state spaces.
    Independent,
}

impl CouplingKind {
    pub fn name(&self) -> &'static str {
        match self {
            CouplingKind::MaximalRejection => "maximal-rejection",
            CouplingKind::ReflectionMaximal => "reflection-maximal",
            CouplingKind::CommonRandomNumbers => "common-random-numbers",
            CouplingKind::SwitchToCrnComposite { .. } => "switch-to-crn-composite",
            CouplingKind::Independent => "independent",
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingKind::SwitchToCrnComposite { threshold } => write!(f, "{}:{threshold}", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for CouplingKind {
    type Err = Error;

    /// Accepts the kebab-case names; the composite takes an optional
    /// `:threshold` suffix (default 1).
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let kind = match name {
            "maximal-rejection" | "maximal" => CouplingKind::MaximalRejection,
            "reflection-maximal" | "reflection" => CouplingKind::ReflectionMaximal,
            "common-random-numbers" | "crn" => CouplingKind::CommonRandomNumbers,
            "switch-to-crn-composite" => {
                let threshold = match arg {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|e| Error::param("coupling.threshold", e.to_string()))?,
                    None => 1.0,
                };
                if !(threshold > 0.0) {
                    return Err(Error::param("coupling.threshold", "must be positive"));
                }
                return Ok(CouplingKind::SwitchToCrnComposite { threshold });
            }
            "independent" => CouplingKind::Independent,
            other => {
                return Err(Error::param(
                    "coupling.kind",
                    format!(
                        "unknown coupling `{other}`; expected one of maximal-rejection, \
                         reflection-maximal, common-random-numbers, switch-to-crn-composite, independent"
                    ),
                ))
            }
        };
        if arg.is_some() {
            return Err(Error::param("coupling.kind", format!("`{name}` takes no argument")));
        }
        Ok(kind)
    }
}

/// Two draws from a coupling and whether they coincide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledDraw<T> {
    pub x: T,
    pub y: T,
    pub met: bool,
}

/// Normal(mean, sd²) with a normalized log density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

impl Normal {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z - self.sd.ln() - LN_SQRT_2PI
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.mean + self.sd * rng.std_normal()
    }
}

/// Maximal coupling of μ and ν by rejection sampling.
///
/// Densities are given in log space and must share normalization. The loop
/// drawing the non-coinciding part of ν aborts after `cap` proposals.
pub fn maximal_coupling<T, LM, SM, LN, SN>(
    ln_mu: LM,
    mut sample_mu: SM,
    ln_nu: LN,
    mut sample_nu: SN,
    cap: u64,
    rng: &mut RngStream,
) -> Result<CoupledDraw<T>>
where
    T: Clone,
    LM: Fn(&T) -> f64,
    SM: FnMut(&mut RngStream) -> T,
    LN: Fn(&T) -> f64,
    SN: FnMut(&mut RngStream) -> T,
{
    let x = sample_mu(rng);
    let w = rng.uniform();
    if w.ln() + ln_mu(&x) <= ln_nu(&x) {
        return Ok(CoupledDraw {
            y: x.clone(),
            x,
            met: true,
        });
    }
    for _ in 0..cap {
        let y = sample_nu(rng);
        let w = rng.uniform();
        if w.ln() + ln_nu(&y) > ln_mu(&y) {
            return Ok(CoupledDraw { x, y, met: false });
        }
    }
    Err(Error::RejectionCapExceeded { cap })
}

/// Reflection-maximal coupling of Normal(μ1, σ²) and Normal(μ2, σ²).
///
/// Consumes exactly one Normal and one uniform draw.
pub fn reflection_maximal_1d(mu1: f64, mu2: f64, sigma: f64, rng: &mut RngStream) -> CoupledDraw<f64> {
    let z = (mu1 - mu2) / sigma;
    let xdot = rng.std_normal();
    let w = rng.uniform();
    let x = mu1 + sigma * xdot;
    let log_ratio = -0.5 * ((z + xdot) * (z + xdot) - xdot * xdot);
    if w.ln() <= log_ratio {
        CoupledDraw { x, y: x, met: true }
    } else {
        CoupledDraw {
            x,
            y: mu2 - sigma * xdot,
            met: false,
        }
    }
}

/// Lower-triangular Cholesky factor of a covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    /// `lower` is row-major `d × d`; entries above the diagonal must be zero
    /// and the diagonal strictly positive.
    pub fn new(lower: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || lower.len() != dim * dim {
            return Err(Error::param("chol_sigma", format!("expected {dim}×{dim} entries")));
        }
        for i in 0..dim {
            let d = lower[i * dim + i];
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::SingularSystem(format!(
                    "Cholesky factor has non-positive diagonal entry {d} at {i}"
                )));
            }
            if (i + 1..dim).any(|j| lower[i * dim + j] != 0.0) {
                return Err(Error::param("chol_sigma", "factor must be lower triangular"));
            }
        }
        Ok(CholeskyFactor { dim, lower })
    }

    /// Factor of a symmetric positive definite covariance.
    pub fn from_covariance(cov: Vec<f64>, dim: usize) -> Result<Self> {
        let m = nalgebra::DMatrix::from_row_slice(dim, dim, &cov);
        let chol = nalgebra::Cholesky::new(m)
            .ok_or_else(|| Error::SingularSystem("covariance is not positive definite".into()))?;
        let l = chol.l();
        let lower = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| l[(i, j)])
            .collect();
        CholeskyFactor::new(lower, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// Forward substitution for L z = v.
    fn solve(&self, v: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut s = v[i];
            for j in 0..i {
                s -= self.at(i, j) * z[j];
            }
            z[i] = s / self.at(i, i);
        }
        z
    }

    fn apply(&self, mean: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..=i {
                    s += self.at(i, j) * v[j];
                }
                mean[i] + s
            })
            .collect()
    }
}

/// Reflection-maximal coupling of Normal(μ1, Σ) and Normal(μ2, Σ) with
/// Σ = L Lᵀ. In dimension one it reproduces [`reflection_maximal_1d`]
/// draw for draw.
pub fn reflection_maximal_nd(
    mu1: &[f64],
    mu2: &[f64],
    chol: &CholeskyFactor,
    rng: &mut RngStream,
) -> CoupledDraw<Vec<f64>> {
    let d = chol.dim();
    let diff: Vec<f64> = mu1.iter().zip(mu2).map(|(a, b)| a - b).collect();
    let z = chol.solve(&diff);
    let xdot: Vec<f64> = (0..d).map(|_| rng.std_normal()).collect();
    let w = rng.uniform();
    let x = chol.apply(mu1, &xdot);
    let mut log_ratio = 0.0;
    for i in 0..d {
        log_ratio += (z[i] + xdot[i]) * (z[i] + xdot[i]) - xdot[i] * xdot[i];
    }
    let log_ratio = -0.5 * log_ratio;
    if w.ln() <= log_ratio {
        return CoupledDraw {
            y: x.clone(),
            x,
            met: true,
        };
    }
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ydot: Vec<f64> = if d == 1 {
        vec![-xdot[0]]
    } else {
        let e: Vec<f64> = z.iter().map(|v| v / norm).collect();
        let proj: f64 = e.iter().zip(&xdot).map(|(a, b)| a * b).sum();
        xdot.iter().zip(&e).map(|(xi, ei)| xi - 2.0 * proj * ei).collect()
    };
    let y = if d == 1 {
        vec![mu2[0] - chol.at(0, 0) * xdot[0]]
    } else {
        chol.apply(mu2, &ydot)
    };
    CoupledDraw { x, y, met: false }
}

/// Coupled random-walk MRTH move: reflection-maximal proposals and one
/// shared uniform for both acceptance tests.
pub fn coupled_mrth_step<F>(logdensity: F, proposal_sd: f64, x: f64, y: f64, rng: &mut RngStream) -> CoupledDraw<f64>
where
    F: Fn(f64) -> f64,
{
    let proposals = reflection_maximal_1d(x, y, proposal_sd, rng);
    mrth_accept_pair(&logdensity, x, y, proposals, rng)
}

fn mrth_accept_pair<F: Fn(f64) -> f64>(
    logdensity: &F,
    x: f64,
    y: f64,
    proposals: CoupledDraw<f64>,
    rng: &mut RngStream,
) -> CoupledDraw<f64> {
    let log_u = rng.uniform_pos().ln();
    let lx = logdensity(x);
    let lpx = logdensity(proposals.x);
    let (acc_x, nan_x) = mrth_accept(log_u, lx, lpx);
    let (acc_y, nan_y) = if proposals.met && x == y {
        (acc_x, nan_x)
    } else {
        mrth_accept(log_u, logdensity(y), logdensity(proposals.y))
    };
    if nan_x || nan_y {
        log::warn!("log-density is NaN at a proposal; rejecting");
    }
    let x_new = if acc_x { proposals.x } else { x };
    let y_new = if acc_y { proposals.y } else { y };
    CoupledDraw {
        x: x_new,
        y: y_new,
        met: proposals.met,
    }
}

/// Coupled data-augmentation Gibbs sweep: common uniforms for the
/// Exponential auxiliaries, maximal coupling of the two Normal conditionals.
pub fn coupled_gibbs_step(
    model: &CauchyNormalModel,
    theta: f64,
    theta_tilde: f64,
    cap: u64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let u = model.draw_uniforms(rng);
    let (m1, v1) = model.gibbs_conditional(theta, &u);
    if theta == theta_tilde {
        let t = m1 + v1.sqrt() * rng.std_normal();
        return Ok((t, t));
    }
    let (m2, v2) = model.gibbs_conditional(theta_tilde, &u);
    let mu = Normal {
        mean: m1,
        sd: v1.sqrt(),
    };
    let nu = Normal {
        mean: m2,
        sd: v2.sqrt(),
    };
    let draw = maximal_coupling(
        |t: &f64| mu.ln_pdf(*t),
        |r: &mut RngStream| mu.sample(r),
        |t: &f64| nu.ln_pdf(*t),
        |r: &mut RngStream| nu.sample(r),
        cap,
        rng,
    )?;
    Ok((draw.x, draw.y))
}

fn incompatible(kind: CouplingKind, model: &str, reason: &str) -> Error {
    Error::IncompatibleCoupling {
        kind: kind.to_string(),
        model: model.to_string(),
        reason: reason.to_string(),
    }
}

/// Couple two Normal moves N(m1, σ²), N(m2, σ²) with the given kind.
/// The marginal of each coordinate is always one standard Normal draw.
fn couple_normal_moves(
    kind: CouplingKind,
    m1: f64,
    m2: f64,
    sigma: f64,
    cap: u64,
    rng: &mut RngStream,
) -> Result<CoupledDraw<f64>> {
    match kind {
        CouplingKind::ReflectionMaximal => Ok(reflection_maximal_1d(m1, m2, sigma, rng)),
        CouplingKind::SwitchToCrnComposite { threshold } => {
            if ((m1 - m2) / sigma).abs() > threshold {
                let w = rng.std_normal();
                Ok(CoupledDraw {
                    x: m1 + sigma * w,
                    y: m2 + sigma * w,
                    met: false,
                })
            } else {
                Ok(reflection_maximal_1d(m1, m2, sigma, rng))
            }
        }
        CouplingKind::MaximalRejection => {
            let mu = Normal { mean: m1, sd: sigma };
            let nu = Normal { mean: m2, sd: sigma };
            maximal_coupling(
                |t: &f64| mu.ln_pdf(*t),
                |r: &mut RngStream| mu.sample(r),
                |t: &f64| nu.ln_pdf(*t),
                |r: &mut RngStream| nu.sample(r),
                cap,
                rng,
            )
        }
        CouplingKind::CommonRandomNumbers | CouplingKind::Independent => {
            unreachable!("rejected at kernel construction")
        }
    }
}

/// AR(1) kernel with a coupling of its Normal innovations.
#[derive(Clone, Debug)]
pub struct Ar1Kernel {
    pub model: Ar1Model,
    pub coupling: CouplingKind,
    pub rejection_cap: u64,
}

impl Ar1Kernel {
    pub fn new(model: Ar1Model, coupling: CouplingKind) -> Result<Self> {
        match coupling {
            CouplingKind::CommonRandomNumbers => Err(incompatible(
                coupling,
                "ar1",
                "common random numbers only contract the chains and never produce a meeting",
            )),
            CouplingKind::Independent => Err(incompatible(
                coupling,
                "ar1",
                "independent continuous moves meet with probability zero",
            )),
            _ => Ok(Ar1Kernel {
                model,
                coupling,
                rejection_cap: DEFAULT_REJECTION_CAP,
            }),
        }
    }
}

impl MarkovKernel for Ar1Kernel {
    type State = f64;

    fn step(&self, x: &f64, rng: &mut RngStream) -> f64 {
        crate::models::ar1_step(&self.model, *x, rng)
    }

    fn label(&self) -> String {
        format!(
            "ar1(phi={}, sigma={}) / {}",
            self.model.phi(),
            self.model.sigma(),
            self.coupling
        )
    }
}

impl CoupledKernel for Ar1Kernel {
    fn coupled_step(&self, x: &f64, y: &f64, rng: &mut RngStream) -> Result<(f64, f64)> {
        let phi = self.model.phi();
        let sigma = self.model.sigma();
        if x == y {
            let v = self.step(x, rng);
            return Ok((v, v));
        }
        let d = couple_normal_moves(self.coupling, phi * x, phi * y, sigma, self.rejection_cap, rng)?;
        Ok((d.x, if d.met { d.x } else { d.y }))
    }
}

/// Random-walk MRTH on the Cauchy-Normal posterior.
#[derive(Clone, Debug)]
pub struct MrthKernel {
    pub model: CauchyNormalModel,
    pub coupling: CouplingKind,
    pub rejection_cap: u64,
}

impl MrthKernel {
    pub fn new(model: CauchyNormalModel, coupling: CouplingKind) -> Result<Self> {
        match coupling {
            CouplingKind::CommonRandomNumbers | CouplingKind::Independent => Err(incompatible(
                coupling,
                "cauchy-mrth",
                "continuous proposals coupled this way never coincide",
            )),
            _ => Ok(MrthKernel {
                model,
                coupling,
                rejection_cap: DEFAULT_REJECTION_CAP,
            }),
        }
    }
}

impl MarkovKernel for MrthKernel {
    type State = f64;

    fn step(&self, x: &f64, rng: &mut RngStream) -> f64 {
        let m = &self.model;
        crate::models::mrth_step(|t| m.log_density(t), m.mrth_proposal_sd(), *x, rng).state
    }

    fn label(&self) -> String {
        format!("cauchy-mrth(sd={}) / {}", self.model.mrth_proposal_sd(), self.coupling)
    }
}

impl CoupledKernel for MrthKernel {
    fn coupled_step(&self, x: &f64, y: &f64, rng: &mut RngStream) -> Result<(f64, f64)> {
        let m = &self.model;
        let sd = m.mrth_proposal_sd();
        if x == y {
            let v = self.step(x, rng);
            return Ok((v, v));
        }
        let proposals = couple_normal_moves(self.coupling, *x, *y, sd, self.rejection_cap, rng)?;
        let d = mrth_accept_pair(&|t| m.log_density(t), *x, *y, proposals, rng);
        Ok((d.x, d.y))
    }
}

/// Data-augmentation Gibbs sampler on the Cauchy-Normal posterior.
#[derive(Clone, Debug)]
pub struct GibbsKernel {
    pub model: CauchyNormalModel,
    pub rejection_cap: u64,
}

impl GibbsKernel {
    /// The only supported coupling is common random numbers for the
    /// auxiliaries combined with a maximal coupling of the θ update,
    /// selected by `maximal-rejection`.
    pub fn new(model: CauchyNormalModel, coupling: CouplingKind) -> Result<Self> {
        match coupling {
            CouplingKind::MaximalRejection => Ok(GibbsKernel {
                model,
                rejection_cap: DEFAULT_REJECTION_CAP,
            }),
            other => Err(incompatible(
                other,
                "cauchy-gibbs",
                "the θ conditionals have unequal variances; use maximal-rejection",
            )),
        }
    }
}

impl MarkovKernel for GibbsKernel {
    type State = f64;

    fn step(&self, x: &f64, rng: &mut RngStream) -> f64 {
        crate::models::gibbs_step(&self.model, *x, rng)
    }

    fn label(&self) -> String {
        "cauchy-gibbs / crn-auxiliaries + maximal-rejection".to_string()
    }
}

impl CoupledKernel for GibbsKernel {
    fn coupled_step(&self, x: &f64, y: &f64, rng: &mut RngStream) -> Result<(f64, f64)> {
        coupled_gibbs_step(&self.model, *x, *y, self.rejection_cap, rng)
    }
}

/// Finite-state chain with a coupling of its transition rows.
#[derive(Clone, Debug)]
pub struct FiniteKernel {
    pub model: FiniteChainModel,
    pub coupling: CouplingKind,
    pub rejection_cap: u64,
}

impl FiniteKernel {
    pub fn new(model: FiniteChainModel, coupling: CouplingKind) -> Result<Self> {
        match coupling {
            CouplingKind::MaximalRejection | CouplingKind::CommonRandomNumbers | CouplingKind::Independent => {
                Ok(FiniteKernel {
                    model,
                    coupling,
                    rejection_cap: DEFAULT_REJECTION_CAP,
                })
            }
            other => Err(incompatible(other, "finite", "requires Normal moves")),
        }
    }
}

impl MarkovKernel for FiniteKernel {
    type State = usize;

    fn step(&self, s: &usize, rng: &mut RngStream) -> usize {
        crate::models::finite_step(&self.model, *s, rng)
    }

    fn label(&self) -> String {
        format!("finite(n={}) / {}", self.model.n_states(), self.coupling)
    }
}

impl CoupledKernel for FiniteKernel {
    fn coupled_step(&self, x: &usize, y: &usize, rng: &mut RngStream) -> Result<(usize, usize)> {
        let m = &self.model;
        if x == y {
            let v = self.step(x, rng);
            return Ok((v, v));
        }
        match self.coupling {
            CouplingKind::CommonRandomNumbers => {
                let u = rng.uniform();
                Ok((m.step_with_uniform(*x, u), m.step_with_uniform(*y, u)))
            }
            CouplingKind::Independent => {
                let a = self.step(x, rng);
                let b = self.step(y, rng);
                Ok((a, b))
            }
            _ => {
                let (px, py) = (m.row(*x), m.row(*y));
                let d = maximal_coupling(
                    |s: &usize| px[*s].ln(),
                    |r: &mut RngStream| m.step_with_uniform(*x, r.uniform()),
                    |s: &usize| py[*s].ln(),
                    |r: &mut RngStream| m.step_with_uniform(*y, r.uniform()),
                    self.rejection_cap,
                    rng,
                )?;
                Ok((d.x, d.y))
            }
        }
    }
}
