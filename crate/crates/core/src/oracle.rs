//! Exact reference values: linear-algebra solutions of the Poisson equation
//! on finite chains, AR(1) closed forms, and an explicit geometric bound on
//! AR(1) meeting times under reflection-maximal coupling.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::FiniteChainModel;
use crate::testfn::TestFunction;

/// Exact stationary law, centered Poisson solution and asymptotic
/// covariance of a finite chain.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub pi: Vec<f64>,
    /// n × d, row-major; each column has π-mean zero.
    pub g_star: Vec<f64>,
    /// d × d, row-major.
    pub v: Vec<f64>,
    pub pi_h: Vec<f64>,
    pub n: usize,
    pub d: usize,
}

impl OracleSolution {
    pub fn g(&self, state: usize, coord: usize) -> f64 {
        self.g_star[state * self.d + coord]
    }

    pub fn v_entry(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.d + j]
    }

    /// var_π of each pair of coordinates of h.
    pub fn target_covariance(&self, model: &FiniteChainModel) -> Vec<f64> {
        let d = self.d;
        let mut c = vec![0.0; d * d];
        for s in 0..self.n {
            let hs = model.h().row(s);
            for a in 0..d {
                for b in 0..d {
                    c[a * d + b] += self.pi[s] * (hs[a] - self.pi_h[a]) * (hs[b] - self.pi_h[b]);
                }
            }
        }
        c
    }
}

fn transition(model: &FiniteChainModel) -> DMatrix<f64> {
    let n = model.n_states();
    DMatrix::from_fn(n, n, |i, j| model.prob(i, j))
}

fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return Err(Error::SingularSystem(format!(
            "{what}: augmented system is rank deficient (smallest singular value {smin:e})"
        )));
    }
    svd.solve(b, 0.0)
        .map_err(|e| Error::SingularSystem(format!("{what}: {e}")))
}

/// Stationary distribution: least-squares solution of πP = π with Σπ = 1.
pub fn stationary_distribution(model: &FiniteChainModel) -> Result<Vec<f64>> {
    let n = model.n_states();
    let p = transition(model);
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n))
        .copy_from(&(p.transpose() - DMatrix::identity(n, n)));
    a.row_mut(n).fill(1.0);
    let mut b = DMatrix::zeros(n + 1, 1);
    b[(n, 0)] = 1.0;
    let pi = lstsq(&a, &b, "stationary distribution")?;
    Ok(pi.column(0).iter().copied().collect())
}

fn centered_h(model: &FiniteChainModel, pi: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let n = model.n_states();
    let d = model.h().arity();
    let h = DMatrix::from_fn(n, d, |s, a| model.h().row(s)[a]);
    let pi_h: Vec<f64> = (0..d).map(|a| (0..n).map(|s| pi[s] * h[(s, a)]).sum()).collect();
    let h0 = DMatrix::from_fn(n, d, |s, a| h[(s, a)] - pi_h[a]);
    (h0, pi_h)
}

fn covariance_from(pi: &[f64], h0: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = h0.shape();
    let mut v = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for i in 0..n {
                s += pi[i] * (h0[(i, a)] * g[(i, b)] + g[(i, a)] * h0[(i, b)] - h0[(i, a)] * h0[(i, b)]);
            }
            v[a * d + b] = s;
        }
    }
    for a in 0..d {
        for b in (a + 1)..d {
            let m = 0.5 * (v[a * d + b] + v[b * d + a]);
            v[a * d + b] = m;
            v[b * d + a] = m;
        }
    }
    v
}

fn pack(pi: Vec<f64>, g: &DMatrix<f64>, h0: &DMatrix<f64>, pi_h: Vec<f64>) -> OracleSolution {
    let (n, d) = g.shape();
    let v = covariance_from(&pi, h0, g);
    OracleSolution {
        g_star: (0..n)
            .flat_map(|i| (0..d).map(move |a| (i, a)))
            .map(|(i, a)| g[(i, a)])
            .collect(),
        pi,
        v,
        pi_h,
        n,
        d,
    }
}

/// Solve (I - P) g = h - π(h) with π(g) = 0 appended as an extra equation,
/// by least squares; v(P, h) entrywise as
/// π(h₀ᵢ g_j) + π(g_i h₀ⱼ) - π(h₀ᵢ h₀ⱼ).
pub fn solve_finite(model: &FiniteChainModel) -> Result<OracleSolution> {
    let n = model.n_states();
    let pi = stationary_distribution(model)?;
    let (h0, pi_h) = centered_h(model, &pi);
    let d = h0.ncols();
    let p = transition(model);
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) - p));
    for j in 0..n {
        a[(n, j)] = pi[j];
    }
    let mut b = DMatrix::zeros(n + 1, d);
    b.view_mut((0, 0), (n, d)).copy_from(&h0);
    let g = lstsq(&a, &b, "Poisson equation")?;
    Ok(pack(pi, &g, &h0, pi_h))
}

/// Poisson solution normalized by g(0) = 0 instead of π(g) = 0.
pub fn solve_finite_pinned(model: &FiniteChainModel) -> Result<Vec<f64>> {
    let n = model.n_states();
    let pi = stationary_distribution(model)?;
    let (h0, _) = centered_h(model, &pi);
    let d = h0.ncols();
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n))
        .copy_from(&(DMatrix::identity(n, n) - transition(model)));
    a[(n, 0)] = 1.0;
    let mut b = DMatrix::zeros(n + 1, d);
    b.view_mut((0, 0), (n, d)).copy_from(&h0);
    let g = lstsq(&a, &b, "pinned Poisson equation")?;
    Ok((0..n)
        .flat_map(|i| (0..d).map(move |c| (i, c)))
        .map(|(i, c)| g[(i, c)])
        .collect())
}

/// Independent reference: g = Σ_t Pᵗ h₀, summed until the increment's max
/// norm stays below 1e-14 for 10 consecutive terms.
pub fn solve_finite_series(model: &FiniteChainModel, max_terms: usize) -> Result<OracleSolution> {
    let pi = stationary_distribution(model)?;
    let (h0, pi_h) = centered_h(model, &pi);
    let p = transition(model);
    let mut term = h0.clone();
    let mut g = h0.clone();
    let mut quiet = 0;
    for _ in 0..max_terms {
        term = &p * term;
        g += &term;
        if term.amax() < 1e-14 {
            quiet += 1;
            if quiet == 10 {
                return Ok(pack(pi, &g, &h0, pi_h));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::InsufficientData(format!(
        "series did not converge in {max_terms} terms"
    )))
}

/// g_y(x) for AR(1) with h(x) = x: (x - y)/(1 - φ).
pub fn ar1_fishy_exact(phi: f64, x: f64, y: f64) -> f64 {
    (x - y) / (1.0 - phi)
}

/// Asymptotic variance of the ergodic mean of an AR(1) chain with unit
/// innovation variance and h(x) = x: (1 - φ)⁻².
pub fn ar1_avar_exact(phi: f64) -> f64 {
    (1.0 - phi).powi(-2)
}

/// Constants of the geometric bound on P(τ > n) for AR(1) chains coupled
/// by reflection-maximal coupling of their innovations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ar1TheoryBound {
    pub phi: f64,
    pub sigma: f64,
    /// (1 + φ²)/2
    pub beta: f64,
    /// 2 - φ²
    pub b: f64,
    /// 1 - exp(-3φ²/(1-φ²))/√2
    pub h_const: f64,
    /// log h / (log h + log β - log b)
    pub delta: f64,
    /// β^δ
    pub beta_tilde: f64,
    /// β̃^{log φ/(log β̃ + log φ)}
    pub beta_bar: f64,
}

impl Ar1TheoryBound {
    pub fn new(phi: f64, sigma: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::param("phi", "must lie in (0, 1)"));
        }
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        let phi2 = phi * phi;
        let beta = (1.0 + phi2) / 2.0;
        let b = 2.0 - phi2;
        let h_const = 1.0 - (-3.0 * phi2 / (1.0 - phi2)).exp() / std::f64::consts::SQRT_2;
        let delta = h_const.ln() / (h_const.ln() + beta.ln() - b.ln());
        let beta_tilde = beta.powf(delta);
        let beta_bar = beta_tilde.powf(phi.ln() / (beta_tilde.ln() + phi.ln()));
        Ok(Ar1TheoryBound {
            phi,
            sigma,
            beta,
            b,
            h_const,
            delta,
            beta_tilde,
            beta_bar,
        })
    }

    /// C̃(x, y) = 2/β̃ + |(x - y)/(2σ)| + 3.
    pub fn c_tilde(&self, x: f64, y: f64) -> f64 {
        2.0 / self.beta_tilde + ((x - y) / (2.0 * self.sigma)).abs() + 3.0
    }

    pub fn constants_in_range(&self) -> bool {
        let open = |v: f64| v > 0.0 && v < 1.0;
        open(self.delta) && open(self.beta_tilde) && open(self.beta_bar)
    }
}

/// min(1, C̃(x0, y0) β̄ⁿ): upper bound on P(τ > n) for the lag-0 chains.
pub fn ar1_survival_bound(bound: &Ar1TheoryBound, x0: f64, y0: f64, n: usize) -> f64 {
    (bound.c_tilde(x0, y0) * bound.beta_bar.powf(n as f64)).min(1.0)
}
