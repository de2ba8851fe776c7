use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Posterior of a location θ with Normal(0, prior_variance) prior and
/// independent Cauchy(θ, 1) observations.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyNormalModel {
    observations: Vec<f64>,
    prior_variance: f64,
    mrth_proposal_sd: f64,
}

impl Default for CauchyNormalModel {
    fn default() -> Self {
        CauchyNormalModel {
            observations: vec![-8.0, 8.0, 17.0],
            prior_variance: 100.0,
            mrth_proposal_sd: 10.0,
        }
    }
}

impl CauchyNormalModel {
    pub fn new(observations: Vec<f64>, prior_variance: f64, mrth_proposal_sd: f64) -> Result<Self> {
        if observations.is_empty() || observations.iter().any(|z| !z.is_finite()) {
            return Err(Error::param("observations", "need at least one finite observation"));
        }
        if !(prior_variance > 0.0 && prior_variance.is_finite()) {
            return Err(Error::param(
                "prior_variance",
                format!("must be positive, got {prior_variance}"),
            ));
        }
        if !(mrth_proposal_sd > 0.0 && mrth_proposal_sd.is_finite()) {
            return Err(Error::param(
                "mrth_proposal_sd",
                format!("must be positive, got {mrth_proposal_sd}"),
            ));
        }
        Ok(CauchyNormalModel {
            observations,
            prior_variance,
            mrth_proposal_sd,
        })
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    pub fn mrth_proposal_sd(&self) -> f64 {
        self.mrth_proposal_sd
    }

    /// Unnormalized log posterior, constants dropped:
    /// -θ²/(2σ²) - Σ log(1 + (θ - z_i)²).
    pub fn log_density(&self, theta: f64) -> f64 {
        let prior = -0.5 * theta * theta / self.prior_variance;
        let lik: f64 = self.observations.iter().map(|z| (theta - z).powi(2).ln_1p()).sum();
        prior - lik
    }

    /// Mean and variance of θ' given the auxiliary variables
    /// η_i = -log(u_i) · 2 / (1 + (θ - z_i)²).
    pub fn gibbs_conditional(&self, theta: f64, uniforms: &[f64]) -> (f64, f64) {
        let mut sum_eta = 0.0;
        let mut sum_eta_z = 0.0;
        for (z, u) in self.observations.iter().zip(uniforms) {
            let rate = 0.5 * (1.0 + (theta - z).powi(2));
            let eta = -u.ln() / rate;
            sum_eta += eta;
            sum_eta_z += eta * z;
        }
        let precision = sum_eta + 1.0 / self.prior_variance;
        (sum_eta_z / precision, 1.0 / precision)
    }

    pub(crate) fn draw_uniforms(&self, rng: &mut RngStream) -> Vec<f64> {
        self.observations.iter().map(|_| rng.uniform_pos()).collect()
    }
}

/// One sweep of the data-augmentation Gibbs sampler: Exponential auxiliary
/// draws given θ, then a Normal draw of θ given the auxiliaries.
pub fn gibbs_step(model: &CauchyNormalModel, theta: f64, rng: &mut RngStream) -> f64 {
    let u = model.draw_uniforms(rng);
    let (mean, var) = model.gibbs_conditional(theta, &u);
    mean + var.sqrt() * rng.std_normal()
}
