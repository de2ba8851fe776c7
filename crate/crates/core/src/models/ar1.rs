use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Autoregressive chain X_t = φ X_{t-1} + σ W_t with standard Normal noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ar1Model {
    phi: f64,
    sigma: f64,
}

impl Ar1Model {
    pub fn new(phi: f64, sigma: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::param("phi", format!("must lie in (0, 1), got {phi}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Ar1Model { phi, sigma })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Variance of the stationary law Normal(0, σ²/(1-φ²)).
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.phi * self.phi)
    }

    /// One transition with the noise supplied by the caller.
    pub fn step_with_noise(&self, x: f64, w: f64) -> f64 {
        self.phi * x + self.sigma * w
    }
}

pub fn ar1_step(model: &Ar1Model, x: f64, rng: &mut RngStream) -> f64 {
    model.step_with_noise(x, rng.std_normal())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_passes_noise_through() {
        let m = Ar1Model::new(0.99, 1.0).unwrap();
        assert_eq!(m.step_with_noise(0.0, 1.3), 1.3);
    }

    #[test]
    fn noiseless_contraction() {
        let m = Ar1Model::new(0.5, 2.0).unwrap();
        assert_eq!(m.step_with_noise(4.0, 0.0), 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Ar1Model::new(1.0, 1.0).is_err());
        assert!(Ar1Model::new(0.0, 1.0).is_err());
        assert!(Ar1Model::new(0.5, 0.0).is_err());
    }

    #[test]
    fn long_run_moments_match_stationary_law() {
        let m = Ar1Model::new(0.5, 2.0).unwrap();
        let mut rng = RngStream::new(42, 0);
        let n = 100_000;
        let mut x = 0.0;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            x = ar1_step(&m, x, &mut rng);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let target_var = m.stationary_variance();
        // autocorrelated samples: inflate standard errors by the
        // integrated autocorrelation times (1+φ)/(1-φ) and (1+φ²)/(1-φ²)
        let phi = m.phi();
        let se_mean = (target_var * (1.0 + phi) / (1.0 - phi) / n as f64).sqrt();
        let se_var = (2.0 * target_var * target_var * (1.0 + phi * phi) / (1.0 - phi * phi) / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean} se {se_mean}");
        assert!((var - target_var).abs() < 3.0 * se_var, "var {var} vs {target_var}");
    }
}
