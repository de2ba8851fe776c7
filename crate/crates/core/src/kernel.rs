//! Contracts shared by every model: single-chain kernels, faithful couplings,
//! initial distributions.

use std::fmt::Debug;

use crate::error::Result;
use crate::rng::RngStream;

/// A π-invariant Markov transition.
pub trait MarkovKernel: Send + Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;

    fn step(&self, x: &Self::State, rng: &mut RngStream) -> Self::State;

    fn label(&self) -> String;
}

/// A faithful coupling of a kernel with itself.
///
/// Each output coordinate must be marginally one `step` from its input and
/// equal inputs must produce equal outputs.
pub trait CoupledKernel: MarkovKernel {
    fn coupled_step(&self, x: &Self::State, y: &Self::State, rng: &mut RngStream)
        -> Result<(Self::State, Self::State)>;
}

/// Distribution of the initial state of a chain.
pub trait InitialDistribution<S>: Send + Sync {
    fn sample(&self, rng: &mut RngStream) -> S;
}

impl<S, F> InitialDistribution<S> for F
where
    F: Fn(&mut RngStream) -> S + Send + Sync,
{
    fn sample(&self, rng: &mut RngStream) -> S {
        self(rng)
    }
}

/// Normal(mean, sd²) on the real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalInit {
    pub mean: f64,
    pub sd: f64,
}

impl InitialDistribution<f64> for NormalInit {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        self.mean + self.sd * rng.std_normal()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointMass<S>(pub S);

impl<S: Clone + Send + Sync> InitialDistribution<S> for PointMass<S> {
    fn sample(&self, _rng: &mut RngStream) -> S {
        self.0.clone()
    }
}

/// Uniform over the states `0..n` of a finite chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformStates(pub usize);

impl InitialDistribution<usize> for UniformStates {
    fn sample(&self, rng: &mut RngStream) -> usize {
        rng.index(self.0)
    }
}

/// Categorical over finite states with the given probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalStates {
    cumulative: Vec<f64>,
}

impl CategoricalStates {
    pub fn new(probs: &[f64]) -> Self {
        let total: f64 = probs.iter().sum();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        CategoricalStates { cumulative }
    }
}

impl InitialDistribution<usize> for CategoricalStates {
    fn sample(&self, rng: &mut RngStream) -> usize {
        crate::models::finite::inverse_cdf(&self.cumulative, rng.uniform())
    }
}
