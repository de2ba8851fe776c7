//! Built-in target models and their single-chain transitions.

pub mod ar1;
pub mod cauchy;
pub mod finite;
pub mod mrth;

pub use ar1::{ar1_step, Ar1Model};
pub use cauchy::{gibbs_step, CauchyNormalModel};
pub use finite::{finite_step, FiniteChainModel};
pub use mrth::{mrth_step, MrthStep};
