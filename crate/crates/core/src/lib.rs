//! Unbiased estimation of Poisson-equation solutions and of MCMC asymptotic
//! variances with coupled Markov chains.
//!
//! The building blocks are a [`kernel::CoupledKernel`] (a Markov kernel
//! together with a faithful coupling of it with itself), the lagged coupled
//! simulation in [`sim`], and the estimators built on top of it:
//! [`fishy`] for differences g(x) - g(y) of Poisson-equation solutions,
//! [`umcmc`] for unbiased estimates of π(h) and signed measures, and
//! [`avar`] for asymptotic variances. [`oracle`] holds exact answers for
//! finite chains and AR(1) processes.
//!
//! ```
//! use fishy_core::avar::{suave, SuaveConfig, XiKind};
//! use fishy_core::couplings::{Ar1Kernel, CouplingKind};
//! use fishy_core::kernel::NormalInit;
//! use fishy_core::models::Ar1Model;
//! use fishy_core::testfn::Identity;
//! use fishy_core::RngStream;
//!
//! let kernel = Ar1Kernel::new(Ar1Model::new(0.9, 1.0)?, CouplingKind::ReflectionMaximal)?;
//! let init = NormalInit { mean: 0.0, sd: 4.0 };
//! let cfg = SuaveConfig { k: 50, ell: 250, lag: 25, r: 20, xi: XiKind::Uniform };
//! let est = suave(&kernel, &init, &Identity, &0.0, &cfg, None, &RngStream::new(1, 0))?;
//! assert!(est.scalar().is_finite() && est.cost_total > 0);
//! # Ok::<(), fishy_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod avar;
pub mod bundle;
pub mod couplings;
pub mod diagnostics;
pub mod error;
pub mod fishy;
pub mod kernel;
pub mod models;
pub mod oracle;
pub mod parallel;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod testfn;
pub mod umcmc;

pub use error::{Error, Result};
pub use kernel::{CoupledKernel, InitialDistribution, MarkovKernel};
pub use rng::RngStream;
pub use testfn::TestFunction;
