//! Preconditioned Langevin Monte Carlo for strongly log-concave targets.
//!
//! The chain is `x_{k+1} = x_k - γ H(x_k) ∇g(x_k) + √(2γ) H(x_k)^{1/2} ξ_{k+1}`
//! with `π ∝ exp(-g)`.

pub mod cli;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod precond;
pub mod sampler;
pub mod targets;
pub mod theory;

pub use error::{Error, Result};
pub use precond::{FixedPreconditioner, Preconditioner, SpatialPreconditioner};
pub use sampler::{run_chain, run_replicates, ChainConfig, Trajectory};
pub use targets::{
    GaussianCosine, GaussianTarget, LogisticPath, MixtureGaussian, Potential, TargetSpec,
};
pub use theory::{KappaConvention, ProblemConstants};
