//! Inference for Galton-Watson branching processes.
//!
//! The crate covers simulation of complete and incomplete data, extinction
//! probabilities, maximum-likelihood and Bayesian estimators of the offspring
//! average (improper, conjugate Dirichlet and Dirichlet Process priors), a
//! blocked Gibbs sampler for generation totals, and a Monte Carlo harness for
//! classification studies and outbreak case series.

pub mod dp;
pub mod error;
pub mod estimators;
pub mod extinction;
pub mod gibbs;
pub mod harness;
pub mod offspring;
pub mod process;
pub mod rng;
pub mod special;

pub use dp::{dirichlet_equivalent, dp_posterior, DpPosterior, DpPrior};
pub use error::{GwError, Result};
pub use estimators::{classify, Classification, Decision, DirichletParams, HeydeVariant, PosteriorSummary};
pub use extinction::{extinction_probability, ExtinctionMethod, ExtinctionResult};
pub use offspring::OffspringDistribution;
pub use process::{GenerationSeries, OffspringCounts};
pub use rng::SeedSpec;
