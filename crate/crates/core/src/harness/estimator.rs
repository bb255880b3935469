use serde::Serialize;

use crate::dp::{dp_posterior, DpPrior, DEFAULT_SUPPORT_DRAWS};
use crate::error::{GwError, Result};
use crate::estimators::{
    agnostic_dirichlet_prior, dirichlet_posterior, heyde_p_supercritical_with, mle_mean, posterior_m_moments,
    AgnosticVariant, HeydeVariant, PosteriorSummary, DEFAULT_EPS,
};
use crate::gibbs::{
    chain_summary, run_chain, GibbsConfig, GibbsPrior, Imputation, DEFAULT_BURN_IN, DEFAULT_ITERATIONS,
    DEFAULT_MAX_TRIES,
};
use crate::offspring::{OffspringDistribution, AGNOSTIC_POISSON_LAMBDA};
use crate::process::{GenerationSeries, OffspringCounts};
use crate::rng::SeedSpec;

/// How a Dirichlet estimator picks its support bound k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Known(usize),
    /// Largest observed offspring count, at least 2.
    SampleMax,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Mle,
    Improper {
        variant: HeydeVariant,
    },
    Dirichlet {
        k: KChoice,
        variant: AgnosticVariant,
    },
    Dp {
        a: f64,
        base: OffspringDistribution,
        /// Also estimate the support size from this many posterior realizations.
        support_draws: Option<usize>,
    },
    GibbsDirichlet {
        k_trunc: usize,
        variant: AgnosticVariant,
        iterations: usize,
        burn_in: usize,
        max_tries: u64,
        imputation: Imputation,
    },
    GibbsDp {
        a: f64,
        base: OffspringDistribution,
        k_trunc: usize,
        iterations: usize,
        burn_in: usize,
        max_tries: u64,
        imputation: Imputation,
    },
}

/// Result of one estimator on one data set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorOutcome {
    pub summary: PosteriorSummary,
    /// Modal support size, when requested.
    pub support_size: Option<usize>,
}

impl EstimatorConfig {
    pub fn dp(a: f64) -> Self {
        EstimatorConfig::Dp { a, base: agnostic_poisson(), support_draws: None }
    }

    pub fn dp_with_support(a: f64) -> Self {
        EstimatorConfig::Dp { a, base: agnostic_poisson(), support_draws: Some(DEFAULT_SUPPORT_DRAWS) }
    }

    pub fn gibbs_dirichlet(k_trunc: usize) -> Self {
        EstimatorConfig::GibbsDirichlet {
            k_trunc,
            variant: AgnosticVariant::A,
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            max_tries: DEFAULT_MAX_TRIES,
            imputation: Imputation::AcceptReject,
        }
    }

    pub fn gibbs_dp(a: f64, k_trunc: usize) -> Self {
        EstimatorConfig::GibbsDp {
            a,
            base: agnostic_poisson(),
            k_trunc,
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            max_tries: DEFAULT_MAX_TRIES,
            imputation: Imputation::AcceptReject,
        }
    }

    /// Switch Gibbs estimators to another imputation method; no-op otherwise.
    pub fn with_imputation(mut self, method: Imputation) -> Self {
        if let EstimatorConfig::GibbsDirichlet { imputation, .. } | EstimatorConfig::GibbsDp { imputation, .. } =
            &mut self
        {
            *imputation = method;
        }
        self
    }

    /// Table label.
    pub fn name(&self) -> String {
        match self {
            EstimatorConfig::Mle => "mle".into(),
            EstimatorConfig::Improper { .. } => "bayes.improper".into(),
            EstimatorConfig::Dirichlet { .. } => "bayes.dir".into(),
            EstimatorConfig::Dp { a, .. } => format!("bayes.dp(a={a})"),
            EstimatorConfig::GibbsDirichlet { .. } => "bayes.dir(mean)".into(),
            EstimatorConfig::GibbsDp { a, .. } => format!("bayes.dp(a={a})"),
        }
    }

    pub fn needs_complete_data(&self) -> bool {
        matches!(self, EstimatorConfig::Dirichlet { .. } | EstimatorConfig::Dp { .. })
    }

    pub fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("estimator configs serialize")
    }

    /// Apply to a data set. Complete-data estimators need `counts`.
    pub fn estimate(
        &self,
        series: &GenerationSeries,
        counts: Option<&OffspringCounts>,
        seed: SeedSpec,
    ) -> Result<EstimatorOutcome> {
        let plain = |summary| Ok(EstimatorOutcome { summary, support_size: None });
        match self {
            EstimatorConfig::Mle => {
                let m = mle_mean(series)?;
                plain(PosteriorSummary::from_mean(m, 0.0))
            }
            EstimatorConfig::Improper { variant } => {
                let p = heyde_p_supercritical_with(series, *variant)?;
                plain(PosteriorSummary::from_probability(p, mle_mean(series)?))
            }
            EstimatorConfig::Dirichlet { k, variant } => {
                let counts = require_counts(counts)?;
                let k = match k {
                    KChoice::Known(k) => *k,
                    KChoice::SampleMax => counts.max_observed().max(2),
                };
                let prior = agnostic_dirichlet_prior(k, *variant, DEFAULT_EPS)?;
                let (m, var) = posterior_m_moments(&dirichlet_posterior(&prior, counts)?);
                plain(PosteriorSummary::from_mean(m, var))
            }
            EstimatorConfig::Dp { a, base, support_draws } => {
                let counts = require_counts(counts)?;
                let post = dp_posterior(&DpPrior::new(*a, base.clone())?, counts);
                let summary = PosteriorSummary::from_mean(post.posterior_mean_m(), f64::NAN);
                let support_size = match support_draws {
                    Some(draws) => Some(post.support_size_estimate(*draws, None, seed)?),
                    None => None,
                };
                Ok(EstimatorOutcome { summary, support_size })
            }
            EstimatorConfig::GibbsDirichlet { k_trunc, variant, iterations, burn_in, max_tries, imputation } => {
                let prior = GibbsPrior::Dirichlet(agnostic_dirichlet_prior(*k_trunc, *variant, DEFAULT_EPS)?);
                let config = GibbsConfig {
                    iterations: *iterations,
                    burn_in: *burn_in,
                    k_trunc: *k_trunc,
                    max_tries: *max_tries,
                    prior,
                    imputation: *imputation,
                    keep_pi: false,
                };
                gibbs(series, &config, seed)
            }
            EstimatorConfig::GibbsDp { a, base, k_trunc, iterations, burn_in, max_tries, imputation } => {
                let config = GibbsConfig {
                    iterations: *iterations,
                    burn_in: *burn_in,
                    k_trunc: *k_trunc,
                    max_tries: *max_tries,
                    prior: GibbsPrior::Dp(DpPrior::new(*a, base.clone())?),
                    imputation: *imputation,
                    keep_pi: false,
                };
                gibbs(series, &config, seed)
            }
        }
    }
}

fn agnostic_poisson() -> OffspringDistribution {
    OffspringDistribution::poisson(AGNOSTIC_POISSON_LAMBDA).expect("valid rate")
}

fn require_counts(counts: Option<&OffspringCounts>) -> Result<&OffspringCounts> {
    counts.ok_or_else(|| GwError::InvalidParameter("estimator needs complete offspring counts".into()))
}

fn gibbs(series: &GenerationSeries, config: &GibbsConfig, seed: SeedSpec) -> Result<EstimatorOutcome> {
    let chain = run_chain(series, config, seed)?;
    Ok(EstimatorOutcome { summary: chain_summary(&chain)?, support_size: None })
}
