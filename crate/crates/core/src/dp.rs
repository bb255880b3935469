//! Dirichlet Process prior and posterior over the offspring law.
//!
//! After observing complete data with N recorded parents, DP(a, G_0) updates
//! to DP(a + N, H) with H = (N/(N+a))·(empirical law of the offspring sizes)
//! + (a/(N+a))·G_0.

use rand::Rng;
use serde::Serialize;

use crate::error::{GwError, Result};
use crate::estimators::DirichletParams;
use crate::offspring::{OffspringDistribution, TAIL_TOL};
use crate::process::OffspringCounts;
use crate::rng::{GwRng, SeedSpec};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-8;
pub const DEFAULT_SUPPORT_DRAWS: usize = 100;

/// Base mass allowed outside {0..k} when converting to a Dirichlet.
const OUTSIDE_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpPrior {
    a: f64,
    base: OffspringDistribution,
}

impl DpPrior {
    pub fn new(a: f64, base: OffspringDistribution) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(GwError::InvalidParameter(format!("DP concentration must be positive, got {a}")));
        }
        base.validate()?;
        Ok(DpPrior { a, base })
    }

    pub fn concentration(&self) -> f64 {
        self.a
    }

    pub fn base(&self) -> &OffspringDistribution {
        &self.base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpPosterior {
    prior: DpPrior,
    /// `multiplicities[j]` = number of recorded parents with j children.
    multiplicities: Vec<u64>,
    n_obs: u64,
}

/// Conjugate update with complete data.
pub fn dp_posterior(prior: &DpPrior, counts: &OffspringCounts) -> DpPosterior {
    let mut multiplicities = counts.column_sums();
    while multiplicities.len() > 1 && multiplicities[multiplicities.len() - 1] == 0 {
        multiplicities.pop();
    }
    let n_obs = multiplicities.iter().sum();
    DpPosterior { prior: prior.clone(), multiplicities, n_obs }
}

impl DpPosterior {
    /// The posterior with no data.
    pub fn from_prior(prior: &DpPrior) -> Self {
        DpPosterior { prior: prior.clone(), multiplicities: vec![0], n_obs: 0 }
    }

    /// a + N.
    pub fn concentration(&self) -> f64 {
        self.prior.a + self.n_obs as f64
    }

    pub fn n_obs(&self) -> u64 {
        self.n_obs
    }

    pub fn prior(&self) -> &DpPrior {
        &self.prior
    }

    pub fn base(&self) -> &OffspringDistribution {
        &self.prior.base
    }

    pub fn multiplicity(&self, j: usize) -> u64 {
        self.multiplicities.get(j).copied().unwrap_or(0)
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    /// Weight a/(N+a) of G_0 in the updated base measure.
    pub fn base_weight(&self) -> f64 {
        self.prior.a / self.concentration()
    }

    /// Weight N/(N+a) of the empirical law.
    pub fn empirical_weight(&self) -> f64 {
        self.n_obs as f64 / self.concentration()
    }

    /// Mean of the observed offspring sizes, if any were observed.
    pub fn sample_mean(&self) -> Option<f64> {
        (self.n_obs > 0).then(|| {
            let total: u64 = self.multiplicities.iter().enumerate().map(|(j, c)| j as u64 * c).sum();
            total as f64 / self.n_obs as f64
        })
    }

    /// E[G({j}) | data], a weighted average of the observed proportion of
    /// j-offspring parents and G_0({j}).
    pub fn posterior_mean_pmf(&self, j: usize) -> f64 {
        let base = self.prior.base.pmf(j);
        if self.n_obs == 0 {
            return base;
        }
        let observed = self.multiplicity(j) as f64 / self.n_obs as f64;
        self.empirical_weight() * observed + self.base_weight() * base
    }

    /// E[m | data] = (N/(N+a))·(sample mean) + (a/(N+a))·mean(G_0).
    pub fn posterior_mean_m(&self) -> f64 {
        match self.sample_mean() {
            None => self.prior.base.mean(),
            Some(sample) => self.empirical_weight() * sample + self.base_weight() * self.prior.base.mean(),
        }
    }

    /// Dirichlet parameters of (G({0}), …, G({k−1}), G([k, ∞))) under the
    /// posterior: counts plus a·G_0 mass of each cell.
    pub fn partition_marginal(&self, k: usize) -> Result<DirichletParams> {
        if k == 0 {
            return Err(GwError::InvalidParameter("partition needs k >= 1".into()));
        }
        let a = self.prior.a;
        let base = &self.prior.base;
        let mut alpha: Vec<f64> = (0..k).map(|j| self.multiplicity(j) as f64 + a * base.pmf(j)).collect();
        let tail_count: u64 = self.multiplicities.iter().skip(k).sum();
        let tail_mass = (1.0 - base.cdf(k - 1)).max(0.0);
        alpha.push(tail_count as f64 + a * tail_mass);
        DirichletParams::new(alpha)
    }

    /// Draw one realization of G by stick-breaking against the updated base
    /// measure. Sticks are broken until the unassigned mass drops below
    /// `truncation_tol`; that remainder goes to one final atom.
    pub fn sample_realization(&self, truncation_tol: f64, seed: SeedSpec) -> Result<OffspringDistribution> {
        let mut rng = seed.rng();
        self.sample_realization_with(truncation_tol, &mut rng)
    }

    pub fn sample_realization_with(&self, truncation_tol: f64, rng: &mut GwRng) -> Result<OffspringDistribution> {
        if !(truncation_tol > 0.0 && truncation_tol < 1.0) {
            return Err(GwError::InvalidParameter(format!(
                "truncation tolerance must lie in (0,1), got {truncation_tol}"
            )));
        }
        let sampler = UpdatedBase::new(self);
        let inv_c = 1.0 / self.concentration();
        let mut weights: Vec<f64> = Vec::new();
        let add = |j: usize, w: f64, weights: &mut Vec<f64>| {
            if j >= weights.len() {
                weights.resize(j + 1, 0.0);
            }
            weights[j] += w;
        };
        let mut remaining = 1.0f64;
        while remaining >= truncation_tol {
            // Beta(1, c) by inversion
            let v = 1.0 - (1.0 - rng.random::<f64>()).powf(inv_c);
            let w = v * remaining;
            add(sampler.draw(rng), w, &mut weights);
            remaining -= w;
        }
        add(sampler.draw(rng), remaining, &mut weights);
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        while weights.len() > 1 && weights[weights.len() - 1] == 0.0 {
            weights.pop();
        }
        Ok(OffspringDistribution::FinitePmf { probs: weights })
    }

    /// Modal number of distinct values in `sample_size` draws from posterior
    /// realizations, over `draws` realizations. Ties go to the smaller size.
    pub fn support_size_estimate(&self, draws: usize, sample_size: Option<u64>, seed: SeedSpec) -> Result<usize> {
        Ok(self.support_size_distribution(draws, sample_size, seed)?.mode)
    }

    pub fn support_size_distribution(
        &self,
        draws: usize,
        sample_size: Option<u64>,
        seed: SeedSpec,
    ) -> Result<SupportSizeDistribution> {
        let sample_size = sample_size.unwrap_or(self.n_obs);
        if sample_size == 0 {
            return Err(GwError::InvalidParameter("support size needs a sample size of at least 1".into()));
        }
        if draws == 0 {
            return Err(GwError::InvalidParameter("support size needs at least one draw".into()));
        }
        let mut rng = seed.rng();
        let mut histogram: Vec<u64> = Vec::new();
        for _ in 0..draws {
            let realization = self.sample_realization_with(DEFAULT_TRUNCATION_TOL, &mut rng)?;
            let distinct = distinct_in_sample(&realization, sample_size, &mut rng);
            if distinct >= histogram.len() {
                histogram.resize(distinct + 1, 0);
            }
            histogram[distinct] += 1;
        }
        let top = histogram.iter().copied().max().unwrap_or(0);
        let mode = histogram.iter().position(|&c| c == top).unwrap_or(0);
        Ok(SupportSizeDistribution { mode, histogram })
    }
}

/// Frequencies of the distinct-value count K across posterior draws.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportSizeDistribution {
    pub mode: usize,
    /// `histogram[k]` = number of draws with exactly k distinct values.
    pub histogram: Vec<u64>,
}

fn distinct_in_sample(dist: &OffspringDistribution, sample_size: u64, rng: &mut GwRng) -> usize {
    let OffspringDistribution::FinitePmf { probs } = dist else { unreachable!("realizations are finite") };
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let mut seen = vec![false; probs.len()];
    let mut distinct = 0;
    for _ in 0..sample_size {
        let u = rng.random::<f64>() * acc;
        let j = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        if !seen[j] {
            seen[j] = true;
            distinct += 1;
            if distinct == probs.iter().filter(|p| **p > 0.0).count() {
                break;
            }
        }
    }
    distinct
}

/// Sampler for the updated base measure H.
struct UpdatedBase<'a> {
    post: &'a DpPosterior,
    empirical_cdf: Vec<u64>,
    empirical_weight: f64,
}

impl<'a> UpdatedBase<'a> {
    fn new(post: &'a DpPosterior) -> Self {
        let mut empirical_cdf = Vec::with_capacity(post.multiplicities.len());
        let mut acc = 0;
        for c in &post.multiplicities {
            acc += c;
            empirical_cdf.push(acc);
        }
        UpdatedBase { post, empirical_cdf, empirical_weight: post.empirical_weight() }
    }

    fn draw(&self, rng: &mut GwRng) -> usize {
        if self.post.n_obs > 0 && rng.random::<f64>() < self.empirical_weight {
            let target = rng.random_range(0..self.post.n_obs);
            self.empirical_cdf.partition_point(|&c| c <= target)
        } else {
            self.post.prior.base.sample(rng) as usize
        }
    }
}

/// The Dirichlet(a·G_0({0}), …, a·G_0({k})) vector implied by DP(a, G_0) when
/// G_0 lives on {0..k}.
pub fn dirichlet_equivalent(prior: &DpPrior, k: usize) -> Result<DirichletParams> {
    let base = &prior.base;
    let outside = (1.0 - base.cdf(k)).max(0.0);
    if outside > OUTSIDE_MASS_TOL {
        return Err(GwError::InvalidParameter(format!("base measure puts mass {outside:e} outside {{0..{k}}}")));
    }
    DirichletParams::new((0..=k).map(|j| prior.a * base.pmf(j)).collect())
}

/// Σ_j P(j) over j up to the base tail cutoff, for normalization checks.
pub fn posterior_mean_pmf_total(post: &DpPosterior) -> f64 {
    let cutoff = post.base().tail_cutoff(TAIL_TOL).max(post.multiplicities.len());
    (0..=cutoff).map(|j| post.posterior_mean_pmf(j)).sum()
}
