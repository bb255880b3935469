//! Blocked Gibbs sampler for generation totals.
//!
//! Each sweep imputes the complete data given the current offspring law
//! (a multinomial per generation, conditioned on producing exactly the next
//! generation's total) and then draws a new law from its conjugate posterior.
//! The conditioning is done by accept-reject.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::dp::{dp_posterior, DpPrior};
use crate::error::{GwError, Result};
use crate::estimators::{dirichlet_posterior, DirichletParams, PosteriorSummary};
use crate::process::{GenerationSeries, OffspringCounts};
use crate::rng::{GwRng, SeedSpec};

pub const DEFAULT_ITERATIONS: usize = 2000;
pub const DEFAULT_BURN_IN: usize = 500;
pub const DEFAULT_K_TRUNC: usize = 10;
pub const DEFAULT_MAX_TRIES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GibbsPrior {
    /// Dirichlet over {0..k_trunc}; must have k_trunc + 1 components.
    Dirichlet(DirichletParams),
    /// DP prior, used through its Dirichlet marginal on
    /// {0}, …, {k_trunc − 1}, [k_trunc, ∞).
    Dp(DpPrior),
}

/// How Step 1 draws a row given π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Accept-reject against the unconstrained multinomial, capped by `max_tries`.
    #[default]
    AcceptReject,
    /// Direct draw from the conditional law via convolution powers of π.
    Exact,
}

impl std::str::FromStr for Imputation {
    type Err = GwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept-reject" => Ok(Imputation::AcceptReject),
            "exact" => Ok(Imputation::Exact),
            _ => Err(GwError::InvalidParameter(format!("unknown imputation {s:?} (accept-reject or exact)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub k_trunc: usize,
    pub max_tries: u64,
    pub prior: GibbsPrior,
    pub imputation: Imputation,
    /// Keep every post burn-in π draw.
    pub keep_pi: bool,
}

impl GibbsConfig {
    pub fn new(prior: GibbsPrior, k_trunc: usize) -> Self {
        GibbsConfig {
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            k_trunc,
            max_tries: DEFAULT_MAX_TRIES,
            prior,
            imputation: Imputation::AcceptReject,
            keep_pi: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(GwError::InvalidParameter(format!(
                "need 0 <= burn_in < iterations, got burn_in {} and iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.k_trunc == 0 {
            return Err(GwError::InvalidParameter("k_trunc must be positive".into()));
        }
        if self.max_tries == 0 {
            return Err(GwError::InvalidParameter("max_tries must be positive".into()));
        }
        if let GibbsPrior::Dirichlet(prior) = &self.prior {
            if prior.k() != self.k_trunc {
                return Err(GwError::InvalidParameter(format!(
                    "Dirichlet prior covers {{0..{}}} but k_trunc is {}",
                    prior.k(),
                    self.k_trunc
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsChain {
    /// Offspring mean of each post burn-in draw of π.
    pub m_samples: Vec<f64>,
    pub pi_samples: Option<Vec<Vec<f64>>>,
    /// Accept-reject attempts per parent generation, summed over sweeps.
    pub acceptance_stats: Vec<u64>,
    /// Imputed complete data from the final sweep.
    pub last_counts: OffspringCounts,
}

impl GibbsChain {
    /// Batch-means Monte Carlo standard error of the mean of `m_samples`.
    pub fn batch_means_se(&self, batches: usize) -> f64 {
        let n = self.m_samples.len();
        let batches = batches.clamp(1, n.max(1));
        let size = n / batches;
        if size == 0 || batches < 2 {
            return f64::NAN;
        }
        let means: Vec<f64> =
            self.m_samples.chunks_exact(size).take(batches).map(|c| c.iter().sum::<f64>() / size as f64).collect();
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        (var / means.len() as f64).sqrt()
    }
}

fn check_feasible(parents: u64, children: u64, k: usize) -> Result<()> {
    let infeasible = if parents == 0 { children > 0 } else { children > k as u64 * parents };
    if infeasible {
        return Err(GwError::Infeasible { parents, children, k });
    }
    Ok(())
}

/// Draw (Z_i0, …, Z_ik) ~ Multinomial(z_i, probs) conditioned on
/// Σ_j j·Z_ij = z_next, by accept-reject.
pub fn constrained_multinomial(
    z_i: u64,
    z_next: u64,
    probs: &[f64],
    seed: SeedSpec,
    max_tries: u64,
) -> Result<Vec<u64>> {
    let mut rng = seed.rng();
    sample_constrained_row(z_i, z_next, probs, &mut rng, max_tries, 0).map(|(row, _)| row)
}

/// As [`constrained_multinomial`] with a caller-owned generator; also returns the
/// number of attempts. `generation` labels errors.
pub fn sample_constrained_row(
    z_i: u64,
    z_next: u64,
    probs: &[f64],
    rng: &mut GwRng,
    max_tries: u64,
    generation: usize,
) -> Result<(Vec<u64>, u64)> {
    if probs.is_empty() {
        return Err(GwError::InvalidParameter("empty probability vector".into()));
    }
    let k = probs.len() - 1;
    check_feasible(z_i, z_next, k)?;
    let mut row = vec![0u64; k + 1];
    if z_i == 0 {
        return Ok((row, 0));
    }
    if z_i <= PER_PARENT_MAX {
        return per_parent_rows(z_i, z_next, probs, rng, max_tries, generation, row);
    }
    // tail[j] = Σ_{l ≥ j} p_l
    let mut tail = vec![0.0; k + 2];
    for j in (0..=k).rev() {
        tail[j] = tail[j + 1] + probs[j].max(0.0);
    }
    for attempt in 1..=max_tries {
        row.iter_mut().for_each(|c| *c = 0);
        let mut parents_left = z_i;
        let mut children_left = z_next as i64;
        let mut ok = true;
        for j in 0..=k {
            if parents_left == 0 {
                break;
            }
            let count = if j == k || tail[j] <= 0.0 {
                parents_left
            } else {
                let p = (probs[j].max(0.0) / tail[j]).clamp(0.0, 1.0);
                Binomial::new(parents_left, p).expect("p in [0,1]").sample(rng)
            };
            row[j] = count;
            parents_left -= count;
            children_left -= (j as u64 * count) as i64;
            // the parents still unassigned each have between j + 1 and k children
            let lo = (j as i64 + 1) * parents_left as i64;
            let hi = k as i64 * parents_left as i64;
            if children_left < lo.min(hi) || children_left > hi {
                ok = false;
                break;
            }
        }
        if ok && children_left == 0 && parents_left == 0 {
            return Ok((row, attempt));
        }
    }
    Err(GwError::RetriesExhausted { generation, attempts: max_tries })
}

/// Rows with at most this many parents are drawn one parent at a time.
const PER_PARENT_MAX: u64 = 16;

/// Accept-reject with one categorical draw per parent, rejecting as soon as
/// the remaining parents cannot produce the remaining children.
fn per_parent_rows(
    z_i: u64,
    z_next: u64,
    probs: &[f64],
    rng: &mut GwRng,
    max_tries: u64,
    generation: usize,
    mut row: Vec<u64>,
) -> Result<(Vec<u64>, u64)> {
    let k = probs.len() - 1;
    let mut cdf = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    for p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    for attempt in 1..=max_tries {
        row.iter_mut().for_each(|c| *c = 0);
        let mut children_left = z_next as i64;
        let mut ok = true;
        for parents_left in (0..z_i).rev() {
            let u = rng.random::<f64>() * total;
            let j = cdf.partition_point(|&c| c <= u).min(k);
            row[j] += 1;
            children_left -= j as i64;
            if children_left < 0 || children_left > (k as u64 * parents_left) as i64 {
                ok = false;
                break;
            }
        }
        if ok && children_left == 0 {
            return Ok((row, attempt));
        }
    }
    Err(GwError::RetriesExhausted { generation, attempts: max_tries })
}

/// Exact draw from Multinomial(z_i, probs) conditioned on Σ_j j·row_j = z_next.
///
/// Parents are drawn one at a time: the next parent has j children with
/// probability ∝ p_j · P(remaining parents have the remaining children), the
/// latter read from normalized convolution powers of `probs`.
pub fn sample_constrained_row_exact(z_i: u64, z_next: u64, probs: &[f64], rng: &mut GwRng) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return Err(GwError::InvalidParameter("empty probability vector".into()));
    }
    let k = probs.len() - 1;
    check_feasible(z_i, z_next, k)?;
    let mut row = vec![0u64; k + 1];
    if z_i == 0 {
        return Ok(row);
    }
    let (r_max, c_max) = (z_i as usize, z_next as usize);
    // powers[r][c] ∝ P(r draws sum to c), each row scaled to max 1
    let mut powers: Vec<Vec<f64>> = Vec::with_capacity(r_max);
    let mut current = vec![0.0; c_max + 1];
    current[0] = 1.0;
    powers.push(current.clone());
    for _ in 1..r_max {
        let mut next = vec![0.0; c_max + 1];
        for (c, &w) in current.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, &p) in probs.iter().enumerate().take(c_max + 1 - c) {
                next[c + j] += w * p;
            }
        }
        let top = next.iter().cloned().fold(0.0, f64::max);
        if top > 0.0 {
            next.iter_mut().for_each(|x| *x /= top);
        }
        powers.push(next.clone());
        current = next;
    }
    let mut children_left = c_max;
    let mut weights = vec![0.0; k + 1];
    for remaining in (0..r_max).rev() {
        let tail = &powers[remaining];
        for (j, w) in weights.iter_mut().enumerate() {
            *w = if j <= children_left { probs[j].max(0.0) * tail[children_left - j] } else { 0.0 };
        }
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(GwError::InvalidParameter(format!(
                "no mass on rows with {z_i} parents and {z_next} children under the current probabilities"
            )));
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = k;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                pick = j;
                break;
            }
            u -= w;
        }
        while weights[pick] == 0.0 {
            pick -= 1;
        }
        row[pick] += 1;
        children_left -= pick;
    }
    debug_assert_eq!(children_left, 0);
    Ok(row)
}

/// Feasible starting imputation: children split as evenly as possible.
fn even_split(parents: u64, children: u64, k: usize) -> Vec<u64> {
    let mut row = vec![0u64; k + 1];
    if parents == 0 {
        return row;
    }
    let q = children / parents;
    let r = children % parents;
    row[q as usize] += parents - r;
    if r > 0 {
        row[q as usize + 1] += r;
    }
    row
}

fn offspring_mean(pi: &[f64]) -> f64 {
    pi.iter().enumerate().map(|(j, p)| j as f64 * p).sum()
}

/// Run the blocked Gibbs sampler on generation totals.
///
/// The chain starts from an even-split imputation and draws π from its
/// conditional posterior, then alternates imputation and posterior draws.
pub fn run_chain(series: &GenerationSeries, config: &GibbsConfig, seed: SeedSpec) -> Result<GibbsChain> {
    config.validate()?;
    let z = series.sizes();
    let k = config.k_trunc;
    let transitions: Vec<(u64, u64)> = z.windows(2).map(|w| (w[0], w[1])).filter(|(p, _)| *p > 0).collect();
    for (generation, &(parents, children)) in transitions.iter().enumerate() {
        check_feasible(parents, children, k).map_err(|e| match e {
            GwError::Infeasible { parents, children, k } => GwError::Input {
                context: format!("generation {generation}"),
                message: GwError::Infeasible { parents, children, k }.to_string(),
            },
            other => other,
        })?;
    }

    let mut rng = seed.rng();
    let mut rows: Vec<Vec<u64>> = transitions.iter().map(|&(p, c)| even_split(p, c, k)).collect();
    let mut pi = draw_pi(&config.prior, &rows, k, &mut rng)?;
    let kept = config.iterations - config.burn_in;
    let mut m_samples = Vec::with_capacity(kept);
    let mut pi_samples = config.keep_pi.then(|| Vec::with_capacity(kept));
    let mut acceptance_stats = vec![0u64; transitions.len()];

    for sweep in 1..=config.iterations {
        for (generation, &(parents, children)) in transitions.iter().enumerate() {
            let (row, attempts) = match config.imputation {
                Imputation::AcceptReject => {
                    sample_constrained_row(parents, children, &pi, &mut rng, config.max_tries, generation)?
                }
                Imputation::Exact => (sample_constrained_row_exact(parents, children, &pi, &mut rng)?, 1),
            };
            debug_assert_eq!(row.iter().sum::<u64>(), parents);
            debug_assert_eq!(row.iter().enumerate().map(|(j, c)| j as u64 * c).sum::<u64>(), children);
            acceptance_stats[generation] += attempts;
            rows[generation] = row;
        }
        pi = draw_pi(&config.prior, &rows, k, &mut rng)?;
        if sweep > config.burn_in {
            m_samples.push(offspring_mean(&pi));
            if let Some(store) = pi_samples.as_mut() {
                store.push(pi.clone());
            }
        }
    }

    Ok(GibbsChain { m_samples, pi_samples, acceptance_stats, last_counts: counts_from_rows(rows)? })
}

fn counts_from_rows(rows: Vec<Vec<u64>>) -> Result<OffspringCounts> {
    if rows.is_empty() {
        return Ok(OffspringCounts::empty(0));
    }
    OffspringCounts::new(rows)
}

fn draw_pi(prior: &GibbsPrior, rows: &[Vec<u64>], k: usize, rng: &mut GwRng) -> Result<Vec<f64>> {
    let counts = if rows.is_empty() { OffspringCounts::empty(k) } else { OffspringCounts::new(rows.to_vec())? };
    let posterior = match prior {
        GibbsPrior::Dirichlet(params) => dirichlet_posterior(params, &counts)?,
        GibbsPrior::Dp(dp) => dp_posterior(dp, &counts).partition_marginal(k)?,
    };
    let pi = posterior.sample(rng);
    if pi.iter().any(|p| !p.is_finite()) {
        return Err(GwError::InvalidParameter("posterior draw produced a non-finite probability".into()));
    }
    Ok(pi)
}

/// Point estimate, variance and classification from a chain.
pub fn chain_summary(chain: &GibbsChain) -> Result<PosteriorSummary> {
    summarize_m_samples(&chain.m_samples)
}

pub fn summarize_m_samples(samples: &[f64]) -> Result<PosteriorSummary> {
    if samples.is_empty() {
        return Err(GwError::EmptyChain);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { samples.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(PosteriorSummary::from_mean(mean, var))
}
