//! Classical and parametric-Bayesian estimators of the offspring average.

use num_rational::Ratio;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{GwError, Result};
use crate::process::{GenerationSeries, OffspringCounts};
use crate::special::chi_square_sf;

/// Stand-in for the "≈ 0" entries of the agnostic Dirichlet priors.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Dirichlet parameters over {0..k}.
///
/// Zero entries are allowed and denote components that are almost surely 0
/// (they arise when converting DP priors whose base leaves gaps in {0..k}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(GwError::InvalidParameter("Dirichlet needs at least two components".into()));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(GwError::InvalidParameter("Dirichlet parameters must be finite and nonnegative".into()));
        }
        if alpha.iter().sum::<f64>() <= 0.0 {
            return Err(GwError::InvalidParameter("Dirichlet parameters are all zero".into()));
        }
        Ok(DirichletParams { alpha })
    }

    /// The flat prior (c, …, c) on {0..k}.
    pub fn flat(k: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; k + 1])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// E[π_j] = α_j / Σα.
    pub fn mean_vector(&self) -> Vec<f64> {
        let total = self.total();
        self.alpha.iter().map(|a| a / total).collect()
    }

    /// One draw of π.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        sample_dirichlet(&self.alpha, rng)
    }
}

/// Draw from Dirichlet(alpha) via normalized Gamma variates.
///
/// Shapes below one are drawn on the log scale, log G(α) = log G(α + 1) +
/// log(U)/α, so tiny shapes such as 1e-4 do not underflow the normalization.
/// Zero shapes yield exact zeros.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a <= 0.0 {
                f64::NEG_INFINITY
            } else if a < 1.0 {
                let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                g.ln() + u.ln() / a
            } else {
                let g: f64 = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
                g.ln()
            }
        })
        .collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Non-standard beta law of m on [c, d] with shapes (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MDensityParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MDensityParams {
    pub fn pdf(&self, m: f64) -> f64 {
        if m <= self.c || m >= self.d {
            return 0.0;
        }
        let ln_beta = crate::special::ln_gamma(self.a) + crate::special::ln_gamma(self.b)
            - crate::special::ln_gamma(self.a + self.b);
        ((self.a - 1.0) * (m - self.c).ln() + (self.b - 1.0) * (self.d - m).ln()
            - ln_beta
            - (self.a + self.b - 1.0) * (self.d - self.c).ln())
        .exp()
    }

    /// Median when one shape equals one: Beta(a, 1) has median 2^{-1/a} and
    /// Beta(1, b) has median 1 − 2^{-1/b}.
    pub fn median(&self) -> Option<f64> {
        let unit = if self.b == 1.0 {
            0.5f64.powf(1.0 / self.a)
        } else if self.a == 1.0 {
            1.0 - 0.5f64.powf(1.0 / self.b)
        } else {
            return None;
        };
        Some(self.c + (self.d - self.c) * unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    SubcriticalOrCritical,
    Supercritical,
}

impl Classification {
    pub fn truth(m: f64) -> Self {
        if m > 1.0 {
            Classification::Supercritical
        } else {
            Classification::SubcriticalOrCritical
        }
    }
}

/// A statistic used to decide criticality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    /// Point estimate of m, threshold 1.
    MeanEstimate(f64),
    /// Posterior probability that m > 1, threshold 1/2.
    ProbSupercritical(f64),
}

/// m̂ < 1 or P* < 1/2 ⇒ (sub)critical; ties go supercritical.
pub fn classify(decision: Decision) -> Classification {
    let supercritical = match decision {
        Decision::MeanEstimate(m) => m >= 1.0,
        Decision::ProbSupercritical(p) => p >= 0.5,
    };
    if supercritical {
        Classification::Supercritical
    } else {
        Classification::SubcriticalOrCritical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub m_hat: f64,
    pub m_var: f64,
    pub p_supercritical: Option<f64>,
    pub classification: Classification,
}

impl PosteriorSummary {
    pub fn from_mean(m_hat: f64, m_var: f64) -> Self {
        PosteriorSummary {
            m_hat,
            m_var,
            p_supercritical: None,
            classification: classify(Decision::MeanEstimate(m_hat)),
        }
    }

    /// Summary driven by P(m > 1); `m_hat` still carries a point estimate for reporting.
    pub fn from_probability(p: f64, m_hat: f64) -> Self {
        PosteriorSummary {
            m_hat,
            m_var: 0.0,
            p_supercritical: Some(p),
            classification: classify(Decision::ProbSupercritical(p)),
        }
    }
}

fn require_transition(series: &GenerationSeries) -> Result<()> {
    if series.generations() == 0 {
        return Err(GwError::InvalidSeries("need at least two generation totals".into()));
    }
    Ok(())
}

/// Total children over total parents, (Z_1 + … + Z_n) / (Z_0 + … + Z_{n−1}).
pub fn mle_mean(series: &GenerationSeries) -> Result<f64> {
    require_transition(series)?;
    Ok(series.total_children() as f64 / series.total_parents() as f64)
}

/// [`mle_mean`] in exact rational arithmetic.
pub fn mle_mean_exact(series: &GenerationSeries) -> Result<Ratio<u64>> {
    require_transition(series)?;
    Ok(Ratio::new(series.total_children(), series.total_parents()))
}

/// π̂_j = Σ_i Z_ij / Σ_{ij} Z_ij from complete data, exactly.
pub fn mle_offspring_pmf(counts: &OffspringCounts) -> Result<Vec<Ratio<u64>>> {
    let parents = counts.total_parents();
    if parents == 0 {
        return Err(GwError::InvalidCounts("no parents observed".into()));
    }
    Ok(counts.column_sums().into_iter().map(|c| Ratio::new(c, parents)).collect())
}

/// Which totals enter the chi-square approximation to P(m > 1) under the
/// improper prior 1/m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeydeVariant {
    /// P(χ²_{2(Z_n − Z_0)} > 2 Z_{n−1}) with single generation totals.
    #[default]
    AsPrinted,
    /// P(χ²_{2 Σ_{i≥1} Z_i} > 2 Σ_{i<n} Z_i), the exact gamma posterior of a
    /// Poisson law under the 1/m prior.
    Cumulative,
    /// P(χ²_{2(Z_n − Z_0)} > 2 Σ_{i<n} Z_i): the last generation against the
    /// cumulative parent total.
    CumulativeParents,
}

impl std::str::FromStr for HeydeVariant {
    type Err = GwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" | "as-printed" => Ok(HeydeVariant::AsPrinted),
            "cumulative" => Ok(HeydeVariant::Cumulative),
            "cumulative-parents" => Ok(HeydeVariant::CumulativeParents),
            other => Err(GwError::InvalidParameter(format!("unknown Heyde variant `{other}`"))),
        }
    }
}

/// Degrees of freedom and threshold for a Heyde variant.
pub fn heyde_chi_square_args(series: &GenerationSeries, variant: HeydeVariant) -> Result<(i64, u64)> {
    require_transition(series)?;
    let z = series.sizes();
    let n = series.generations();
    let single_df = 2 * (z[n] as i64 - z[0] as i64);
    Ok(match variant {
        HeydeVariant::AsPrinted => (single_df, 2 * z[n - 1]),
        HeydeVariant::Cumulative => (2 * series.total_children() as i64, 2 * series.total_parents()),
        HeydeVariant::CumulativeParents => (single_df, 2 * series.total_parents()),
    })
}

/// Heyde's approximation to P(m > 1) with the printed single-total reading.
pub fn heyde_p_supercritical(series: &GenerationSeries) -> Result<f64> {
    heyde_p_supercritical_with(series, HeydeVariant::AsPrinted)
}

/// Heyde's approximation; zero when the degrees of freedom are not positive.
pub fn heyde_p_supercritical_with(series: &GenerationSeries, variant: HeydeVariant) -> Result<f64> {
    let (df, threshold) = heyde_chi_square_args(series, variant)?;
    if df <= 0 {
        return Ok(0.0);
    }
    Ok(chi_square_sf(df as f64, threshold as f64))
}

/// Conjugate update β_j = α_j + Σ_i Z_ij.
pub fn dirichlet_posterior(prior: &DirichletParams, counts: &OffspringCounts) -> Result<DirichletParams> {
    let observed = counts.max_observed();
    if counts.total_parents() > 0 && observed > prior.k() {
        return Err(GwError::SupportMismatch { size: observed, max: prior.k() });
    }
    let mut beta = prior.alpha.clone();
    for (b, c) in beta.iter_mut().zip(counts.column_sums()) {
        *b += c as f64;
    }
    DirichletParams::new(beta)
}

/// Mean and variance of m = Σ j π_j under Dirichlet(β).
///
/// Var(m) = h′Σh with Σ the Dirichlet covariance, which reduces to
/// (Σ j² μ_j − (Σ j μ_j)²) / (β + 1).
pub fn posterior_m_moments(params: &DirichletParams) -> (f64, f64) {
    let mu = params.mean_vector();
    let first: f64 = mu.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let second: f64 = mu.iter().enumerate().map(|(j, p)| (j * j) as f64 * p).sum();
    let var = ((second - first * first) / (params.total() + 1.0)).max(0.0);
    (first, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgnosticVariant {
    /// α_0 = 1, α_k = ln 2 / ln k.
    A,
    /// α_k = 1, α_0 = ln 2 / ln(k / (k − 1)).
    B,
}

impl std::str::FromStr for AgnosticVariant {
    type Err = GwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(AgnosticVariant::A),
            "B" | "b" => Ok(AgnosticVariant::B),
            other => Err(GwError::InvalidParameter(format!("unknown agnostic variant `{other}`"))),
        }
    }
}

/// Dirichlet prior on {0..k} whose induced law of m has median 1.
pub fn agnostic_dirichlet_prior(k: usize, variant: AgnosticVariant, eps: f64) -> Result<DirichletParams> {
    if k < 2 {
        return Err(GwError::InvalidParameter(format!("agnostic Dirichlet prior needs k >= 2, got {k}")));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(GwError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let kf = k as f64;
    let mut alpha = vec![eps; k + 1];
    match variant {
        AgnosticVariant::A => {
            alpha[0] = 1.0;
            alpha[k] = 2f64.ln() / kf.ln();
        }
        AgnosticVariant::B => {
            alpha[0] = 2f64.ln() / (kf / (kf - 1.0)).ln();
            alpha[k] = 1.0;
        }
    }
    DirichletParams::new(alpha)
}

/// Shapes and endpoints of the non-standard beta induced on m.
pub fn induced_m_density(params: &DirichletParams) -> MDensityParams {
    let alpha = params.alpha();
    let k = params.k();
    let total = params.total();
    let inner = 1..k;
    let c: f64 = inner.clone().map(|j| j as f64 * alpha[j] / total).sum();
    let d: f64 = k as f64 - inner.map(|j| (k - j) as f64 * alpha[j] / total).sum::<f64>();
    MDensityParams { a: alpha[k], b: alpha[0], c, d }
}
