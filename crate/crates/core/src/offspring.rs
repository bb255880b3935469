//! Offspring laws, their generating functions and agnostic base measures.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{GwError, Result};
use crate::special::ln_factorial;

/// Tolerance on Σπ_j = 1 for finite laws.
pub const PMF_SUM_TOL: f64 = 1e-12;

/// Tail mass below which an infinite-support law is considered exhausted.
pub const TAIL_TOL: f64 = 1e-12;

/// Poisson rate giving median 1 for the agnostic base measure.
pub const AGNOSTIC_POISSON_LAMBDA: f64 = 0.6954;

/// Geometric parameter giving median 1 for the agnostic base measure: 1 − √2/2.
pub const AGNOSTIC_GEOMETRIC_P: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

// CDF comparisons against 1/2 allow this much rounding slack; the agnostic
// geometric law has CDF(1) = 1/2 exactly in real arithmetic.
const MEDIAN_SLACK: f64 = 1e-12;

/// An offspring distribution on the nonnegative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OffspringDistribution {
    /// Probabilities over {0..k}; stored with no trailing zeros.
    FinitePmf {
        probs: Vec<f64>,
    },
    Poisson {
        lambda: f64,
    },
    /// P(X = j) = p (1 − p)^j, j ≥ 0.
    Geometric {
        p: f64,
    },
}

impl OffspringDistribution {
    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(GwError::InvalidDistribution("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(GwError::InvalidDistribution(format!("negative or non-finite probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(GwError::InvalidDistribution(format!("probabilities sum to {total}, not 1")));
        }
        let mut probs = probs;
        while probs.len() > 1 && probs[probs.len() - 1] == 0.0 {
            probs.pop();
        }
        Ok(OffspringDistribution::FinitePmf { probs })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(GwError::InvalidDistribution(format!("Poisson rate must be positive, got {lambda}")));
        }
        Ok(OffspringDistribution::Poisson { lambda })
    }

    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(GwError::InvalidDistribution(format!("geometric p must lie in (0,1), got {p}")));
        }
        Ok(OffspringDistribution::Geometric { p })
    }

    /// Point mass at `j`.
    pub fn point_mass(j: usize) -> Self {
        let mut probs = vec![0.0; j + 1];
        probs[j] = 1.0;
        OffspringDistribution::FinitePmf { probs }
    }

    /// Check the invariants of a value built without the constructors
    /// (e.g. deserialized).
    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringDistribution::FinitePmf { probs } => Self::finite(probs.clone()).map(|_| ()),
            OffspringDistribution::Poisson { lambda } => Self::poisson(*lambda).map(|_| ()),
            OffspringDistribution::Geometric { p } => Self::geometric(*p).map(|_| ()),
        }
    }

    pub fn pmf(&self, j: usize) -> f64 {
        match self {
            OffspringDistribution::FinitePmf { probs } => probs.get(j).copied().unwrap_or(0.0),
            OffspringDistribution::Poisson { lambda } => {
                let j64 = j as u64;
                (j as f64 * lambda.ln() - lambda - ln_factorial(j64)).exp()
            }
            OffspringDistribution::Geometric { p } => p * (1.0 - p).powi(j as i32),
        }
    }

    pub fn cdf(&self, j: usize) -> f64 {
        match self {
            OffspringDistribution::FinitePmf { probs } => probs.iter().take(j + 1).sum::<f64>().min(1.0),
            OffspringDistribution::Poisson { .. } => (0..=j).map(|i| self.pmf(i)).sum::<f64>().min(1.0),
            OffspringDistribution::Geometric { p } => 1.0 - (1.0 - p).powi(j as i32 + 1),
        }
    }

    /// The offspring average m.
    pub fn mean(&self) -> f64 {
        match self {
            OffspringDistribution::FinitePmf { probs } => probs.iter().enumerate().map(|(j, p)| j as f64 * p).sum(),
            OffspringDistribution::Poisson { lambda } => *lambda,
            OffspringDistribution::Geometric { p } => (1.0 - p) / p,
        }
    }

    /// Probability generating function E[s^X] for s in [0, 1].
    pub fn pgf(&self, s: f64) -> f64 {
        match self {
            _ if s == 1.0 => 1.0,
            OffspringDistribution::FinitePmf { probs } => probs.iter().rev().fold(0.0, |acc, p| acc * s + p),
            OffspringDistribution::Poisson { lambda } => (lambda * (s - 1.0)).exp(),
            OffspringDistribution::Geometric { p } => p / (1.0 - (1.0 - p) * s),
        }
    }

    /// Smallest M with CDF(M) ≥ 1/2, from the exact CDF.
    ///
    /// The Poisson approximation ⌊λ + 1/3 − 1/(50λ)⌋ is off near the jumps:
    /// at λ = 0.6954 it gives 0 while the exact median is 1.
    pub fn median(&self) -> usize {
        let mut cdf = 0.0;
        let mut j = 0;
        loop {
            cdf = match self {
                OffspringDistribution::Geometric { .. } => self.cdf(j),
                _ => cdf + self.pmf(j),
            };
            if cdf >= 0.5 - MEDIAN_SLACK {
                return j;
            }
            j += 1;
        }
    }

    /// Largest offspring size with positive mass, if the support is finite.
    pub fn support_max(&self) -> Option<usize> {
        match self {
            OffspringDistribution::FinitePmf { probs } => Some(probs.len() - 1),
            _ => None,
        }
    }

    /// Smallest J with P(X > J) < `tol`.
    pub fn tail_cutoff(&self, tol: f64) -> usize {
        if let Some(k) = self.support_max() {
            return k;
        }
        let mut cdf = 0.0;
        let mut j = 0;
        loop {
            cdf += self.pmf(j);
            if 1.0 - cdf < tol {
                return j;
            }
            j += 1;
        }
    }

    /// Draw one offspring count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            OffspringDistribution::FinitePmf { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (j, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j as u64;
                    }
                }
                // rounding: fall back to the last positive entry
                probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u64
            }
            OffspringDistribution::Poisson { lambda } => {
                Poisson::new(*lambda).expect("validated rate").sample(rng) as u64
            }
            OffspringDistribution::Geometric { p } => Geometric::new(*p).expect("validated p").sample(rng),
        }
    }
}

impl fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffspringDistribution::FinitePmf { probs } => {
                let parts: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                write!(f, "finite:{}", parts.join(","))
            }
            OffspringDistribution::Poisson { lambda } => write!(f, "poisson:{lambda}"),
            OffspringDistribution::Geometric { p } => write!(f, "geometric:{p}"),
        }
    }
}

impl FromStr for OffspringDistribution {
    type Err = GwError;

    /// Accepts `poisson:<λ>`, `geometric:<p>`, `finite:<p0,p1,...>`,
    /// `poisson:agnostic` and `geometric:agnostic`.
    fn from_str(spec: &str) -> Result<Self> {
        let fail = |reason: &str| GwError::DistributionSpec { spec: spec.to_string(), reason: reason.to_string() };
        let (family, args) = spec.trim().split_once(':').ok_or_else(|| fail("expected <family>:<parameters>"))?;
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| fail(&format!("`{s}` is not a number")));
        let checked = |r: Result<Self>| r.map_err(|e| fail(&e.to_string()));
        match family.trim().to_ascii_lowercase().as_str() {
            "poisson" if args.trim() == "agnostic" => Ok(calibrate_agnostic_base(AgnosticFamily::Poisson)?.base),
            "geometric" if args.trim() == "agnostic" => Ok(calibrate_agnostic_base(AgnosticFamily::Geometric)?.base),
            "poisson" => checked(Self::poisson(number(args)?)),
            "geometric" => checked(Self::geometric(number(args)?)),
            "finite" => {
                let probs = args.split(',').map(number).collect::<Result<Vec<_>>>()?;
                checked(Self::finite(probs))
            }
            other => Err(fail(&format!("unknown family `{other}`"))),
        }
    }
}

/// Families for which an agnostic (median-1) base measure is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgnosticFamily {
    Poisson,
    Geometric,
    /// Two-point base on {0, k}.
    Discrete {
        k: usize,
    },
}

/// A calibrated base measure, with the matching concentration for the
/// discrete family.
#[derive(Debug, Clone, PartialEq)]
pub struct AgnosticBase {
    pub base: OffspringDistribution,
    pub concentration: Option<f64>,
}

/// Base measures that make DP(a, G_0) neutral with respect to m.
///
/// The discrete family returns G_0 = (1/a, 0, …, 0, (a−1)/a) with
/// a = 1 + ln 2 / ln k, i.e. the DP form of the Dirichlet(1, 0, …, 0, ln2/ln k)
/// prior; its neutrality is P(m > 1) = 1/2 under the induced prior, while the
/// median of G_0 itself is 0.
pub fn calibrate_agnostic_base(family: AgnosticFamily) -> Result<AgnosticBase> {
    match family {
        AgnosticFamily::Poisson => {
            Ok(AgnosticBase { base: OffspringDistribution::poisson(AGNOSTIC_POISSON_LAMBDA)?, concentration: None })
        }
        AgnosticFamily::Geometric => {
            Ok(AgnosticBase { base: OffspringDistribution::geometric(AGNOSTIC_GEOMETRIC_P)?, concentration: None })
        }
        AgnosticFamily::Discrete { k } => {
            if k < 2 {
                return Err(GwError::InvalidParameter(format!("agnostic discrete base needs k >= 2, got {k}")));
            }
            let a = 1.0 + 2f64.ln() / (k as f64).ln();
            let mut probs = vec![0.0; k + 1];
            probs[0] = 1.0 / a;
            probs[k] = (a - 1.0) / a;
            Ok(AgnosticBase { base: OffspringDistribution::FinitePmf { probs }, concentration: Some(a) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_law() -> OffspringDistribution {
        OffspringDistribution::finite(vec![0.4, 0.3, 0.2, 0.1]).unwrap()
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(table_law().pmf(2), 0.2);
        assert_eq!(table_law().pmf(7), 0.0);
        let pois = OffspringDistribution::poisson(1.0).unwrap();
        assert!((pois.pmf(0) - (-1f64).exp()).abs() < 1e-15);
        assert!((OffspringDistribution::geometric(0.5).unwrap().pmf(1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mean_examples() {
        assert!((table_law().mean() - 1.0).abs() < 1e-15);
        assert_eq!(OffspringDistribution::poisson(0.6954).unwrap().mean(), 0.6954);
        assert_eq!(OffspringDistribution::geometric(0.5).unwrap().mean(), 1.0);
    }

    #[test]
    fn pgf_examples() {
        assert_eq!(table_law().pgf(1.0), 1.0);
        assert!((table_law().pgf(0.5) - 0.6125).abs() < 1e-15);
        let pois = OffspringDistribution::poisson(1.0).unwrap();
        assert!((pois.pgf(0.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(pois.pgf(1.0), 1.0);
        assert_eq!(OffspringDistribution::geometric(0.3).unwrap().pgf(1.0), 1.0);
    }

    #[test]
    fn median_examples() {
        assert_eq!(OffspringDistribution::poisson(0.6954).unwrap().median(), 1);
        // the rounded 0.2928 has CDF(1) = 0.49987 and median 2; only the exact
        // parameter sits on the boundary
        assert_eq!(OffspringDistribution::geometric(0.2928).unwrap().median(), 2);
        assert_eq!(OffspringDistribution::geometric(AGNOSTIC_GEOMETRIC_P).unwrap().median(), 1);
        // e^{-1/2} ≈ 0.6065 ≥ 1/2
        assert_eq!(OffspringDistribution::poisson(0.5).unwrap().median(), 0);
        assert_eq!(table_law().median(), 1);
    }

    #[test]
    fn agnostic_bases() {
        let pois = calibrate_agnostic_base(AgnosticFamily::Poisson).unwrap();
        assert_eq!(pois.base, OffspringDistribution::Poisson { lambda: 0.6954 });
        assert_eq!(pois.base.median(), 1);
        let geo = calibrate_agnostic_base(AgnosticFamily::Geometric).unwrap();
        match geo.base {
            OffspringDistribution::Geometric { p } => assert!((p - 0.292_893_218_813_452_5).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert_eq!(geo.base.median(), 1);

        let disc = calibrate_agnostic_base(AgnosticFamily::Discrete { k: 4 }).unwrap();
        assert!((disc.concentration.unwrap() - 1.5).abs() < 1e-15);
        let probs = match &disc.base {
            OffspringDistribution::FinitePmf { probs } => probs.clone(),
            _ => unreachable!(),
        };
        assert_eq!(probs.len(), 5);
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((probs[4] - 1.0 / 3.0).abs() < 1e-15);
        assert!(calibrate_agnostic_base(AgnosticFamily::Discrete { k: 1 }).is_err());
    }

    #[test]
    fn constructor_rejections_and_trimming() {
        assert!(OffspringDistribution::finite(vec![0.5, 0.6]).is_err());
        assert!(OffspringDistribution::finite(vec![-0.1, 1.1]).is_err());
        assert!(OffspringDistribution::poisson(0.0).is_err());
        assert!(OffspringDistribution::geometric(1.0).is_err());
        let trimmed = OffspringDistribution::finite(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(trimmed.support_max(), Some(1));
        assert_eq!(OffspringDistribution::finite(vec![1.0, 0.0]).unwrap().support_max(), Some(0));
    }

    #[test]
    fn parse_specs() {
        assert_eq!(
            "poisson:1.5".parse::<OffspringDistribution>().unwrap(),
            OffspringDistribution::Poisson { lambda: 1.5 }
        );
        assert_eq!(
            "geometric:0.25".parse::<OffspringDistribution>().unwrap(),
            OffspringDistribution::Geometric { p: 0.25 }
        );
        assert_eq!("finite:0.4,0.3,0.2,0.1".parse::<OffspringDistribution>().unwrap(), table_law());
        assert_eq!("poisson:agnostic".parse::<OffspringDistribution>().unwrap().mean(), 0.6954);
        assert!("geometric:agnostic".parse::<OffspringDistribution>().is_ok());
        assert!("binomial:3".parse::<OffspringDistribution>().is_err());
        assert!("poisson".parse::<OffspringDistribution>().is_err());
        assert!("finite:0.5,x".parse::<OffspringDistribution>().is_err());
        let law = table_law();
        assert_eq!(law.to_string().parse::<OffspringDistribution>().unwrap(), law);
    }

    #[test]
    fn infinite_support_pmfs_normalize() {
        for law in [
            OffspringDistribution::poisson(0.6954).unwrap(),
            OffspringDistribution::poisson(4.0).unwrap(),
            OffspringDistribution::geometric(0.3).unwrap(),
            OffspringDistribution::geometric(0.05).unwrap(),
        ] {
            let cutoff = law.tail_cutoff(TAIL_TOL);
            let total: f64 = (0..=cutoff).map(|j| law.pmf(j)).sum();
            assert!((total - 1.0).abs() < 1e-10, "{law}: {total}");
        }
    }

    fn arb_law() -> impl Strategy<Value = OffspringDistribution> {
        prop_oneof![
            prop::collection::vec(0.0f64..1.0, 1..7).prop_filter_map("nonzero", |w| {
                let total: f64 = w.iter().sum();
                (total > 1e-6).then(|| OffspringDistribution::finite(w.iter().map(|x| x / total).collect()).unwrap())
            }),
            (0.05f64..6.0).prop_map(|l| OffspringDistribution::poisson(l).unwrap()),
            (0.1f64..0.95).prop_map(|p| OffspringDistribution::geometric(p).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn pgf_monotone_convex_normalized(law in arb_law()) {
            let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
            let values: Vec<f64> = grid.iter().map(|s| law.pgf(*s)).collect();
            prop_assert_eq!(law.pgf(1.0), 1.0);
            for w in values.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-14);
            }
            for w in values.windows(3) {
                prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
            }
        }

        #[test]
        fn pgf_slope_at_one_is_mean(law in arb_law()) {
            // second-order one-sided difference at s = 1
            let h = 1e-5;
            let slope = (3.0 * law.pgf(1.0) - 4.0 * law.pgf(1.0 - h) + law.pgf(1.0 - 2.0 * h)) / (2.0 * h);
            prop_assert!((slope - law.mean()).abs() <= 1e-6, "slope {} mean {}", slope, law.mean());
        }

        #[test]
        fn finite_mean_is_weighted_sum(law in arb_law()) {
            if let Some(k) = law.support_max() {
                let direct: f64 = (0..=k).map(|j| j as f64 * law.pmf(j)).sum();
                prop_assert_eq!(direct, law.mean());
            }
        }
    }
}
