//! Extinction probability: the smallest root of G(q) = q.

use serde::Serialize;

use crate::error::{GwError, Result};
use crate::offspring::OffspringDistribution;

pub const DEFAULT_TOL: f64 = 1e-12;

/// Laws with |m − 1| ≤ this are treated as critical.
pub const CRITICAL_BAND: f64 = 1e-12;

/// Upper end of the bisection bracket, excluding the trivial root q = 1.
const BRACKET_TOP: f64 = 1.0 - 1e-9;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtinctionResult {
    pub q: f64,
    pub residual: f64,
    pub iterations: usize,
    pub method: ExtinctionMethod,
}

/// Extinction probability of a GW process with offspring law `dist`.
///
/// q = 1 when m ≤ 1; geometric laws use q = 1/m; everything else is solved by
/// bisection on [0, 1 − 1e-9], where G(s) − s changes sign exactly once.
pub fn extinction_probability(dist: &OffspringDistribution, tol: f64) -> Result<ExtinctionResult> {
    let m = dist.mean();
    if m <= 1.0 + CRITICAL_BAND {
        return Ok(ExtinctionResult { q: 1.0, residual: 0.0, iterations: 0, method: ExtinctionMethod::ClosedForm });
    }
    if let OffspringDistribution::Geometric { p } = dist {
        let q = p / (1.0 - p);
        return Ok(ExtinctionResult {
            q,
            residual: (dist.pgf(q) - q).abs(),
            iterations: 0,
            method: ExtinctionMethod::ClosedForm,
        });
    }
    bisect_fixed_point(|s| dist.pgf(s), tol)
}

/// Smallest fixed point in [0, 1) of a convex generating function with slope
/// greater than one at s = 1.
pub fn bisect_fixed_point<F: Fn(f64) -> f64>(pgf: F, tol: f64) -> Result<ExtinctionResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(GwError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let excess = |s: f64| pgf(s) - s;
    let (mut lo, mut hi) = (0.0f64, BRACKET_TOP);
    if excess(lo) <= 0.0 {
        // G(0) = 0: no mass at zero, the process never dies out
        return Ok(ExtinctionResult {
            q: 0.0,
            residual: excess(0.0).abs(),
            iterations: 0,
            method: ExtinctionMethod::Bisection,
        });
    }
    if excess(hi) > 0.0 {
        return Err(GwError::NoConvergence { iterations: 0, residual: excess(hi) });
    }
    let mut mid = 0.5 * (lo + hi);
    for iteration in 1..=MAX_ITER {
        mid = 0.5 * (lo + hi);
        let value = excess(mid);
        if value.abs() <= tol || mid == lo || mid == hi {
            if value.abs() <= tol {
                return Ok(ExtinctionResult {
                    q: mid,
                    residual: value.abs(),
                    iterations: iteration,
                    method: ExtinctionMethod::Bisection,
                });
            }
            break;
        }
        if value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(GwError::NoConvergence { iterations: MAX_ITER, residual: excess(mid).abs() })
}

/// Extinction probability of the geometric law with mean `m_hat`: min(1, 1/m̂).
pub fn geometric_extinction_for_mean(m_hat: f64) -> f64 {
    if m_hat <= 1.0 {
        1.0
    } else {
        1.0 / m_hat
    }
}

/// Extinction probability of the Poisson law with mean `m_hat`.
pub fn poisson_extinction_for_mean(m_hat: f64) -> Result<f64> {
    if m_hat <= 1.0 + CRITICAL_BAND {
        return Ok(1.0);
    }
    Ok(extinction_probability(&OffspringDistribution::poisson(m_hat)?, DEFAULT_TOL)?.q)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: plain bisection on e^{λ(q−1)} − q with no shortcuts.
    fn poisson_oracle(lambda: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (lambda * (mid - 1.0)).exp() - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn geometric_closed_form() {
        let r = extinction_probability(&OffspringDistribution::geometric(1.0 / 3.0).unwrap(), DEFAULT_TOL).unwrap();
        assert!((r.q - 0.5).abs() < 1e-15);
        assert_eq!(r.method, ExtinctionMethod::ClosedForm);
    }

    #[test]
    fn critical_is_certain_extinction() {
        let law = OffspringDistribution::finite(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let r = extinction_probability(&law, DEFAULT_TOL).unwrap();
        assert_eq!(r.q, 1.0);
        assert_eq!(r.method, ExtinctionMethod::ClosedForm);
        assert_eq!(extinction_probability(&OffspringDistribution::poisson(0.7).unwrap(), DEFAULT_TOL).unwrap().q, 1.0);
        assert_eq!(
            extinction_probability(&OffspringDistribution::geometric(0.5).unwrap(), DEFAULT_TOL).unwrap().q,
            1.0
        );
    }

    #[test]
    fn poisson_against_oracle() {
        let r = extinction_probability(&OffspringDistribution::poisson(1.5).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(r.method, ExtinctionMethod::Bisection);
        assert!(r.residual <= 1e-12);
        assert!((r.q - poisson_oracle(1.5)).abs() < 1e-10);
        assert!((r.q - 0.417188).abs() < 1e-5);
    }

    #[test]
    fn poisson_monotone_in_rate() {
        let qs: Vec<f64> = (1..=40)
            .map(|i| 1.0 + i as f64 * 0.1)
            .map(|l| extinction_probability(&OffspringDistribution::poisson(l).unwrap(), DEFAULT_TOL).unwrap().q)
            .collect();
        assert!(qs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn forced_bisection_matches_geometric_closed_form() {
        for &p in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.45] {
            let law = OffspringDistribution::geometric(p).unwrap();
            let closed = extinction_probability(&law, DEFAULT_TOL).unwrap().q;
            let forced = bisect_fixed_point(|s| law.pgf(s), DEFAULT_TOL).unwrap().q;
            assert!((closed - forced).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn no_zero_mass_never_dies() {
        let law = OffspringDistribution::finite(vec![0.0, 0.5, 0.5]).unwrap();
        assert_eq!(extinction_probability(&law, DEFAULT_TOL).unwrap().q, 0.0);
    }

    #[test]
    fn mean_based_helpers() {
        assert!((geometric_extinction_for_mean(1.353) - 0.739).abs() < 1e-3);
        assert_eq!(geometric_extinction_for_mean(1.0), 1.0);
        assert_eq!(poisson_extinction_for_mean(0.9).unwrap(), 1.0);
        assert!((poisson_extinction_for_mean(1.5).unwrap() - poisson_oracle(1.5)).abs() < 1e-10);
    }
}
