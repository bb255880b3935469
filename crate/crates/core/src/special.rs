//! Log-gamma and the regularized incomplete gamma functions.
//!
//! Q(a, x) uses the series for P when x < a + 1 and a modified Lentz continued
//! fraction otherwise, so the smaller of P and Q is always computed directly.

use std::f64::consts::PI;

const MAX_ITER: usize = 1000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// ln(j!) with exact accumulation for small j.
pub fn ln_factorial(j: u64) -> f64 {
    if j < 32 {
        (2..=j).map(|i| (i as f64).ln()).sum()
    } else {
        ln_gamma(j as f64 + 1.0)
    }
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma P(a, x). Requires a > 0, x ≥ 0.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_fraction(a, x)
    }
}

/// P(χ²_df > x).
pub fn chi_square_sf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..20u32 {
            assert!((ln_gamma(n as f64 + 1.0) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= (n + 1) as f64;
        }
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn chi_square_even_df_closed_forms() {
        // df = 2r: survival is e^{-x/2} Σ_{i<r} (x/2)^i / i!
        for &x in &[0.5, 2.0, 4.0, 6.0, 13.0, 40.0] {
            for r in 1..12u32 {
                let h: f64 = x / 2.0;
                let mut term = 1.0;
                let mut sum = 0.0;
                for i in 0..r {
                    if i > 0 {
                        term *= h / i as f64;
                    }
                    sum += term;
                }
                let expect = (-h).exp() * sum;
                let got = chi_square_sf(2.0 * r as f64, x);
                assert!((got - expect).abs() < 1e-13, "x={x} r={r} {got} vs {expect}");
            }
        }
    }

    #[test]
    fn p_plus_q_is_one() {
        for &a in &[0.1, 0.5, 1.0, 3.5, 20.0, 150.0] {
            for &x in &[0.01, 0.7, 2.0, 10.0, 30.0, 200.0] {
                assert!((gamma_p(a, x) + gamma_q(a, x) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn matches_statrs_reference() {
        use statrs::function::gamma::gamma_ur;
        for &a in &[0.3, 1.0, 2.5, 5.0, 17.0, 80.0] {
            for &x in &[0.2, 1.0, 3.0, 9.0, 25.0, 100.0] {
                let reference = gamma_ur(a, x);
                assert!((gamma_q(a, x) - reference).abs() < 1e-12, "a={a} x={x}");
            }
        }
    }
}
