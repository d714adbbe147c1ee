//! Paired two-sided Student t-test over per-topic metric values.
//!
//! The p-value comes from the regularized incomplete beta function
//! `I_x(a, b)` evaluated by Lentz's continued fraction, the classic
//! numerical recipe; with the convergence threshold used here the CDF is
//! accurate to about 1e-10, comfortably inside the 1e-8 the report format
//! documents.

use std::collections::BTreeMap;

use serde::Serialize;

use super::EvalError;

/// The outcome of a paired t-test. `degenerate` is set when the test
/// statistic is undefined: fewer than two pairs, or zero variance in the
/// differences (then `t = 0, p = 1` if the mean difference is zero, else
/// `t = +/-inf, p = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestReport {
    pub t_statistic: f64,
    pub p_value: f64,
    pub n_pairs: usize,
    pub degenerate: bool,
}

/// Two-sided paired t-test of `a` against `b`, keyed per topic. Both maps
/// must cover exactly the same topics.
pub fn paired_t_test(
    a: &BTreeMap<u32, f64>,
    b: &BTreeMap<u32, f64>,
) -> Result<TTestReport, EvalError> {
    let only_a: Vec<u32> = a.keys().filter(|k| !b.contains_key(k)).copied().collect();
    let only_b: Vec<u32> = b.keys().filter(|k| !a.contains_key(k)).copied().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(EvalError::KeyMismatch { only_a, only_b });
    }

    let diffs: Vec<f64> = a.iter().map(|(k, &va)| va - b[k]).collect();
    let n = diffs.len();
    if n < 2 {
        return Ok(TTestReport {
            t_statistic: 0.0,
            p_value: 1.0,
            n_pairs: n,
            degenerate: true,
        });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let variance = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = variance.sqrt();

    if sd == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTestReport {
            t_statistic: t,
            p_value: p,
            n_pairs: n,
            degenerate: true,
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let p = student_t_two_sided(t, n - 1);
    Ok(TTestReport {
        t_statistic: t,
        p_value: p,
        n_pairs: n,
        degenerate: false,
    })
}

/// Two-sided p-value for Student's t with `df` degrees of freedom:
/// `p = I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided(t: f64, df: usize) -> f64 {
    debug_assert!(df >= 1);
    let df = df as f64;
    let x = df / (df + t * t);
    incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Regularized incomplete beta function `I_x(a, b)`.
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
    // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Lentz's algorithm for the continued fraction in the incomplete beta.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
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
    h
}

/// Lanczos approximation of ln Gamma, g = 7, n = 9.
#[allow(clippy::excessive_precision)] // published coefficient digits kept as-is
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
