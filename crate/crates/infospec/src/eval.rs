//! Error triples of a binary test and their exponent normalizations.

use serde::Serialize;

/// `-ln(v)/n`, with probability zero mapped to infinity. Tiny negative
/// inputs (rounding fuzz from subtractions) count as zero.
pub fn neg_log_rate(v: f64, n: u32) -> f64 {
    if v <= 0.0 {
        f64::INFINITY
    } else {
        -v.ln() / n as f64
    }
}

/// Outcome of applying a test at blocklength `n`:
/// `alpha` is the miss probability under the first hypothesis, `beta`
/// the acceptance probability under the second, `beta_c` its complement
/// measured under the second hypothesis. `eta`, `zeta`, `zeta_c` are the
/// corresponding normalized exponents.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestEvaluation {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    pub beta_c: f64,
    pub eta: f64,
    pub zeta: f64,
    pub zeta_c: f64,
}

impl TestEvaluation {
    pub fn from_errors(n: u32, alpha: f64, beta: f64, beta_c: f64) -> Self {
        Self {
            n,
            alpha,
            beta,
            beta_c,
            eta: neg_log_rate(alpha, n),
            zeta: neg_log_rate(beta, n),
            zeta_c: neg_log_rate(beta_c, n),
        }
    }
}

/// Residuals of the four likelihood-test optimality inequalities, each
/// nonnegative (up to rounding) when `s` evaluates a likelihood test at
/// threshold `a` and `t` evaluates any other test of the same pair:
/// `alpha(a) + e^{na} beta(a) <= 1`, the same sum minimized over tests,
/// `alpha(a) - e^{na} beta_c(a) <= 0`, and the same difference
/// minimized over tests as well.
pub fn np_residuals(a: f64, s: &TestEvaluation, t: &TestEvaluation) -> [f64; 4] {
    debug_assert_eq!(s.n, t.n);
    let w = (s.n as f64 * a).exp();
    [
        1.0 - (s.alpha + w * s.beta),
        (t.alpha + w * t.beta) - (s.alpha + w * s.beta),
        w * s.beta_c - s.alpha,
        (t.alpha - w * t.beta_c) - (s.alpha - w * s.beta_c),
    ]
}
