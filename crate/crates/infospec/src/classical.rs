//! Classical finite measures and log-likelihood-ratio spectra.
//!
//! A test between two measures on a finite set is represented either as
//! an explicit (possibly randomized) acceptance vector, or implicitly
//! through the spectrum of the normalized log-likelihood ratio
//! `z = ln(rho/sigma) / n`. The i.i.d. spectrum at blocklength `n` is
//! computed exactly over type classes, so small-`n` values carry no
//! sampling error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TestEvaluation;
use crate::tolerance;

/// Nonnegative weights on a finite set. `normalized` marks probability
/// measures; unnormalized measures (counting measure in particular) are
/// first-class.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    weights: Vec<f64>,
    normalized: bool,
}

impl FiniteMeasure {
    pub fn new(weights: Vec<f64>, normalized: bool) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Input("empty measure".into()));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::Input("weights must be finite and nonnegative".into()));
        }
        if normalized {
            let s: f64 = weights.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Input(format!("weights sum to {s}, expected 1")));
            }
        }
        Ok(Self { weights, normalized })
    }

    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights, true)
    }

    /// Counting measure on `m` points.
    pub fn counting(m: usize) -> Self {
        Self {
            weights: vec![1.0; m],
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let parsed: MeasureJson = serde_json::from_str(s)?;
        Self::new(parsed.weights, parsed.normalized)
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson {
            weights: self.weights.clone(),
            normalized: self.normalized,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureJson {
    pub weights: Vec<f64>,
    /// Omitted means normalized, the stricter reading.
    #[serde(default = "normalized_default")]
    pub normalized: bool,
}

fn normalized_default() -> bool {
    true
}

/// Randomized test: acceptance probability per outcome.
#[derive(Debug, Clone)]
pub struct ClassicalTest {
    accept: Vec<f64>,
}

impl ClassicalTest {
    pub fn new(accept: Vec<f64>) -> Result<Self> {
        if accept.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::Input("acceptance values must lie in [0, 1]".into()));
        }
        Ok(Self { accept })
    }

    pub fn deterministic(region: &[bool]) -> Self {
        Self {
            accept: region.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn accept(&self) -> &[f64] {
        &self.accept
    }

    pub fn len(&self) -> usize {
        self.accept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accept.is_empty()
    }

    pub fn complement(&self) -> Self {
        Self {
            accept: self.accept.iter().map(|t| 1.0 - t).collect(),
        }
    }
}

fn kahan_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let y = x - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    acc
}

/// Error triple of an explicit test between two measures on the same
/// finite set, at blocklength `n` (used only for rate normalization).
pub fn evaluate_test(
    rho: &FiniteMeasure,
    sigma: &FiniteMeasure,
    test: &ClassicalTest,
    n: u32,
) -> Result<TestEvaluation> {
    if rho.len() != sigma.len() || rho.len() != test.len() {
        return Err(Error::DimMismatch {
            left: rho.len(),
            right: sigma.len().max(test.len()),
        });
    }
    let alpha = kahan_sum(
        test.accept()
            .iter()
            .zip(rho.weights())
            .map(|(&t, &r)| (1.0 - t) * r),
    );
    let beta = kahan_sum(
        test.accept()
            .iter()
            .zip(sigma.weights())
            .map(|(&t, &s)| t * s),
    );
    let beta_c = kahan_sum(
        test.accept()
            .iter()
            .zip(sigma.weights())
            .map(|(&t, &s)| (1.0 - t) * s),
    );
    Ok(TestEvaluation::from_errors(n, alpha, beta, beta_c))
}

/// Whether boundary atoms (`z` within the tie band of `a`) are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Accept strictly above the threshold.
    Strict,
    /// Accept at or above the threshold.
    Nonstrict,
}

/// One atom of a log-likelihood-ratio spectrum: the ratio value and the
/// mass each hypothesis puts there. `z` may be `±inf` where exactly one
/// measure vanishes.
#[derive(Debug, Clone, Copy)]
pub struct LlrAtom {
    pub z: f64,
    pub rho: f64,
    pub sigma: f64,
}

/// Spectrum of `z = ln(rho/sigma) / n`, atoms sorted ascending, ties
/// merged within an absolute band.
#[derive(Debug, Clone)]
pub struct LlrSpectrum {
    atoms: Vec<LlrAtom>,
    n: u32,
}

impl LlrSpectrum {
    /// Blocklength-1 spectrum of a measure pair.
    pub fn from_measures(rho: &FiniteMeasure, sigma: &FiniteMeasure) -> Result<Self> {
        if rho.len() != sigma.len() {
            return Err(Error::DimMismatch {
                left: rho.len(),
                right: sigma.len(),
            });
        }
        let atoms = rho
            .weights()
            .iter()
            .zip(sigma.weights())
            .filter(|(&r, &s)| r > 0.0 || s > 0.0)
            .map(|(&r, &s)| {
                let z = if r > 0.0 && s > 0.0 {
                    (r / s).ln()
                } else if r > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
                LlrAtom { z, rho: r, sigma: s }
            })
            .collect();
        Ok(Self::from_atoms(atoms, 1))
    }

    /// Sorts and merges raw atoms. Atoms with both masses zero are
    /// dropped; `z` values within the tie band merge into one atom.
    pub fn from_atoms(mut atoms: Vec<LlrAtom>, n: u32) -> Self {
        atoms.retain(|at| at.rho > 0.0 || at.sigma > 0.0);
        atoms.sort_by(|x, y| x.z.total_cmp(&y.z));
        let mut merged: Vec<LlrAtom> = Vec::with_capacity(atoms.len());
        for at in atoms {
            match merged.last_mut() {
                Some(prev)
                    if at.z == prev.z
                        || (at.z - prev.z).abs() <= tolerance::LLR_TIE =>
                {
                    prev.rho += at.rho;
                    prev.sigma += at.sigma;
                }
                _ => merged.push(at),
            }
        }
        Self { atoms: merged, n }
    }

    pub fn atoms(&self) -> &[LlrAtom] {
        &self.atoms
    }

    pub fn blocklength(&self) -> u32 {
        self.n
    }

    pub fn rho_total(&self) -> f64 {
        kahan_sum(self.atoms.iter().map(|a| a.rho))
    }

    pub fn sigma_total(&self) -> f64 {
        kahan_sum(self.atoms.iter().map(|a| a.sigma))
    }

    fn accepts(&self, z: f64, a: f64, policy: TiePolicy) -> bool {
        if z.is_infinite() {
            return z > 0.0;
        }
        let d = z - a;
        match policy {
            TiePolicy::Strict => d > tolerance::LLR_TIE,
            TiePolicy::Nonstrict => d >= -tolerance::LLR_TIE,
        }
    }

    /// Error triple of the likelihood test at threshold `a`.
    pub fn errors(&self, a: f64, policy: TiePolicy) -> TestEvaluation {
        let alpha = kahan_sum(
            self.atoms
                .iter()
                .filter(|at| !self.accepts(at.z, a, policy))
                .map(|at| at.rho),
        );
        let beta = kahan_sum(
            self.atoms
                .iter()
                .filter(|at| self.accepts(at.z, a, policy))
                .map(|at| at.sigma),
        );
        let beta_c = kahan_sum(
            self.atoms
                .iter()
                .filter(|at| !self.accepts(at.z, a, policy))
                .map(|at| at.sigma),
        );
        TestEvaluation::from_errors(self.n, alpha, beta, beta_c)
    }

    /// Largest threshold whose strict-test miss probability stays at or
    /// below `eps`: the first atom where the cumulative `rho` mass
    /// exceeds `eps`, or `+inf` if it never does.
    pub fn threshold(&self, eps: f64) -> f64 {
        let mut cum = 0.0f64;
        let mut comp = 0.0f64;
        for at in &self.atoms {
            let y = at.rho - comp;
            let t = cum + y;
            comp = (t - cum) - y;
            cum = t;
            if cum > eps {
                return at.z;
            }
        }
        f64::INFINITY
    }

    /// The likelihood test at threshold `a` as an explicit test on the
    /// atom index space.
    pub fn likelihood_test(&self, a: f64, policy: TiePolicy) -> ClassicalTest {
        ClassicalTest::deterministic(
            &self
                .atoms
                .iter()
                .map(|at| self.accepts(at.z, a, policy))
                .collect::<Vec<_>>(),
        )
    }
}

/// Exact binomial coefficient in u128, or `None` on overflow.
pub(crate) fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut c: u128 = 1;
    for j in 1..=k {
        c = c.checked_mul((n - k + j) as u128)?;
        c /= j as u128;
    }
    Some(c)
}

/// ln(k!) prefix table, compensated accumulation.
pub(crate) fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = vec![0.0f64; n + 1];
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for k in 1..=n {
        let x = (k as f64).ln() - comp;
        let t = acc + x;
        comp = (t - acc) - x;
        acc = t;
        table[k] = acc;
    }
    table
}

/// Exact multinomial coefficient through nested binomials, or `None`
/// when it leaves u128.
pub(crate) fn multinomial_exact(parts: &[u64]) -> Option<u128> {
    let mut c: u128 = 1;
    let mut seen = 0u64;
    for &p in parts {
        seen += p;
        c = c.checked_mul(binomial_u128(seen, p)?)?;
    }
    Some(c)
}

/// `ln (n! / prod(parts!))`.
pub(crate) fn ln_multinomial(n: u64, parts: &[u64], ln_fact: &[f64]) -> f64 {
    let mut ln = ln_fact[n as usize];
    for &p in parts {
        ln -= ln_fact[p as usize];
    }
    ln
}

/// Multinomial coefficient `n! / prod(parts!)` as f64, exact through the
/// u128 route whenever it fits.
#[cfg(test)]
pub(crate) fn multinomial(n: u64, parts: &[u64], ln_fact: &[f64]) -> f64 {
    match multinomial_exact(parts) {
        Some(c) => c as f64,
        None => ln_multinomial(n, parts, ln_fact).exp(),
    }
}

/// Mass of one type class, `mult * prod(w^p)`. The direct product is
/// preferred while the coefficient fits u128 and nothing underflowed,
/// since it is accurate to a few ulp; central coefficients overflow
/// both u128 and f64 near n = 130, where only the combined exponent
/// `exp(ln_mult + ln_pow)` stays representable.
fn type_mass(mult_exact: Option<u128>, pow: f64, ln_mult: f64, ln_pow: f64) -> f64 {
    if ln_pow == f64::NEG_INFINITY {
        return 0.0;
    }
    if let Some(c) = mult_exact {
        let m = c as f64 * pow;
        // pow underflowing to 0 is final only if the total is below
        // the subnormal floor as well
        if m.is_finite() && (m > 0.0 || ln_mult + ln_pow < -745.0) {
            return m;
        }
    }
    (ln_mult + ln_pow).exp()
}

fn for_each_composition(n: u64, m: usize, f: &mut impl FnMut(&[u64])) {
    fn rec(slot: usize, remaining: u64, parts: &mut Vec<u64>, f: &mut impl FnMut(&[u64])) {
        if slot + 1 == parts.len() {
            parts[slot] = remaining;
            f(parts);
            return;
        }
        for v in 0..=remaining {
            parts[slot] = v;
            rec(slot + 1, remaining - v, parts, f);
        }
    }
    let mut parts = vec![0u64; m];
    rec(0, n, &mut parts, f);
}

/// Exact i.i.d. spectrum at blocklength `n` via type classes. The number
/// of types `C(n+m-1, m-1)` must stay within `cap`.
pub fn iid_spectrum(
    rho: &FiniteMeasure,
    sigma: &FiniteMeasure,
    n: u32,
    cap: Option<u128>,
) -> Result<LlrSpectrum> {
    if rho.len() != sigma.len() {
        return Err(Error::DimMismatch {
            left: rho.len(),
            right: sigma.len(),
        });
    }
    if n == 0 {
        return Err(Error::Input("blocklength must be >= 1".into()));
    }
    let m = rho.len();
    let cap = cap.unwrap_or(tolerance::DEFAULT_CAP);
    let n_types = binomial_u128(n as u64 + m as u64 - 1, m as u64 - 1)
        .unwrap_or(u128::MAX);
    if n_types > cap {
        return Err(Error::CapExceeded { needed: n_types, cap });
    }

    let ln_fact = ln_factorial_table(n as usize);
    let per_symbol_z: Vec<f64> = rho
        .weights()
        .iter()
        .zip(sigma.weights())
        .map(|(&r, &s)| {
            if r > 0.0 && s > 0.0 {
                (r / s).ln()
            } else if r > 0.0 {
                f64::INFINITY
            } else if s > 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            }
        })
        .collect();

    let mut atoms = Vec::new();
    for_each_composition(n as u64, m, &mut |parts| {
        let mut z_sum = 0.0f64;
        let mut rho_pow = 1.0f64;
        let mut sigma_pow = 1.0f64;
        let mut ln_rho = 0.0f64;
        let mut ln_sigma = 0.0f64;
        for (i, &p) in parts.iter().enumerate() {
            if p == 0 {
                continue;
            }
            let zi = per_symbol_z[i];
            if zi.is_nan() {
                // both measures vanish on symbol i: the type carries no mass
                ln_rho = f64::NEG_INFINITY;
                ln_sigma = f64::NEG_INFINITY;
                break;
            }
            z_sum += p as f64 * zi;
            let (r, s) = (rho.weight(i), sigma.weight(i));
            rho_pow *= r.powi(p as i32);
            sigma_pow *= s.powi(p as i32);
            ln_rho += if r > 0.0 { p as f64 * r.ln() } else { f64::NEG_INFINITY };
            ln_sigma += if s > 0.0 { p as f64 * s.ln() } else { f64::NEG_INFINITY };
        }
        if ln_rho == f64::NEG_INFINITY && ln_sigma == f64::NEG_INFINITY {
            return;
        }
        let mult_exact = multinomial_exact(parts);
        let ln_mult = ln_multinomial(n as u64, parts, &ln_fact);
        atoms.push(LlrAtom {
            z: if z_sum.is_nan() { 0.0 } else { z_sum / n as f64 },
            rho: type_mass(mult_exact, rho_pow, ln_mult, ln_rho),
            sigma: type_mass(mult_exact, sigma_pow, ln_mult, ln_sigma),
        });
    });
    Ok(LlrSpectrum::from_atoms(atoms, n))
}

/// Relative entropy `sum rho ln(rho/sigma)` in nats; infinite when `rho`
/// charges a point `sigma` misses.
pub fn kl_divergence(rho: &FiniteMeasure, sigma: &FiniteMeasure) -> Result<f64> {
    if rho.len() != sigma.len() {
        return Err(Error::DimMismatch {
            left: rho.len(),
            right: sigma.len(),
        });
    }
    let mut terms = Vec::with_capacity(rho.len());
    for (&r, &s) in rho.weights().iter().zip(sigma.weights()) {
        if r == 0.0 {
            continue;
        }
        if s == 0.0 {
            return Ok(f64::INFINITY);
        }
        terms.push(r * (r / s).ln());
    }
    Ok(kahan_sum(terms.into_iter()))
}

/// Two-point relative entropy `d(p||q)` in nats.
pub fn binary_kl(p: f64, q: f64) -> f64 {
    let part = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    part(p, q) + part(1.0 - p, 1.0 - q)
}

/// Log moment generating function of the likelihood ratio:
/// `psi(theta) = ln sum rho^{1+theta} sigma^{-theta}`.
///
/// Support conventions: points where both measures vanish are skipped.
/// A point with `rho > 0 = sigma` contributes `+inf` for `theta > 0`,
/// `rho` at `theta = 0`, nothing for `theta < 0`. A point with
/// `rho = 0 < sigma` contributes nothing for `theta > -1` and at
/// `theta = -1`, and `+inf` below. At `theta = -1` the sum reduces to
/// the `sigma` mass of the `rho` support, which is exactly 1 for a
/// normalized `sigma` supported inside `rho`; that case returns 0
/// exactly so downstream zero tests stay sharp.
pub fn classical_psi(rho: &FiniteMeasure, sigma: &FiniteMeasure, theta: f64) -> Result<f64> {
    if rho.len() != sigma.len() {
        return Err(Error::DimMismatch {
            left: rho.len(),
            right: sigma.len(),
        });
    }
    if theta == -1.0 {
        let mass = kahan_sum(
            rho.weights()
                .iter()
                .zip(sigma.weights())
                .filter(|(&r, _)| r > 0.0)
                .map(|(_, &s)| s),
        );
        if sigma.is_normalized() && (mass - 1.0).abs() <= 1e-12 {
            return Ok(0.0);
        }
        return Ok(mass.ln());
    }
    let mut terms = Vec::with_capacity(rho.len());
    for (&r, &s) in rho.weights().iter().zip(sigma.weights()) {
        if r == 0.0 && s == 0.0 {
            continue;
        }
        if s == 0.0 {
            if theta > 0.0 {
                return Ok(f64::INFINITY);
            } else if theta == 0.0 {
                terms.push(r);
            }
            continue;
        }
        if r == 0.0 {
            if theta < -1.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        terms.push(((1.0 + theta) * r.ln() - theta * s.ln()).exp());
    }
    Ok(kahan_sum(terms.into_iter()).ln())
}

/// Product distribution of `rho^{x n}` as an explicit measure over the
/// `m^n` outcome strings, lexicographic order.
pub fn product_measure(rho: &FiniteMeasure, n: u32, cap: Option<u128>) -> Result<FiniteMeasure> {
    let cap = cap.unwrap_or(tolerance::DEFAULT_CAP);
    let size = (rho.len() as u128)
        .checked_pow(n)
        .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
    if size > cap {
        return Err(Error::CapExceeded { needed: size, cap });
    }
    let m = rho.len();
    let mut weights = vec![1.0f64; size as usize];
    let mut stride = 1usize;
    for _ in 0..n {
        for (idx, w) in weights.iter_mut().enumerate() {
            *w *= rho.weight((idx / stride) % m);
        }
        stride *= m;
    }
    FiniteMeasure::new(weights, false).map(|mut f| {
        f.normalized = rho.is_normalized();
        f
    })
}
