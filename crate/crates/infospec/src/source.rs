//! Fixed-length source coding through the counting-measure reduction:
//! compressing a memoryless source is testing it against the counting
//! measure, so codebooks become acceptance regions, codebook size
//! becomes `beta`, and decoding error becomes `alpha`. Everything here
//! runs on the self-information spectrum `z = -(1/n) ln P(x^n)`.

use serde::Serialize;

use crate::classical::{
    iid_spectrum, ClassicalTest, FiniteMeasure, LlrAtom, LlrSpectrum,
};
use crate::error::{Error, Result};
use crate::exponent::{golden_max, validate_grid, RateValue};
use crate::tolerance;

fn require_source(p: &FiniteMeasure) -> Result<()> {
    if !p.is_normalized() {
        return Err(Error::Input("source distribution must be normalized".into()));
    }
    Ok(())
}

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &FiniteMeasure) -> Result<f64> {
    require_source(p)?;
    Ok(p.weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum())
}

/// Exact blocklength-`n` distribution of `z = -(1/n) ln P(x^n)`. The
/// `sigma` masses are counting masses (type-class cardinalities), so a
/// likelihood test on this spectrum reads directly as a codebook whose
/// size is the test's `beta`. Letters of probability zero show up as a
/// `z = +inf` atom carrying only counting mass.
pub fn self_information_spectrum(
    p: &FiniteMeasure,
    n: u32,
    cap: Option<u128>,
) -> Result<LlrSpectrum> {
    require_source(p)?;
    let counting = FiniteMeasure::counting(p.len());
    let llr = iid_spectrum(p, &counting, n, cap)?;
    let atoms = llr
        .atoms()
        .iter()
        .map(|at| LlrAtom { z: -at.z, rho: at.rho, sigma: at.sigma })
        .collect();
    Ok(LlrSpectrum::from_atoms(atoms, n))
}

/// Smallest threshold `a` with `P{ z > a } <= eps`, read off the exact
/// spectrum: the first atom where the cumulative source mass reaches
/// `1 - eps`. Zero-mass atoms never decide the quantile.
pub fn finite_n_rate(
    p: &FiniteMeasure,
    epsilon: f64,
    n: u32,
    cap: Option<u128>,
) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon must be in [0, 1), got {epsilon}")));
    }
    let sp = self_information_spectrum(p, n, cap)?;
    Ok(spectrum_quantile(&sp, epsilon))
}

fn spectrum_quantile(sp: &LlrSpectrum, epsilon: f64) -> f64 {
    let target = 1.0 - epsilon - tolerance::MASS_SLACK;
    let mut cum = 0.0f64;
    let mut comp = 0.0f64;
    let mut last_supported = f64::NEG_INFINITY;
    for at in sp.atoms() {
        if at.rho <= 0.0 {
            continue;
        }
        let y = at.rho - comp;
        let t = cum + y;
        comp = (t - cum) - y;
        cum = t;
        last_supported = at.z;
        if cum >= target {
            return at.z;
        }
    }
    last_supported
}

/// A deterministic fixed-length coding system: the accepted strings of
/// the product alphabet by lexicographic index. Encoder and decoder are
/// the identity on the codebook, so the error probability is exactly
/// the source mass outside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodingSystem {
    codebook: Vec<usize>,
}

impl CodingSystem {
    pub fn new(mut codebook: Vec<usize>) -> Result<Self> {
        codebook.sort_unstable();
        if codebook.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("codebook indices must be distinct".into()));
        }
        Ok(Self { codebook })
    }

    pub fn size(&self) -> usize {
        self.codebook.len()
    }

    pub fn codebook(&self) -> &[usize] {
        &self.codebook
    }

    /// Decoding error probability against an explicit string
    /// distribution: the mass of every string outside the codebook,
    /// summed in index order so it agrees bit for bit with the `alpha`
    /// of the induced test.
    pub fn gamma(&self, rho_n: &FiniteMeasure) -> Result<f64> {
        if let Some(&max) = self.codebook.last() {
            if max >= rho_n.len() {
                return Err(Error::DimMismatch { left: max + 1, right: rho_n.len() });
            }
        }
        let mut member = vec![false; rho_n.len()];
        for &i in &self.codebook {
            member[i] = true;
        }
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        for (i, &w) in rho_n.weights().iter().enumerate() {
            if member[i] {
                continue;
            }
            let y = w - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        }
        Ok(acc)
    }
}

/// Reads a deterministic test as a codebook. Randomized tests have no
/// codebook; deterministic subsets are `truncate_acceptance_region`'s
/// job.
pub fn codebook_from_test(test: &ClassicalTest) -> Result<CodingSystem> {
    let mut codebook = Vec::new();
    for (i, &t) in test.accept().iter().enumerate() {
        if t == 1.0 {
            codebook.push(i);
        } else if t != 0.0 {
            return Err(Error::Input(
                "randomized test has no codebook; take a deterministic subset first".into(),
            ));
        }
    }
    Ok(CodingSystem { codebook })
}

/// The acceptance region of a codebook as a test on `alphabet` strings.
pub fn test_from_codebook(code: &CodingSystem, alphabet: usize) -> Result<ClassicalTest> {
    let mut region = vec![false; alphabet];
    for &i in code.codebook() {
        if i >= alphabet {
            return Err(Error::DimMismatch { left: i + 1, right: alphabet });
        }
        region[i] = true;
    }
    Ok(ClassicalTest::deterministic(&region))
}

/// Keeps the `k` most probable accepted strings of a deterministic
/// test, ties broken toward smaller indices. The kept source mass is at
/// least `k / |S|` of the original region's mass.
pub fn truncate_acceptance_region(
    rho_n: &FiniteMeasure,
    test: &ClassicalTest,
    k: usize,
) -> Result<ClassicalTest> {
    if rho_n.len() != test.len() {
        return Err(Error::DimMismatch { left: rho_n.len(), right: test.len() });
    }
    let code = codebook_from_test(test)?;
    if code.size() <= k {
        return Ok(test.clone());
    }
    let mut members = code.codebook().to_vec();
    members.sort_by(|&i, &j| {
        rho_n.weight(j).total_cmp(&rho_n.weight(i)).then(i.cmp(&j))
    });
    members.truncate(k);
    test_from_codebook(&CodingSystem::new(members)?, test.len())
}

/// Smallest deterministic codebook with decoding error at most
/// `epsilon`: strings enter by decreasing probability until the covered
/// mass reaches `1 - epsilon`.
pub fn smallest_codebook(
    p: &FiniteMeasure,
    epsilon: f64,
    n: u32,
    cap: Option<u128>,
) -> Result<CodingSystem> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon must be in [0, 1), got {epsilon}")));
    }
    require_source(p)?;
    let rho_n = crate::classical::product_measure(p, n, cap)?;
    let mut order: Vec<usize> = (0..rho_n.len()).collect();
    order.sort_by(|&i, &j| {
        rho_n.weight(j).total_cmp(&rho_n.weight(i)).then(i.cmp(&j))
    });
    let target = 1.0 - epsilon - tolerance::MASS_SLACK;
    let mut cum = 0.0f64;
    let mut comp = 0.0f64;
    let mut codebook = Vec::new();
    for &i in &order {
        if cum >= target {
            break;
        }
        codebook.push(i);
        let y = rho_n.weight(i) - comp;
        let t = cum + y;
        comp = (t - cum) - y;
        cum = t;
    }
    CodingSystem::new(codebook)
}

/// Greedy codebook size read off the spectrum instead of the string
/// space: whole type classes below the quantile plus the needed slice
/// of the boundary class, whose strings all carry mass `e^{-n z}`.
pub fn codebook_size_from_spectrum(sp: &LlrSpectrum, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon must be in [0, 1), got {epsilon}")));
    }
    let target = 1.0 - epsilon - tolerance::MASS_SLACK;
    let n = sp.blocklength() as f64;
    let mut cum = 0.0f64;
    let mut size = 0.0f64;
    for at in sp.atoms() {
        if at.rho <= 0.0 {
            continue;
        }
        if cum + at.rho >= target {
            let per_string = (-n * at.z).exp();
            let residual = (target - cum).max(0.0);
            let need = ((residual / per_string) - 1e-9).ceil().max(1.0);
            return Ok(size + need.min(at.sigma));
        }
        cum += at.rho;
        size += at.sigma;
    }
    Ok(size)
}

/// Cumulant generating function `ln sum_x P(x)^{1 - theta}` of the
/// self-information, summed with a max shift so large tilts stay
/// representable.
pub fn self_information_cgf(p: &FiniteMeasure, theta: f64) -> Result<f64> {
    require_source(p)?;
    let exponents: Vec<f64> = p
        .weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| (1.0 - theta) * w.ln())
        .collect();
    if exponents.is_empty() {
        return Err(Error::Input("source has empty support".into()));
    }
    let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = exponents.iter().map(|&e| (e - m).exp()).sum();
    Ok(m + s.ln())
}

fn support_range(p: &FiniteMeasure) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &w in p.weights() {
        if w > 0.0 {
            lo = lo.min(-w.ln());
            hi = hi.max(-w.ln());
        }
    }
    (lo, hi)
}

fn legendre_rate(
    p: &FiniteMeasure,
    a: f64,
    theta_lo: f64,
    theta_hi: f64,
) -> Result<RateValue> {
    let obj = |theta: f64| {
        theta * a - self_information_cgf(p, theta).expect("support checked")
    };
    self_information_cgf(p, 0.0)?;
    let (mut theta_star, mut best) =
        golden_max(&obj, theta_lo, theta_hi, tolerance::GOLDEN_WIDTH);
    for theta in [theta_lo, theta_hi] {
        let v = obj(theta);
        if v > best {
            best = v;
            theta_star = theta;
        }
    }
    Ok(RateValue { value: best.max(0.0), theta_star, clamped: false })
}

/// Decay rate of the upper tail `P{ z > a }`: the Legendre transform of
/// the self-information cumulants over nonnegative tilts. Zero at and
/// below the entropy; `a` outside the per-letter range is clamped with
/// a flag.
pub fn sigma_lower_rate(p: &FiniteMeasure, a: f64) -> Result<RateValue> {
    let (lo, hi) = support_range(p);
    let clamped = a < lo || a > hi;
    let a = a.clamp(lo, hi);
    let h = shannon_entropy(p)?;
    if a <= h {
        return Ok(RateValue { value: 0.0, theta_star: 0.0, clamped });
    }
    let mut rv = legendre_rate(p, a, 0.0, tolerance::THETA_CEIL)?;
    rv.clamped = clamped;
    Ok(rv)
}

/// Decay rate of the lower tail `P{ z <= a }` over nonpositive tilts.
/// Zero at and above the entropy.
pub fn sigma_star_upper_rate(p: &FiniteMeasure, a: f64) -> Result<RateValue> {
    let (lo, hi) = support_range(p);
    let clamped = a < lo || a > hi;
    let a = a.clamp(lo, hi);
    let h = shannon_entropy(p)?;
    if a >= h {
        return Ok(RateValue { value: 0.0, theta_star: 0.0, clamped });
    }
    let mut rv = legendre_rate(p, a, -tolerance::THETA_CEIL, 0.0)?;
    rv.clamped = clamped;
    Ok(rv)
}

/// Both tail rates at one threshold.
pub fn sigma_rates(p: &FiniteMeasure, a: f64) -> Result<(RateValue, RateValue)> {
    Ok((sigma_lower_rate(p, a)?, sigma_star_upper_rate(p, a)?))
}

/// Value of a source exponent optimization together with the threshold
/// that achieved it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SourceExponent {
    pub value: f64,
    pub a_star: f64,
}

/// Best compression rate whose error probability still decays at least
/// as fast as `e^{-n r}`: the supremum of `a - rate(a)` over thresholds
/// whose upper-tail rate stays below `r`, sampled on `points` grid
/// points between the entropy and the largest per-letter
/// self-information.
pub fn source_error_exponent(
    p: &FiniteMeasure,
    r: f64,
    points: usize,
) -> Result<SourceExponent> {
    if !(r > 0.0) {
        return Err(Error::Input(format!("target exponent must be positive, got {r}")));
    }
    if points < 2 {
        return Err(Error::Input("need at least two grid points".into()));
    }
    let h = shannon_entropy(p)?;
    let (_, hi) = support_range(p);
    if hi <= h {
        // degenerate source: every string has the same self-information
        return Ok(SourceExponent { value: h, a_star: h });
    }
    let step = (hi - h) / (points - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut a_star = h;
    for i in 0..points {
        let a = h + i as f64 * step;
        let rate = sigma_lower_rate(p, a)?.value;
        if rate < r && a - rate > best {
            best = a - rate;
            a_star = a;
        }
    }
    if best == f64::NEG_INFINITY {
        // r so small that only the entropy point qualifies
        return Ok(SourceExponent { value: h, a_star: h });
    }
    Ok(SourceExponent { value: best, a_star })
}

/// Best compression rate at which correct decoding still survives with
/// probability at least `e^{-n r}`: `max{b0 - r, 0}` where `b0` is the
/// threshold at which the lower-tail rate crosses `r`, found by
/// bisection between the smallest per-letter self-information and the
/// entropy.
pub fn correct_decoding_exponent(p: &FiniteMeasure, r: f64) -> Result<SourceExponent> {
    if r < 0.0 {
        return Err(Error::Input(format!("target exponent must be nonnegative, got {r}")));
    }
    let h = shannon_entropy(p)?;
    let (lo, _) = support_range(p);
    let b0 = if lo >= h {
        h
    } else if sigma_star_upper_rate(p, lo)?.value <= r {
        lo
    } else {
        let mut left = lo;
        let mut right = h;
        for _ in 0..200 {
            let mid = 0.5 * (left + right);
            if sigma_star_upper_rate(p, mid)?.value > r {
                left = mid;
            } else {
                right = mid;
            }
        }
        0.5 * (left + right)
    };
    Ok(SourceExponent { value: (b0 - r).max(0.0), a_star: b0 })
}

/// Penalized-form value of the correct-decoding exponent on a sampled
/// rate table: `inf{ h >= 0 | min_a max{rate(a), a - h} <= r }`. On a
/// finite table the condition collapses to
/// `h >= min{ a_i | rate_i <= r } - r`.
pub fn han_correct_decoding_value(
    grid: &[f64],
    sigma_star: &[f64],
    r: f64,
) -> Result<f64> {
    validate_grid(grid)?;
    if grid.len() != sigma_star.len() {
        return Err(Error::DimMismatch { left: grid.len(), right: sigma_star.len() });
    }
    if r < 0.0 {
        return Err(Error::Input(format!("target exponent must be nonnegative, got {r}")));
    }
    let first = grid
        .iter()
        .zip(sigma_star)
        .find(|(_, &s)| s <= r)
        .map(|(&a, _)| a);
    Ok(match first {
        Some(a) => (a - r).max(0.0),
        None => f64::INFINITY,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SourceRateRow {
    pub epsilon: f64,
    pub n: u32,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SigmaRateRow {
    pub a: f64,
    pub lower: f64,
    pub star_upper: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SourceExponentRow {
    pub r: f64,
    pub error_exponent: f64,
    pub correct_decoding_exponent: f64,
}

/// Everything the source command reports: spectral entropy rates (equal
/// for a memoryless source), finite-n rate quantiles, tail-rate samples,
/// and the two exponent trade-offs.
#[derive(Debug, Clone, Serialize)]
pub struct SourceRateReport {
    pub h_upper: f64,
    pub h_lower: f64,
    pub rate_rows: Vec<SourceRateRow>,
    pub sigma_rows: Vec<SigmaRateRow>,
    pub exponent_rows: Vec<SourceExponentRow>,
}

pub fn source_report(
    p: &FiniteMeasure,
    blocklengths: &[u32],
    epsilons: &[f64],
    exponents: &[f64],
    sigma_points: usize,
    cap: Option<u128>,
) -> Result<SourceRateReport> {
    let h = shannon_entropy(p)?;
    let mut rate_rows = Vec::new();
    for &epsilon in epsilons {
        for &n in blocklengths {
            rate_rows.push(SourceRateRow {
                epsilon,
                n,
                rate: finite_n_rate(p, epsilon, n, cap)?,
            });
        }
    }
    let (lo, hi) = support_range(p);
    let mut sigma_rows = Vec::new();
    if sigma_points >= 2 && hi > lo {
        let step = (hi - lo) / (sigma_points - 1) as f64;
        for i in 0..sigma_points {
            let a = lo + i as f64 * step;
            let (lower, star) = sigma_rates(p, a)?;
            sigma_rows.push(SigmaRateRow {
                a,
                lower: lower.value,
                star_upper: star.value,
            });
        }
    }
    let mut exponent_rows = Vec::new();
    for &r in exponents {
        exponent_rows.push(SourceExponentRow {
            r,
            error_exponent: source_error_exponent(p, r, 2049)?.value,
            correct_decoding_exponent: correct_decoding_exponent(p, r)?.value,
        });
    }
    Ok(SourceRateReport { h_upper: h, h_lower: h, rate_rows, sigma_rows, exponent_rows })
}
