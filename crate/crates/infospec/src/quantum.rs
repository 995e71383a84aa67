//! Quantum likelihood tests between density operators.
//!
//! The central object is the spectral projection onto the positive part
//! of `rho_n - e^{n a} sigma_n`. Error triples are computed in the
//! eigenbasis of that difference; for i.i.d. inputs the quadratic forms
//! contract one tensor factor at a time, so no dense product with the
//! blocklength-`n` operators is ever formed.

use nalgebra::DMatrix;

use crate::classical;
use crate::error::{Error, Result};
use crate::eval::TestEvaluation;
use crate::operator::{
    positive_part_from_decomposition, spectral_decompose, tensor_power, trace_pair,
    DensityOperator, HermitianOperator, PositivePart, ProjectionMode, C64,
};
use crate::tolerance;

/// Projector onto the positive part of `rho_n - e^{n a} sigma_n`, where
/// both operators live at blocklength `n` already.
pub fn np_projection(
    rho_n: &HermitianOperator,
    sigma_n: &HermitianOperator,
    n: u32,
    a: f64,
    mode: ProjectionMode,
) -> Result<PositivePart> {
    let t = (n as f64 * a).exp();
    if !t.is_finite() {
        return Err(Error::Domain {
            context: "np_projection",
            detail: format!("e^{{n a}} overflows for n = {n}, a = {a}"),
        });
    }
    let delta = rho_n.sub(&sigma_n.scaled(t))?;
    let dec = spectral_decompose(&delta)?;
    positive_part_from_decomposition(&dec, delta.max_norm(), mode)
}

/// Error triple of an arbitrary test operator `0 <= T <= I` applied to a
/// state pair at blocklength `n`. The miss probability is accumulated on
/// the rejection side, so small values are not computed as `1 - (1 - x)`.
pub fn evaluate_test(
    rho_n: &HermitianOperator,
    sigma_n: &HermitianOperator,
    t: &HermitianOperator,
    n: u32,
) -> Result<TestEvaluation> {
    let complement = HermitianOperator::identity(t.dim()).sub(t)?;
    let alpha = trace_pair(rho_n, &complement)?.max(0.0);
    let beta = trace_pair(sigma_n, t)?.max(0.0);
    let beta_c = trace_pair(sigma_n, &complement)?.max(0.0);
    Ok(TestEvaluation::from_errors(n, alpha, beta, beta_c))
}

/// Applies `base^{⊗ n}` to a vector by contracting one axis at a time,
/// O(n m d) for ambient dimension `d = m^n`.
fn kron_apply(base: &DMatrix<C64>, n: u32, v: &[C64]) -> Vec<C64> {
    let m = base.nrows();
    let d = v.len();
    debug_assert_eq!(d, m.pow(n));
    let mut cur = v.to_vec();
    let mut next = vec![C64::new(0.0, 0.0); d];
    let mut stride = 1usize;
    for _ in 0..n {
        let block = stride * m;
        for b in (0..d).step_by(block) {
            for r in 0..stride {
                for i in 0..m {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..m {
                        acc += base[(i, j)] * cur[b + j * stride + r];
                    }
                    next[b + i * stride + r] = acc;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        stride = block;
    }
    cur
}

/// `Re <v| base^{⊗ n} |v>`.
fn kron_quadratic_form(base: &DMatrix<C64>, n: u32, v: &[C64]) -> f64 {
    let w = kron_apply(base, n, v);
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in v.iter().zip(&w) {
        let term = x.re * y.re + x.im * y.im;
        let s = acc + term;
        comp += if acc.abs() >= term.abs() {
            (acc - s) + term
        } else {
            (term - s) + acc
        };
        acc = s;
    }
    acc + comp
}

/// One grid point of an i.i.d. projection-test sweep.
#[derive(Debug, Clone, Copy)]
pub struct IidGridPoint {
    pub a: f64,
    pub eval: TestEvaluation,
    /// Rank of the acceptance projector.
    pub rank: usize,
}

/// Evaluates the family of likelihood projection tests for
/// `(rho^{⊗ n}, sigma^{⊗ n})` across a threshold grid by direct
/// diagonalization of the blocklength-`n` difference operator.
pub fn iid_projection_curve(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
    a_grid: &[f64],
    mode: ProjectionMode,
    dim_cap: Option<u128>,
) -> Result<Vec<IidGridPoint>> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let rho_n = tensor_power(rho.operator(), n, dim_cap)?;
    let sigma_n = tensor_power(sigma.operator(), n, dim_cap)?;
    let d = rho_n.dim();
    let band_scale = |delta: &HermitianOperator| tolerance::EIG_ZERO_BAND * delta.max_norm().max(1.0);

    let mut out = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let t = (n as f64 * a).exp();
        if !t.is_finite() {
            return Err(Error::Domain {
                context: "iid_projection_curve",
                detail: format!("e^{{n a}} overflows for n = {n}, a = {a}"),
            });
        }
        let delta = rho_n.sub(&sigma_n.scaled(t))?;
        let dec = spectral_decompose(&delta)?;
        let band = band_scale(&delta);
        let accept = |lam: f64| match mode {
            ProjectionMode::Strict => lam > band,
            ProjectionMode::Nonstrict => lam >= -band,
        };

        let mut alpha = 0.0f64;
        let mut beta = 0.0f64;
        let mut beta_c = 0.0f64;
        let mut rank = 0usize;
        let mut col = vec![C64::new(0.0, 0.0); d];
        for k in 0..d {
            for i in 0..d {
                col[i] = dec.vectors()[(i, k)];
            }
            let r = kron_quadratic_form(rho.operator().matrix(), n, &col);
            let s = kron_quadratic_form(sigma.operator().matrix(), n, &col);
            if accept(dec.values()[k]) {
                beta += s;
                rank += 1;
            } else {
                alpha += r;
                beta_c += s;
            }
        }
        out.push(IidGridPoint {
            a,
            eval: TestEvaluation::from_errors(n, alpha.max(0.0), beta.max(0.0), beta_c.max(0.0)),
            rank,
        });
    }
    Ok(out)
}

/// Single-threshold variant of [`iid_projection_curve`].
pub fn iid_projection_point(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
    a: f64,
    mode: ProjectionMode,
    dim_cap: Option<u128>,
) -> Result<IidGridPoint> {
    Ok(iid_projection_curve(rho, sigma, n, &[a], mode, dim_cap)?
        .pop()
        .expect("one grid point in, one out"))
}

struct Overlaps {
    p: Vec<f64>,
    q: Vec<f64>,
    /// `w[i][j] = |<u_i|v_j>|^2`
    w: Vec<Vec<f64>>,
    band_p: f64,
    band_q: f64,
}

fn eigen_overlaps(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Overlaps> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let dec_r = spectral_decompose(rho.operator())?;
    let dec_s = spectral_decompose(sigma.operator())?;
    let cross = dec_r.vectors().adjoint() * dec_s.vectors();
    let d = rho.dim();
    let w = (0..d)
        .map(|i| (0..d).map(|j| cross[(i, j)].norm_sqr()).collect())
        .collect();
    Ok(Overlaps {
        p: dec_r.values().to_vec(),
        q: dec_s.values().to_vec(),
        w,
        band_p: tolerance::EIG_ZERO_BAND * rho.operator().max_norm().max(1.0),
        band_q: tolerance::EIG_ZERO_BAND * sigma.operator().max_norm().max(1.0),
    })
}

/// `rho`-mass of the null space of `sigma`; values above
/// `tolerance::SUPPORT_LEAK` mean the supports are incompatible.
pub fn support_leak(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    let ov = eigen_overlaps(rho, sigma)?;
    let mut leak = 0.0f64;
    for (j, &qj) in ov.q.iter().enumerate() {
        if qj.abs() <= ov.band_q {
            for (i, &pi) in ov.p.iter().enumerate() {
                leak += pi.max(0.0) * ov.w[i][j];
            }
        }
    }
    Ok(leak)
}

/// Relative entropy `Tr rho (ln rho - ln sigma)` in nats; infinite when
/// `rho` leaks outside the support of `sigma`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    let ov = eigen_overlaps(rho, sigma)?;
    let mut leak = 0.0f64;
    let mut sum = 0.0f64;
    for (i, &pi) in ov.p.iter().enumerate() {
        if pi <= ov.band_p {
            continue;
        }
        sum += pi * pi.ln();
        for (j, &qj) in ov.q.iter().enumerate() {
            let wij = ov.w[i][j];
            if wij == 0.0 {
                continue;
            }
            if qj <= ov.band_q {
                leak += pi * wij;
            } else {
                sum -= pi * wij * qj.ln();
            }
        }
    }
    if leak > tolerance::SUPPORT_LEAK {
        return Ok(f64::INFINITY);
    }
    Ok(sum)
}

/// Log trace functional `ln Tr(rho^{1+theta} sigma^{-theta})` evaluated
/// through both eigenbases. Support conventions match the classical
/// case: `sigma`-null directions carrying `rho` weight give `+inf` for
/// `theta > 0` and drop out for `theta < 0`.
pub fn quantum_psi(rho: &DensityOperator, sigma: &DensityOperator, theta: f64) -> Result<f64> {
    if theta < -1.0 {
        return Err(Error::Domain {
            context: "quantum_psi",
            detail: format!("theta = {theta} below -1"),
        });
    }
    let ov = eigen_overlaps(rho, sigma)?;
    let mut sum = 0.0f64;
    for (i, &pi) in ov.p.iter().enumerate() {
        if pi <= ov.band_p {
            continue;
        }
        for (j, &qj) in ov.q.iter().enumerate() {
            let wij = ov.w[i][j];
            if wij == 0.0 {
                continue;
            }
            if qj <= ov.band_q {
                if theta > 0.0 && pi * wij > tolerance::SUPPORT_LEAK {
                    return Ok(f64::INFINITY);
                }
                if theta == 0.0 {
                    sum += pi * wij;
                }
                continue;
            }
            sum += pi.powf(1.0 + theta) * qj.powf(-theta) * wij;
        }
    }
    Ok(sum.ln())
}

/// Upper bound `e^{-n (a theta - psi(theta))}` on the acceptance mass of
/// the nonstrict i.i.d. projection test, valid for `theta` in `[0, 1]`.
pub fn ogawa_nagaoka_bound(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
    a: f64,
    theta: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain {
            context: "ogawa_nagaoka_bound",
            detail: format!("theta = {theta} outside [0, 1]"),
        });
    }
    let psi = quantum_psi(rho, sigma, theta)?;
    Ok((-(n as f64) * (a * theta - psi)).exp())
}

/// Two-outcome divergence of the measurement `{T, I - T}`:
/// `d(rho[T] || sigma[T])` in nats.
pub fn measured_binary_divergence(
    rho_n: &HermitianOperator,
    sigma_n: &HermitianOperator,
    t: &HermitianOperator,
) -> Result<f64> {
    let rho_t = trace_pair(rho_n, t)?.clamp(0.0, 1.0);
    let sigma_t = trace_pair(sigma_n, t)?.clamp(0.0, 1.0);
    Ok(classical::binary_kl(rho_t, sigma_t))
}

/// Lower bound `-ln 2 - rho[T] ln sigma[T]` on the two-outcome divergence.
pub fn measured_divergence_floor(rho_t: f64, sigma_t: f64) -> f64 {
    -(2.0f64.ln()) - rho_t * sigma_t.ln()
}

/// Acceptance mass of the strict projection test for a pure-state pair
/// with squared overlap `delta_n = |<psi_n|phi_n>|^2` at threshold mass
/// `t = e^{n a}`:
///
/// `g = 1/2 + (1 + t - 2 t delta_n) / (2 sqrt((1 + t)^2 - 4 t delta_n))`.
///
/// The overlap-one, `a = 0` corner is a genuine 0/0 and is rejected.
pub fn pure_state_g(delta_n: f64, n: u32, a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta_n) {
        return Err(Error::Input(format!("overlap {delta_n} outside [0, 1]")));
    }
    let t = (n as f64 * a).exp();
    if delta_n == 1.0 && t == 1.0 {
        return Err(Error::Domain {
            context: "pure_state_g",
            detail: "overlap 1 at threshold 0: acceptance mass is indeterminate".into(),
        });
    }
    let disc = (1.0 + t) * (1.0 + t) - 4.0 * t * delta_n;
    Ok(0.5 + (1.0 + t - 2.0 * t * delta_n) / (2.0 * disc.sqrt()))
}

/// Same closed form with `delta_n = delta^n` for i.i.d. pure pairs.
pub fn pure_state_g_iid(delta: f64, n: u32, a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Input(format!("overlap {delta} outside [0, 1]")));
    }
    pure_state_g(delta.powi(n as i32), n, a)
}

/// The effective single-qubit pair for pure states with squared overlap
/// `delta`: `rho = |0><0|` and `sigma = |phi><phi|` with
/// `phi = (sqrt(delta), sqrt(1 - delta))`.
pub fn pure_pair(delta: f64) -> Result<(DensityOperator, DensityOperator)> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Input(format!("overlap {delta} outside [0, 1]")));
    }
    let rho = DensityOperator::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])?;
    let sigma = DensityOperator::pure(&[
        C64::new(delta.sqrt(), 0.0),
        C64::new((1.0 - delta).sqrt(), 0.0),
    ])?;
    Ok((rho, sigma))
}

/// Optimal converse trade-off for pure-state pairs whose overlap decays
/// at rate `c`: infinite below `c`, equal to `c` above.
pub fn pure_state_exponent(c: f64, r: f64) -> f64 {
    if r <= c {
        f64::INFINITY
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{iid_spectrum, FiniteMeasure, TiePolicy};
    use approx::assert_abs_diff_eq;

    fn section_pair() -> (DensityOperator, DensityOperator) {
        let rho = DensityOperator::new(
            HermitianOperator::from_real(DMatrix::from_row_slice(
                2,
                2,
                &[0.75, 0.35, 0.35, 0.25],
            ))
            .unwrap(),
        )
        .unwrap();
        let sigma = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
        (rho, sigma)
    }

    /// Closed-form 2x2 oracle for the relative entropy of the reference
    /// pair, independent of the matrix machinery.
    fn closed_form_reference_divergence() -> f64 {
        let (a, b, c) = (0.75f64, 0.35f64, 0.25f64);
        let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        let lam = [(a + c + disc) / 2.0, (a + c - disc) / 2.0];
        let mut d = 0.0;
        for &l in &lam {
            // eigenvector (b, l - a), unnormalized
            let nx = b * b + (l - a) * (l - a);
            let w0 = b * b / nx;
            let w1 = (l - a) * (l - a) / nx;
            d += l * l.ln() - l * (w0 * 0.9f64.ln() + w1 * 0.1f64.ln());
        }
        d
    }

    #[test]
    fn relative_entropy_reference_value() {
        let (rho, sigma) = section_pair();
        let oracle = closed_form_reference_divergence();
        let d = relative_entropy(&rho, &sigma).unwrap();
        assert_abs_diff_eq!(d, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.4013, epsilon = 5e-4);
    }

    #[test]
    fn relative_entropy_infinite_on_leak() {
        let rho = DensityOperator::pure(&[
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let sigma = DensityOperator::from_probabilities(&[1.0, 0.0]).unwrap();
        assert_eq!(relative_entropy(&rho, &sigma).unwrap(), f64::INFINITY);
        assert!(support_leak(&rho, &sigma).unwrap() > 0.4);
    }

    #[test]
    fn diagonal_pair_matches_classical_spectrum() {
        let rho = DensityOperator::from_probabilities(&[0.7, 0.3]).unwrap();
        let sigma = DensityOperator::from_probabilities(&[0.4, 0.6]).unwrap();
        let rho_m = FiniteMeasure::probability(vec![0.7, 0.3]).unwrap();
        let sigma_m = FiniteMeasure::probability(vec![0.4, 0.6]).unwrap();
        let n = 4;
        let sp = iid_spectrum(&rho_m, &sigma_m, n, None).unwrap();
        // thresholds chosen away from spectrum atoms
        for &a in &[-0.55, -0.2, 0.13, 0.4] {
            let q = iid_projection_point(&rho, &sigma, n, a, ProjectionMode::Strict, None).unwrap();
            let c = sp.errors(a, TiePolicy::Strict);
            assert_abs_diff_eq!(q.eval.alpha, c.alpha, epsilon = 1e-11);
            assert_abs_diff_eq!(q.eval.beta, c.beta, epsilon = 1e-11);
            assert_abs_diff_eq!(q.eval.beta_c, c.beta_c, epsilon = 1e-11);
        }
    }

    #[test]
    fn projection_point_matches_explicit_projector_route() {
        let (rho, sigma) = section_pair();
        let n = 3;
        let rho_n = tensor_power(rho.operator(), n, None).unwrap();
        let sigma_n = tensor_power(sigma.operator(), n, None).unwrap();
        for &a in &[0.0, 0.3, 0.6] {
            let fast = iid_projection_point(&rho, &sigma, n, a, ProjectionMode::Strict, None).unwrap();
            let proj = np_projection(&rho_n, &sigma_n, n, a, ProjectionMode::Strict).unwrap();
            let slow = evaluate_test(&rho_n, &sigma_n, &proj.projector, n).unwrap();
            assert_eq!(fast.rank, proj.rank);
            assert_abs_diff_eq!(fast.eval.alpha, slow.alpha, epsilon = 1e-11);
            assert_abs_diff_eq!(fast.eval.beta, slow.beta, epsilon = 1e-11);
        }
    }

    #[test]
    fn neyman_pearson_inequalities_on_reference_pair() {
        let (rho, sigma) = section_pair();
        for n in [1u32, 2, 4] {
            for &a in &[-0.3, 0.0, 0.25, 0.7] {
                let p = iid_projection_point(&rho, &sigma, n, a, ProjectionMode::Strict, None).unwrap();
                let e = p.eval;
                let t = (n as f64 * a).exp();
                assert!(e.alpha + t * e.beta <= 1.0 + 1e-9);
                assert!(e.alpha - t * e.beta_c <= 1e-9);
            }
        }
    }

    #[test]
    fn pure_state_corners() {
        // orthogonal pair: test accepts the first state with certainty
        assert_abs_diff_eq!(pure_state_g(0.0, 3, 0.4).unwrap(), 1.0, epsilon = 1e-15);
        // identical pure states at positive threshold: acceptance dies
        assert_abs_diff_eq!(pure_state_g(1.0, 2, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        // identical states at zero threshold: indeterminate
        assert!(pure_state_g(1.0, 5, 0.0).is_err());
    }

    #[test]
    fn pure_state_closed_form_matches_pipeline() {
        let delta = 0.4;
        let n = 3;
        let (rho1, sigma1) = pure_pair(delta).unwrap();
        // blocklength-n pure pair lives in a two-dimensional span; the
        // effective pair has overlap delta^n
        let (rho_eff, sigma_eff) = pure_pair(delta.powi(n as i32)).unwrap();
        for &a in &[-0.2, 0.1, 0.5] {
            let direct =
                iid_projection_point(&rho1, &sigma1, n, a, ProjectionMode::Strict, None).unwrap();
            let eff = iid_projection_point(&rho_eff, &sigma_eff, 1, a * n as f64, ProjectionMode::Strict, None)
                .unwrap();
            let closed = pure_state_g_iid(delta, n, a).unwrap();
            assert_abs_diff_eq!(1.0 - direct.eval.alpha, closed, epsilon = 1e-12);
            assert_abs_diff_eq!(1.0 - eff.eval.alpha, closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantum_psi_commuting_matches_classical() {
        let rho = DensityOperator::from_probabilities(&[0.6, 0.4]).unwrap();
        let sigma = DensityOperator::from_probabilities(&[0.2, 0.8]).unwrap();
        let rho_m = FiniteMeasure::probability(vec![0.6, 0.4]).unwrap();
        let sigma_m = FiniteMeasure::probability(vec![0.2, 0.8]).unwrap();
        for &theta in &[0.0, 0.3, 0.7, 1.0] {
            assert_abs_diff_eq!(
                quantum_psi(&rho, &sigma, theta).unwrap(),
                crate::classical::classical_psi(&rho_m, &sigma_m, theta).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn acceptance_bound_holds_at_small_blocklengths() {
        let (rho, sigma) = section_pair();
        for n in [1u32, 2, 3] {
            for &a in &[0.2, 0.4, 0.6] {
                let p =
                    iid_projection_point(&rho, &sigma, n, a, ProjectionMode::Nonstrict, None).unwrap();
                let g = 1.0 - p.eval.alpha;
                for k in 0..=10 {
                    let theta = k as f64 / 10.0;
                    let bound = ogawa_nagaoka_bound(&rho, &sigma, n, a, theta).unwrap();
                    assert!(
                        g <= bound + 1e-12,
                        "n={n} a={a} theta={theta}: {g} > {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn measured_divergence_floor_holds() {
        let (rho, sigma) = section_pair();
        let rho_n = tensor_power(rho.operator(), 2, None).unwrap();
        let sigma_n = tensor_power(sigma.operator(), 2, None).unwrap();
        for &a in &[0.0, 0.3, 0.6] {
            let proj = np_projection(&rho_n, &sigma_n, 2, a, ProjectionMode::Strict).unwrap();
            let d = measured_binary_divergence(&rho_n, &sigma_n, &proj.projector).unwrap();
            let rho_t = trace_pair(&rho_n, &proj.projector).unwrap();
            let sigma_t = trace_pair(&sigma_n, &proj.projector).unwrap();
            if sigma_t > 0.0 {
                assert!(d >= measured_divergence_floor(rho_t, sigma_t) - 1e-12);
            }
        }
    }
}
