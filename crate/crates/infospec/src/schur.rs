//! Permutation-symmetry fast path for qubit tensor-power tests.
//!
//! For a 2x2 operator `X`, the `n`-fold tensor power decomposes into
//! sectors labelled by `k = 0..=n/2`: each sector carries the block
//! `det(X)^k * Sym^{n-2k}(X)` of dimension `n - 2k + 1`, repeated with
//! multiplicity `C(n,k) - C(n,k-1)`. Both hypotheses decompose with the
//! same sector structure, so the difference pencil diagonalizes per
//! sector and the full test at blocklength `n` costs polynomial work.
//!
//! Blocks are held as `e^{ln_scale} * mat` with `mat` normalized to unit
//! max entry, so large `n` neither overflows nor flushes to zero.

use nalgebra::DMatrix;

use crate::classical::{binomial_u128, ln_factorial_table};
use crate::error::{Error, Result};
use crate::eval::TestEvaluation;
use crate::operator::{spectral_decompose, DensityOperator, HermitianOperator, ProjectionMode, C64};
use crate::tolerance;

pub mod cache;

/// `C(n,k) - C(n,k-1)`, the number of copies of sector `k`, as exact
/// integer when it fits.
pub fn multiplicity_exact(n: u32, k: u32) -> Option<u128> {
    if k == 0 {
        return Some(1);
    }
    let a = binomial_u128(n as u64, k as u64)?;
    let b = binomial_u128(n as u64, k as u64 - 1)?;
    Some(a - b)
}

/// `ln(C(n,k) - C(n,k-1))`, valid beyond the exact-integer range through
/// `m = C(n,k) (n - 2k + 1) / (n - k + 1)`.
pub fn multiplicity_ln(n: u32, k: u32) -> f64 {
    if let Some(m) = multiplicity_exact(n, k) {
        return (m as f64).ln();
    }
    let ln_fact = ln_factorial_table(n as usize);
    let ln_binom =
        ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize];
    ln_binom + ((n - 2 * k + 1) as f64 / (n - k + 1) as f64).ln()
}

/// Matrix of the `m`-fold symmetric power of a 2x2 operator in the
/// orthonormal symmetric basis, dimension `m + 1`.
///
/// With `A = [[a, b], [c, d]]`, the entry at row `r`, column `s` is
/// `sum_t m! / (t! (r-t)! (s-t)! (m-r-s+t)!)
///        a^{m-r-s+t} b^{s-t} c^{r-t} d^t / sqrt(C(m,r) C(m,s))`.
pub fn sym_power_matrix(a: &DMatrix<C64>, m: usize) -> DMatrix<C64> {
    assert_eq!(a.nrows(), 2);
    assert_eq!(a.ncols(), 2);
    let (aa, ab, ac, ad) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let mut pa = Vec::with_capacity(m + 1);
    let mut pb = Vec::with_capacity(m + 1);
    let mut pc = Vec::with_capacity(m + 1);
    let mut pd = Vec::with_capacity(m + 1);
    let one = C64::new(1.0, 0.0);
    pa.push(one);
    pb.push(one);
    pc.push(one);
    pd.push(one);
    for i in 0..m {
        pa.push(pa[i] * aa);
        pb.push(pb[i] * ab);
        pc.push(pc[i] * ac);
        pd.push(pd[i] * ad);
    }

    let ln_fact = ln_factorial_table(m.max(1));
    let coeff = |t: usize, r: usize, s: usize| -> f64 {
        let exact = || -> Option<u128> {
            // m! / (t! (r-t)! (s-t)! (m-r-s+t)!) as nested binomials
            let mut c = binomial_u128(m as u64, t as u64)?;
            c = c.checked_mul(binomial_u128((m - t) as u64, (r - t) as u64)?)?;
            c.checked_mul(binomial_u128((m - r) as u64, (s - t) as u64)?)
        };
        match exact() {
            Some(c) => c as f64,
            None => (ln_fact[m] - ln_fact[t] - ln_fact[r - t] - ln_fact[s - t]
                - ln_fact[m + t - r - s])
                .exp(),
        }
    };
    let ln_binom_row: Vec<f64> = (0..=m)
        .map(|r| ln_fact[m] - ln_fact[r] - ln_fact[m - r])
        .collect();

    DMatrix::from_fn(m + 1, m + 1, |r, s| {
        let mut sum = C64::new(0.0, 0.0);
        let t_lo = (r + s).saturating_sub(m);
        for t in t_lo..=r.min(s) {
            let k = coeff(t, r, s);
            // grouping keeps (r, s) and (s, r) entries exact conjugate
            // mirrors: `rad` is symmetric, `cross` conjugates under swap
            let rad = pa[m + t - r - s] * pd[t];
            let cross = pb[s - t] * pc[r - t];
            sum += rad * cross * k;
        }
        sum * (-0.5 * (ln_binom_row[r] + ln_binom_row[s])).exp()
    })
}

/// A sector block stored as `e^{ln_scale} * mat`, `mat` normalized to
/// unit max entry. A vanished block has `ln_scale = -inf` and zero `mat`.
#[derive(Debug, Clone)]
pub struct ScaledBlock {
    pub ln_scale: f64,
    pub mat: DMatrix<C64>,
}

impl ScaledBlock {
    fn from_raw(mat: DMatrix<C64>, ln_extra: f64) -> Self {
        let peak = mat.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if peak == 0.0 || ln_extra == f64::NEG_INFINITY {
            let d = mat.nrows();
            return Self {
                ln_scale: f64::NEG_INFINITY,
                mat: DMatrix::zeros(d, d),
            };
        }
        Self {
            ln_scale: peak.ln() + ln_extra,
            mat: mat.map(|z| z / peak),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_scale == f64::NEG_INFINITY
    }

    /// `e^{ln_scale} * Tr(mat)`, the true block trace.
    pub fn trace(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let tr: f64 = (0..self.mat.nrows()).map(|i| self.mat[(i, i)].re).sum();
        self.ln_scale.exp() * tr
    }
}

#[derive(Debug, Clone)]
pub struct Sector {
    pub k: u32,
    /// Block dimension `n - 2k + 1`.
    pub dim: usize,
    pub ln_mult: f64,
    /// +1 normally; fault injection flips it.
    pub sign: f64,
    pub rho: ScaledBlock,
    pub sigma: ScaledBlock,
}

/// Sector decomposition of a qubit pair at blocklength `n`.
#[derive(Debug, Clone)]
pub struct SchurDecomposition {
    pub n: u32,
    pub sectors: Vec<Sector>,
}

/// Build options. `corrupt_multiplicity_sign` deliberately flips one
/// sector weight so integrity checks downstream must fail; it exists for
/// the self-test harness.
#[derive(Debug, Clone, Default)]
pub struct SchurOptions<'c> {
    pub corrupt_multiplicity_sign: bool,
    pub cache: Option<&'c cache::BlockCache>,
}

fn det2(op: &HermitianOperator) -> Result<f64> {
    let m = op.matrix();
    let det = m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr();
    let scale = op.max_norm().max(1.0);
    let band = tolerance::EIG_ZERO_BAND * scale * scale;
    if det < -band {
        return Err(Error::Input(format!(
            "operator has negative determinant {det:.3e}; not positive semidefinite"
        )));
    }
    // determinants inside the zero band are rank-one rounding noise
    if det <= band {
        return Ok(0.0);
    }
    Ok(det)
}

fn sector_block(
    op: &HermitianOperator,
    tag: &str,
    n: u32,
    k: u32,
    opts: &SchurOptions,
) -> Result<ScaledBlock> {
    let m = (n - 2 * k) as usize;
    let det = det2(op)?;
    let ln_det_k = if k == 0 {
        0.0
    } else if det == 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * det.ln()
    };
    if ln_det_k == f64::NEG_INFINITY {
        return Ok(ScaledBlock {
            ln_scale: f64::NEG_INFINITY,
            mat: DMatrix::zeros(m + 1, m + 1),
        });
    }
    if let Some(c) = opts.cache {
        let key = cache::block_key(op, tag, n, k);
        if let Some((ln_scale, mat)) = c.load_block(&key)? {
            return Ok(ScaledBlock { ln_scale, mat });
        }
        let block = ScaledBlock::from_raw(sym_power_matrix(op.matrix(), m), ln_det_k);
        c.store_block(&key, block.ln_scale, &block.mat)?;
        return Ok(block);
    }
    Ok(ScaledBlock::from_raw(sym_power_matrix(op.matrix(), m), ln_det_k))
}

pub fn build_decomposition_with(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
    opts: &SchurOptions,
) -> Result<SchurDecomposition> {
    if rho.dim() != 2 || sigma.dim() != 2 {
        return Err(Error::Input(format!(
            "sector decomposition needs 2x2 operators, got {}x{}",
            rho.dim(),
            sigma.dim()
        )));
    }
    if n == 0 {
        return Err(Error::Input("blocklength must be >= 1".into()));
    }
    let mut sectors = Vec::with_capacity(n as usize / 2 + 1);
    for k in 0..=n / 2 {
        let sign = if opts.corrupt_multiplicity_sign && k == n / 2 {
            -1.0
        } else {
            1.0
        };
        sectors.push(Sector {
            k,
            dim: (n - 2 * k + 1) as usize,
            ln_mult: multiplicity_ln(n, k),
            sign,
            rho: sector_block(rho.operator(), "rho", n, k, opts)?,
            sigma: sector_block(sigma.operator(), "sigma", n, k, opts)?,
        });
    }
    Ok(SchurDecomposition { n, sectors })
}

pub fn build_decomposition(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
) -> Result<SchurDecomposition> {
    build_decomposition_with(rho, sigma, n, &SchurOptions::default())
}

/// One threshold of the sector-decomposed sweep.
#[derive(Debug, Clone, Copy)]
pub struct SchurGridPoint {
    pub a: f64,
    pub eval: TestEvaluation,
}

fn kahan_add(acc: &mut f64, comp: &mut f64, x: f64) {
    let y = x - *comp;
    let t = *acc + y;
    *comp = (t - *acc) - y;
    *acc = t;
}

impl SchurDecomposition {
    /// Sum over sectors of `mult * e^{ln_scale} * Tr(block)` for both
    /// hypotheses. For density inputs each must equal 1; the residuals
    /// are the cheapest full-structure integrity check.
    pub fn trace_identity_residual(&self) -> (f64, f64) {
        let mut tr = (0.0f64, 0.0f64);
        let mut comp = (0.0f64, 0.0f64);
        for sec in &self.sectors {
            let w = sec.sign * sec.ln_mult.exp();
            kahan_add(&mut tr.0, &mut comp.0, w * sec.rho.trace());
            kahan_add(&mut tr.1, &mut comp.1, w * sec.sigma.trace());
        }
        ((tr.0 - 1.0).abs(), (tr.1 - 1.0).abs())
    }

    /// Error triple of the likelihood projection test at threshold `a`,
    /// assembled sector by sector.
    pub fn evaluate(&self, a: f64, mode: ProjectionMode) -> Result<SchurGridPoint> {
        let na = self.n as f64 * a;
        if na > 700.0 {
            return Err(Error::Domain {
                context: "schur evaluate",
                detail: format!("e^{{n a}} overflows for n = {}, a = {a}", self.n),
            });
        }
        let mut alpha = 0.0f64;
        let mut beta = 0.0f64;
        let mut beta_c = 0.0f64;
        let mut comp = [0.0f64; 3];

        for sec in &self.sectors {
            let ln_r = sec.rho.ln_scale;
            let ln_s = if sec.sigma.is_zero() {
                f64::NEG_INFINITY
            } else {
                sec.sigma.ln_scale + na
            };
            if ln_r == f64::NEG_INFINITY && ln_s == f64::NEG_INFINITY {
                continue;
            }
            let u = ln_r.max(ln_s);
            let d = sec.dim;
            let wr = (ln_r - u).exp();
            let ws = (ln_s - u).exp();
            let mut pencil = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    pencil[(i, j)] = sec.rho.mat[(i, j)] * wr - sec.sigma.mat[(i, j)] * ws;
                }
            }
            let pencil = HermitianOperator::trusted(pencil);
            let band = tolerance::EIG_ZERO_BAND * pencil.max_norm().max(1.0);
            let dec = spectral_decompose(&pencil)?;
            let accept = |lam: f64| match mode {
                ProjectionMode::Strict => lam > band,
                ProjectionMode::Nonstrict => lam >= -band,
            };

            // weights for the true (unscaled) traces of this sector
            let w_rho = sec.sign * (sec.ln_mult + sec.rho.ln_scale).exp();
            let w_sigma = sec.sign * (sec.ln_mult + sec.sigma.ln_scale).exp();
            for idx in 0..d {
                let v = dec.vectors().column(idx);
                let mut qr = 0.0f64;
                let mut qs = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        let vv = v[i].conj() * v[j];
                        qr += (sec.rho.mat[(i, j)] * vv).re;
                        qs += (sec.sigma.mat[(i, j)] * vv).re;
                    }
                }
                if accept(dec.values()[idx]) {
                    kahan_add(&mut beta, &mut comp[1], w_sigma * qs);
                } else {
                    kahan_add(&mut alpha, &mut comp[0], w_rho * qr);
                    kahan_add(&mut beta_c, &mut comp[2], w_sigma * qs);
                }
            }
        }
        Ok(SchurGridPoint {
            a,
            eval: TestEvaluation::from_errors(
                self.n,
                alpha.max(0.0),
                beta.max(0.0),
                beta_c.max(0.0),
            ),
        })
    }
}

/// Sector-decomposed sweep over a threshold grid; the decomposition is
/// built once and reused.
pub fn g_curve(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
    a_grid: &[f64],
    mode: ProjectionMode,
) -> Result<Vec<SchurGridPoint>> {
    let dec = build_decomposition(rho, sigma, n)?;
    a_grid.iter().map(|&a| dec.evaluate(a, mode)).collect()
}
