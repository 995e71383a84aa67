//! Hermitian operators, spectral decompositions, and spectral projections.
//!
//! All eigenproblems in the crate funnel through [`spectral_decompose`],
//! which wraps a self-adjoint solver with a real-input fast path and a
//! reconstruction check. Eigenvalues are always returned ascending.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

pub type C64 = num_complex::Complex<f64>;

/// Default cap on the ambient dimension produced by [`tensor_power`].
pub const DEFAULT_TENSOR_DIM_CAP: u128 = 2048;

/// A finite-dimensional Hermitian matrix. The stored matrix is exactly
/// Hermitian: constructors symmetrize after checking the input is within
/// tolerance of its own adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: DMatrix<C64>,
    real: bool,
}

fn max_entry_norm(mat: &DMatrix<C64>) -> f64 {
    mat.iter().fold(0.0f64, |m, z| m.max(z.norm_sqr())).sqrt()
}

impl HermitianOperator {
    fn build(mat: DMatrix<C64>, rel_tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimMismatch {
                left: mat.nrows(),
                right: mat.ncols(),
            });
        }
        let scale = max_entry_norm(&mat).max(1.0);
        let tol = rel_tol * scale;
        let mut residual = 0.0f64;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                residual = residual.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if residual > tol {
            return Err(Error::NotHermitian { residual, tol });
        }
        let mut sym = mat.clone();
        for i in 0..mat.nrows() {
            sym[(i, i)] = C64::new(mat[(i, i)].re, 0.0);
            for j in (i + 1)..mat.ncols() {
                let avg = 0.5 * (mat[(i, j)] + mat[(j, i)].conj());
                sym[(i, j)] = avg;
                sym[(j, i)] = avg.conj();
            }
        }
        let real = sym.iter().all(|z| z.im == 0.0);
        Ok(Self { mat: sym, real })
    }

    /// Wrap a matrix produced inside the crate.
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        Self::build(mat, tolerance::HERMITIAN_BUILD)
    }

    /// Wrap a matrix read from an external source; the symmetry tolerance
    /// is wider because files may carry truncated digits.
    pub fn ingest(mat: DMatrix<C64>) -> Result<Self> {
        Self::build(mat, tolerance::HERMITIAN_INGEST)
    }

    /// Internal constructor for matrices that are Hermitian by
    /// construction (sums, scalings, Kronecker products of Hermitian
    /// inputs).
    pub(crate) fn trusted(mat: DMatrix<C64>) -> Self {
        let real = mat.iter().all(|z| z.im == 0.0);
        Self { mat, real }
    }

    pub fn from_real(mat: DMatrix<f64>) -> Result<Self> {
        Self::new(mat.map(|x| C64::new(x, 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut mat = DMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            mat[(i, i)] = C64::new(x, 0.0);
        }
        Self { mat, real: true }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
            real: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    /// Largest entry modulus; the scale used by relative tolerances.
    pub fn max_norm(&self) -> f64 {
        max_entry_norm(&self.mat)
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            mat: self.mat.map(|z| z * t),
            real: self.real,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(Self {
            mat: &self.mat - &other.mat,
            real: self.real && other.real,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(Self {
            mat: &self.mat + &other.mat,
            real: self.real && other.real,
        })
    }

    pub fn to_json(&self) -> OperatorJson {
        OperatorJson::from_operator(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let parsed: OperatorJson = serde_json::from_str(s)?;
        parsed.into_operator()
    }
}

/// Kronecker product; Hermitian inputs give a Hermitian output.
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        mat: a.mat.kronecker(&b.mat),
        real: a.real && b.real,
    }
}

/// `op^{⊗ n}`. Fails with a cap error before allocating when the ambient
/// dimension `dim^n` would exceed `dim_cap`.
pub fn tensor_power(
    op: &HermitianOperator,
    n: u32,
    dim_cap: Option<u128>,
) -> Result<HermitianOperator> {
    if n == 0 {
        return Err(Error::Input("tensor power requires n >= 1".into()));
    }
    let cap = dim_cap.unwrap_or(DEFAULT_TENSOR_DIM_CAP);
    let needed = (op.dim() as u128)
        .checked_pow(n)
        .ok_or(Error::CapExceeded { needed: u128::MAX, cap })?;
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let mut out = op.clone();
    for _ in 1..n {
        out = kron(&out, op);
    }
    Ok(out)
}

/// `Re Tr(A B)` for Hermitian `A`, `B`; the product trace of two Hermitian
/// matrices is real. Computed as a Frobenius inner product, O(d^2).
pub fn trace_pair(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.mat.iter().zip(b.mat.iter()) {
        let term = x.re * y.re + x.im * y.im;
        let t = acc + term;
        comp += if acc.abs() >= term.abs() {
            (acc - t) + term
        } else {
            (term - t) + acc
        };
        acc = t;
    }
    Ok(acc + comp)
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
    scale: f64,
}

fn ensure_seq_backend() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn spectral_decompose(op: &HermitianOperator) -> Result<SpectralDecomposition> {
    ensure_seq_backend();
    let d = op.dim();
    if d == 0 {
        return Err(Error::Input("empty operator".into()));
    }
    let (mut values, mut vectors) = if op.is_real() {
        let fm = faer::Mat::<f64>::from_fn(d, d, |i, j| op.mat[(i, j)].re);
        let eig = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::EigenFailure { dim: d, detail: format!("{e:?}") })?;
        let values: Vec<f64> = (0..d).map(|i| eig.S()[i]).collect();
        let u = eig.U();
        let vectors = DMatrix::from_fn(d, d, |i, j| C64::new(u[(i, j)], 0.0));
        (values, vectors)
    } else {
        let fm = faer::Mat::<faer::c64>::from_fn(d, d, |i, j| op.mat[(i, j)]);
        let eig = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::EigenFailure { dim: d, detail: format!("{e:?}") })?;
        let values: Vec<f64> = (0..d).map(|i| eig.S()[i].re).collect();
        let u = eig.U();
        let vectors = DMatrix::from_fn(d, d, |i, j| u[(i, j)]);
        (values, vectors)
    };

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    if order.windows(2).any(|w| w[0] > w[1]) {
        let sorted_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let mut sorted_vecs = DMatrix::zeros(d, d);
        for (dst, &src) in order.iter().enumerate() {
            sorted_vecs.set_column(dst, &vectors.column(src));
        }
        values = sorted_vals;
        vectors = sorted_vecs;
    }

    let dec = SpectralDecomposition {
        values,
        vectors,
        scale: op.max_norm(),
    };
    dec.verify(op)?;
    Ok(dec)
}

impl SpectralDecomposition {
    /// Reconstruction check. Full entrywise residual for small dims; for
    /// large dims, matrix-vector residuals on fixed probe vectors, which
    /// still catch solver failures at O(d^2) cost.
    fn verify(&self, op: &HermitianOperator) -> Result<()> {
        let d = self.values.len();
        let tol = tolerance::EIG_RECONSTRUCT * self.scale.max(f64::MIN_POSITIVE);
        if d <= 64 {
            let lam = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    C64::new(self.values[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let rec = &self.vectors * lam * self.vectors.adjoint();
            let mut residual = 0.0f64;
            for (x, y) in rec.iter().zip(op.mat.iter()) {
                residual = residual.max((x - y).norm());
            }
            if residual > tol {
                return Err(Error::EigenFailure {
                    dim: d,
                    detail: format!("reconstruction residual {residual:.3e} > {tol:.3e}"),
                });
            }
        } else {
            // xorshift probe vectors: deterministic, no RNG dependency here
            let mut state = 0x9E37_79B9_7F4A_7C15u64;
            let mut next = move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let vec_tol = tol * d as f64;
            for _ in 0..4 {
                let v = DMatrix::from_fn(d, 1, |_, _| C64::new(next(), 0.0));
                let av = &op.mat * &v;
                let proj = self.vectors.adjoint() * &v;
                let mut scaled = proj.clone();
                for i in 0..d {
                    scaled[(i, 0)] *= self.values[i];
                }
                let rec = &self.vectors * scaled;
                let mut residual = 0.0f64;
                for (x, y) in rec.iter().zip(av.iter()) {
                    residual = residual.max((x - y).norm());
                }
                if residual > vec_tol {
                    return Err(Error::EigenFailure {
                        dim: d,
                        detail: format!("probe residual {residual:.3e} > {vec_tol:.3e}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    /// `V f(Λ) V^†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let fv = f(self.values[j]);
            for i in 0..d {
                scaled[(i, j)] *= fv;
            }
        }
        HermitianOperator::trusted(scaled * self.vectors.adjoint())
    }

    /// Orthogonal projector onto the span of eigenvectors whose
    /// eigenvalue satisfies `pred`, plus the projector rank.
    pub fn projector_where(&self, pred: impl Fn(f64) -> bool) -> (HermitianOperator, usize) {
        let d = self.values.len();
        let keep: Vec<usize> = (0..d).filter(|&i| pred(self.values[i])).collect();
        if keep.is_empty() {
            return (HermitianOperator::trusted(DMatrix::zeros(d, d)), 0);
        }
        let mut basis = DMatrix::zeros(d, keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            basis.set_column(dst, &self.vectors.column(src));
        }
        let mat = &basis * basis.adjoint();
        (HermitianOperator::trusted(mat), keep.len())
    }

    /// Indices of eigenvalues satisfying `pred`, without forming the
    /// projector. Used by evaluation paths that only need traces.
    pub fn indices_where(&self, pred: impl Fn(f64) -> bool) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| pred(self.values[i]))
            .collect()
    }
}

/// Whether the spectral projection keeps the zero band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Eigenvalues strictly above the zero band.
    Strict,
    /// Eigenvalues above or inside the zero band.
    Nonstrict,
}

#[derive(Debug, Clone)]
pub struct PositivePart {
    pub projector: HermitianOperator,
    pub rank: usize,
    /// Half-width of the eigenvalue band treated as zero.
    pub zero_band: f64,
}

/// Projector onto the positive part of `op`. Eigenvalues within
/// `EIG_ZERO_BAND * max(1, max-norm)` of zero count as zero: strict mode
/// excludes them, nonstrict mode includes them.
pub fn positive_part_projection(
    op: &HermitianOperator,
    mode: ProjectionMode,
) -> Result<PositivePart> {
    let dec = spectral_decompose(op)?;
    positive_part_from_decomposition(&dec, op.max_norm(), mode)
}

pub fn positive_part_from_decomposition(
    dec: &SpectralDecomposition,
    max_norm: f64,
    mode: ProjectionMode,
) -> Result<PositivePart> {
    let band = tolerance::EIG_ZERO_BAND * max_norm.max(1.0);
    let (projector, rank) = match mode {
        ProjectionMode::Strict => dec.projector_where(|x| x > band),
        ProjectionMode::Nonstrict => dec.projector_where(|x| x >= -band),
    };
    Ok(PositivePart {
        projector,
        rank,
        zero_band: band,
    })
}

/// How `matrix_function` treats eigenvalues below a domain edge.
#[derive(Debug, Clone, Copy)]
pub enum DomainPolicy {
    Unrestricted,
    /// Raise eigenvalues below the floor up to it before applying `f`.
    ClipBelow(f64),
    /// Error out when any eigenvalue is below the edge.
    RejectBelow(f64),
}

/// `f` applied to `op` through its eigenbasis.
pub fn matrix_function(
    op: &HermitianOperator,
    f: impl Fn(f64) -> f64,
    policy: DomainPolicy,
) -> Result<HermitianOperator> {
    let dec = spectral_decompose(op)?;
    if let DomainPolicy::RejectBelow(edge) = policy {
        if let Some(&low) = dec.values().first() {
            if low < edge {
                return Err(Error::Domain {
                    context: "matrix_function",
                    detail: format!("eigenvalue {low:.6e} below domain edge {edge:.6e}"),
                });
            }
        }
    }
    Ok(dec.apply(|x| match policy {
        DomainPolicy::ClipBelow(floor) => f(x.max(floor)),
        _ => f(x),
    }))
}

/// A unit-trace positive semidefinite operator.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    /// Validates positivity (up to the zero band) and unit trace (1e-9).
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("density trace {tr} is not 1")));
        }
        let dec = spectral_decompose(&op)?;
        let band = tolerance::EIG_ZERO_BAND * op.max_norm().max(1.0);
        if let Some(&low) = dec.values().first() {
            if low < -band {
                return Err(Error::Input(format!(
                    "density has negative eigenvalue {low:.6e}"
                )));
            }
        }
        Ok(Self { op })
    }

    /// Rank-one state from an unnormalized vector.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::Input("zero vector".into()));
        }
        let d = v.len();
        let mat = DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj() / norm_sq);
        Ok(Self {
            op: HermitianOperator::trusted(mat),
        })
    }

    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| x < 0.0) {
            return Err(Error::Input("negative probability".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("probabilities sum to {s}")));
        }
        Ok(Self {
            op: HermitianOperator::from_diagonal(p),
        })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// JSON wire format for Hermitian operators: row-major real and
/// (optional) imaginary parts.
#[derive(Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl OperatorJson {
    pub fn from_operator(op: &HermitianOperator) -> Self {
        let d = op.dim();
        let re = (0..d)
            .map(|i| (0..d).map(|j| op.mat[(i, j)].re).collect())
            .collect();
        let im = if op.is_real() {
            None
        } else {
            Some(
                (0..d)
                    .map(|i| (0..d).map(|j| op.mat[(i, j)].im).collect())
                    .collect(),
            )
        };
        Self { dim: d, re, im }
    }

    pub fn into_operator(self) -> Result<HermitianOperator> {
        let d = self.dim;
        let check_shape = |rows: &Vec<Vec<f64>>| -> Result<()> {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::Input(format!("matrix rows do not match dim {d}")));
            }
            Ok(())
        };
        check_shape(&self.re)?;
        if let Some(im) = &self.im {
            check_shape(im)?;
        }
        let mat = DMatrix::from_fn(d, d, |i, j| {
            C64::new(
                self.re[i][j],
                self.im.as_ref().map_or(0.0, |m| m[i][j]),
            )
        });
        HermitianOperator::ingest(mat)
    }
}
