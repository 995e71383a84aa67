//! Numerical tolerances used across the crate.
//!
//! Every constant here is scaled into an absolute tolerance at the point
//! of use; the values below are the dimensionless knobs.

/// Hermitian symmetry allowed when an operator is built inside the crate,
/// relative to `max(1, max-entry)`. Internal constructions only ever pick
/// up rounding noise, so this sits just above accumulated f64 error.
pub const HERMITIAN_BUILD: f64 = 1e-12;

/// Hermitian symmetry allowed for operators read from files. External
/// producers may have printed with fewer digits.
pub const HERMITIAN_INGEST: f64 = 1e-9;

/// Eigendecomposition reconstruction residual, relative to the max entry
/// norm of the input.
pub const EIG_RECONSTRUCT: f64 = 1e-10;

/// Half-width of the band around zero inside which an eigenvalue is
/// treated as zero, relative to `max(1, max-entry)`. Strict positive-part
/// projections exclude the band, nonstrict ones include it.
pub const EIG_ZERO_BAND: f64 = 1e-11;

/// Smallest probability weight kept when a measure is clipped under a
/// full-support policy.
pub const SUPPORT_CLIP: f64 = 1e-300;

/// Trace of `rho` on the null space of `sigma` above which the pair is
/// declared support-incompatible.
pub const SUPPORT_LEAK: f64 = 1e-10;

/// Absolute band inside which two log-likelihood-ratio atoms merge.
pub const LLR_TIE: f64 = 1e-12;

/// Floor for residuals of one-sided inequalities: a residual below this
/// (negative) value is a real violation, above it is rounding fuzz.
pub const ONE_SIDED_FUZZ: f64 = -1e-9;

/// Inset used when a supremum over a half-open parameter interval is
/// approximated by evaluating just inside the endpoint.
pub const THETA_INSET: f64 = 1e-6;

/// Convergence width for golden-section searches on exponent objectives.
pub const GOLDEN_WIDTH: f64 = 1e-10;

/// Most negative tilting parameter explored by bounded-domain optimizers.
pub const THETA_FLOOR: f64 = -40.0;

/// Largest tilting parameter explored by nonnegative-domain optimizers.
pub const THETA_CEIL: f64 = 128.0;

/// Tolerance for detecting a flat plateau of a rate function on a grid.
pub const PLATEAU: f64 = 1e-9;

/// Slack when comparing accumulated probability mass against a target
/// level, absorbing summation rounding.
pub const MASS_SLACK: f64 = 1e-12;

/// Default cap on tensor-power ambient dimension and on type-class counts.
pub const DEFAULT_CAP: u128 = 2_000_000;
