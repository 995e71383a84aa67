//! Finite-blocklength binary hypothesis testing, classical and quantum.
//!
//! The crate is organized around one object: the likelihood test that
//! accepts when the density `rho` dominates `e^{n a} sigma`. Everything
//! else is built on top of it:
//!
//! - [`operator`]: Hermitian matrices, spectral decompositions, spectral
//!   projections, tensor powers.
//! - [`classical`]: finite measures, log-likelihood-ratio spectra, and
//!   exact i.i.d. spectra via type classes.
//! - [`quantum`]: density-operator tests, their error triples, and
//!   closed forms for pure states.
//! - [`schur`]: a permutation-symmetry fast path that evaluates qubit
//!   tensor-power tests in polynomial time.
//! - [`exponent`]: rate functions, direct/converse trade-off curves, and
//!   the optimizers that turn cumulant generating functions into
//!   exponents.
//! - [`source`]: fixed-length source coding through the same spectral
//!   quantities.
//! - [`random`]: seeded generators for fuzz suites.
//! - [`selftest`]: cross-checks between independent evaluation routes,
//!   runnable from the CLI.

pub mod classical;
pub mod cli;
pub mod error;
pub mod eval;
pub mod exponent;
pub mod operator;
pub mod quantum;
pub mod random;
pub mod schur;
pub mod selftest;
pub mod source;
pub mod tolerance;

pub use error::{Error, Result};
pub use eval::TestEvaluation;
