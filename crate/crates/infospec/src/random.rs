//! Seeded generators for fuzz inputs and self-tests.
//!
//! Everything here is deterministic given the seed, so failures found
//! by randomized checks replay exactly.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classical::{ClassicalTest, FiniteMeasure};
use crate::error::Result;
use crate::operator::{spectral_decompose, DensityOperator, HermitianOperator, C64};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-entry matrix, complex unless `real`.
fn ginibre(rng: &mut ChaCha8Rng, dim: usize, real: bool) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
        C64::new(re, im)
    })
}

/// Random Hermitian operator with Gaussian entries, `(G + G*) / 2`.
pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, real: bool) -> HermitianOperator {
    let g = ginibre(rng, dim, real);
    let h = (&g + g.adjoint()).scale(0.5);
    HermitianOperator::new(h).expect("symmetrized by construction")
}

/// Wishart-based density operator. `floor` mixes in the maximally mixed
/// state, bounding the smallest eigenvalue below by `floor / dim`;
/// pass 0 for an unfloored draw.
pub fn random_density(
    rng: &mut ChaCha8Rng,
    dim: usize,
    real: bool,
    floor: f64,
) -> Result<DensityOperator> {
    let g = ginibre(rng, dim, real);
    let w = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| w[(i, i)].re).sum();
    let mixed = C64::new(floor / dim as f64, 0.0);
    let scale = C64::new((1.0 - floor) / tr, 0.0);
    let mut m = w * scale;
    for i in 0..dim {
        m[(i, i)] += mixed;
    }
    DensityOperator::new(HermitianOperator::new(m)?)
}

/// Pair of independent qubit states for cross-route comparisons. The
/// floor keeps both pencils away from rank deficiency so routes can be
/// compared at tight tolerances.
pub fn random_qubit_pair(
    rng: &mut ChaCha8Rng,
    real: bool,
    floor: f64,
) -> Result<(DensityOperator, DensityOperator)> {
    let rho = random_density(rng, 2, real, floor)?;
    let sigma = random_density(rng, 2, real, floor)?;
    Ok((rho, sigma))
}

/// Random test operator `0 <= T <= I`: uniform eigenvalues in a random
/// Hermitian eigenbasis.
pub fn random_test_operator(rng: &mut ChaCha8Rng, dim: usize, real: bool) -> HermitianOperator {
    let h = random_hermitian(rng, dim, real);
    let dec = spectral_decompose(&h).expect("random Hermitian decomposes");
    let basis = dec.vectors();
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for j in 0..dim {
        let u: f64 = rng.random();
        let col = basis.column(j);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] += col[r] * col[c].conj() * C64::new(u, 0.0);
            }
        }
    }
    HermitianOperator::new(m).expect("sum of scaled projectors is Hermitian")
}

/// Probability vector with every weight at least `min_w` before
/// normalization, keeping ratios bounded for tight-tolerance tests.
pub fn random_probability(rng: &mut ChaCha8Rng, m: usize, min_w: f64) -> Result<FiniteMeasure> {
    let raw: Vec<f64> = (0..m).map(|_| min_w + (1.0 - min_w) * rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    FiniteMeasure::probability(raw.into_iter().map(|w| w / total).collect())
}

/// Unnormalized finite measure with weights in `(0, scale]`.
pub fn random_measure(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Result<FiniteMeasure> {
    let raw: Vec<f64> = (0..m)
        .map(|_| scale * (rng.random::<f64>() + 1e-6))
        .collect();
    FiniteMeasure::new(raw, false)
}

/// Randomized acceptance vector in `[0, 1]^m`.
pub fn random_classical_test(rng: &mut ChaCha8Rng, m: usize) -> ClassicalTest {
    let accept: Vec<f64> = (0..m).map(|_| rng.random()).collect();
    ClassicalTest::new(accept).expect("entries drawn inside [0, 1]")
}

/// Random spectral atoms `(z, i)` with `i >= 0`, sorted by `z` with a
/// minimum separation so grid forms can resolve individual jumps.
pub fn random_step_atoms(
    rng: &mut ChaCha8Rng,
    count: usize,
    z_span: (f64, f64),
    i_max: f64,
) -> Vec<(f64, f64)> {
    let mut zs: Vec<f64> = (0..count)
        .map(|_| z_span.0 + (z_span.1 - z_span.0) * rng.random::<f64>())
        .collect();
    zs.sort_by(|a, b| a.total_cmp(b));
    zs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    zs.into_iter()
        .map(|z| (z, i_max * rng.random::<f64>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::trace_pair;

    #[test]
    fn seeded_draws_replay() {
        let mut a = rng_from_seed(7);
        let mut b = rng_from_seed(7);
        let da = random_density(&mut a, 3, false, 0.05).unwrap();
        let db = random_density(&mut b, 3, false, 0.05).unwrap();
        assert_eq!(da.operator().matrix(), db.operator().matrix());
    }

    #[test]
    fn density_floor_bounds_spectrum() {
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let d = random_density(&mut rng, 4, false, 0.1).unwrap();
            let dec = spectral_decompose(d.operator()).unwrap();
            assert!(dec.values()[0] >= 0.1 / 4.0 - 1e-12);
            let tr: f64 = dec.values().iter().sum();
            assert!((tr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn test_operator_stays_inside_unit_interval() {
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            let t = random_test_operator(&mut rng, 3, false);
            let dec = spectral_decompose(&t).unwrap();
            assert!(dec.values()[0] >= -1e-12);
            assert!(dec.values()[dec.values().len() - 1] <= 1.0 + 1e-12);
            // sanity: acceptance probability of a density is in [0, 1]
            let d = random_density(&mut rng, 3, false, 0.0).unwrap();
            let p = trace_pair(d.operator(), &t).unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn step_atoms_sorted_and_separated() {
        let mut rng = rng_from_seed(5);
        let atoms = random_step_atoms(&mut rng, 30, (-1.0, 1.0), 2.0);
        for w in atoms.windows(2) {
            assert!(w[1].0 - w[0].0 >= 1e-3 - 1e-12);
            assert!(w[0].1 >= 0.0 && w[1].1 >= 0.0);
        }
    }
}
