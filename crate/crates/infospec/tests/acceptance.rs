//! End-to-end acceptance checks, one test per published contract.
//! Every test prints a single `criterion NN PASS` line with the measured
//! numbers; tolerances are pinned in the assertions.

use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use infospec::classical::{
    evaluate_test, iid_spectrum, kl_divergence, product_measure, ClassicalTest, FiniteMeasure,
    LlrSpectrum, TiePolicy,
};
use infospec::eval::np_residuals;
use infospec::exponent::{
    b_e_forms, b_e_star_forms, b_e_star_star, han_formula_check, han_penalized_value,
    stein_report, two_point_b_e_star, two_point_han, two_point_rate_samples, ClassicalPair,
    StepRates,
};
use infospec::operator::{
    kron, tensor_power, trace_pair, DensityOperator, HermitianOperator, ProjectionMode, C64,
};
use infospec::quantum::{
    self, iid_projection_curve, iid_projection_point, np_projection, ogawa_nagaoka_bound,
    pure_pair, pure_state_g_iid, quantum_psi, relative_entropy,
};
use infospec::random::{
    random_classical_test, random_density, random_measure, random_probability, random_qubit_pair,
    random_step_atoms, random_test_operator, rng_from_seed,
};
use infospec::schur::{build_decomposition, g_curve};
use infospec::source::{
    codebook_from_test, correct_decoding_exponent, han_correct_decoding_value, shannon_entropy,
    sigma_rates, source_error_exponent, test_from_codebook, CodingSystem,
};

/// Several tests assert wall-clock budgets; running criteria one at a
/// time keeps those measurements honest on small machines.
static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

const MODES: [ProjectionMode; 2] = [ProjectionMode::Strict, ProjectionMode::Nonstrict];

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo < hi);
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
    grid[points - 1] = hi;
    grid
}

fn reference_pair() -> (DensityOperator, DensityOperator) {
    let rho = DensityOperator::new(
        HermitianOperator::from_real(DMatrix::from_row_slice(2, 2, &[0.75, 0.35, 0.35, 0.25]))
            .unwrap(),
    )
    .unwrap();
    let sigma = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
    (rho, sigma)
}

/// `Tr(rho_n P)` for the positive-part acceptance projector.
fn brute_g(
    rho_n: &HermitianOperator,
    sigma_n: &HermitianOperator,
    n: u32,
    a: f64,
    mode: ProjectionMode,
) -> f64 {
    let p = np_projection(rho_n, sigma_n, n, a, mode).unwrap();
    trace_pair(rho_n, &p.projector).unwrap()
}

// --- qubit-pair block reduction -------------------------------------
//
// The swap of two qubit factors commutes with A (x) A for every A, so
// the two-qubit space splits into the symmetric (dim 3) and the
// antisymmetric (dim 1) subspace simultaneously for both states. On the
// antisymmetric line A (x) A acts as det(A). Grouping n qubits into
// m = n/2 adjacent pairs and choosing j symmetric factors gives
// C(m, j) equivalent blocks of dimension 3^j (times a leftover qubit
// when n is odd), which is enough to cross-check the sector sweep at
// sizes where the literal 2^n product is too slow to sweep.

fn binom(m: u64, j: u64) -> u64 {
    (0..j).fold(1u64, |acc, t| acc * (m - t) / (t + 1))
}

fn sym_isometry() -> DMatrix<C64> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut v = DMatrix::from_element(4, 3, zero);
    v[(0, 0)] = one;
    v[(1, 1)] = s;
    v[(2, 1)] = s;
    v[(3, 2)] = one;
    v
}

fn sym_square(op: &HermitianOperator) -> HermitianOperator {
    let m = op.matrix();
    let v = sym_isometry();
    HermitianOperator::new(v.adjoint() * m.kronecker(m) * v).unwrap()
}

fn det_2x2(op: &HermitianOperator) -> f64 {
    let m = op.matrix();
    m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr()
}

/// Blocks `(multiplicity, rho block, sigma block)` of the n-fold
/// product, one per symmetric-factor count.
fn pair_blocks(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
) -> Vec<(f64, HermitianOperator, HermitianOperator)> {
    let m = u64::from(n / 2);
    let odd = n % 2 == 1;
    let sym_r = sym_square(rho.operator());
    let sym_s = sym_square(sigma.operator());
    let det_r = det_2x2(rho.operator());
    let det_s = det_2x2(sigma.operator());
    let unit = HermitianOperator::from_diagonal(&[1.0]);
    let mut blocks = Vec::new();
    for j in 0..=m {
        let mut r = unit.clone();
        let mut s = unit.clone();
        for _ in 0..j {
            r = kron(&r, &sym_r);
            s = kron(&s, &sym_s);
        }
        if odd {
            r = kron(&r, rho.operator());
            s = kron(&s, sigma.operator());
        }
        let pw = (m - j) as i32;
        blocks.push((
            binom(m, j) as f64,
            r.scaled(det_r.powi(pw)),
            s.scaled(det_s.powi(pw)),
        ));
    }
    blocks
}

fn blocked_g(
    blocks: &[(f64, HermitianOperator, HermitianOperator)],
    n: u32,
    a: f64,
    mode: ProjectionMode,
) -> f64 {
    blocks
        .iter()
        .map(|(mult, r, s)| {
            let p = np_projection(r, s, n, a, mode).unwrap();
            mult * trace_pair(r, &p.projector).unwrap()
        })
        .sum()
}

// Three qubits split under A (x) A (x) A into the symmetric cube (dim 4)
// plus two equivalent dim-2 blocks acting as det(A) * A; the first copy
// is spanned by (|01k> - |10k>)/sqrt(2) since the antisymmetric pair
// line is preserved with factor det(A). Grouping into triples keeps the
// largest block at 4^3 * 2 dimensions, far below the pair grouping.

fn sym_cube_isometry() -> DMatrix<C64> {
    let t = C64::new(1.0 / 3.0f64.sqrt(), 0.0);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut v = DMatrix::from_element(8, 4, zero);
    v[(0, 0)] = one;
    for idx in [1, 2, 4] {
        v[(idx, 1)] = t;
    }
    for idx in [3, 5, 6] {
        v[(idx, 2)] = t;
    }
    v[(7, 3)] = one;
    v
}

fn sym_cube(op: &HermitianOperator) -> HermitianOperator {
    let m = op.matrix();
    let v = sym_cube_isometry();
    HermitianOperator::new(v.adjoint() * m.kronecker(m).kronecker(m) * v).unwrap()
}

fn triple_blocks(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
) -> Vec<(f64, HermitianOperator, HermitianOperator)> {
    let t = u64::from(n / 3);
    assert!(n % 3 <= 1);
    let odd = n % 3 == 1;
    let sym_r = sym_cube(rho.operator());
    let sym_s = sym_cube(sigma.operator());
    let mix_r = rho.operator().scaled(det_2x2(rho.operator()));
    let mix_s = sigma.operator().scaled(det_2x2(sigma.operator()));
    let unit = HermitianOperator::from_diagonal(&[1.0]);
    let mut blocks = Vec::new();
    for j in 0..=t {
        let mut r = unit.clone();
        let mut s = unit.clone();
        for _ in 0..j {
            r = kron(&r, &sym_r);
            s = kron(&s, &sym_s);
        }
        for _ in 0..(t - j) {
            r = kron(&r, &mix_r);
            s = kron(&s, &mix_s);
        }
        if odd {
            r = kron(&r, rho.operator());
            s = kron(&s, sigma.operator());
        }
        let copies = 2u64.pow((t - j) as u32);
        blocks.push(((binom(t, j) * copies) as f64, r, s));
    }
    blocks
}

// --- tilted-family oracles ------------------------------------------

fn kl_of(w: &[f64], p: &[f64]) -> f64 {
    w.iter()
        .zip(p)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y).ln())
        .sum()
}

/// Member of the two-parameter exponential family through `p` and `q`,
/// `Q_lam` proportional to `p^lam q^(1-lam)`, stabilized in log space so
/// tilts far outside `[0, 1]` stay finite.
fn tilted_family(p: &[f64], q: &[f64], lam: f64) -> Vec<f64> {
    let logs: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&x, &y)| lam * x.ln() + (1.0 - lam) * y.ln())
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `min { D(Q||q) : D(Q||p) <= r }`, solved on the constraint boundary
/// inside the tilted family, `lam` between 0 and 1.
fn trade_off_kl_oracle(p: &[f64], q: &[f64], r: f64) -> f64 {
    if r >= kl_of(q, p) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kl_of(&tilted_family(p, q, mid), p) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    kl_of(&tilted_family(p, q, 0.5 * (lo + hi)), q)
}

/// Strong-converse value through the same family continued to
/// nonpositive tilts; past the family's reach (`r` at or above the
/// worst-atom exponent) the optimizer degenerates to that atom and the
/// value continues affinely.
fn strong_converse_kl_oracle(p: &[f64], q: &[f64], r: f64) -> f64 {
    let d_rev = kl_of(q, p);
    if r <= d_rev {
        return 0.0;
    }
    let worst = p
        .iter()
        .zip(q)
        .enumerate()
        .min_by(|(_, (&a, &b)), (_, (&c, &d))| (a / b).total_cmp(&(c / d)))
        .map(|(i, _)| i)
        .unwrap();
    let d_inf = -p[worst].ln();
    if r >= d_inf - 1e-9 {
        return -q[worst].ln() + (r - d_inf);
    }
    let miss = |lam: f64| kl_of(&tilted_family(p, q, lam), p);
    let mut lo = -1.0f64;
    while miss(lo) < r && lo > -1e9 {
        lo *= 2.0;
    }
    let mut hi = 0.0f64;
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        if miss(mid) >= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    kl_of(&tilted_family(p, q, lo), q)
}

// --- exact step-function forms --------------------------------------
//
// Atoms `(z, i)` sorted by `z` generate three step curves; every form
// below is the exact value over all real thresholds, enumerated by the
// finitely many regions between atoms.

fn exact_constrained_value(atoms: &[(f64, f64)], r: f64) -> f64 {
    let k = atoms.len();
    let mut suffix = vec![f64::INFINITY; k + 1];
    for j in (0..k).rev() {
        suffix[j] = suffix[j + 1].min(atoms[j].0 + atoms[j].1);
    }
    let mut eta = f64::INFINITY;
    let mut best = suffix[0];
    for j in 0..k {
        eta = eta.min(atoms[j].1);
        if eta >= r {
            best = best.max(suffix[j + 1]);
        }
    }
    best
}

fn exact_relaxed_value(atoms: &[(f64, f64)], r: f64) -> f64 {
    let mut zc = f64::INFINITY;
    let mut best = f64::NEG_INFINITY;
    for &(z, i) in atoms {
        // region left of this atom, rejection exponent `zc`, right edge `z`
        best = best.max(zc.min(r + z));
        zc = zc.min(i + z);
    }
    best.max(zc)
}

fn exact_shift_value(atoms: &[(f64, f64)], r: f64) -> f64 {
    let mut zc = f64::INFINITY;
    for &(z, i) in atoms {
        zc = zc.min(i + z);
        if zc <= r {
            return r - z;
        }
    }
    f64::NEG_INFINITY
}

// ---------------------------------------------------------------------

#[test]
fn criterion_01_relative_entropy_reference_value() {
    let _g = gate();
    let (rho, sigma) = reference_pair();
    let warm = relative_entropy(&rho, &sigma).unwrap();
    let t0 = Instant::now();
    let d = relative_entropy(&rho, &sigma).unwrap();
    let dt = t0.elapsed();
    assert_eq!(warm.to_bits(), d.to_bits());
    assert!(
        (d - 0.4013).abs() < 5e-4,
        "criterion 01 FAIL: D = {d}, expected 0.4013 within 5e-4"
    );
    assert!(
        dt < Duration::from_millis(1),
        "criterion 01 FAIL: runtime {dt:?} is not under 1 ms"
    );
    println!("criterion 01 PASS: D = {d:.6} (|D - 0.4013| = {:.2e}) in {dt:?}", (d - 0.4013).abs());
}

#[test]
fn criterion_02_sector_sweep_matches_brute_force() {
    let _g = gate();
    let start = Instant::now();
    let grid = linspace(-0.5, 1.0, 21);
    let mut pairs = vec![reference_pair()];
    let mut rng = rng_from_seed(0x5ec7);
    for _ in 0..20 {
        pairs.push(random_qubit_pair(&mut rng, false, 1e-3).unwrap());
    }

    // exact references in two tiers: the literal 2^n product where it is
    // affordable on every pair, and the pair-block reduction beyond, with
    // the reduction itself cross-checked against the literal product
    let mut worst_literal = 0.0f64; // sectors vs product, n <= 6, all pairs
    let mut worst_blocked = 0.0f64; // sectors vs block reductions, n in 7..=10, all pairs
    let mut worst_cross = 0.0f64; // block reductions vs product, n in {6, 7, 8}, three pairs
    for (pi, (rho, sigma)) in pairs.iter().enumerate() {
        for n in 1..=10u32 {
            let dec = build_decomposition(rho, sigma, n).unwrap();
            if n <= 6 {
                let rn = tensor_power(rho.operator(), n, None).unwrap();
                let sn = tensor_power(sigma.operator(), n, None).unwrap();
                for mode in MODES {
                    for &a in &grid {
                        let fast = 1.0 - dec.evaluate(a, mode).unwrap().eval.alpha;
                        let brute = brute_g(&rn, &sn, n, a, mode);
                        worst_literal = worst_literal.max((fast - brute).abs());
                        if n == 6 && pi < 3 {
                            let tripled = blocked_g(&triple_blocks(rho, sigma, n), n, a, mode);
                            worst_cross = worst_cross.max((tripled - brute).abs());
                        }
                    }
                }
            } else {
                let blocks = if n <= 8 {
                    pair_blocks(rho, sigma, n)
                } else {
                    triple_blocks(rho, sigma, n)
                };
                let powers = (pi < 3 && n <= 8).then(|| {
                    (
                        tensor_power(rho.operator(), n, None).unwrap(),
                        tensor_power(sigma.operator(), n, None).unwrap(),
                    )
                });
                for mode in MODES {
                    for &a in &grid {
                        let fast = 1.0 - dec.evaluate(a, mode).unwrap().eval.alpha;
                        let blocked = blocked_g(&blocks, n, a, mode);
                        worst_blocked = worst_blocked.max((fast - blocked).abs());
                        if let Some((rn, sn)) = &powers {
                            let brute = brute_g(rn, sn, n, a, mode);
                            worst_cross = worst_cross.max((blocked - brute).abs());
                        }
                    }
                }
            }
        }
    }

    // literal-product spot checks at the sizes the reduction stands in for
    for (n, a, mode) in [
        (9u32, 0.25, ProjectionMode::Strict),
        (10, 0.4, ProjectionMode::Nonstrict),
    ] {
        let (rho, sigma) = &pairs[0];
        let rn = tensor_power(rho.operator(), n, None).unwrap();
        let sn = tensor_power(sigma.operator(), n, None).unwrap();
        let brute = brute_g(&rn, &sn, n, a, mode);
        let blocked = blocked_g(&triple_blocks(rho, sigma, n), n, a, mode);
        assert!(
            (brute - blocked).abs() <= 1e-9,
            "criterion 02 FAIL: triple blocks vs product at n = {n}: {blocked} vs {brute}"
        );
    }

    let elapsed = start.elapsed();
    assert!(worst_literal <= 1e-9, "criterion 02 FAIL: n <= 6 gap {worst_literal:.3e}");
    assert!(worst_cross <= 1e-9, "criterion 02 FAIL: reduction gap {worst_cross:.3e}");
    assert!(worst_blocked <= 1e-9, "criterion 02 FAIL: n in 7..10 gap {worst_blocked:.3e}");
    assert!(
        elapsed < Duration::from_secs(60),
        "criterion 02 FAIL: took {elapsed:?}"
    );
    println!(
        "criterion 02 PASS: max gaps {worst_literal:.2e} (product, n<=6), {worst_cross:.2e} \
         (reduction vs product), {worst_blocked:.2e} (n in 7..10) in {elapsed:?}"
    );
}

#[test]
fn criterion_03_crossing_thresholds_concentrate_with_blocklength() {
    let _g = gate();
    let (rho, sigma) = reference_pair();
    let mut crossings = Vec::new();
    for n in [5u32, 15, 50] {
        let dec = build_decomposition(&rho, &sigma, n).unwrap();
        let g_at = |a: f64| 1.0 - dec.evaluate(a, ProjectionMode::Nonstrict).unwrap().eval.alpha;
        let (mut lo, mut hi) = (0.0f64, 0.8f64);
        assert!(g_at(lo) > 0.5 && g_at(hi) < 0.5, "criterion 03 FAIL: no crossing at n = {n}");
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g_at(mid) >= 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossings.push(0.5 * (lo + hi));
    }
    let gaps: Vec<f64> = crossings.iter().map(|c| (c - 0.4013).abs()).collect();
    assert!(
        gaps[2] < gaps[1] && gaps[1] < gaps[0],
        "criterion 03 FAIL: crossings {crossings:?} do not tighten toward 0.4013"
    );

    let t0 = Instant::now();
    let curve = g_curve(&rho, &sigma, 50, &linspace(0.0, 0.8, 161), ProjectionMode::Nonstrict)
        .unwrap();
    let dt = t0.elapsed();
    assert_eq!(curve.len(), 161);
    assert!(curve[0].eval.alpha < 0.5 && curve[160].eval.alpha > 0.5);
    assert!(dt < Duration::from_secs(10), "criterion 03 FAIL: 161-point curve took {dt:?}");
    println!(
        "criterion 03 PASS: crossings {:?} with gaps {:?}, n = 50 curve in {dt:?}",
        crossings, gaps
    );
}

#[test]
fn criterion_04_likelihood_tests_dominate_arbitrary_tests() {
    let _g = gate();
    let mut rng = rng_from_seed(0x4e50);
    let mut worst = f64::INFINITY;

    for i in 0..1000usize {
        let dim = 2 + i % 3;
        let real = i % 2 == 0;
        let n: u32 = if i % 5 == 0 && dim == 2 { 2 } else { 1 };
        let rho = random_density(&mut rng, dim, real, 0.0).unwrap();
        let sigma = random_density(&mut rng, dim, real, 0.0).unwrap();
        let scale = 0.25 + 1.5 * rng.random::<f64>();
        let rho_n = tensor_power(rho.operator(), n, None).unwrap();
        let sigma_n = tensor_power(sigma.operator(), n, None).unwrap().scaled(scale);
        let t_op = random_test_operator(&mut rng, rho_n.dim(), real);
        let a = -1.0 + 2.0 * rng.random::<f64>();
        let mode = MODES[i % 2];
        let s = np_projection(&rho_n, &sigma_n, n, a, mode).unwrap();
        let s_eval = quantum::evaluate_test(&rho_n, &sigma_n, &s.projector, n).unwrap();
        let t_eval = quantum::evaluate_test(&rho_n, &sigma_n, &t_op, n).unwrap();
        for res in np_residuals(a, &s_eval, &t_eval) {
            worst = worst.min(res);
        }
    }

    for i in 0..1000usize {
        let m = 2 + i % 7;
        let rho = random_probability(&mut rng, m, 0.01).unwrap();
        let sigma = if i % 2 == 0 {
            random_probability(&mut rng, m, 0.01).unwrap()
        } else {
            random_measure(&mut rng, m, 1.5).unwrap()
        };
        let spectrum = LlrSpectrum::from_measures(&rho, &sigma).unwrap();
        let policy = if i % 3 == 0 { TiePolicy::Strict } else { TiePolicy::Nonstrict };
        let a = -1.5 + 3.0 * rng.random::<f64>();
        let s_eval = spectrum.errors(a, policy);
        let t = random_classical_test(&mut rng, m);
        let t_eval = evaluate_test(&rho, &sigma, &t, 1).unwrap();
        for res in np_residuals(a, &s_eval, &t_eval) {
            worst = worst.min(res);
        }
    }

    assert!(worst >= -1e-9, "criterion 04 FAIL: worst residual {worst:.3e}");
    println!("criterion 04 PASS: worst optimality residual {worst:.2e} over 2000 draws");
}

#[test]
fn criterion_05_acceptance_mass_bounded_by_threshold_scale() {
    let _g = gate();
    let grid = linspace(-0.5, 1.0, 21);
    let mut rng = rng_from_seed(0xbe7a);
    let mut pairs = vec![reference_pair()];
    for _ in 0..5 {
        pairs.push(random_qubit_pair(&mut rng, false, 1e-3).unwrap());
    }
    let bound_ok = |beta: f64, n: u32, a: f64| beta <= (-(n as f64) * a).exp() * (1.0 + 1e-12) + 1e-15;
    let mut checked = 0usize;

    for (rho, sigma) in &pairs {
        for n in 1..=6u32 {
            for mode in MODES {
                for pt in g_curve(rho, sigma, n, &grid, mode).unwrap() {
                    assert!(
                        bound_ok(pt.eval.beta, n, pt.a),
                        "criterion 05 FAIL: quantum beta {} above e^(-{n}*{})",
                        pt.eval.beta,
                        pt.a
                    );
                    checked += 1;
                }
            }
        }
    }

    let rho3 = random_density(&mut rng, 3, false, 1e-3).unwrap();
    let sigma3 = random_density(&mut rng, 3, false, 1e-3).unwrap();
    for n in 1..=3u32 {
        for mode in MODES {
            for pt in iid_projection_curve(&rho3, &sigma3, n, &grid, mode, None).unwrap() {
                assert!(bound_ok(pt.eval.beta, n, pt.a));
                checked += 1;
            }
        }
    }

    for i in 0..5usize {
        let m = 2 + i % 2;
        let rho = random_probability(&mut rng, m, 0.02).unwrap();
        let sigma = random_probability(&mut rng, m, 0.02).unwrap();
        for n in [1u32, 5, 25] {
            let spectrum = iid_spectrum(&rho, &sigma, n, None).unwrap();
            for policy in [TiePolicy::Strict, TiePolicy::Nonstrict] {
                for &a in &grid {
                    let ev = spectrum.errors(a, policy);
                    assert!(
                        bound_ok(ev.beta, n, a),
                        "criterion 05 FAIL: classical beta {} at n = {n}, a = {a}",
                        ev.beta
                    );
                    checked += 1;
                }
            }
        }
    }

    println!("criterion 05 PASS: beta <= e^(-n a) on {checked} grid points");
}

#[test]
fn criterion_06_exponential_bound_caps_acceptance_mass() {
    let _g = gate();
    let (rho, sigma) = reference_pair();
    let thetas: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let mut tightest = f64::INFINITY;
    for n in 1..=8u32 {
        let rn = tensor_power(rho.operator(), n, None).unwrap();
        let sn = tensor_power(sigma.operator(), n, None).unwrap();
        for &a in &[0.2, 0.4, 0.6] {
            let g = brute_g(&rn, &sn, n, a, ProjectionMode::Nonstrict);
            for &theta in &thetas {
                let exponent = a * theta - quantum_psi(&rho, &sigma, theta).unwrap();
                let bound = (-(n as f64) * exponent).exp();
                assert!(
                    g <= bound + 1e-12,
                    "criterion 06 FAIL: g = {g} above bound {bound} at n = {n}, a = {a}, theta = {theta}"
                );
                let lib = ogawa_nagaoka_bound(&rho, &sigma, n, a, theta).unwrap();
                assert!((lib - bound).abs() <= 1e-12 * bound.max(1.0));
                tightest = tightest.min(bound - g);
            }
        }
    }
    println!("criterion 06 PASS: brute acceptance under the tilt bound, tightest slack {tightest:.2e}");
}

#[test]
fn criterion_07_pure_state_closed_form_matches_pipeline() {
    let _g = gate();
    let a_grid = linspace(-0.4, 0.8, 13);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let delta = k as f64 / 10.0;
        for n in [1u32, 5, 20] {
            // the n-fold pair spans two dimensions with overlap delta^n
            let (re, se) = pure_pair(delta.powi(n as i32)).unwrap();
            for &a in &a_grid {
                let closed = pure_state_g_iid(delta, n, a).unwrap();
                let pt = iid_projection_point(&re, &se, 1, a * n as f64, ProjectionMode::Strict, None)
                    .unwrap();
                worst = worst.max((closed - (1.0 - pt.eval.alpha)).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "criterion 07 FAIL: effective-pair gap {worst:.3e}");

    let mut worst_full = 0.0f64;
    for delta in [0.3, 0.7] {
        let (r1, s1) = pure_pair(delta).unwrap();
        for n in [1u32, 5] {
            let rn = tensor_power(r1.operator(), n, None).unwrap();
            let sn = tensor_power(s1.operator(), n, None).unwrap();
            for &a in &a_grid {
                let closed = pure_state_g_iid(delta, n, a).unwrap();
                let g = brute_g(&rn, &sn, n, a, ProjectionMode::Strict);
                worst_full = worst_full.max((closed - g).abs());
            }
        }
    }
    assert!(worst_full <= 1e-12, "criterion 07 FAIL: full-product gap {worst_full:.3e}");
    println!("criterion 07 PASS: closed form within {worst:.2e} (2x2) and {worst_full:.2e} (full product)");
}

#[test]
fn criterion_08_trade_off_duality_on_random_pairs() {
    let _g = gate();
    let mut rng = rng_from_seed(0x8de1);
    let r_values: Vec<f64> = (1..=50).map(|k| k as f64 / 100.0).collect();
    let mut worst_direct = 0.0f64;
    let mut worst_converse = 0.0f64;
    for _ in 0..50 {
        let p = random_probability(&mut rng, 2, 0.02).unwrap();
        let q = random_probability(&mut rng, 2, 0.02).unwrap();
        let pair = ClassicalPair::new(p.clone(), q.clone()).unwrap();
        for &r in &r_values {
            let theta_form = pair.hoeffding_exponent(r).unwrap();
            let kl_form = trade_off_kl_oracle(p.weights(), q.weights(), r);
            worst_direct = worst_direct.max((theta_form - kl_form).abs());

            let converse_theta = pair.han_kobayashi_exponent(r).unwrap();
            let converse_kl = strong_converse_kl_oracle(p.weights(), q.weights(), r);
            worst_converse = worst_converse.max((converse_theta - converse_kl).abs());
        }
        for frac in [0.25, 0.5, 1.0] {
            let v = pair.han_kobayashi_exponent(frac * pair.d_reverse).unwrap();
            assert!(
                v == 0.0,
                "criterion 08 FAIL: value {v:e} at r = {} * D(sigma||rho) is not exactly zero",
                frac
            );
        }
    }
    assert!(worst_direct <= 1e-6, "criterion 08 FAIL: trade-off gap {worst_direct:.3e}");
    assert!(worst_converse <= 1e-6, "criterion 08 FAIL: converse gap {worst_converse:.3e}");
    println!(
        "criterion 08 PASS: tilt vs tilted-family forms within {worst_direct:.2e} and {worst_converse:.2e}"
    );
}

#[test]
fn criterion_09_dual_forms_agree_within_one_grid_step() {
    let _g = gate();
    let mut rng = rng_from_seed(0x9d1a);

    // (i) smooth rate curves of random binary pairs
    let mut worst_smooth = 0.0f64;
    for _ in 0..50 {
        let (pair, z_lo) = loop {
            let p = random_probability(&mut rng, 2, 0.05).unwrap();
            let q = random_probability(&mut rng, 2, 0.05).unwrap();
            let z_lo = p
                .weights()
                .iter()
                .zip(q.weights())
                .map(|(&a, &b)| (a / b).ln())
                .fold(f64::INFINITY, f64::min);
            let pair = ClassicalPair::new(p, q).unwrap();
            if pair.d_forward > 0.01 && pair.d_reverse > 0.01 {
                break (pair, z_lo);
            }
        };

        let span = pair.d_forward + pair.d_reverse;
        let grid = linspace(
            -pair.d_reverse + 0.02 * span,
            pair.d_forward - 0.02 * span,
            161,
        );
        let h = grid[1] - grid[0];
        let samples = pair.rate_samples(&grid).unwrap();
        assert!(!samples.any_clamped);
        for idx in [48usize, 80, 112] {
            // pin the crossing to a grid point so the true value is known
            let r = samples.eta[idx];
            let truth = samples.zeta[idx];
            let forms = b_e_forms(&grid, &samples.eta, &samples.zeta, r).unwrap();
            for v in [
                forms.sup_constrained,
                forms.inf_penalized,
                forms.left_value,
                forms.shifted_right_value,
            ] {
                let gap = (v - truth).abs();
                assert!(
                    gap <= h + 1e-6,
                    "criterion 09 FAIL: constrained form off by {gap:.3e} (step {h:.3e})"
                );
                worst_smooth = worst_smooth.max(gap / h);
            }
        }

        // relaxed and shifted forms live below the reverse divergence
        let low_span = -pair.d_reverse - z_lo;
        let lgrid = linspace(
            z_lo + 0.02 * low_span,
            -pair.d_reverse - 0.02 * low_span,
            161,
        );
        let lh = lgrid[1] - lgrid[0];
        let zc: Vec<f64> = lgrid.iter().map(|&a| pair.zeta_c_rate(a).unwrap()).collect();
        for idx in [48usize, 80, 112] {
            let a_t = lgrid[idx];
            let r_star = zc[idx] - a_t;
            let truth = r_star + a_t;
            let star = b_e_star_forms(&lgrid, &zc, r_star).unwrap();
            assert!((star.sup_min - truth).abs() <= 1e-6);
            assert!((star.inf_max - truth).abs() <= 1e-6);
            assert!((star.shifted - truth).abs() <= lh + 1e-6);
            worst_smooth = worst_smooth.max((star.shifted - truth).abs() / lh);

            let r_shift = zc[idx];
            let shift = b_e_star_star(&lgrid, &zc, r_shift).unwrap();
            assert!((shift - (r_shift - a_t)).abs() <= lh + 1e-6);
        }
    }

    // (ii) random monotone step functions with an exact region oracle
    let mut cases = 0usize;
    for case in 0..200usize {
        let count = 5 + case % 16;
        let atoms = random_step_atoms(&mut rng, count, (-1.5, 1.5), 2.5);
        let rates = StepRates::new(atoms).unwrap();
        let grid = rates.resolving_grid(0.4, 1e-6);
        let (eta, zeta, zeta_c) = rates.samples(&grid);
        let min_i = rates.atoms().iter().map(|&(_, i)| i).fold(f64::INFINITY, f64::min);

        for rep in 0..2 {
            let r = if rep == 0 {
                // strictly inside the constraint window
                min_i + (0.02 + 0.9 * rng.random::<f64>()) * 2.0
            } else {
                0.02 + 3.0 * rng.random::<f64>()
            };

            let truth = exact_constrained_value(rates.atoms(), r);
            let forms = b_e_forms(&grid, &eta, &zeta, r).unwrap();
            if truth.is_finite() {
                assert!((forms.sup_constrained - truth).abs() <= 1e-12);
                assert!((forms.inf_penalized - truth).abs() <= 1e-12);
                assert!((forms.left_value - truth).abs() <= 1e-12);
                assert!((forms.shifted_right_value - truth).abs() <= 1.1e-6);
            } else {
                // constraint never binds inside the window
                assert!(forms.sup_constrained.is_infinite());
                assert!(forms.inf_penalized.is_infinite());
            }

            let star_truth = exact_relaxed_value(rates.atoms(), r);
            let star = b_e_star_forms(&grid, &zeta_c, r).unwrap();
            assert!((star.sup_min - star_truth).abs() <= 1.1e-6);
            assert!((star.inf_max - star_truth).abs() <= 1e-9);
            // the grid crossing sits one local gap left of the true one
            let ic = grid
                .iter()
                .zip(&zeta_c)
                .rposition(|(&a, &z)| z - a >= r)
                .unwrap();
            let local = if ic + 1 < grid.len() { grid[ic + 1] - grid[ic] } else { 0.4 };
            assert!(
                (star.shifted - star_truth).abs() <= local + 1e-9,
                "criterion 09 FAIL: shifted relaxed form off by {:.3e} (local gap {local:.3e})",
                (star.shifted - star_truth).abs()
            );

            let shift_truth = exact_shift_value(rates.atoms(), r);
            let shift = b_e_star_star(&grid, &zeta_c, r).unwrap();
            if shift_truth.is_finite() {
                assert!((shift - shift_truth).abs() <= 1e-12);
            } else {
                assert!(shift.is_infinite() && shift < 0.0);
            }
            cases += 1;
        }
    }

    println!(
        "criterion 09 PASS: 50 smooth pairs within one step (worst {worst_smooth:.2} steps), \
         {cases} step-function cases against the exact enumeration"
    );
}

#[test]
fn criterion_10_two_point_example_piecewise_values() {
    let _g = gate();
    // integer-built grid so the jump threshold 0 is a grid point
    let grid: Vec<f64> = (-150..=150).map(|k| k as f64 / 100.0).collect();
    let step = 0.01;
    for &c in &[0.3, std::f64::consts::LN_2, 1.7] {
        let (eta, zeta_c) = two_point_rate_samples(c, &grid);
        let mut r_values: Vec<f64> = (-10..=44).map(|k| k as f64 * 0.05).collect();
        r_values.push(c);
        r_values.push(0.0);
        for &r in &r_values {
            let closed = two_point_b_e_star(c, r);
            let star = b_e_star_forms(&grid, &zeta_c, r).unwrap();
            assert!(
                (star.sup_min - closed).abs() <= 1e-12,
                "criterion 10 FAIL: grid value {} vs piecewise {closed} at c = {c}, r = {r}",
                star.sup_min
            );

            let han_closed = two_point_han(r);
            let han_grid = han_penalized_value(&grid, &eta, r).unwrap();
            assert!((han_grid - han_closed).abs() <= step + 1e-12);

            assert_eq!(
                han_closed != closed,
                r > c,
                "criterion 10 FAIL: penalized form must disagree exactly when r > c (c = {c}, r = {r})"
            );
            let cmp = han_formula_check(&grid, &eta, &zeta_c, r).unwrap();
            assert_eq!(cmp.condition_holds, r <= c);
        }
    }
    println!("criterion 10 PASS: piecewise values and the exact disagreement region for three c");
}

#[test]
fn criterion_11_threshold_trend_approaches_divergence() {
    let _g = gate();
    let rho = FiniteMeasure::probability(vec![0.5, 0.5]).unwrap();
    let sigma = FiniteMeasure::probability(vec![0.9, 0.1]).unwrap();
    let report = stein_report(&rho, &sigma, 0.5, &[100, 500, 2000], None).unwrap();
    let d = kl_divergence(&rho, &sigma).unwrap();
    assert!((report.divergence - d).abs() <= 1e-12);
    let gaps: Vec<f64> = report.rows.iter().map(|row| row.gap).collect();
    for row in &report.rows {
        assert!((row.gap - (row.threshold - d).abs()).abs() <= 1e-12);
    }
    // the even-blocklength median atom sits exactly on the divergence for
    // this pair, so the trend is asserted up to arithmetic noise
    assert!(
        gaps[0] >= gaps[1] - 1e-12 && gaps[1] >= gaps[2] - 1e-12,
        "criterion 11 FAIL: gaps {gaps:?} are not decreasing"
    );
    assert!(gaps[2] < 0.02, "criterion 11 FAIL: gap {} at n = 2000", gaps[2]);
    println!("criterion 11 PASS: gaps {gaps:?} against D = {d:.6}");
}

#[test]
fn criterion_12_source_coding_round_trip_and_exponents() {
    let _g = gate();
    let p = FiniteMeasure::probability(vec![0.7, 0.3]).unwrap();
    let mut rng = rng_from_seed(0x50c0);

    let mut round_trips = 0usize;
    for n in 1..=8u32 {
        let m = 1usize << n;
        let rho_n = product_measure(&p, n, None).unwrap();
        let counting = FiniteMeasure::counting(m);
        let regions: Vec<Vec<bool>> = if n <= 3 {
            (0..(1u32 << m))
                .map(|mask| (0..m).map(|i| mask >> i & 1 == 1).collect())
                .collect()
        } else {
            (0..256).map(|_| (0..m).map(|_| rng.random::<bool>()).collect()).collect()
        };
        for region in &regions {
            let test = ClassicalTest::deterministic(region);
            let code = codebook_from_test(&test).unwrap();
            let back = test_from_codebook(&code, m).unwrap();
            assert_eq!(back.accept(), test.accept());
            let ev = evaluate_test(&rho_n, &counting, &test, n).unwrap();
            let gamma = code.gamma(&rho_n).unwrap();
            assert!(
                gamma.to_bits() == ev.alpha.to_bits(),
                "criterion 12 FAIL: gamma {gamma:e} differs from alpha {:e} at n = {n}",
                ev.alpha
            );
            assert_eq!(ev.beta, code.size() as f64);
            round_trips += 1;
        }
    }
    for n in [4u32, 6] {
        let m = 1usize << n;
        for _ in 0..50 {
            let members: Vec<usize> = (0..m).filter(|_| rng.random::<bool>()).collect();
            let code = CodingSystem::new(members).unwrap();
            let test = test_from_codebook(&code, m).unwrap();
            let again = codebook_from_test(&test).unwrap();
            assert_eq!(code.codebook(), again.codebook());
            round_trips += 1;
        }
    }

    // correct-decoding trade-off against the grid form of the penalized
    // expression with its empty-set convention
    let h = shannon_entropy(&p).unwrap();
    let a_grid = linspace(-(0.7f64.ln()) + 1e-6, h, 1601);
    let a_step = a_grid[1] - a_grid[0];
    let sigma_star: Vec<f64> = a_grid
        .iter()
        .map(|&a| sigma_rates(&p, a).unwrap().1.value)
        .collect();
    let r_top = sigma_star[0] * 0.9;
    let r_grid = linspace(r_top / 100.0, r_top, 100);
    let r_step = r_grid[1] - r_grid[0];
    assert!(a_step < r_step);
    let mut worst_gap = 0.0f64;
    for &r in &r_grid {
        let direct = correct_decoding_exponent(&p, r).unwrap().value;
        let penalized = han_correct_decoding_value(&a_grid, &sigma_star, r).unwrap();
        let gap = (direct - penalized).abs();
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= a_step + 1e-9,
            "criterion 12 FAIL: correct-decoding forms differ by {gap:.3e} at r = {r}"
        );
    }

    // the best rate under a vanishing error-exponent demand approaches
    // the entropy from above
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&r| (source_error_exponent(&p, r, 4001).unwrap().value - h).abs())
        .collect();
    assert!(errs[0] >= errs[1] - 1e-12 && errs[1] >= errs[2] - 1e-12);
    assert!(errs[2] <= 0.01, "criterion 12 FAIL: rate limit off by {}", errs[2]);

    println!(
        "criterion 12 PASS: {round_trips} exact round trips, trade-off forms within {worst_gap:.2e}, \
         entropy limit within {:.2e}",
        errs[2]
    );
}
