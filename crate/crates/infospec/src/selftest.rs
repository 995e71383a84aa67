//! Built-in cross-route verification suite behind the `selftest`
//! command. Each check recomputes one identity through two independent
//! routes and reports its worst residual, so a miscompiled or corrupted
//! build fails loudly instead of emitting plausible numbers.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::classical::{evaluate_test, FiniteMeasure, LlrSpectrum, TiePolicy};
use crate::error::{Error, Result};
use crate::eval::np_residuals;
use crate::exponent::{b_e_forms, b_e_star_forms, ClassicalPair, StepRates};
use crate::operator::{DensityOperator, HermitianOperator, ProjectionMode};
use crate::quantum::{
    evaluate_test as evaluate_quantum_test, iid_projection_point, np_projection,
};
use crate::random::{
    random_classical_test, random_measure, random_probability, random_qubit_pair,
    random_step_atoms, random_test_operator, rng_from_seed,
};
use crate::schur::{build_decomposition_with, SchurOptions};
use crate::tolerance;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Worst margin seen; sign convention is per check, stated in
    /// `detail`.
    pub worst_residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Number of classical fuzz cases; quantum fuzz runs a tenth.
    pub fuzz_cases: usize,
    pub cap: u128,
    /// Deliberately flips one sector weight in the fast path so the
    /// equivalence checks must fail.
    pub corrupt: bool,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            fuzz_cases: 200,
            cap: tolerance::DEFAULT_CAP,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub config: SelftestConfig,
    pub checks: Vec<CheckReport>,
}

impl SelftestReport {
    /// Skipped checks do not fail the suite; they are capacity
    /// statements, not verdicts.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

fn guarded(name: &'static str, f: impl FnOnce() -> Result<CheckReport>) -> CheckReport {
    match f() {
        Ok(rep) => rep,
        Err(Error::CapExceeded { needed, cap }) => CheckReport {
            name,
            status: CheckStatus::Skipped,
            worst_residual: f64::NAN,
            detail: format!("needs {needed} units, cap is {cap}"),
        },
        Err(e) => CheckReport {
            name,
            status: CheckStatus::Fail,
            worst_residual: f64::NAN,
            detail: e.to_string(),
        },
    }
}

fn verdict(
    name: &'static str,
    worst: f64,
    ok: bool,
    detail: String,
) -> CheckReport {
    CheckReport {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        worst_residual: worst,
        detail,
    }
}

fn coin_pair(p: f64, q: f64) -> Result<ClassicalPair> {
    ClassicalPair::new(
        FiniteMeasure::probability(vec![p, 1.0 - p])?,
        FiniteMeasure::probability(vec![q, 1.0 - q])?,
    )
}

fn section_pair() -> Result<(DensityOperator, DensityOperator)> {
    let rho = DensityOperator::new(HermitianOperator::from_real(
        DMatrix::from_row_slice(2, 2, &[0.75, 0.35, 0.35, 0.25]),
    )?)?;
    let sigma = DensityOperator::from_probabilities(&[0.9, 0.1])?;
    Ok((rho, sigma))
}

fn check_trace_identity(cfg: &SelftestConfig) -> Result<CheckReport> {
    let opts = SchurOptions {
        corrupt_multiplicity_sign: cfg.corrupt,
        cache: None,
    };
    let mut rng = rng_from_seed(cfg.seed ^ 0x7261_6365);
    let mut pairs = vec![section_pair()?];
    for _ in 0..3 {
        pairs.push(random_qubit_pair(&mut rng, false, 0.05)?);
    }
    let mut worst = 0.0f64;
    for (rho, sigma) in &pairs {
        for n in [8u32, 25] {
            let dec = build_decomposition_with(rho, sigma, n, &opts)?;
            let (r, s) = dec.trace_identity_residual();
            worst = worst.max(r).max(s);
        }
    }
    Ok(verdict(
        "trace_identity",
        worst,
        worst <= 1e-9,
        "max |sector trace sum - 1| over pairs and blocklengths".into(),
    ))
}

fn check_fast_path_vs_brute(cfg: &SelftestConfig) -> Result<CheckReport> {
    let opts = SchurOptions {
        corrupt_multiplicity_sign: cfg.corrupt,
        cache: None,
    };
    let mut rng = rng_from_seed(cfg.seed ^ 0x6272_7574);
    let mut pairs = vec![section_pair()?];
    for _ in 0..2 {
        pairs.push(random_qubit_pair(&mut rng, false, 0.05)?);
    }
    let mut worst = 0.0f64;
    for (rho, sigma) in &pairs {
        for n in 1..=6u32 {
            let dec = build_decomposition_with(rho, sigma, n, &opts)?;
            for &a in &[-0.25, 0.1, 0.45, 0.8] {
                for mode in [ProjectionMode::Strict, ProjectionMode::Nonstrict] {
                    let fast = dec.evaluate(a, mode)?.eval;
                    let brute =
                        iid_projection_point(rho, sigma, n, a, mode, Some(cfg.cap))?
                            .eval;
                    worst = worst
                        .max((fast.alpha - brute.alpha).abs())
                        .max((fast.beta - brute.beta).abs())
                        .max((fast.beta_c - brute.beta_c).abs());
                }
            }
        }
    }
    Ok(verdict(
        "fast_path_vs_brute",
        worst,
        worst <= 1e-9,
        "max |sector-sum error - diagonalization error| over n <= 6".into(),
    ))
}

fn check_np_fuzz_classical(cfg: &SelftestConfig) -> Result<CheckReport> {
    let mut rng = rng_from_seed(cfg.seed ^ 0x636c_6173);
    let mut worst = f64::INFINITY;
    for _ in 0..cfg.fuzz_cases.max(1) {
        let m = rng.random_range(2..=6);
        let rho = random_probability(&mut rng, m, 1e-3)?;
        let sigma = random_measure(&mut rng, m, 1.5)?;
        let sp = LlrSpectrum::from_measures(&rho, &sigma)?;
        let a = rng.random_range(-1.2..1.2);
        let t = random_classical_test(&mut rng, m);
        let t_eval = evaluate_test(&rho, &sigma, &t, 1)?;
        for policy in [TiePolicy::Strict, TiePolicy::Nonstrict] {
            let s_eval = sp.errors(a, policy);
            for r in np_residuals(a, &s_eval, &t_eval) {
                worst = worst.min(r);
            }
        }
    }
    Ok(verdict(
        "np_fuzz_classical",
        worst,
        worst >= tolerance::ONE_SIDED_FUZZ,
        "min residual of the four likelihood-test inequalities".into(),
    ))
}

fn check_np_fuzz_quantum(cfg: &SelftestConfig) -> Result<CheckReport> {
    let mut rng = rng_from_seed(cfg.seed ^ 0x7175_616e);
    let cases = (cfg.fuzz_cases / 10).max(20);
    let mut worst = f64::INFINITY;
    for i in 0..cases {
        let dim = 2 + (i % 2);
        let complex = i % 3 != 0;
        let rho = crate::random::random_density(&mut rng, dim, !complex, 1e-3)?;
        let sigma = crate::random::random_density(&mut rng, dim, !complex, 1e-3)?;
        let a = rng.random_range(-1.0..1.0);
        let t = random_test_operator(&mut rng, dim, !complex);
        let t_eval =
            evaluate_quantum_test(rho.operator(), sigma.operator(), &t, 1)?;
        for mode in [ProjectionMode::Strict, ProjectionMode::Nonstrict] {
            let proj = np_projection(rho.operator(), sigma.operator(), 1, a, mode)?;
            let s_eval =
                evaluate_quantum_test(rho.operator(), sigma.operator(), &proj.projector, 1)?;
            for r in np_residuals(a, &s_eval, &t_eval) {
                worst = worst.min(r);
            }
        }
    }
    Ok(verdict(
        "np_fuzz_quantum",
        worst,
        worst >= tolerance::ONE_SIDED_FUZZ,
        "min residual of the four likelihood-test inequalities".into(),
    ))
}

fn check_beta_bound(cfg: &SelftestConfig) -> Result<CheckReport> {
    let opts = SchurOptions {
        corrupt_multiplicity_sign: cfg.corrupt,
        cache: None,
    };
    let (rho, sigma) = section_pair()?;
    let mut worst = f64::INFINITY;
    for n in [10u32, 25] {
        let dec = build_decomposition_with(&rho, &sigma, n, &opts)?;
        for i in 0..=30 {
            let a = -0.5 + i as f64 * 0.05;
            let eval = dec.evaluate(a, ProjectionMode::Strict)?.eval;
            worst = worst.min(1.0 - (n as f64 * a).exp() * eval.beta);
        }
    }
    let pair = coin_pair(0.5, 0.9)?;
    let sp = crate::classical::iid_spectrum(pair.rho(), pair.sigma(), 80, Some(cfg.cap))?;
    for i in 0..=30 {
        let a = -0.5 + i as f64 * 0.05;
        let eval = sp.errors(a, TiePolicy::Strict);
        worst = worst.min(1.0 - (80.0 * a).exp() * eval.beta);
    }
    Ok(verdict(
        "acceptance_mass_bound",
        worst,
        worst >= tolerance::ONE_SIDED_FUZZ,
        "min of 1 - e^{n a} beta(a) over fast-path and classical grids".into(),
    ))
}

fn check_dual_forms(cfg: &SelftestConfig) -> Result<CheckReport> {
    let mut rng = rng_from_seed(cfg.seed ^ 0x6475_616c);
    let mut worst = 0.0f64;
    // smooth route: i.i.d. Cramer rates of random coins
    for _ in 0..5 {
        let p: f64 = rng.random_range(0.15..0.85);
        let q: f64 = rng.random_range(0.15..0.85);
        if (p - q).abs() < 0.1 {
            continue;
        }
        let pair = coin_pair(p, q)?;
        let lo = -pair.d_reverse + 1e-6;
        let hi = pair.d_forward - 1e-6;
        let step = (hi - lo) / 800.0;
        let grid: Vec<f64> = (0..=800).map(|i| lo + i as f64 * step).collect();
        let samples = pair.rate_samples(&grid)?;
        for frac in [0.3, 0.7] {
            let r = frac * pair.d_reverse;
            let forms = b_e_forms(&grid, &samples.eta, &samples.zeta, r)?;
            let vals = [
                forms.sup_constrained,
                forms.inf_penalized,
                forms.left_value,
                forms.shifted_right_value,
            ];
            let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(spread / (4.0 * step));
        }
    }
    // step route: random atomic spectra resolved exactly on their jumps
    for _ in 0..20 {
        let atoms = random_step_atoms(&mut rng, 6, (-1.0, 1.0), 0.8);
        let rates = StepRates::new(atoms)?;
        let grid = rates.resolving_grid(0.3, 1e-9);
        let (eta, zeta, zeta_c) = rates.samples(&grid);
        let r = rng.random_range(0.05..0.6);
        let forms = b_e_forms(&grid, &eta, &zeta, r)?;
        let finite: Vec<f64> = [
            forms.sup_constrained,
            forms.inf_penalized,
            forms.left_value,
            forms.shifted_right_value,
        ]
        .into_iter()
        .filter(|v| v.is_finite())
        .collect();
        if finite.len() > 1 {
            let spread = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - finite.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(spread / 1e-6);
        }
        let star = b_e_star_forms(&grid, &zeta_c, r)?;
        if star.inf_max.is_finite() && star.sup_min.is_finite() {
            worst = worst.max((star.sup_min - star.inf_max).max(0.0) / 1e-6);
        }
    }
    Ok(verdict(
        "dual_form_agreement",
        worst,
        worst <= 1.0,
        "max dual-form spread in units of the allowed grid slack".into(),
    ))
}

fn check_cache_round_trip(cfg: &SelftestConfig) -> Result<CheckReport> {
    let dir = tempfile::tempdir()?;
    let cache = crate::schur::cache::BlockCache::new(dir.path())?;
    let (rho, sigma) = section_pair()?;
    let opts = SchurOptions {
        corrupt_multiplicity_sign: cfg.corrupt,
        cache: Some(&cache),
    };
    let fresh = build_decomposition_with(&rho, &sigma, 16, &opts)?;
    let cached = build_decomposition_with(&rho, &sigma, 16, &opts)?;
    let mut worst = 0.0f64;
    for &a in &[-0.2, 0.3, 0.7] {
        let x = fresh.evaluate(a, ProjectionMode::Strict)?.eval;
        let y = cached.evaluate(a, ProjectionMode::Strict)?.eval;
        worst = worst
            .max((x.alpha - y.alpha).abs())
            .max((x.beta - y.beta).abs())
            .max((x.beta_c - y.beta_c).abs());
    }
    Ok(verdict(
        "cache_round_trip",
        worst,
        worst == 0.0,
        "max difference between fresh and cache-loaded evaluations".into(),
    ))
}

/// Runs every check; failures are recorded, never panicked.
pub fn run_selftest(cfg: &SelftestConfig) -> SelftestReport {
    let checks = vec![
        guarded("trace_identity", || check_trace_identity(cfg)),
        guarded("fast_path_vs_brute", || check_fast_path_vs_brute(cfg)),
        guarded("np_fuzz_classical", || check_np_fuzz_classical(cfg)),
        guarded("np_fuzz_quantum", || check_np_fuzz_quantum(cfg)),
        guarded("acceptance_mass_bound", || check_beta_bound(cfg)),
        guarded("dual_form_agreement", || check_dual_forms(cfg)),
        guarded("cache_round_trip", || check_cache_round_trip(cfg)),
    ];
    SelftestReport { config: *cfg, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SelftestConfig {
        SelftestConfig { fuzz_cases: 60, ..SelftestConfig::default() }
    }

    #[test]
    fn default_suite_passes() {
        let report = run_selftest(&small_config());
        for c in &report.checks {
            assert_eq!(
                c.status,
                CheckStatus::Pass,
                "{}: {} (residual {})",
                c.name,
                c.detail,
                c.worst_residual
            );
        }
        assert!(report.all_passed());
    }

    #[test]
    fn corrupt_mode_fails_loudly() {
        let cfg = SelftestConfig { corrupt: true, ..small_config() };
        let report = run_selftest(&cfg);
        assert!(!report.all_passed());
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.name)
            .collect();
        assert!(failed.contains(&"trace_identity"), "failed: {failed:?}");
        assert!(failed.contains(&"fast_path_vs_brute"));
    }

    #[test]
    fn tiny_cap_skips_brute_force() {
        let cfg = SelftestConfig { cap: 2, fuzz_cases: 30, ..SelftestConfig::default() };
        let report = run_selftest(&cfg);
        let brute = report
            .checks
            .iter()
            .find(|c| c.name == "fast_path_vs_brute")
            .unwrap();
        assert_eq!(brute.status, CheckStatus::Skipped);
        assert!(report.all_passed(), "skips must not fail the suite");
    }

    #[test]
    fn report_serializes_with_config_echo() {
        let report = run_selftest(&SelftestConfig { fuzz_cases: 5, ..Default::default() });
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"seed\":7"));
        assert!(json.contains("trace_identity"));
    }
}
