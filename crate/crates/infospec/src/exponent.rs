//! Error-exponent trade-offs.
//!
//! Rate functions come in three flavours here: analytic Legendre duals
//! of the likelihood cumulant function for i.i.d. classical pairs,
//! closed-form step functions for the configurable two-point example,
//! and arbitrary sampled monotone curves. The trade-off identities are
//! computed on grids in several independent forms so tests can verify
//! they agree within one grid step.

use std::sync::OnceLock;

use crate::classical::{
    classical_psi, iid_spectrum, kl_divergence, FiniteMeasure, LlrSpectrum, TiePolicy,
};
use crate::error::{Error, Result};
use crate::eval::TestEvaluation;
use crate::operator::{DensityOperator, HermitianOperator, ProjectionMode};
use crate::quantum;
use crate::tolerance;

/// Golden-section maximizer for a concave objective on `[lo, hi]`.
/// Returns the argmax and the value.
pub(crate) fn golden_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > width {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// Value of an analytic rate function together with how it was reached.
#[derive(Debug, Clone, Copy)]
pub struct RateValue {
    pub value: f64,
    /// Maximizing tilt parameter.
    pub theta_star: f64,
    /// True when the query point was outside the Legendre domain and got
    /// clamped to its edge.
    pub clamped: bool,
}

/// A validated classical pair with cached divergences, the entry point
/// for analytic exponent computations.
#[derive(Debug, Clone)]
pub struct ClassicalPair {
    rho: FiniteMeasure,
    sigma: FiniteMeasure,
    /// `D(rho || sigma)`.
    pub d_forward: f64,
    /// `D(sigma || rho)`.
    pub d_reverse: f64,
}

impl ClassicalPair {
    pub fn new(rho: FiniteMeasure, sigma: FiniteMeasure) -> Result<Self> {
        if rho.len() != sigma.len() {
            return Err(Error::DimMismatch {
                left: rho.len(),
                right: sigma.len(),
            });
        }
        let d_forward = kl_divergence(&rho, &sigma)?;
        let d_reverse = kl_divergence(&sigma, &rho)?;
        Ok(Self {
            rho,
            sigma,
            d_forward,
            d_reverse,
        })
    }

    pub fn rho(&self) -> &FiniteMeasure {
        &self.rho
    }

    pub fn sigma(&self) -> &FiniteMeasure {
        &self.sigma
    }

    pub fn psi(&self, theta: f64) -> f64 {
        classical_psi(&self.rho, &self.sigma, theta).expect("dims validated at construction")
    }

    /// Direct (miss) exponent of the likelihood test at threshold `a`:
    /// the Legendre transform `max_theta (theta a - psi(theta))` over
    /// `theta` in `[-1, 0]`, valid for `a` in
    /// `[-D(sigma||rho), D(rho||sigma)]`; outside, the query clamps to
    /// the nearest edge and the result is flagged.
    pub fn eta_rate(&self, a: f64) -> RateValue {
        let lo = -self.d_reverse;
        let hi = self.d_forward;
        let (aq, clamped) = if a < lo {
            (lo, true)
        } else if a > hi {
            (hi, true)
        } else {
            (a, false)
        };
        let f = |theta: f64| theta * aq - self.psi(theta);
        let (theta_star, value) = golden_max(&f, -1.0, 0.0, tolerance::GOLDEN_WIDTH);
        // endpoints of the tilt interval can beat the interior probe
        let mut best = (theta_star, value);
        for theta in [-1.0, 0.0] {
            let v = f(theta);
            if v > best.1 {
                best = (theta, v);
            }
        }
        RateValue {
            value: best.1.max(0.0),
            theta_star: best.0,
            clamped,
        }
    }

    /// Acceptance exponent under the second hypothesis at threshold `a`;
    /// on the Legendre domain it equals `a + eta(a)`.
    pub fn zeta_rate(&self, a: f64) -> RateValue {
        let e = self.eta_rate(a);
        let aq = a.clamp(-self.d_reverse, self.d_forward);
        RateValue {
            value: aq + e.value,
            theta_star: e.theta_star,
            clamped: e.clamped,
        }
    }

    /// Rejection exponent under the second hypothesis at threshold `a`:
    /// `sup_{theta <= 0} (theta a - ln sum rho^theta sigma^{1-theta})`
    /// for `a <= -D(sigma||rho)`, zero above. Below the smallest finite
    /// atom of the ratio the tail is empty and the exponent infinite.
    /// The first call per process cross-checks the computation against
    /// exact type-class tails and poisons every later call on mismatch.
    pub fn zeta_c_rate(&self, a: f64) -> Result<f64> {
        zeta_c_gate()?;
        self.zeta_c_rate_ungated(a)
    }

    /// The gate itself needs the computation before the gate is open.
    fn zeta_c_rate_ungated(&self, a: f64) -> Result<f64> {
        if a >= -self.d_reverse {
            return Ok(0.0);
        }
        let z_min = self
            .rho
            .weights()
            .iter()
            .zip(self.sigma.weights())
            .filter(|(_, &s)| s > 0.0)
            .map(|(&r, &s)| if r > 0.0 { (r / s).ln() } else { f64::NEG_INFINITY })
            .fold(f64::INFINITY, f64::min);
        if a < z_min {
            return Ok(f64::INFINITY);
        }
        // cumulant function of the ratio under the second measure
        let phi = |theta: f64| -> f64 {
            let mut sum = 0.0f64;
            for (&r, &s) in self.rho.weights().iter().zip(self.sigma.weights()) {
                if s == 0.0 {
                    continue;
                }
                if r == 0.0 {
                    if theta < 0.0 {
                        return f64::INFINITY;
                    }
                    continue;
                }
                sum += (theta * r.ln() + (1.0 - theta) * s.ln()).exp();
            }
            sum.ln()
        };
        let f = |theta: f64| theta * a - phi(theta);
        let (_, value) = golden_max(&f, tolerance::THETA_FLOOR, 0.0, tolerance::GOLDEN_WIDTH);
        // the floor value is only a lower bound when the objective still
        // climbs there; fold it in rather than extrapolating
        Ok(value.max(f(0.0)).max(f(tolerance::THETA_FLOOR)).max(0.0))
    }

    /// Trade-off curve by tilt-parameter duality:
    /// `max_{theta in [-1, 0)} ((1+theta) r + psi(theta)) / theta`.
    /// At `r = 0` the supremum sits in the `theta -> 0` limit and equals
    /// `psi'(0) = D(rho||sigma)`, returned directly since no inset grid
    /// can attain it.
    pub fn hoeffding_exponent(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::Input(format!("rate r = {r} must be nonnegative")));
        }
        if r == 0.0 && self.rho.is_normalized() {
            return Ok(self.d_forward);
        }
        hoeffding_from_psi(&|theta| self.psi(theta), r)
    }

    /// Relaxed trade-off curve:
    /// `max_{theta <= -1} ((1+theta) r + psi(theta)) / theta`.
    /// The objective's derivative at `theta = -1` is proportional to
    /// `D(sigma||rho) - r`, so for `r <= D(sigma||rho)` the endpoint is
    /// optimal and the value is `-psi(-1)`, exactly zero for normalized
    /// pairs with compatible supports. Past the endpoint the objective
    /// has `h'(theta) = (theta psi'(theta) - psi(theta) - r) / theta^2`,
    /// so the supremum sits where the tilted miss exponent
    /// `theta psi' - psi` meets `r`; that exponent climbs toward the
    /// worst-atom value `-ln rho(x*)`, `x*` minimizing `rho/sigma`, and
    /// for `r` at or beyond it the objective increases all the way down
    /// and the value is the `theta -> -inf` limit `r + ln(rho/sigma)(x*)`.
    pub fn han_kobayashi_exponent(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::Input(format!("rate r = {r} must be nonnegative")));
        }
        if r <= self.d_reverse {
            if self.sigma.is_normalized() {
                return Ok(0.0);
            }
            // 0.0 - x keeps an exact zero positive
            return Ok(0.0 - self.psi(-1.0));
        }
        // r > d_reverse rules out sigma mass outside supp rho, and atoms
        // with sigma_x = 0 drop out of every tilt below -1
        let logs: Vec<(f64, f64)> = self
            .rho
            .weights()
            .iter()
            .zip(self.sigma.weights())
            .filter(|&(&p, &q)| p > 0.0 && q > 0.0)
            .map(|(&p, &q)| (p.ln(), (p / q).ln()))
            .collect();
        // log-space cumulant statistics stay finite at any tilt depth
        let stats = |theta: f64| -> (f64, f64) {
            let top = logs
                .iter()
                .map(|&(lp, z)| lp + theta * z)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            let mut mean_z = 0.0;
            for &(lp, z) in &logs {
                let w = (lp + theta * z - top).exp();
                total += w;
                mean_z += w * z;
            }
            (top + total.ln(), mean_z / total)
        };
        let miss = |theta: f64| {
            let (psi, slope) = stats(theta);
            theta * slope - psi
        };
        let z_min = logs.iter().map(|&(_, z)| z).fold(f64::INFINITY, f64::min);
        let worst_mass: f64 = logs
            .iter()
            .filter(|&&(_, z)| z <= z_min + 1e-12 * z_min.abs().max(1.0))
            .map(|&(lp, _)| lp.exp())
            .sum();
        let deepest = -worst_mass.ln();
        if r >= deepest - 1e-9 {
            return Ok(r + z_min);
        }
        let mut hi = -1.0f64;
        let mut lo = -2.0f64;
        while miss(lo) < r && lo > -1e18 {
            hi = lo;
            lo *= 2.0;
        }
        if miss(lo) < r {
            return Ok(r + z_min);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if miss(mid) >= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let (psi, slope) = stats(theta);
        Ok(((1.0 + theta) * slope - psi).max(0.0))
    }

    /// Analytic rate samples over a threshold grid.
    pub fn rate_samples(&self, grid: &[f64]) -> Result<RateSamples> {
        let mut eta = Vec::with_capacity(grid.len());
        let mut zeta = Vec::with_capacity(grid.len());
        let mut zeta_c = Vec::with_capacity(grid.len());
        let mut any_clamped = false;
        for &a in grid {
            let e = self.eta_rate(a);
            any_clamped |= e.clamped;
            eta.push(e.value);
            zeta.push(self.zeta_rate(a).value);
            zeta_c.push(self.zeta_c_rate(a)?);
        }
        Ok(RateSamples {
            grid: grid.to_vec(),
            eta,
            zeta,
            zeta_c,
            any_clamped,
        })
    }
}

/// Shared maximizer for the trade-off dual form, parameterized by the
/// cumulant function so classical and quantum callers stay in sync.
pub fn hoeffding_from_psi(psi: &dyn Fn(f64) -> f64, r: f64) -> Result<f64> {
    let h = |theta: f64| ((1.0 + theta) * r + psi(theta)) / theta;
    let hi = -tolerance::THETA_INSET;
    let (_, value) = golden_max(&h, -1.0, hi, tolerance::GOLDEN_WIDTH);
    let endpoint = h(-1.0).max(h(hi));
    Ok(value.max(endpoint).max(0.0))
}

/// Lower bound on the quantum trade-off curve through the quantum
/// cumulant function, sharing the classical maximizer.
pub fn quantum_hoeffding_lower_bound(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    r: f64,
) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::Input(format!("rate r = {r} must be nonnegative")));
    }
    // failures of the cumulant function do not depend on theta, so one
    // probe surfaces them before the maximizer runs unchecked
    quantum::quantum_psi(rho, sigma, -1.0)?;
    let psi = |theta: f64| {
        quantum::quantum_psi(rho, sigma, theta).expect("probed at construction")
    };
    hoeffding_from_psi(&psi, r)
}

/// Sampled rate curves over one grid.
#[derive(Debug, Clone)]
pub struct RateSamples {
    pub grid: Vec<f64>,
    pub eta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub zeta_c: Vec<f64>,
    pub any_clamped: bool,
}

/// Finite-blocklength rate samples read off an exact spectrum.
pub fn finite_n_rate_samples(
    spectrum: &LlrSpectrum,
    grid: &[f64],
    policy: TiePolicy,
) -> Vec<TestEvaluation> {
    grid.iter().map(|&a| spectrum.errors(a, policy)).collect()
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Input("grid needs at least two points".into()));
    }
    if grid.iter().any(|x| x.is_nan()) {
        return Err(Error::Input("grid contains NaN".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn validate_monotone(vals: &[f64], increasing: bool, name: &str) -> Result<()> {
    if vals.iter().any(|x| x.is_nan()) {
        return Err(Error::Input(format!("{name} contains NaN")));
    }
    let ok = vals.windows(2).all(|w| {
        if increasing {
            w[1] >= w[0] - tolerance::PLATEAU
        } else {
            w[1] <= w[0] + tolerance::PLATEAU
        }
    });
    if !ok {
        return Err(Error::Input(format!(
            "{name} is not {} within tolerance",
            if increasing { "nondecreasing" } else { "nonincreasing" }
        )));
    }
    Ok(())
}

/// The four grid forms of the constrained trade-off value
/// `sup { zeta(a) : eta(a) >= r }`.
///
/// `a0` is the largest threshold whose `zeta` value is still attained
/// somewhere inside the constraint set; extending it across the
/// right-hand `zeta` plateau is what makes the last two forms meet the
/// first two. When no grid point satisfies the constraint,
/// `sup_constrained`, `left_value`, `shifted_right_value` and `a0` are
/// `-inf`; when every point does, `inf_penalized` is `+inf`. The forms
/// agree within one grid step when the crossing is interior to the
/// sampled window.
#[derive(Debug, Clone, Copy)]
pub struct BeForms {
    pub sup_constrained: f64,
    pub inf_penalized: f64,
    pub left_value: f64,
    pub shifted_right_value: f64,
    pub a0: f64,
}

/// Computes all four forms independently from sampled `eta`
/// (nonincreasing) and `zeta` (nondecreasing) curves.
pub fn b_e_forms(grid: &[f64], eta: &[f64], zeta: &[f64], r: f64) -> Result<BeForms> {
    validate_grid(grid)?;
    if eta.len() != grid.len() || zeta.len() != grid.len() {
        return Err(Error::DimMismatch {
            left: grid.len(),
            right: eta.len().max(zeta.len()),
        });
    }
    validate_monotone(eta, false, "eta")?;
    validate_monotone(zeta, true, "zeta")?;

    let mut sup_constrained = f64::NEG_INFINITY;
    let mut inf_penalized = f64::INFINITY;
    let mut i0: Option<usize> = None;
    for i in 0..grid.len() {
        if eta[i] >= r {
            sup_constrained = sup_constrained.max(zeta[i]);
            i0 = Some(i);
        } else {
            inf_penalized = inf_penalized.min(grid[i] + eta[i]);
        }
    }
    let (a0, left_value, shifted_right_value) = match i0 {
        None => (
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        Some(i) => {
            let v = zeta[i];
            let mut j = i;
            while j + 1 < grid.len() && zeta[j + 1] <= v + tolerance::PLATEAU {
                j += 1;
            }
            let right_eta = if j + 1 < grid.len() { eta[j + 1] } else { eta[j] };
            (grid[j], zeta[j], grid[j] + right_eta)
        }
    };
    Ok(BeForms {
        sup_constrained,
        inf_penalized,
        left_value,
        shifted_right_value,
        a0,
    })
}

/// The grid forms of the relaxed trade-off value
/// `sup_a min { zeta_c(a), r + a }`, for a nonincreasing sampled
/// `zeta_c`. The saddle forms bracket the true value within one grid
/// step around the crossing of `zeta_c(a)` and `r + a`.
#[derive(Debug, Clone, Copy)]
pub struct BeStarForms {
    pub sup_min: f64,
    pub inf_max: f64,
    /// Largest grid threshold with `zeta_c(a) - a >= r`.
    pub crossing: f64,
    /// `r + crossing`.
    pub shifted: f64,
}

pub fn b_e_star_forms(grid: &[f64], zeta_c: &[f64], r: f64) -> Result<BeStarForms> {
    validate_grid(grid)?;
    if zeta_c.len() != grid.len() {
        return Err(Error::DimMismatch {
            left: grid.len(),
            right: zeta_c.len(),
        });
    }
    validate_monotone(zeta_c, false, "zeta_c")?;
    let mut sup_min = f64::NEG_INFINITY;
    let mut inf_max = f64::INFINITY;
    let mut crossing = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let shifted = r + grid[i];
        sup_min = sup_min.max(zeta_c[i].min(shifted));
        inf_max = inf_max.min(zeta_c[i].max(shifted));
        if zeta_c[i] - grid[i] >= r {
            crossing = grid[i];
        }
    }
    Ok(BeStarForms {
        sup_min,
        inf_max,
        crossing,
        shifted: r + crossing,
    })
}

/// Strong-converse-side value `sup { r' : B*(r') <= r } = r - a0` with
/// `a0 = inf { a : zeta_c(a) <= r }`, on a grid.
pub fn b_e_star_star(grid: &[f64], zeta_c: &[f64], r: f64) -> Result<f64> {
    validate_grid(grid)?;
    if zeta_c.len() != grid.len() {
        return Err(Error::DimMismatch {
            left: grid.len(),
            right: zeta_c.len(),
        });
    }
    validate_monotone(zeta_c, false, "zeta_c")?;
    let a0 = grid
        .iter()
        .zip(zeta_c)
        .find(|(_, &zc)| zc <= r)
        .map(|(&a, _)| a)
        .unwrap_or(f64::INFINITY);
    Ok(r - a0)
}

/// Outcome of comparing the relaxed trade-off value with the simpler
/// penalized form `inf_a { a + eta(a) + max(r - eta(a), 0) }`.
///
/// The penalized form is always an upper bound; it agrees with the
/// relaxed value exactly when `r` does not exceed the left plateau drop
/// `zeta_c(-inf) - sup { a : zeta_c(a) = zeta_c(-inf) }`.
#[derive(Debug, Clone, Copy)]
pub struct HanComparison {
    pub r: f64,
    pub penalized_value: f64,
    pub relaxed_value: f64,
    pub condition_holds: bool,
    /// Leftmost sampled `zeta_c` value, standing in for its limit.
    pub zeta_c_left: f64,
    /// Right edge of the initial plateau of `zeta_c`.
    pub plateau_edge: f64,
}

pub fn han_penalized_value(grid: &[f64], eta: &[f64], r: f64) -> Result<f64> {
    validate_grid(grid)?;
    if eta.len() != grid.len() {
        return Err(Error::DimMismatch {
            left: grid.len(),
            right: eta.len(),
        });
    }
    let mut best = f64::INFINITY;
    for i in 0..grid.len() {
        best = best.min(grid[i] + eta[i] + (r - eta[i]).max(0.0));
    }
    Ok(best)
}

pub fn han_formula_check(
    grid: &[f64],
    eta: &[f64],
    zeta_c: &[f64],
    r: f64,
) -> Result<HanComparison> {
    let penalized_value = han_penalized_value(grid, eta, r)?;
    let star = b_e_star_forms(grid, zeta_c, r)?;
    let zeta_c_left = zeta_c[0];
    let mut plateau_edge = grid[0];
    for i in 0..grid.len() {
        if (zeta_c[i] - zeta_c_left).abs() <= tolerance::PLATEAU
            || (zeta_c_left.is_infinite() && zeta_c[i] == zeta_c_left)
        {
            plateau_edge = grid[i];
        } else {
            break;
        }
    }
    let condition_holds = r <= zeta_c_left - plateau_edge;
    Ok(HanComparison {
        r,
        penalized_value,
        relaxed_value: star.sup_min,
        condition_holds,
        zeta_c_left,
        plateau_edge,
    })
}

/// Rate functions generated by a finite set of spectral atoms `(z, i)`
/// with `i >= 0`: a sequence whose log-likelihood spectrum concentrates
/// on the points `z` with masses `e^{-n i(z)}` under the first
/// hypothesis, hence `e^{-n (i(z) + z)}` under the second. The three
/// curves are coupled step functions,
/// `eta(a) = min { i(z) : z <= a }` (nonincreasing),
/// `zeta(a) = min { i(z) + z : z > a }` (nondecreasing),
/// `zeta_c(a) = min { i(z) + z : z <= a }` (nonincreasing),
/// with minima over empty sets equal to `+inf`.
#[derive(Debug, Clone)]
pub struct StepRates {
    atoms: Vec<(f64, f64)>,
    prefix_min_i: Vec<f64>,
    prefix_min_iz: Vec<f64>,
    suffix_min_iz: Vec<f64>,
}

impl StepRates {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Input("need at least one spectral atom".into()));
        }
        if atoms.iter().any(|(z, i)| z.is_nan() || !(*i >= 0.0)) {
            return Err(Error::Input("atoms need finite z and i >= 0".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = atoms.len();
        let mut prefix_min_i = vec![f64::INFINITY; k + 1];
        let mut prefix_min_iz = vec![f64::INFINITY; k + 1];
        for (j, &(z, i)) in atoms.iter().enumerate() {
            prefix_min_i[j + 1] = prefix_min_i[j].min(i);
            prefix_min_iz[j + 1] = prefix_min_iz[j].min(i + z);
        }
        let mut suffix_min_iz = vec![f64::INFINITY; k + 1];
        for j in (0..k).rev() {
            let (z, i) = atoms[j];
            suffix_min_iz[j] = suffix_min_iz[j + 1].min(i + z);
        }
        Ok(Self {
            atoms,
            prefix_min_i,
            prefix_min_iz,
            suffix_min_iz,
        })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Number of atoms with `z <= a`.
    fn count_le(&self, a: f64) -> usize {
        self.atoms.partition_point(|&(z, _)| z <= a)
    }

    pub fn eta(&self, a: f64) -> f64 {
        self.prefix_min_i[self.count_le(a)]
    }

    pub fn zeta(&self, a: f64) -> f64 {
        self.suffix_min_iz[self.count_le(a)]
    }

    pub fn zeta_c(&self, a: f64) -> f64 {
        self.prefix_min_iz[self.count_le(a)]
    }

    pub fn samples(&self, grid: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let eta = grid.iter().map(|&a| self.eta(a)).collect();
        let zeta = grid.iter().map(|&a| self.zeta(a)).collect();
        let zeta_c = grid.iter().map(|&a| self.zeta_c(a)).collect();
        (eta, zeta, zeta_c)
    }

    /// A grid containing every jump location twice (just left of and at
    /// each atom) so sampled step functions lose nothing to resolution.
    pub fn resolving_grid(&self, margin: f64, inset: f64) -> Vec<f64> {
        let mut grid = Vec::with_capacity(2 * self.atoms.len() + 2);
        grid.push(self.atoms[0].0 - margin);
        for &(z, _) in &self.atoms {
            grid.push(z - inset);
            grid.push(z);
        }
        grid.push(self.atoms[self.atoms.len() - 1].0 + margin);
        grid.dedup_by(|a, b| *a <= *b);
        grid
    }
}

/// Step rate functions of the configurable two-point example: the miss
/// exponent is infinite up to threshold zero and zero beyond; the
/// rejection exponent drops from `c` to zero at the same threshold.
pub fn two_point_rate_samples(c: f64, grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let eta = grid
        .iter()
        .map(|&a| if a > 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    let zeta_c = grid.iter().map(|&a| if a > 0.0 { 0.0 } else { c }).collect();
    (eta, zeta_c)
}

/// Closed-form relaxed trade-off value of the two-point example.
pub fn two_point_b_e_star(c: f64, r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= c {
        r
    } else {
        c
    }
}

/// Closed-form penalized value of the two-point example.
pub fn two_point_han(r: f64) -> f64 {
    r.max(0.0)
}

/// Randomized test hitting a prescribed miss exponent `r` on the atom
/// space of a spectrum: the likelihood test itself when its exponent
/// already reaches `r`, otherwise the likelihood test blended toward
/// always-accept with weight `w = e^{-n r} / alpha(a)`, which sets the
/// miss probability to `e^{-n r}` up to one rounding.
#[derive(Debug, Clone)]
pub struct TiltedTest {
    /// Acceptance probability per atom (classical) or the operator
    /// weight of the blend (quantum callers keep the operator instead).
    pub accept: Vec<f64>,
    pub eval: TestEvaluation,
    /// Blend weight actually used; 1 when the plain test sufficed.
    pub weight: f64,
}

pub fn tilted_test_classical(
    spectrum: &LlrSpectrum,
    a: f64,
    r: f64,
    policy: TiePolicy,
) -> Result<TiltedTest> {
    let n = spectrum.blocklength();
    let base = spectrum.errors(a, policy);
    if base.eta >= r {
        return Ok(TiltedTest {
            accept: spectrum.likelihood_test(a, policy).accept().to_vec(),
            eval: base,
            weight: 1.0,
        });
    }
    if base.alpha <= 0.0 {
        return Err(Error::Property(format!(
            "miss probability is zero yet its exponent {} is below r = {r}",
            base.eta
        )));
    }
    let w = (-(n as f64) * r).exp() / base.alpha;
    if w > 1.0 {
        return Err(Error::Property(format!(
            "blend weight {w} above 1; exponent bookkeeping is inconsistent"
        )));
    }
    let s = spectrum.likelihood_test(a, policy);
    let accept: Vec<f64> = s.accept().iter().map(|&t| 1.0 - w * (1.0 - t)).collect();
    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    let mut beta_c = 0.0f64;
    for (at, &t) in spectrum.atoms().iter().zip(&accept) {
        alpha += (1.0 - t) * at.rho;
        beta += t * at.sigma;
        beta_c += (1.0 - t) * at.sigma;
    }
    Ok(TiltedTest {
        accept,
        eval: TestEvaluation::from_errors(n, alpha, beta, beta_c),
        weight: w,
    })
}

/// Quantum analogue of [`tilted_test_classical`]: returns the blended
/// test operator and its error triple.
pub fn tilted_test_quantum(
    rho_n: &HermitianOperator,
    sigma_n: &HermitianOperator,
    n: u32,
    a: f64,
    r: f64,
    mode: ProjectionMode,
) -> Result<(HermitianOperator, TestEvaluation)> {
    let proj = quantum::np_projection(rho_n, sigma_n, n, a, mode)?;
    let base = quantum::evaluate_test(rho_n, sigma_n, &proj.projector, n)?;
    if base.eta >= r {
        return Ok((proj.projector, base));
    }
    if base.alpha <= 0.0 {
        return Err(Error::Property(format!(
            "miss probability is zero yet its exponent {} is below r = {r}",
            base.eta
        )));
    }
    let w = (-(n as f64) * r).exp() / base.alpha;
    if w > 1.0 {
        return Err(Error::Property(format!(
            "blend weight {w} above 1; exponent bookkeeping is inconsistent"
        )));
    }
    let id = HermitianOperator::identity(rho_n.dim());
    let t = id.sub(&id.sub(&proj.projector)?.scaled(w))?;
    let eval = quantum::evaluate_test(rho_n, sigma_n, &t, n)?;
    Ok((t, eval))
}

/// One blocklength row of a threshold-convergence report.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SteinRow {
    pub n: u32,
    pub threshold: f64,
    pub gap: f64,
}

/// Largest thresholds with miss probability at most `epsilon`, per
/// blocklength, against the divergence they converge to.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SteinReport {
    pub epsilon: f64,
    pub divergence: f64,
    pub rows: Vec<SteinRow>,
}

/// Exact classical threshold report via type-class spectra.
pub fn stein_report(
    rho: &FiniteMeasure,
    sigma: &FiniteMeasure,
    epsilon: f64,
    blocklengths: &[u32],
    cap: Option<u128>,
) -> Result<SteinReport> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    let divergence = kl_divergence(rho, sigma)?;
    let mut rows = Vec::with_capacity(blocklengths.len());
    for &n in blocklengths {
        let sp = iid_spectrum(rho, sigma, n, cap)?;
        let threshold = sp.threshold(epsilon);
        rows.push(SteinRow {
            n,
            threshold,
            gap: (threshold - divergence).abs(),
        });
    }
    Ok(SteinReport {
        epsilon,
        divergence,
        rows,
    })
}

/// Quantum threshold `sup { a : alpha_n(a) <= epsilon }` by bisection on
/// the sector-decomposed miss probability, which is nondecreasing in
/// the threshold.
pub fn quantum_stein_threshold(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: u32,
    epsilon: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    let dec = crate::schur::build_decomposition(rho, sigma, n)?;
    let alpha = |a: f64| -> Result<f64> { Ok(dec.evaluate(a, ProjectionMode::Strict)?.eval.alpha) };
    let (mut lo, mut hi) = bracket;
    if alpha(lo)? > epsilon {
        return Err(Error::Input(format!(
            "bracket low end {lo} already misses more than epsilon"
        )));
    }
    if alpha(hi)? <= epsilon {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if alpha(mid)? <= epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Once-per-process integrity gate for the analytic rejection exponent:
/// compares it against exact type-class tails at large blocklengths on
/// a fixed reference pair before the first use.
fn zeta_c_gate() -> Result<()> {
    static GATE: OnceLock<Option<String>> = OnceLock::new();
    let failure = GATE.get_or_init(|| {
        let build = || -> Result<Option<String>> {
            let rho = FiniteMeasure::probability(vec![0.6, 0.4])?;
            let sigma = FiniteMeasure::probability(vec![0.25, 0.75])?;
            let pair = ClassicalPair::new(rho.clone(), sigma.clone())?;
            // reference points sit strictly between the smallest ratio
            // atom (-0.629) and -D(sigma||rho) (-0.253)
            for a in [-0.35f64, -0.5] {
                let analytic = pair.zeta_c_rate_ungated(a)?;
                for n in [200u32, 500, 1000] {
                    let sp = iid_spectrum(&rho, &sigma, n, None)?;
                    let emp = sp.errors(a, TiePolicy::Strict).zeta_c;
                    let slack = 4.0 * (n as f64).ln() / n as f64;
                    if (emp - analytic).abs() > slack {
                        return Ok(Some(format!(
                            "rejection exponent self-test failed at a = {a}, n = {n}: \
                             analytic {analytic}, empirical {emp}, slack {slack}"
                        )));
                    }
                }
            }
            Ok(None)
        };
        match build() {
            Ok(outcome) => outcome,
            Err(e) => Some(e.to_string()),
        }
    });
    match failure {
        None => Ok(()),
        Some(msg) => Err(Error::Property(msg.clone())),
    }
}
