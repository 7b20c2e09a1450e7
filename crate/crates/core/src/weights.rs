//! Slowly varying weights κ, the derived symbols φ, and the data-adapted
//! weight built from the η construction.
//!
//! `φ(λ) = ∫₀^∞ (1 - cos h) h⁻² κ(λ/h) dh`. For `κ ≡ 1` this is `π/2`, and
//! for admissible κ the ratio `φ/κ` is bounded above and below.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quad::{adaptive, geometric_breaks_to_zero, Tolerance};
use crate::spectral::GridFunction;

/// `ln(4 + e^u)`, accurate for arbitrarily large `u`.
pub(crate) fn ln_4_plus_exp(u: f64) -> f64 {
    if u == f64::NEG_INFINITY {
        return 4f64.ln();
    }
    if u > 30.0 {
        u + (4.0 * (-u).exp()).ln_1p()
    } else {
        (4.0 + u.exp()).ln()
    }
}

/// Weight κ on `[0, ∞)`.
#[derive(Debug, Clone)]
pub enum Kappa {
    /// `κ_a(r) = (ln(4 + r))^a`.
    PowerLog { a: f64 },
    /// `κ₀(r) = (ln(4 + r))^{1/3} η(r)` with η built from the initial datum.
    DataAdapted { eta: Arc<Eta> },
    /// Piecewise linear in `ln(4 + r)` through `(r_i, v_i)`, `r_0 = 0`;
    /// continued past the last node proportionally to `ln(4 + r)`.
    Table { r: Vec<f64>, v: Vec<f64> },
    /// Constant weight. Fails H1; only usable as an explicit degenerate case.
    Constant { value: f64 },
}

impl Kappa {
    pub fn power_log(a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(invalid(format!("power-log exponent must be >= 0, got {a}")));
        }
        Ok(Kappa::PowerLog { a })
    }

    pub fn table(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() != v.len() || r.len() < 2 {
            return Err(invalid(
                "table needs at least two (r, value) pairs of equal length",
            ));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "table abscissae must start at 0 and increase strictly",
            ));
        }
        if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(invalid("table values must be positive and finite"));
        }
        Ok(Kappa::Table { r, v })
    }

    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        match self {
            Kappa::PowerLog { a } => {
                if *a == 0.0 {
                    1.0
                } else {
                    (4.0 + r).ln().powf(*a)
                }
            }
            Kappa::DataAdapted { eta } => (4.0 + r).ln().cbrt() * eta.eval(r),
            Kappa::Table { r: rs, v } => {
                let l = (4.0 + r).ln();
                let last = rs.len() - 1;
                if r >= rs[last] {
                    return v[last] * l / (4.0 + rs[last]).ln();
                }
                let i = rs.partition_point(|&x| x <= r) - 1;
                let (l0, l1) = ((4.0 + rs[i]).ln(), (4.0 + rs[i + 1]).ln());
                v[i] + (v[i + 1] - v[i]) * (l - l0) / (l1 - l0)
            }
            Kappa::Constant { value } => *value,
        }
    }

    /// Log exponent `a` entering the damping factor δ, when it is defined.
    pub fn log_exponent(&self) -> Option<f64> {
        match self {
            Kappa::PowerLog { a } => Some(*a),
            Kappa::DataAdapted { .. } => Some(1.0 / 3.0),
            _ => None,
        }
    }
}

/// Sampling used to test the structural hypotheses on κ.
#[derive(Debug, Clone, Copy)]
pub struct KappaSamples {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for KappaSamples {
    fn default() -> Self {
        Self {
            r_min: 1e-3,
            r_max: 1e9,
            per_decade: 32,
        }
    }
}

impl KappaSamples {
    fn points(&self) -> Vec<f64> {
        let decades = (self.r_max / self.r_min).log10();
        let n = (decades * self.per_decade as f64).ceil() as usize;
        let mut out = vec![0.0];
        out.extend((0..=n).map(|i| self.r_min * 10f64.powf(decades * i as f64 / n as f64)));
        out
    }
}

/// Outcome of the hypothesis checks H1–H3 plus `κ ≥ 1`.
#[derive(Debug, Clone, Serialize)]
pub struct KappaReport {
    /// Nondecreasing on the samples and not constant.
    pub increasing: bool,
    /// `max κ(2r)/κ(r)` over the samples.
    pub doubling_constant: f64,
    /// `κ(r)/ln(4+r)` nonincreasing on the samples.
    pub log_dominated: bool,
    pub at_least_one: bool,
}

impl KappaReport {
    pub fn admissible(&self) -> bool {
        self.increasing
            && self.doubling_constant.is_finite()
            && self.log_dominated
            && self.at_least_one
    }
}

pub fn validate_kappa(kappa: &Kappa, samples: &KappaSamples) -> KappaReport {
    let rs = samples.points();
    let vals: Vec<f64> = rs.iter().map(|&r| kappa.eval(r)).collect();
    let slack = 1e-12;
    let nondecreasing = vals.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack));
    let increasing = nondecreasing && vals[vals.len() - 1] > vals[0] * (1.0 + 1e-9);
    let doubling_constant = rs
        .iter()
        .zip(&vals)
        .map(|(&r, &v)| kappa.eval(2.0 * r) / v)
        .fold(1.0, f64::max);
    let ratios: Vec<f64> = rs
        .iter()
        .zip(&vals)
        .map(|(&r, &v)| v / (4.0 + r).ln())
        .collect();
    let log_dominated = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack));
    let at_least_one = vals.iter().all(|&v| v >= 1.0 - slack);
    KappaReport {
        increasing,
        doubling_constant,
        log_dominated,
        at_least_one,
    }
}

/// Evaluates `φ(λ)` by adaptive quadrature.
///
/// The integral is split at `h = 1`. On `[1, ∞)` the non-oscillatory part
/// `∫ κ(λ/h) h⁻² dh = ∫₀¹ κ(λu) du` is integrated directly, and the
/// oscillatory part `∫ cos h κ(λ/h) h⁻² dh` is integrated to `A = 2πK` and
/// closed by an asymptotic integration-by-parts tail.
pub fn phi_integral(kappa: &Kappa, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("φ needs a finite λ >= 0, got {lambda}")));
    }
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-13,
        max_panels: 20_000,
    };
    let k = |r: f64| kappa.eval(r);

    let near = adaptive(
        |h| {
            if h == 0.0 {
                return 0.5 * k(f64::MAX);
            }
            let s = (0.5 * h).sin();
            2.0 * s * s / (h * h) * k(lambda / h)
        },
        &geometric_breaks_to_zero(1.0, 60),
        tol,
    )?;

    let depth = 8 + lambda.max(1.0).log2().ceil() as usize;
    let smooth = adaptive(
        |u| k(lambda * u),
        &geometric_breaks_to_zero(1.0, depth),
        tol,
    )?;

    const PERIODS: usize = 64;
    let upper = 2.0 * PI * PERIODS as f64;
    let g = |h: f64| k(lambda / h) / (h * h);
    let mut breaks = vec![1.0];
    breaks.extend((1..=2 * PERIODS).map(|i| PI * i as f64));
    let osc = adaptive(|h| h.cos() * g(h), &breaks, tol)?;
    // ∫_A^∞ cos h g(h) dh = -g'(A) + g'''(A) - … when sin A = 0, cos A = 1
    let step = 1e-3 * upper;
    let dg = (g(upper + step) - g(upper - step)) / (2.0 * step);
    let osc_tail = -dg;

    let value = near + smooth - (osc + osc_tail);
    if !value.is_finite() {
        return Err(Error::NumericDomain(format!("φ({lambda}) is not finite")));
    }
    Ok(value)
}

/// Tabulation range and density for φ.
#[derive(Debug, Clone, Copy)]
pub struct PhiSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub per_decade: usize,
    /// Accept κ that fails the hypotheses (for instance `κ ≡ 1`).
    pub allow_degenerate: bool,
}

impl Default for PhiSpec {
    fn default() -> Self {
        Self {
            lambda_min: 1e-4,
            lambda_max: 1e7,
            per_decade: 64,
            allow_degenerate: false,
        }
    }
}

/// Tabulated φ with monotone piecewise-linear interpolation in `ln λ`.
#[derive(Debug, Clone)]
pub struct Phi {
    kappa: Kappa,
    lambdas: Vec<f64>,
    values: Vec<f64>,
}

impl Phi {
    pub fn kappa(&self) -> &Kappa {
        &self.kappa
    }

    pub fn range(&self) -> (f64, f64) {
        (0.0, self.lambdas[self.lambdas.len() - 1])
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambdas
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        let hi = self.lambdas[self.lambdas.len() - 1];
        if !(lambda >= 0.0 && lambda <= hi * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange {
                what: "λ",
                value: lambda,
                lo: 0.0,
                hi,
            });
        }
        let lambda = lambda.min(hi);
        // node 0 is λ = 0, node 1 is λ_min; interpolate linearly in λ there
        if lambda <= self.lambdas[1] {
            let t = lambda / self.lambdas[1];
            return Ok(self.values[0] + t * (self.values[1] - self.values[0]));
        }
        let i = (self.lambdas.partition_point(|&x| x <= lambda) - 1).min(self.lambdas.len() - 2);
        let (l0, l1) = (self.lambdas[i].ln(), self.lambdas[i + 1].ln());
        let t = (lambda.ln() - l0) / (l1 - l0);
        Ok(self.values[i] + t * (self.values[i + 1] - self.values[i]))
    }

    /// `(min, max)` of `φ/κ` over the tabulation nodes.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        self.nodes()
            .map(|(l, v)| v / self.kappa.eval(l))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            })
    }
}

pub fn tabulate_phi(kappa: &Kappa, spec: &PhiSpec) -> Result<Phi> {
    if !(spec.lambda_min > 0.0 && spec.lambda_max > spec.lambda_min && spec.per_decade >= 1) {
        return Err(invalid(
            "φ tabulation needs 0 < λ_min < λ_max and a positive density",
        ));
    }
    if !spec.allow_degenerate && !validate_kappa(kappa, &KappaSamples::default()).admissible() {
        return Err(invalid(
            "κ fails the structural hypotheses; pass allow_degenerate to tabulate anyway",
        ));
    }
    let decades = (spec.lambda_max / spec.lambda_min).log10();
    let n = (decades * spec.per_decade as f64).ceil() as usize;
    let mut lambdas = vec![0.0];
    lambdas.extend((0..=n).map(|i| spec.lambda_min * 10f64.powf(decades * i as f64 / n as f64)));
    let mut values = lambdas
        .par_iter()
        .map(|&l| phi_integral(kappa, l))
        .collect::<Result<Vec<f64>>>()?;
    // quadrature noise at the 1e-13 level must not break monotonicity
    for i in 1..values.len() {
        values[i] = values[i].max(values[i - 1]);
    }
    Ok(Phi {
        kappa: kappa.clone(),
        lambdas,
        values,
    })
}

/// Two-sided tail mass `α ↦ ∫_{|r| ≥ α} ω(r) dr`, addressed through `ln α`
/// so that astronomically large thresholds stay representable.
pub trait TailMass: Sync {
    fn tail(&self, ln_alpha: f64) -> f64;

    fn total(&self) -> f64 {
        self.tail(f64::NEG_INFINITY)
    }
}

/// Tail mass of a discrete measure on wavenumber magnitudes.
#[derive(Debug, Clone)]
pub struct DiscreteTail {
    /// `(|ξ|, mass)` sorted by `|ξ|`.
    atoms: Vec<(f64, f64)>,
}

impl DiscreteTail {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|a| a.1 > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { atoms }
    }
}

impl TailMass for DiscreteTail {
    fn tail(&self, ln_alpha: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(x, _)| x.ln() >= ln_alpha)
            .map(|a| a.1)
            .sum()
    }
}

/// The increasing, log-dominated function η with `η = 2` on `[0, α₁)` and
/// `η = k + 1 + ln((4+r)/(4+α_k)) / ln((4+α_{k+1})/(4+α_k))` on
/// `[α_k, α_{k+1})`. Breakpoints are stored as `ln α_k`; the sequence is
/// kept up to the first breakpoint beyond the `f64` range.
#[derive(Debug, Clone, Serialize)]
pub struct Eta {
    ln_breaks: Vec<f64>,
}

/// Geometric search ratio in `ln α` and step budget for each breakpoint.
const ETA_SEARCH_RATIO: f64 = 1.0 + 1.0 / 64.0;
const ETA_SEARCH_BUDGET: usize = 200_000;

pub fn build_eta(tail: &dyn TailMass) -> Result<Eta> {
    let total = tail.total();
    if !total.is_finite() || total < 0.0 {
        return Err(Error::NotIntegrable(format!(
            "tail mass at zero is {total}"
        )));
    }
    let mut ln_breaks: Vec<f64> = Vec::new();
    let f64_ln_max = f64::MAX.ln();
    let mut k = 1;
    loop {
        let lower = ln_breaks.last().map_or(5.0, |&l| 10.0 * l);
        let target = 0.5f64.powi(k);
        let mut candidate = lower;
        let mut steps = 0;
        while tail.tail(candidate) > target {
            candidate *= ETA_SEARCH_RATIO;
            steps += 1;
            if steps > ETA_SEARCH_BUDGET || !candidate.is_finite() {
                return Err(Error::NotIntegrable(format!(
                    "tail mass stays above 2^-{k} up to ln α = {candidate:.3e}"
                )));
            }
        }
        ln_breaks.push(candidate);
        if candidate > f64_ln_max {
            break;
        }
        k += 1;
    }
    Ok(Eta { ln_breaks })
}

impl Eta {
    /// `ln α_k`, `k = 1, 2, …`.
    pub fn ln_breakpoints(&self) -> &[f64] {
        &self.ln_breaks
    }

    pub fn eval(&self, r: f64) -> f64 {
        let u = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
        self.eval_ln(u)
    }

    /// η at `r = e^u`.
    pub fn eval_ln(&self, u: f64) -> f64 {
        let b = &self.ln_breaks;
        if u < b[0] {
            return 2.0;
        }
        let i = b.partition_point(|&l| l <= u) - 1;
        if i + 1 >= b.len() {
            return (b.len() + 1) as f64;
        }
        let lo = ln_4_plus_exp(b[i]);
        let hi = ln_4_plus_exp(b[i + 1]);
        (i + 2) as f64 + (ln_4_plus_exp(u) - lo) / (hi - lo)
    }
}

/// Results of the η property checks on random samples.
#[derive(Debug, Clone, Serialize)]
pub struct EtaReport {
    pub samples: usize,
    pub equals_two_below_first_break: bool,
    pub nondecreasing: bool,
    pub doubling: bool,
    pub log_dominated: bool,
    pub tail_conditions: bool,
    pub weighted_integral: f64,
    pub integral_bound: f64,
}

impl EtaReport {
    pub fn passes(&self) -> bool {
        self.equals_two_below_first_break
            && self.nondecreasing
            && self.doubling
            && self.log_dominated
            && self.tail_conditions
            && self.weighted_integral <= self.integral_bound * (1.0 + 1e-9)
    }
}

/// Checks the η properties at `samples` random points spread over the whole
/// `f64` range, plus the tail conditions at every breakpoint and the bound on
/// `∫ η ω`.
pub fn check_eta(eta: &Eta, tail: &dyn TailMass, samples: usize, seed: u64) -> Result<EtaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_max = f64::MAX.ln() - 1.0;
    let mut us: Vec<f64> = (0..samples)
        .map(|_| rng.random_range(-10.0..ln_max))
        .collect();
    us.sort_by(f64::total_cmp);
    let tol = 1e-12;

    let first = eta.ln_breaks[0];
    let equals_two_below_first_break = us
        .iter()
        .filter(|&&u| u < first)
        .all(|&u| eta.eval_ln(u) == 2.0)
        && eta.eval(0.0) == 2.0;
    let vals: Vec<f64> = us.iter().map(|&u| eta.eval_ln(u)).collect();
    let nondecreasing = vals.windows(2).all(|w| w[1] >= w[0] - tol);
    let doubling = us
        .iter()
        .zip(&vals)
        .all(|(&u, &v)| eta.eval_ln(u + std::f64::consts::LN_2) <= 2.0 * v + tol);
    let ratios: Vec<f64> = us
        .iter()
        .zip(&vals)
        .map(|(&u, &v)| v / ln_4_plus_exp(u))
        .collect();
    let log_dominated = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol));
    let tail_conditions = eta
        .ln_breaks
        .iter()
        .enumerate()
        .all(|(i, &l)| tail.tail(l) <= 0.5f64.powi(i as i32 + 1) * (1.0 + tol));

    // ∫ η dμ = η(0) T(0) + Σ_k ∫_{segment k} η'(r) T(r) dr, integrated in ln r
    let mut integral = 2.0 * tail.total();
    let b = &eta.ln_breaks;
    for k in 0..b.len() - 1 {
        let lo = ln_4_plus_exp(b[k]);
        let d = ln_4_plus_exp(b[k + 1]) - lo;
        let top = b[k + 1].min(ln_max);
        if top > b[k] {
            let seg = adaptive(
                |u| {
                    let e = (u - ln_4_plus_exp(u)).exp();
                    tail.tail(u) * e / d
                },
                &[b[k], top],
                Tolerance {
                    abs: 1e-14,
                    rel: 1e-10,
                    max_panels: 4000,
                },
            )?;
            integral += seg;
        }
    }
    let integral_bound = 2.0 * tail.total()
        + (1..=b.len())
            .map(|k| (k as f64 + 2.0) * 0.5f64.powi(k as i32))
            .sum::<f64>();

    Ok(EtaReport {
        samples,
        equals_two_below_first_break,
        nondecreasing,
        doubling,
        log_dominated,
        tail_conditions,
        weighted_integral: integral,
        integral_bound,
    })
}

/// The data-adapted weight `κ₀ = (ln(4+r))^{1/3} η(r)`, with η built from
/// `ω(ξ) = |ξ|³ (ln(4+|ξ|²))^{2/3} |f̂₀(ξ)|²`.
pub fn data_adapted_kappa(f0: &GridFunction<f64>) -> Result<Kappa> {
    let tail = data_tail(f0);
    let eta = build_eta(&tail)?;
    Ok(Kappa::DataAdapted { eta: Arc::new(eta) })
}

/// The measure ω of [`data_adapted_kappa`] as a [`DiscreteTail`].
pub fn data_tail(f0: &GridFunction<f64>) -> DiscreteTail {
    let grid = *f0.grid();
    let atoms = f0
        .spectrum()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| {
            let xi = grid.wavenumber(j);
            let mult = if j == grid.len() / 2 { 1.0 } else { 2.0 };
            let w = xi.powi(3) * (4.0 + xi * xi).ln().powf(2.0 / 3.0);
            (xi, mult * grid.period() * w * c.norm_sqr())
        })
        .collect();
    DiscreteTail::new(atoms)
}

/// `π/2`, the value of φ for `κ ≡ 1`.
pub const PHI_OF_UNIT_WEIGHT: f64 = FRAC_PI_2;
