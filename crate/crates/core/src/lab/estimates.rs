//! Commutator, transport, remainder, contraction and Hardy estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Ensemble, RatioReport};
use crate::error::{invalid, Result};
use crate::muskat::{apply_t, remainder_r, velocity_v, AlphaQuadrature, QuadSpec};
use crate::norms::{sobolev_norm, weighted_norm, weighted_norm_pow, weighted_operator};
use crate::quad::{adaptive, geometric_breaks_to_zero, Tolerance};
use crate::spectral::{self, Grid};
use crate::weights::{tabulate_phi, Kappa, Phi, PhiSpec};
use crate::Field;

/// φ tabulated far enough for every wavenumber of `grid`. A constant κ is
/// accepted as the explicit degenerate case.
pub fn lab_phi(kappa: &Kappa, grid: &Grid) -> Result<Phi> {
    let spec = PhiSpec {
        lambda_max: (2.0 * grid.nyquist()).max(10.0),
        allow_degenerate: matches!(kappa, Kappa::Constant { .. }),
        ..PhiSpec::default()
    };
    tabulate_phi(kappa, &spec)
}

fn homog(f: &Field, s: f64) -> f64 {
    sobolev_norm(f, s, true)
}

/// `(‖V(f)‖_{Ḣ¹}, ‖f‖_{Ḣ²} + ‖f‖²_{Ḣ^{7/4}})`.
pub fn v_bound_sample(f: &Field, quad: &AlphaQuadrature) -> (f64, f64) {
    let v = velocity_v(f, quad);
    (homog(&v, 1.0), homog(f, 2.0) + homog(f, 1.75).powi(2))
}

pub fn check_v_bound(ens: &Ensemble, quad: &QuadSpec) -> Result<RatioReport> {
    let q = AlphaQuadrature::new(&ens.grid()?, quad)?;
    let sides = ens.map(|i| Ok(v_bound_sample(&ens.field(i)?, &q)))?;
    Ok(RatioReport::from_sides("v-bound", Some(*ens), sides))
}

/// `‖[|D|^{1,φ}, T(f)] g‖` against the three-term bound. Both legs are
/// dealiased by the 2/3 rule.
pub fn commutator_d1phi_sample(
    f: &Field,
    g: &Field,
    phi: &Phi,
    quad: &AlphaQuadrature,
) -> Result<(f64, f64)> {
    let d1 = |u: &Field| weighted_operator(u, 1.0, phi, 1.0);
    let outer = d1(&spectral::dealias(&apply_t(f, g, quad)?))?;
    let inner = spectral::dealias(&apply_t(f, &d1(g)?, quad)?);
    let lhs = outer.sub(&inner).l2_norm();

    let g74 = homog(g, 1.75);
    let f74 = homog(f, 1.75);
    let rhs = g74 * weighted_norm(f, 1.75, phi)?
        + g74 * weighted_norm_pow(f, 1.75, phi, 2.0)?.sqrt() * homog(f, 19.0 / 12.0).powf(1.5)
        + weighted_norm_pow(g, 1.75, phi, 2.0)?.sqrt() * g74.sqrt() * f74;
    Ok((lhs, rhs))
}

pub fn check_commutator_d1phi(
    ens: &Ensemble,
    kappa: &Kappa,
    quad: &QuadSpec,
) -> Result<RatioReport> {
    let grid = ens.grid()?;
    let q = AlphaQuadrature::new(&grid, quad)?;
    let phi = lab_phi(kappa, &grid)?;
    let sides = ens.map(|i| {
        let (f, g) = ens.pair(i)?;
        commutator_d1phi_sample(&f, &g, &phi, &q)
    })?;
    let id = if matches!(kappa, Kappa::Constant { .. }) {
        "commutator-d1phi-unit"
    } else {
        "commutator-d1phi"
    };
    Ok(RatioReport::from_sides(id, Some(*ens), sides))
}

/// `(‖R(f,g)‖, ‖g‖_{Ḣ^{3/4}} ‖f‖_{Ḣ^{7/4}})`.
pub fn r_bound_sample(f: &Field, g: &Field, quad: &AlphaQuadrature) -> Result<(f64, f64)> {
    let r = remainder_r(f, g, quad)?;
    Ok((r.l2_norm(), homog(g, 0.75) * homog(f, 1.75)))
}

pub fn check_r_bound(ens: &Ensemble, quad: &QuadSpec) -> Result<RatioReport> {
    let q = AlphaQuadrature::new(&ens.grid()?, quad)?;
    let sides = ens.map(|i| {
        let (f, g) = ens.pair(i)?;
        r_bound_sample(&f, &g, &q)
    })?;
    Ok(RatioReport::from_sides("r-bound", Some(*ens), sides))
}

/// `(‖[H, g₁] ∂ₓg₂‖, ‖g₁‖_{Ḣ¹} ‖g₂‖_{Ḣ^{1/2}})`, products dealiased.
pub fn hilbert_commutator_sample(g1: &Field, g2: &Field) -> Result<(f64, f64)> {
    g1.check_same_grid(g2)?;
    let d = spectral::derivative(g2, 1);
    let a = spectral::hilbert(&spectral::dealias(&g1.mul(&d)));
    let b = spectral::dealias(&g1.mul(&spectral::hilbert(&d)));
    Ok((a.sub(&b).l2_norm(), homog(g1, 1.0) * homog(g2, 0.5)))
}

pub fn check_hilbert_commutator(ens: &Ensemble) -> Result<RatioReport> {
    let sides = ens.map(|i| {
        let (g1, g2) = ens.pair(i)?;
        hilbert_commutator_sample(&g1, &g2)
    })?;
    Ok(RatioReport::from_sides(
        "hilbert-commutator",
        Some(*ens),
        sides,
    ))
}

fn big_f(x: f64) -> f64 {
    let x2 = x * x;
    x2 / (1.0 + x2)
}

/// `|x₂ + x₃ - 2x₁| + (x₂ - x₁)² + (x₃ - x₁)² - |2F(x₁) - F(x₂) - F(x₃)|`
/// with `F(x) = x²/(1+x²)`; the contraction lemma says it is never negative.
pub fn contraction_gap(x1: f64, x2: f64, x3: f64) -> f64 {
    let lhs = (2.0 * big_f(x1) - big_f(x2) - big_f(x3)).abs();
    let rhs = (x2 + x3 - 2.0 * x1).abs() + (x2 - x1).powi(2) + (x3 - x1).powi(2);
    rhs - lhs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionReport {
    pub samples: usize,
    pub range: f64,
    pub seed: u64,
    pub min_gap: f64,
    pub worst: [f64; 3],
}

const CONTRACTION_CHUNK: usize = 1 << 14;

/// Uniform triples in `[-range, range]³`, one ChaCha stream per chunk.
pub fn check_contraction(samples: usize, range: f64, seed: u64) -> Result<ContractionReport> {
    if !(range > 0.0 && range.is_finite()) || samples == 0 {
        return Err(invalid(
            "contraction check needs samples > 0 and a positive range",
        ));
    }
    let chunks = samples.div_ceil(CONTRACTION_CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let n = CONTRACTION_CHUNK.min(samples - c * CONTRACTION_CHUNK);
            let mut best = (f64::INFINITY, [0.0; 3]);
            for _ in 0..n {
                let x = [0; 3].map(|_| rng.random_range(-range..=range));
                let gap = contraction_gap(x[0], x[1], x[2]);
                if gap < best.0 {
                    best = (gap, x);
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            (f64::INFINITY, [0.0; 3]),
            |a, b| if b.0 < a.0 { b } else { a },
        );
    Ok(ContractionReport {
        samples,
        range,
        seed,
        min_gap: best.0,
        worst: best.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyReport {
    /// `∫₀^∞ (α⁻¹ ∫₀^α u)² dα`.
    pub lhs: f64,
    /// `4 ∫₀^∞ u²`.
    pub rhs: f64,
    /// `lhs / rhs`, at most 1 by Hardy's inequality; `None` for `u ≡ 0`.
    pub ratio: Option<f64>,
}

/// Substitution exponent `α = t^M` on the panel touching zero, which tames
/// integrable power singularities of `u` there.
const HARDY_SUBSTITUTION: i32 = 10;

/// Absolute accuracy proportional to the panel length keeps `α⁻¹ ∫₀^α u`
/// accurate for tiny α.
fn hardy_tolerance(width: f64) -> Tolerance {
    Tolerance {
        abs: 1e-14 * width,
        rel: 1e-11,
        max_panels: 20_000,
    }
}

fn integrate_panel(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    if a == 0.0 {
        let m = HARDY_SUBSTITUTION;
        let top = b.powf(1.0 / m as f64);
        return adaptive(
            |t| {
                let a = t.powi(m);
                if a == 0.0 {
                    0.0
                } else {
                    g(a) * m as f64 * t.powi(m - 1)
                }
            },
            &geometric_breaks_to_zero(top, 40),
            hardy_tolerance(b),
        );
    }
    adaptive(g, &[a, b], hardy_tolerance(b - a))
}

/// Both sides of Hardy's inequality for a non-negative `u` supported in
/// `[0, support]`, smooth between the given `breaks`. Beyond the support
/// `∫₀^α u` is constant, so that part of the left side is closed exactly.
pub fn check_hardy(
    u: &(dyn Fn(f64) -> f64 + Sync),
    support: f64,
    breaks: &[f64],
) -> Result<HardyReport> {
    if !(support > 0.0 && support.is_finite()) {
        return Err(invalid(format!(
            "support must be positive and finite, got {support}"
        )));
    }
    if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|b| !(*b > 0.0 && *b < support))
    {
        return Err(invalid("breaks must increase strictly inside (0, support)"));
    }
    let mut knots = vec![0.0];
    knots.extend_from_slice(breaks);
    knots.push(support);

    let panel_mass: Vec<f64> = knots
        .windows(2)
        .map(|w| integrate_panel(u, w[0], w[1]))
        .collect::<Result<_>>()?;
    let below: Vec<f64> = std::iter::once(0.0)
        .chain(panel_mass.iter().scan(0.0, |acc, m| {
            *acc += m;
            Some(*acc)
        }))
        .collect();
    let cumulative = |i: usize, alpha: f64| -> f64 {
        below[i] + integrate_panel(u, knots[i], alpha).expect("panel integral converges")
    };

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..knots.len() - 1 {
        let inner = |a: f64| {
            let c = cumulative(i, a) / a;
            c * c
        };
        lhs += integrate_panel(&inner, knots[i], knots[i + 1])?;
        rhs += integrate_panel(&|a| u(a) * u(a), knots[i], knots[i + 1])?;
    }
    let total = below[below.len() - 1];
    lhs += total * total / support;
    let rhs = 4.0 * rhs;
    Ok(HardyReport {
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
    })
}

pub struct HardyCase {
    pub name: &'static str,
    pub u: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: f64,
    pub breaks: Vec<f64>,
    /// Closed-form ratio, when one is known.
    pub exact: Option<f64>,
}

/// Test corpus of non-negative profiles. For `u = α^{-p}` on `(0, 1]` the
/// ratio is `1 / (2(1 - p))`, which tends to the sharp value 1 as `p → 1/2`.
pub fn hardy_corpus() -> Vec<HardyCase> {
    let power = |name, p: f64| HardyCase {
        name,
        u: Box::new(move |a: f64| a.powf(-p)),
        support: 1.0,
        breaks: vec![],
        exact: Some(0.5 / (1.0 - p)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let steps: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..2.0)).collect();
    vec![
        HardyCase {
            name: "step",
            u: Box::new(|_| 1.0),
            support: 1.0,
            breaks: vec![],
            exact: Some(0.5),
        },
        HardyCase {
            name: "ramp",
            u: Box::new(|a| a),
            support: 1.0,
            breaks: vec![],
            exact: Some(0.25),
        },
        power("power-0.4", 0.4),
        power("power-0.45", 0.45),
        HardyCase {
            name: "hat",
            u: Box::new(|a| 1.0 - (a - 1.0).abs()),
            support: 2.0,
            breaks: vec![1.0],
            exact: None,
        },
        HardyCase {
            name: "gaussian",
            u: Box::new(|a| (-a * a).exp()),
            support: 6.0,
            breaks: vec![1.0, 2.0, 3.0],
            exact: None,
        },
        HardyCase {
            name: "sine-squared",
            u: Box::new(|a| a.sin().powi(2)),
            support: 3.0 * std::f64::consts::PI,
            breaks: vec![std::f64::consts::PI, 2.0 * std::f64::consts::PI],
            exact: None,
        },
        HardyCase {
            name: "staircase",
            u: Box::new(move |a| steps[(a.floor() as usize).min(4)]),
            support: 5.0,
            breaks: vec![1.0, 2.0, 3.0, 4.0],
            exact: None,
        },
    ]
}
