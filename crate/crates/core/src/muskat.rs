//! The Muskat nonlinearity and its paralinearization.
//!
//! With `Δ_α f = (f(x) - f(x-α))/α` and `F_α = (Δ_α f)² / (1 + (Δ_α f)²)`:
//!
//! * `T(f)g = -(1/π) ∫ (∂ₓΔ_α g) F_α dα`
//! * `V(f) = -(1/π) ∫ O_α / α dα`, `O_α = (F_α - F_{-α})/2`, `E_α = (F_α + F_{-α})/2`
//! * `R(f,g) = -(1/π) ∫ (∂ₓΔ_α g)(E_α - fₓ²/(1+fₓ²)) dα + (1/π) ∫ ∂ₓg(x-α) O_α / α dα`
//!
//! so that `T(f)g = fₓ²/(1+fₓ²) Λg + V ∂ₓg + R(f,g)` and the equation reads
//! `∂ₜf = (1/π) ∫ ∂ₓΔ_α f / (1 + (Δ_α f)²) dα = -Λf + T(f)f`.
//!
//! Every α-integral is a sum over symmetric node pairs `±α_i` of a composite
//! Gauss–Legendre rule on `(0, α_max]`. The pair integrands are analytic in α
//! (the apparent singularity at 0 is removable), so the rule converges
//! exponentially and never evaluates at α = 0. The only integrand that does
//! not decay past `α_max` is the linear kernel `∂ₓΔ_α g` (weight `α⁻¹`); its
//! far field is added exactly as the multiplier `Λ - Λ_quad`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::GaussLegendre;
use crate::spectral::{self, Grid, Symbol};
use crate::Field;

/// Panel layout of the α-quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSpec {
    /// Panels per grid spacing; doubling it doubles the node density.
    pub panels_per_spacing: usize,
    /// Gauss–Legendre nodes per panel.
    pub gauss_points: usize,
    /// Upper integration limit; `None` means the half-length `L`.
    pub alpha_max: Option<f64>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            panels_per_spacing: 1,
            gauss_points: 8,
            alpha_max: None,
        }
    }
}

impl QuadSpec {
    pub fn refined(&self) -> Self {
        Self {
            panels_per_spacing: 2 * self.panels_per_spacing,
            ..*self
        }
    }
}

/// Positive nodes and weights for `∫_{-α_max}^{α_max}`, used in `±α` pairs.
#[derive(Debug, Clone)]
pub struct AlphaQuadrature {
    grid: Grid,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    alpha_max: f64,
}

impl AlphaQuadrature {
    pub fn new(grid: &Grid, spec: &QuadSpec) -> Result<Self> {
        let alpha_max = spec.alpha_max.unwrap_or(grid.half_length());
        if !(alpha_max > 0.0 && alpha_max <= grid.half_length() * (1.0 + 1e-12)) {
            return Err(invalid(format!(
                "α_max must lie in (0, L], got {alpha_max}"
            )));
        }
        if spec.panels_per_spacing == 0 || spec.gauss_points == 0 {
            return Err(invalid(
                "α-quadrature needs at least one panel per spacing and one node",
            ));
        }
        let width = grid.spacing() / spec.panels_per_spacing as f64;
        let panels = (alpha_max / width).ceil() as usize;
        let w = alpha_max / panels as f64;
        let rule = GaussLegendre::new(spec.gauss_points);
        let (nodes, weights) = (0..panels)
            .flat_map(|i| {
                rule.on(i as f64 * w, (i + 1) as f64 * w)
                    .collect::<Vec<_>>()
            })
            .unzip();
        Ok(Self {
            grid: *grid,
            nodes,
            weights,
            alpha_max,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Symbol of `Λ_quad g = -(1/π) Σ_i w_i (∂ₓΔ_{α_i} g + ∂ₓΔ_{-α_i} g)`.
    pub fn lambda_symbol(&self, xi: f64) -> f64 {
        let k = xi.abs();
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&a, &w)| w * (a * k).sin() / a)
            .sum();
        2.0 / PI * k * s
    }

    /// `(Λ - Λ_quad) g`, the far field `|α| > α_max` of the linear kernel.
    pub fn far_field(&self, g: &Field) -> Field {
        let me = self.clone();
        let sym = Symbol::radial(move |k| k - me.lambda_symbol(k), true);
        spectral::apply_multiplier(g, &sym).expect("radial symbol is hermitian")
    }
}

/// Nodes per parallel block; the block partial sums are combined in a fixed
/// order, so results do not depend on the thread count.
const BLOCK: usize = 16;

struct Pair<'a> {
    alpha: f64,
    weight: f64,
    base: &'a [&'a [f64]],
    /// `field(x - α)` for each input field.
    minus: Vec<Vec<f64>>,
    /// `field(x + α)` for each input field.
    plus: Vec<Vec<f64>>,
}

/// Sums `kernel` over all node pairs into `outputs` accumulators.
fn pair_sum(
    quad: &AlphaQuadrature,
    fields: &[&Field],
    outputs: usize,
    kernel: impl Fn(&Pair, &mut [Vec<f64>]) + Sync,
) -> Vec<Vec<f64>> {
    let n = quad.grid.len();
    let base: Vec<&[f64]> = fields.iter().map(|f| f.samples()).collect();
    let idx: Vec<usize> = (0..quad.len()).collect();
    let partials: Vec<Vec<Vec<f64>>> = idx
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = vec![vec![0.0; n]; outputs];
            for &i in chunk {
                let alpha = quad.nodes[i];
                let pair = Pair {
                    alpha,
                    weight: quad.weights[i],
                    base: &base,
                    minus: fields
                        .iter()
                        .map(|f| spectral::shift(f, alpha).into_samples())
                        .collect(),
                    plus: fields
                        .iter()
                        .map(|f| spectral::shift(f, -alpha).into_samples())
                        .collect(),
                };
                kernel(&pair, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![vec![0.0; n]; outputs];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
    }
    total
}

#[inline]
fn big_f(d: f64) -> f64 {
    let d2 = d * d;
    d2 / (1.0 + d2)
}

fn to_field(grid: &Grid, v: Vec<f64>) -> Field {
    Field::new(*grid, v).expect("length matches grid")
}

/// `T(f)g`.
pub fn apply_t(f: &Field, g: &Field, quad: &AlphaQuadrature) -> Result<Field> {
    f.check_same_grid(g)?;
    let gx = spectral::derivative(g, 1);
    let out = pair_sum(quad, &[f, &gx], 1, |p, acc| {
        let (a, w) = (p.alpha, p.weight);
        let (f0, g0) = (p.base[0], p.base[1]);
        let (fm, gm, fp, gp) = (&p.minus[0], &p.minus[1], &p.plus[0], &p.plus[1]);
        for i in 0..f0.len() {
            let dplus = (f0[i] - fm[i]) / a;
            let dminus = (fp[i] - f0[i]) / a;
            let gplus = (g0[i] - gm[i]) / a;
            let gminus = (gp[i] - g0[i]) / a;
            acc[0][i] += w * (gplus * big_f(dplus) + gminus * big_f(dminus));
        }
    });
    Ok(to_field(f.grid(), out.into_iter().next().unwrap()).scale(-1.0 / PI))
}

/// `V(f)`.
pub fn velocity_v(f: &Field, quad: &AlphaQuadrature) -> Field {
    let out = pair_sum(quad, &[f], 1, |p, acc| {
        let (a, w) = (p.alpha, p.weight);
        let (f0, fm, fp) = (p.base[0], &p.minus[0], &p.plus[0]);
        for i in 0..f0.len() {
            let odd = 0.5 * (big_f((f0[i] - fm[i]) / a) - big_f((fp[i] - f0[i]) / a));
            acc[0][i] += w * odd / a;
        }
    });
    to_field(f.grid(), out.into_iter().next().unwrap()).scale(-2.0 / PI)
}

/// `fₓ² / (1 + fₓ²)`.
pub fn slope_coefficient(f: &Field) -> Field {
    spectral::derivative(f, 1).map(big_f)
}

/// Deliberate sign errors used to confirm that the decomposition check can
/// fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of `V`.
    VSign,
    /// Swap the roles of the even and odd parts of `F_α`.
    EvenOddSplit,
}

/// The three paralinearization pieces of `T(f)g`, sharing one pass over the
/// α-nodes.
fn pieces(f: &Field, g: &Field, quad: &AlphaQuadrature, fault: Fault) -> Result<[Field; 3]> {
    f.check_same_grid(g)?;
    let grid = *f.grid();
    let gx = spectral::derivative(g, 1);
    let c = slope_coefficient(f);
    let cs = c.samples().to_vec();
    let out = pair_sum(quad, &[f, &gx], 3, |p, acc| {
        let (a, w) = (p.alpha, p.weight);
        let (f0, g0) = (p.base[0], p.base[1]);
        let (fm, gm, fp, gp) = (&p.minus[0], &p.minus[1], &p.plus[0], &p.plus[1]);
        for i in 0..f0.len() {
            let fplus = big_f((f0[i] - fm[i]) / a);
            let fminus = big_f((fp[i] - f0[i]) / a);
            let (mut even, mut odd) = (0.5 * (fplus + fminus), 0.5 * (fplus - fminus));
            if fault == Fault::EvenOddSplit {
                std::mem::swap(&mut even, &mut odd);
            }
            let dg = (g0[i] - gm[i]) / a + (gp[i] - g0[i]) / a;
            acc[0][i] += w * odd / a;
            acc[1][i] += w * dg * (even - cs[i]);
            acc[2][i] += w * (gm[i] + gp[i]) * odd / a;
        }
    });
    let mut it = out.into_iter();
    let mut v = to_field(&grid, it.next().unwrap()).scale(-2.0 / PI);
    if fault == Fault::VSign {
        v = v.scale(-1.0);
    }
    let r1 = to_field(&grid, it.next().unwrap()).scale(-1.0 / PI);
    let r2 = to_field(&grid, it.next().unwrap()).scale(1.0 / PI);
    let r = r1.add(&r2).sub(&c.mul(&quad.far_field(g)));
    Ok([c, v, r])
}

/// `R(f, g)`.
pub fn remainder_r(f: &Field, g: &Field, quad: &AlphaQuadrature) -> Result<Field> {
    let [_, _, r] = pieces(f, g, quad, Fault::None)?;
    Ok(r)
}

/// Residual of `T(f)g = fₓ²/(1+fₓ²) Λg + V ∂ₓg + R` with all pieces on the
/// same α-nodes.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub residual: f64,
    /// `‖T‖ + ‖cΛg‖ + ‖V∂ₓg‖ + ‖R‖`.
    pub scale: f64,
    pub t_norm: f64,
    pub principal_norm: f64,
    pub transport_norm: f64,
    pub remainder_norm: f64,
}

impl DecompositionReport {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.residual / self.scale
        }
    }
}

pub fn check_decomposition(
    f: &Field,
    g: &Field,
    quad: &AlphaQuadrature,
    fault: Fault,
) -> Result<DecompositionReport> {
    let t = apply_t(f, g, quad)?;
    let [c, v, r] = pieces(f, g, quad, fault)?;
    let principal = c.mul(&spectral::lambda(g));
    let transport = v.mul(&spectral::derivative(g, 1));
    let residual = t.sub(&principal).sub(&transport).sub(&r).l2_norm();
    let (tn, pn, vn, rn) = (
        t.l2_norm(),
        principal.l2_norm(),
        transport.l2_norm(),
        r.l2_norm(),
    );
    Ok(DecompositionReport {
        residual,
        scale: tn + pn + vn + rn,
        t_norm: tn,
        principal_norm: pn,
        transport_norm: vn,
        remainder_norm: rn,
    })
}

/// `(1/π) ∫ ∂ₓΔ_α f / (1 + (Δ_α f)²) dα`, assembled pointwise node by node.
pub fn rhs_direct(f: &Field, quad: &AlphaQuadrature) -> Field {
    let fx = spectral::derivative(f, 1);
    let out = pair_sum(quad, &[f, &fx], 1, |p, acc| {
        let (a, w) = (p.alpha, p.weight);
        let (f0, g0) = (p.base[0], p.base[1]);
        let (fm, gm, fp, gp) = (&p.minus[0], &p.minus[1], &p.plus[0], &p.plus[1]);
        for i in 0..f0.len() {
            let dplus = (f0[i] - fm[i]) / a;
            let dminus = (fp[i] - f0[i]) / a;
            let gplus = (g0[i] - gm[i]) / a;
            let gminus = (gp[i] - g0[i]) / a;
            acc[0][i] += w * (gplus / (1.0 + dplus * dplus) + gminus / (1.0 + dminus * dminus));
        }
    });
    to_field(f.grid(), out.into_iter().next().unwrap())
        .scale(1.0 / PI)
        .sub(&quad.far_field(f))
}

/// `-Λf + T(f)f`.
pub fn rhs_split(f: &Field, quad: &AlphaQuadrature) -> Result<Field> {
    Ok(apply_t(f, f, quad)?.sub(&spectral::lambda(f)))
}

/// `∬ ln √(1 + (Δ_α f)²) dx dα` on the α-nodes.
pub fn lyapunov(f: &Field, quad: &AlphaQuadrature) -> f64 {
    let out = pair_sum(quad, &[f], 1, |p, acc| {
        let (a, w) = (p.alpha, p.weight);
        let (f0, fm, fp) = (p.base[0], &p.minus[0], &p.plus[0]);
        for i in 0..f0.len() {
            let dplus = (f0[i] - fm[i]) / a;
            let dminus = (fp[i] - f0[i]) / a;
            acc[0][i] += w * 0.5 * ((dplus * dplus).ln_1p() + (dminus * dminus).ln_1p());
        }
    });
    out[0].iter().sum::<f64>() * f.grid().spacing()
}
