//! Sobolev, logarithmic Sobolev and φ-weighted norms computed spectrally, and
//! the finite-difference routes (Gagliardo, Triebel–Lizorkin, Besov) that
//! realise the same quantities from increments `δ_h^m f`.
//!
//! All norms share the Parseval normalisation: the homogeneous norm of order
//! zero is the L² norm over one period. The finite-difference integrals run
//! over an h-mesh `[h_min, h_max]`; outside it they are closed by the leading
//! small-h term (`δ_h^m f ≈ h^m ∂^m f`) and by the period average of
//! `|δ_h^m f|^q` at large h.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::quad::{adaptive, geometric_breaks_to_zero, GaussLegendre, Tolerance};
use crate::spectral::{self, Grid, Symbol};
use crate::weights::{Kappa, Phi};
use crate::Field;

pub fn sobolev_norm(f: &Field, sigma: f64, homogeneous: bool) -> f64 {
    if homogeneous {
        f.weighted_energy(|k| if k == 0.0 { 0.0 } else { k.powf(2.0 * sigma) })
            .sqrt()
    } else {
        f.weighted_energy(|k| (1.0 + k * k).powf(sigma)).sqrt()
    }
}

/// Norm with weight `(1 + |ξ|²)^s (ln(4 + |ξ|))^{2a}`.
pub fn log_sobolev_norm(f: &Field, s: f64, a: f64) -> f64 {
    f.weighted_energy(|k| (1.0 + k * k).powf(s) * (4.0 + k).ln().powf(2.0 * a))
        .sqrt()
}

/// Homogeneous variant with weight `|ξ|^{2s} (ln(4 + |ξ|))^{2a}`.
pub fn homogeneous_log_norm(f: &Field, s: f64, a: f64) -> f64 {
    f.weighted_energy(|k| {
        if k == 0.0 {
            0.0
        } else {
            k.powf(2.0 * s) * (4.0 + k).ln().powf(2.0 * a)
        }
    })
    .sqrt()
}

/// `‖|D|^{s,φ^p} f‖`, the L² norm of the multiplier `|ξ|^s φ(|ξ|)^p`.
pub fn weighted_norm_pow(f: &Field, s: f64, phi: &Phi, power: f64) -> Result<f64> {
    let e = f.try_weighted_energy(|k| {
        if k == 0.0 {
            return Ok(0.0);
        }
        Ok(k.powf(2.0 * s) * phi.eval(k)?.powf(2.0 * power))
    })?;
    Ok(e.sqrt())
}

/// `‖|D|^{s,φ} f‖`.
pub fn weighted_norm(f: &Field, s: f64, phi: &Phi) -> Result<f64> {
    weighted_norm_pow(f, s, phi, 1.0)
}

/// The field `|D|^{s,φ^p} f`.
pub fn weighted_operator(f: &Field, s: f64, phi: &Phi, power: f64) -> Result<Field> {
    let (_, hi) = phi.range();
    let top = f.grid().nyquist();
    if top > hi {
        return Err(crate::Error::OutOfRange {
            what: "λ",
            value: top,
            lo: 0.0,
            hi,
        });
    }
    let phi = phi.clone();
    let sym = Symbol::radial(
        move |k| k.powf(s) * phi.eval(k).expect("range checked").powf(power),
        true,
    );
    spectral::apply_multiplier(f, &sym)
}

/// `c(s) = ∫_ℝ (1 - cos h) |h|^{-1-2s} dh` for `0 < s < 1`.
pub fn c_of_s(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("c(s) needs 0 < s < 1, got {s}")));
    }
    // ∫₀¹ by the power series of 1 - cos h
    let mut near = 0.0;
    let mut fact = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        fact *= (2.0 * kf - 1.0) * (2.0 * kf);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        near += sign / (fact * (2.0 * kf - 2.0 * s));
    }
    // ∫₁^∞ h^{-1-2s} dh minus the oscillatory part, closed at A = 2πK
    const PERIODS: usize = 64;
    let upper = 2.0 * PI * PERIODS as f64;
    let mut breaks = vec![1.0];
    breaks.extend((1..=2 * PERIODS).map(|i| PI * i as f64));
    let p = 1.0 + 2.0 * s;
    let osc = adaptive(
        |h| h.cos() * h.powf(-p),
        &breaks,
        Tolerance {
            abs: 1e-15,
            rel: 1e-14,
            max_panels: 20_000,
        },
    )?;
    let d1 = -p * upper.powf(-p - 1.0);
    let d3 = -p * (p + 1.0) * (p + 2.0) * upper.powf(-p - 3.0);
    let osc_tail = -d1 + d3;
    Ok(2.0 * (near + 1.0 / (2.0 * s) - (osc + osc_tail)))
}

/// Quadrature mesh in the increment variable h: geometric panels on
/// `[h_min, h_split]`, uniform panels on `[h_split, h_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HMesh {
    pub h_min: f64,
    pub h_split: f64,
    pub h_max: f64,
    /// Quadrature nodes per decade on the geometric part.
    pub nodes_per_decade: usize,
    /// Uniform panels per grid spacing on the outer part.
    pub panels_per_spacing: usize,
    pub spacing: f64,
}

const H_MESH_GAUSS: usize = 4;

impl HMesh {
    /// `[spacing/4, 4L]`, 32 nodes per decade, one panel per spacing.
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            h_min: grid.spacing() / 4.0,
            h_split: grid.spacing(),
            h_max: 4.0 * grid.half_length(),
            nodes_per_decade: 32,
            panels_per_spacing: 1,
            spacing: grid.spacing(),
        }
    }

    /// Same range with twice the node density.
    pub fn refined(&self) -> Self {
        Self {
            nodes_per_decade: 2 * self.nodes_per_decade,
            panels_per_spacing: 2 * self.panels_per_spacing,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.h_min > 0.0
            && self.h_split >= self.h_min
            && self.h_max > self.h_split
            && self.nodes_per_decade >= H_MESH_GAUSS
            && self.panels_per_spacing >= 1
            && self.spacing > 0.0;
        if !ok {
            return Err(invalid(format!("malformed h-mesh {self:?}")));
        }
        Ok(())
    }

    /// Positive quadrature nodes and weights on `[h_min, h_max.min(cap)]`.
    fn nodes(&self, cap: f64) -> Vec<(f64, f64)> {
        let rule = GaussLegendre::new(H_MESH_GAUSS);
        let top = self.h_max.min(cap);
        let split = self.h_split.min(top);
        let mut out = Vec::new();
        let decades = (split / self.h_min).log10();
        if decades > 0.0 {
            let panels =
                ((decades * self.nodes_per_decade as f64) / H_MESH_GAUSS as f64).ceil() as usize;
            let ratio = (split / self.h_min).powf(1.0 / panels as f64);
            let mut a = self.h_min;
            for i in 0..panels {
                let b = if i + 1 == panels { split } else { a * ratio };
                out.extend(rule.on(a, b));
                a = b;
            }
        }
        if top > split {
            let width = self.spacing / self.panels_per_spacing as f64;
            let panels = ((top - split) / width).ceil() as usize;
            let w = (top - split) / panels as f64;
            for i in 0..panels {
                out.extend(rule.on(split + i as f64 * w, split + (i + 1) as f64 * w));
            }
        }
        out
    }
}

/// Second-difference Gagliardo semi-norm
/// `(∬ |2g(x) - g(x+h) - g(x-h)|² (|h|^{-s} κ(1/|h|))² dx dh/|h|)^{1/2}`,
/// `0 < s < 2`; for `s = 0` the weight becomes
/// `1_{|h|<1/2} (ln(4 + h⁻²))^{2a-1}` with `a` the exponent of a power-log κ.
/// The x-integral is exact via Parseval at every h.
pub fn gagliardo_seminorm(f: &Field, s: f64, kappa: &Kappa, mesh: &HMesh) -> Result<f64> {
    mesh.validate()?;
    let weight: Box<dyn Fn(f64) -> f64> = if s == 0.0 {
        let a = match kappa {
            Kappa::PowerLog { a } => *a,
            _ => return Err(invalid("the s = 0 variant needs a power-log weight")),
        };
        Box::new(move |h: f64| (4.0 + 1.0 / (h * h)).ln().powf(2.0 * a - 1.0) / h)
    } else if s > 0.0 && s < 2.0 {
        let k = kappa.clone();
        Box::new(move |h: f64| (h.powf(-s) * k.eval(1.0 / h)).powi(2) / h)
    } else {
        return Err(invalid(format!(
            "Gagliardo semi-norm needs s = 0 or 0 < s < 2, got {s}"
        )));
    };
    let cap = if s == 0.0 { 0.5 } else { f64::INFINITY };

    let grid = *f.grid();
    let modes: Vec<(f64, f64)> = f
        .spectrum()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| {
            (
                grid.wavenumber(j),
                grid.multiplicity(j) * grid.period() * c.norm_sqr(),
            )
        })
        .filter(|m| m.1 > 0.0)
        .collect();
    let energy_at = |h: f64| -> f64 {
        modes
            .iter()
            .map(|&(k, e)| e * (2.0 - 2.0 * (k * h).cos()).powi(2))
            .sum()
    };

    let mut total: f64 = mesh
        .nodes(cap)
        .iter()
        .map(|&(h, w)| w * energy_at(h) * weight(h))
        .sum();

    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-10,
        max_panels: 4000,
    };
    // small h: |2g - g(·+h) - g(·-h)|² ≈ h⁴ |g''|²
    let g2: f64 = modes.iter().map(|&(k, e)| e * k.powi(4)).sum();
    let near = adaptive(
        |h| if h == 0.0 { 0.0 } else { h.powi(4) * weight(h) },
        &geometric_breaks_to_zero(mesh.h_min, 80),
        tol,
    )?;
    total += g2 * near;
    // large h: the period mean of (2 - 2cos kh)² is 6
    if s > 0.0 {
        let mean: f64 = modes.iter().map(|&(_, e)| 6.0 * e).sum();
        let k = kappa.clone();
        let far = adaptive(
            |u| {
                if u == 0.0 {
                    0.0
                } else {
                    u.powf(2.0 * s - 1.0) * k.eval(u).powi(2)
                }
            },
            &geometric_breaks_to_zero(1.0 / mesh.h_max, 80),
            tol,
        )?;
        total += mean * far;
    }
    // both signs of h
    Ok((2.0 * total).sqrt())
}

/// Parameters of the finite-difference Triebel–Lizorkin and Besov norms.
#[derive(Debug, Clone, Copy)]
pub struct FdParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    /// Difference order `m > s`.
    pub m: u32,
    pub mesh: HMesh,
}

impl FdParams {
    fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if !(self.p >= 1.0 && self.p.is_finite() && self.q >= 1.0 && self.q.is_finite()) {
            return Err(invalid(format!(
                "need finite p, q >= 1, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if !(self.s > 0.0 && self.s < self.m as f64) {
            return Err(invalid(format!(
                "need 0 < s < m, got s = {}, m = {}",
                self.s, self.m
            )));
        }
        Ok(())
    }
}

/// Increments `δ_{±h}^m f` on the grid at every mesh node, with weights.
struct Increments {
    /// `(h, weight, δ_h^m f, δ_{-h}^m f)`.
    nodes: Vec<(f64, f64, Vec<f64>, Vec<f64>)>,
}

fn increments(f: &Field, prm: &FdParams) -> Result<Increments> {
    let nodes = prm
        .mesh
        .nodes(f64::INFINITY)
        .into_iter()
        .map(|(h, w)| {
            let plus = spectral::finite_difference(f, h, prm.m)?.into_samples();
            let minus = spectral::finite_difference(f, -h, prm.m)?.into_samples();
            Ok((h, w, plus, minus))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Increments { nodes })
}

/// Period averages over `h ∈ {j·dx}` of `|δ_h^m f(x_i)|^q`, per grid point.
fn periodic_mean_pow(f: &Field, m: u32, q: f64) -> Vec<f64> {
    let n = f.grid().len();
    let v = f.samples();
    let binom: Vec<f64> = (0..=m).map(|k| binomial(m, k)).collect();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                let mut d = 0.0;
                for (k, b) in binom.iter().enumerate() {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    d += sign * b * v[(i + n * (k + 1) - (k * j) % n) % n];
                }
                acc += d.abs().powf(q);
            }
            acc / n as f64
        })
        .collect()
}

fn binomial(m: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// `(∫ (∫ |δ_h^m f(x)|^q |h|^{-1-qs} dh)^{p/q} dx)^{1/p}`.
pub fn triebel_lizorkin_norm(f: &Field, prm: &FdParams) -> Result<f64> {
    prm.validate()?;
    let FdParams { s, p, q, m, mesh } = *prm;
    let n = f.grid().len();
    let inc = increments(f, prm)?;
    let mut inner = vec![0.0; n];
    for (h, w, plus, minus) in &inc.nodes {
        let wt = w * h.powf(-1.0 - q * s);
        for i in 0..n {
            inner[i] += wt * (plus[i].abs().powf(q) + minus[i].abs().powf(q));
        }
    }
    let dm = spectral::derivative(f, m);
    let small = 2.0 * mesh.h_min.powf(q * (m as f64 - s)) / (q * (m as f64 - s));
    let mean = periodic_mean_pow(f, m, q);
    let large = 2.0 * mesh.h_max.powf(-q * s) / (q * s);
    let dx = f.grid().spacing();
    let total: f64 = (0..n)
        .map(|i| {
            let v = inner[i] + small * dm.samples()[i].abs().powf(q) + large * mean[i];
            v.powf(p / q)
        })
        .sum::<f64>()
        * dx;
    Ok(total.powf(1.0 / p))
}

/// `(∫ (∫ |δ_h^m f(x)|^p dx)^{q/p} |h|^{-1-qs} dh)^{1/q}`.
pub fn besov_norm(f: &Field, prm: &FdParams) -> Result<f64> {
    prm.validate()?;
    let FdParams { s, p, q, m, mesh } = *prm;
    let dx = f.grid().spacing();
    let lp = |v: &[f64]| (v.iter().map(|x| x.abs().powf(p)).sum::<f64>() * dx).powf(q / p);
    let inc = increments(f, prm)?;
    let mut total = 0.0;
    for (h, w, plus, minus) in &inc.nodes {
        total += w * h.powf(-1.0 - q * s) * (lp(plus) + lp(minus));
    }
    let dm = spectral::derivative(f, m);
    total += 2.0 * lp(dm.samples()) * mesh.h_min.powf(q * (m as f64 - s)) / (q * (m as f64 - s));
    // period average over h of ‖δ_h^m f‖_p^q
    let n = f.grid().len();
    let mut mean = 0.0;
    let v = f.samples();
    for j in 0..n {
        let d: Vec<f64> = (0..n)
            .map(|i| {
                (0..=m)
                    .map(|k| {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sign * binomial(m, k)
                            * v[(i + n * (k as usize + 1) - (k as usize * j) % n) % n]
                    })
                    .sum()
            })
            .collect();
        mean += lp(&d);
    }
    mean /= n as f64;
    total += 2.0 * mean * mesh.h_max.powf(-q * s) / (q * s);
    Ok(total.powf(1.0 / q))
}

/// A norm together with everything needed to evaluate it.
#[derive(Debug, Clone)]
pub enum NormSpec {
    Sobolev { sigma: f64, homogeneous: bool },
    LogSobolev { s: f64, a: f64 },
    Weighted { s: f64, phi: Arc<Phi>, power: f64 },
    Gagliardo { s: f64, kappa: Kappa, mesh: HMesh },
    TriebelLizorkin(FdParams),
    Besov(FdParams),
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NormSpec::Sobolev { sigma, .. } if !sigma.is_finite() => {
                Err(invalid("σ must be finite"))
            }
            NormSpec::LogSobolev { s, a } if !(s.is_finite() && a.is_finite()) => {
                Err(invalid("s and a must be finite"))
            }
            NormSpec::Weighted { s, power, .. } if !(s.is_finite() && power.is_finite()) => {
                Err(invalid("s and the φ power must be finite"))
            }
            NormSpec::Gagliardo { s, mesh, .. } => {
                mesh.validate()?;
                if *s == 0.0 || (*s > 0.0 && *s < 2.0) {
                    Ok(())
                } else {
                    Err(invalid(format!(
                        "Gagliardo order {s} outside {{0}} ∪ (0, 2)"
                    )))
                }
            }
            NormSpec::TriebelLizorkin(p) | NormSpec::Besov(p) => p.validate(),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, f: &Field) -> Result<f64> {
        self.validate()?;
        match self {
            NormSpec::Sobolev { sigma, homogeneous } => Ok(sobolev_norm(f, *sigma, *homogeneous)),
            NormSpec::LogSobolev { s, a } => Ok(log_sobolev_norm(f, *s, *a)),
            NormSpec::Weighted { s, phi, power } => weighted_norm_pow(f, *s, phi, *power),
            NormSpec::Gagliardo { s, kappa, mesh } => gagliardo_seminorm(f, *s, kappa, mesh),
            NormSpec::TriebelLizorkin(p) => triebel_lizorkin_norm(f, p),
            NormSpec::Besov(p) => besov_norm(f, p),
        }
    }
}

/// Sobolev norm in the unitary-transform normalisation
/// `‖u‖² = (2π)⁻¹ ∫ |ξ|^{2s} |û|² dξ`, `û = (2π)^{-1/2} ∫ e^{-ixξ} u`, in which
/// `‖u‖²_{F^s_{2,2}} = 4π c(s) ‖u‖²_{Ḣ^s}` holds. It is the Parseval norm
/// divided by `√(2π)`.
pub fn sobolev_norm_unitary(f: &Field, s: f64) -> f64 {
    sobolev_norm(f, s, true) / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{tabulate_phi, PhiSpec};

    fn grid() -> Grid {
        Grid::new(PI, 64).unwrap()
    }

    #[test]
    fn sobolev_single_mode() {
        let f = Field::from_fn(grid(), |x| (3.0 * x).cos());
        // ‖cos 3x‖² = π on [-π, π)
        let h1 = sobolev_norm(&f, 1.0, true);
        assert!((h1 - 3.0 * PI.sqrt()).abs() < 1e-12);
        let l2 = sobolev_norm(&f, 0.0, true);
        assert!((l2 - f.l2_norm()).abs() < 1e-13);
        let inh = sobolev_norm(&f, 1.0, false);
        assert!((inh - (10.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_norm_ignores_the_mean() {
        let f = Field::from_fn(grid(), |x| 5.0 + x.sin());
        assert!((sobolev_norm(&f, 0.0, true) - PI.sqrt()).abs() < 1e-12);
        assert!(
            (homogeneous_log_norm(&f, 1.5, 1.0 / 3.0) - PI.sqrt() * 5f64.ln().cbrt()).abs() < 1e-12
        );
    }

    #[test]
    fn c_of_s_closed_form() {
        assert!((c_of_s(0.5).unwrap() - PI).abs() < 1e-10);
        for s in [0.1, 0.25, 0.75, 0.95] {
            let closed = -2.0 * statrs::function::gamma::gamma(-2.0 * s) * (PI * s).cos();
            let got = c_of_s(s).unwrap();
            assert!(
                (got - closed).abs() < 1e-9 * closed,
                "s={s}: {got} vs {closed}"
            );
        }
        assert!(c_of_s(1.0).is_err());
    }

    #[test]
    fn triebel_lizorkin_single_mode_matches_c_of_s() {
        // per mode ∫|1 - e^{-ihk}|² |h|^{-1-2s} dh = 2 c(s) |k|^{2s}
        let f = Field::from_fn(grid(), |x| (2.0 * x).sin());
        for s in [0.25, 0.5, 0.75] {
            let prm = FdParams {
                s,
                p: 2.0,
                q: 2.0,
                m: 1,
                mesh: HMesh::for_grid(&grid()),
            };
            let fd = triebel_lizorkin_norm(&f, &prm).unwrap().powi(2);
            let want = 2.0 * c_of_s(s).unwrap() * sobolev_norm(&f, s, true).powi(2);
            assert!((fd / want - 1.0).abs() < 5e-3, "s={s}: {fd} vs {want}");
            let b = besov_norm(&f, &prm).unwrap().powi(2);
            assert!((b / fd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gagliardo_with_unit_weight_is_a_fractional_sobolev_norm() {
        // (2 - 2cos u)² = 6 - 8cos u + 2cos 2u, so per mode the h-integral is
        // (8 - 2^{1+2s}) c(s) |ξ|^{2s}
        let s = 0.75;
        let f = Field::from_fn(grid(), |x| (3.0 * x).cos() + 0.5 * (7.0 * x).sin());
        let k = Kappa::Constant { value: 1.0 };
        let g = gagliardo_seminorm(&f, s, &k, &HMesh::for_grid(&grid()))
            .unwrap()
            .powi(2);
        let want = (8.0 - 2f64.powf(1.0 + 2.0 * s))
            * c_of_s(s).unwrap()
            * sobolev_norm(&f, s, true).powi(2);
        assert!((g / want - 1.0).abs() < 2e-3, "{g} vs {want}");
    }

    #[test]
    fn weighted_norm_single_mode() {
        let k = Kappa::power_log(1.0 / 3.0).unwrap();
        let phi = tabulate_phi(
            &k,
            &PhiSpec {
                lambda_max: 1e3,
                per_decade: 16,
                ..Default::default()
            },
        )
        .unwrap();
        let f = Field::from_fn(grid(), |x| (4.0 * x).cos());
        let w = weighted_norm(&f, 1.5, &phi).unwrap();
        let want = 8.0 * phi.eval(4.0).unwrap() * PI.sqrt();
        assert!((w - want).abs() < 1e-12 * want);
        let op = weighted_operator(&f, 1.5, &phi, 1.0).unwrap();
        assert!((op.l2_norm() - want).abs() < 1e-11 * want);
    }

    #[test]
    fn fd_parameters_are_validated() {
        let f = Field::from_fn(grid(), |x| x.sin());
        let mesh = HMesh::for_grid(&grid());
        let bad = FdParams {
            s: 1.5,
            p: 2.0,
            q: 2.0,
            m: 1,
            mesh,
        };
        assert!(triebel_lizorkin_norm(&f, &bad).is_err());
        let bad_p = FdParams {
            s: 0.5,
            p: 0.5,
            q: 2.0,
            m: 1,
            mesh,
        };
        assert!(besov_norm(&f, &bad_p).is_err());
        let k = Kappa::power_log(0.5).unwrap();
        assert!(gagliardo_seminorm(&f, 2.5, &k, &mesh).is_err());
    }
}
