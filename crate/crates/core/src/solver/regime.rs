//! Smallness regime, the data-adapted existence time, and the stability of
//! the difference of two solutions.

use serde::Serialize;

use super::{simulate, Constants, SimConfig};
use crate::error::{invalid, Result};
use crate::norms::{homogeneous_log_norm, sobolev_norm, weighted_norm};
use crate::weights::{tabulate_phi, Kappa, PhiSpec};
use crate::Field;

/// Default smallness constant `c₀`. A calibration choice: it admits
/// `0.01 cos x` on the default grid, whose smallness value is about 0.083.
pub const DEFAULT_C0: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Smallness {
    pub pass: bool,
    /// `‖f₀‖_{3/2,1/3} (‖f₀‖²_{L²} + 1)`.
    pub value: f64,
    /// `c₀ - value`.
    pub margin: f64,
    pub c0: f64,
}

/// `‖f₀‖_{3/2,1/3} (‖f₀‖²_{L²} + 1)` with the homogeneous log semi-norm.
pub fn smallness_value(f0: &Field) -> f64 {
    homogeneous_log_norm(f0, 1.5, 1.0 / 3.0) * (f0.l2_norm().powi(2) + 1.0)
}

pub fn smallness_check(f0: &Field, c0: f64) -> Result<Smallness> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(invalid(format!("c₀ must be positive, got {c0}")));
    }
    let value = smallness_value(f0);
    Ok(Smallness {
        pass: value <= c0,
        value,
        margin: c0 - value,
        c0,
    })
}

/// The amplitude `ε*` at which `ε f` stops passing the smallness check, by
/// bisection. `None` when every multiple passes (zero semi-norm).
pub fn smallness_crossing(f: &Field, c0: f64) -> Result<Option<f64>> {
    smallness_check(f, c0)?;
    if homogeneous_log_norm(f, 1.5, 1.0 / 3.0) == 0.0 {
        return Ok(None);
    }
    let value = |eps: f64| smallness_value(&f.scale(eps));
    let (mut lo, mut hi) = (0.0, 1.0);
    while value(hi) <= c0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if value(mid) <= c0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Log mesh for the supremum in the envelope, in units of `r / ϱ`.
const ENVELOPE_T_MIN: f64 = 1e-6;
const ENVELOPE_T_MAX: f64 = 1e12;
const ENVELOPE_PER_DECADE: usize = 40;

/// `E(ϱ, ‖f₀‖²) = sup_{r ≥ 0} { C₂ (√ϱ + ϱ) r / κ₀(r/ϱ)
///   - (C₁/2) r / (1 + ln(4 + r/ϱ)^{1/3} (ϱ + ‖f₀‖²)) }`,
/// the supremum taken over `r = 0` and the log mesh `r/ϱ ∈ [1e-6, 1e12]`.
pub fn envelope(rho: f64, l2_sq: f64, kappa: &Kappa, constants: &Constants) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let decades = (ENVELOPE_T_MAX / ENVELOPE_T_MIN).log10();
    let n = (decades * ENVELOPE_PER_DECADE as f64).round() as usize;
    let grow = constants.c2 * (rho.sqrt() + rho);
    let damp = 0.5 * constants.c1;
    (0..=n)
        .map(|i| {
            let t = ENVELOPE_T_MIN * 10f64.powf(decades * i as f64 / n as f64);
            let r = rho * t;
            grow * r / kappa.eval(t) - damp * r / (1.0 + (4.0 + t).ln().cbrt() * (rho + l2_sq))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceTime {
    /// `M₀ / E(2M₀, ‖f₀‖²)`; infinite when `M₀ = 0` or `E = 0`.
    pub t0: f64,
    /// `M₀ = ‖|D|^{3/2,φ₀} f₀‖²`.
    pub m0: f64,
    pub envelope: f64,
    /// Set when the envelope vanishes on the mesh although `M₀ > 0`.
    pub degenerate: bool,
}

/// Local existence time predicted by the a priori bound for the weight κ₀.
pub fn predicted_t0(f0: &Field, kappa: &Kappa, constants: &Constants) -> Result<ExistenceTime> {
    let spec = PhiSpec {
        lambda_max: (2.0 * f0.grid().nyquist()).max(10.0),
        ..PhiSpec::default()
    };
    let phi = tabulate_phi(kappa, &spec)?;
    let m0 = weighted_norm(f0, 1.5, &phi)?.powi(2);
    if m0 == 0.0 {
        return Ok(ExistenceTime {
            t0: f64::INFINITY,
            m0,
            envelope: 0.0,
            degenerate: false,
        });
    }
    let e = envelope(2.0 * m0, f0.l2_norm().powi(2), kappa, constants);
    if e <= 0.0 {
        return Ok(ExistenceTime {
            t0: f64::INFINITY,
            m0,
            envelope: e,
            degenerate: true,
        });
    }
    Ok(ExistenceTime {
        t0: m0 / e,
        m0,
        envelope: e,
        degenerate: false,
    })
}

/// `‖f‖_{2,1/3}`, the homogeneous log semi-norm of order 2.
fn norm_2_third(f: &Field) -> f64 {
    homogeneous_log_norm(f, 2.0, 1.0 / 3.0)
}

fn gronwall_integrand(f: &Field) -> f64 {
    let n = norm_2_third(f);
    n * n / (4.0 + n).ln().cbrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct GapTrace {
    pub t: Vec<f64>,
    /// `‖f₁ - f₂‖_{Ḣ^{1/2}}`.
    pub gap: Vec<f64>,
    /// `Σ_k ∫₀ᵗ ln(4 + ‖f_k‖_{2,1/3})^{-1/3} ‖f_k‖²_{2,1/3}`, trapezoidal.
    pub integral: Vec<f64>,
    pub gronwall_c: f64,
}

impl GapTrace {
    /// `exp(C · integral)` at every record.
    pub fn budget(&self) -> Vec<f64> {
        self.integral
            .iter()
            .map(|i| (self.gronwall_c * i).exp())
            .collect()
    }

    /// Largest `gap(t) / (gap(0) budget(t))`; zero when the data coincide.
    pub fn worst_budget_ratio(&self) -> f64 {
        let g0 = self.gap[0];
        if g0 == 0.0 {
            return 0.0;
        }
        self.gap
            .iter()
            .zip(self.budget())
            .map(|(g, b)| g / (g0 * b))
            .fold(0.0, f64::max)
    }

    /// Smallest `C` for which the budget holds at every record, when the
    /// integral is positive.
    pub fn calibrated_c(&self) -> f64 {
        let g0 = self.gap[0];
        self.gap
            .iter()
            .zip(&self.integral)
            .filter(|(_, i)| **i > 0.0 && g0 > 0.0)
            .map(|(g, i)| (g / g0).ln() / i)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs both data under the same configuration and tracks the `Ḣ^{1/2}` norm
/// of the difference.
pub fn two_solution_gap(
    f10: &Field,
    f20: &Field,
    cfg: &SimConfig,
    gronwall_c: f64,
) -> Result<GapTrace> {
    f10.check_same_grid(f20)?;
    let mut cfg = cfg.clone();
    cfg.keep_states = true;
    let (a, b) = rayon::join(|| simulate(f10, &cfg), || simulate(f20, &cfg));
    let (a, b) = (a?.into_result()?, b?.into_result()?);
    let t: Vec<f64> = a.records.iter().map(|r| r.t).collect();
    let gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| sobolev_norm(&x.sub(y), 0.5, true))
        .collect();
    let density: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| gronwall_integrand(x) + gronwall_integrand(y))
        .collect();
    let mut integral = vec![0.0; t.len()];
    for k in 1..t.len() {
        integral[k] = integral[k - 1] + 0.5 * (t[k] - t[k - 1]) * (density[k] + density[k - 1]);
    }
    Ok(GapTrace {
        t,
        gap,
        integral,
        gronwall_c,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::Grid;
    use crate::weights::data_adapted_kappa;

    #[test]
    fn zero_datum_passes_with_full_margin() {
        let g = Grid::with_len(64).unwrap();
        let s = smallness_check(&Field::zeros(g), DEFAULT_C0).unwrap();
        assert!(s.pass);
        assert_eq!(s.margin, DEFAULT_C0);
        assert!(smallness_check(&Field::zeros(g), 0.0).is_err());
    }

    #[test]
    fn default_c0_admits_small_cosine() {
        let g = Grid::with_len(256).unwrap();
        let f = Field::from_fn(g, |x| 0.01 * x.cos());
        let s = smallness_check(&f, DEFAULT_C0).unwrap();
        // ‖f‖² = 1e-4 · 16π, semi-norm² = ln(5)^{2/3} ‖f‖²
        let l2 = 1e-4 * 16.0 * PI;
        let want = (5f64.ln().powf(2.0 / 3.0) * l2).sqrt() * (l2 + 1.0);
        assert!((s.value - want).abs() < 1e-12);
        assert!(s.pass && s.value > 0.05);
    }

    #[test]
    fn bisection_matches_the_cubic() {
        // value(ε) = ε n (ε² m + 1); solve by Newton as the oracle
        let g = Grid::new(PI, 32).unwrap();
        let f = Field::from_fn(g, |x| x.cos() + 0.3 * (2.0 * x).sin());
        let n = homogeneous_log_norm(&f, 1.5, 1.0 / 3.0);
        let m = f.l2_norm().powi(2);
        let c0 = 0.7;
        let mut e: f64 = 1.0;
        for _ in 0..100 {
            e -= (e * n * (e * e * m + 1.0) - c0) / (n * (3.0 * e * e * m + 1.0));
        }
        let got = smallness_crossing(&f, c0).unwrap().unwrap();
        assert!((got - e).abs() < 1e-12, "{got} vs {e}");
        assert!(smallness_crossing(&Field::zeros(g), c0).unwrap().is_none());
    }

    #[test]
    fn existence_time_conventions() {
        let g = Grid::new(PI, 32).unwrap();
        let k = Kappa::power_log(1.0 / 3.0).unwrap();
        let t = predicted_t0(&Field::zeros(g), &k, &Constants::default()).unwrap();
        assert!(t.t0.is_infinite() && !t.degenerate);
    }

    #[test]
    fn envelope_increases_and_large_data_shorten_the_time() {
        let g = Grid::new(PI, 64).unwrap();
        let f = Field::from_fn(g, |x| 0.5 * x.cos() + 0.2 * (3.0 * x).sin());
        let k = data_adapted_kappa(&f).unwrap();
        let c = Constants::default();
        let l2 = f.l2_norm().powi(2);
        let mut prev = 0.0;
        for i in 0..60 {
            let rho = 1e-3 * 1.3f64.powi(i);
            let e = envelope(rho, l2, &k, &c);
            assert!(e >= prev, "rho={rho}: {e} < {prev}");
            prev = e;
        }
        let t1 = predicted_t0(&f, &k, &c).unwrap();
        let f2 = f.scale(2.0);
        let t2 = predicted_t0(&f2, &data_adapted_kappa(&f2).unwrap(), &c).unwrap();
        assert!(t1.t0.is_finite() && t2.t0 < t1.t0, "{t1:?} {t2:?}");
    }

    #[test]
    fn gap_of_identical_data_vanishes_and_is_symmetric() {
        let g = Grid::new(PI, 32).unwrap();
        let f1 = Field::from_fn(g, |x| 0.05 * x.cos());
        let f2 = Field::from_fn(g, |x| 0.05 * x.cos() + 1e-4 * (2.0 * x).sin());
        let cfg = SimConfig::new(g, 8.0, 0.5);
        let same = two_solution_gap(&f1, &f1, &cfg, 1.0).unwrap();
        assert!(same.gap.iter().all(|g| *g <= 1e-13));
        let ab = two_solution_gap(&f1, &f2, &cfg, 1.0).unwrap();
        let ba = two_solution_gap(&f2, &f1, &cfg, 1.0).unwrap();
        assert_eq!(ab.gap, ba.gap);
        assert!(ab.worst_budget_ratio() <= 1.0);
    }
}
