//! Interpolation bounds in terms of the monitors `A`, `B`, `μ`, and the
//! per-step energy inequality reconstructed from a trace.

use serde::Serialize;

use super::{Ensemble, RatioReport, Sample};
use crate::error::{invalid, Result};
use crate::norms::{sobolev_norm, weighted_norm, weighted_norm_pow, weighted_operator};
use crate::solver::{EnergyTrace, SimConfig};
use crate::spectral;
use crate::weights::{Kappa, Phi};
use crate::Field;

use super::estimates::lab_phi;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationRecord {
    pub s: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub mu: f64,
    /// `‖f‖_{Ḣ^s} ≤ C μ A^{2-s} B^{s-3/2}`.
    pub sobolev: Sample,
    /// `‖|D|^{7/4,φ²} f‖ ≤ μ⁻¹ A^{1/4} B^{1/4}`.
    pub phi_squared: Sample,
    /// `‖∂ₓf‖_∞ ≤ C ln(4 + B/(A + ‖f‖²))^{(1-2a)/2} (√A + ‖f‖)`.
    pub lipschitz: Sample,
}

/// The three interpolation ratios for `f`, with `‖f₀‖ = ‖f‖`; `None` for the
/// zero field. Needs `7/4 ≤ s ≤ 2` and a κ with a log exponent.
pub fn check_interpolation(f: &Field, phi: &Phi, s: f64) -> Result<Option<InterpolationRecord>> {
    if !(1.75..=2.0).contains(&s) {
        return Err(invalid(format!(
            "interpolation order must lie in [7/4, 2], got {s}"
        )));
    }
    let exponent = phi
        .kappa()
        .log_exponent()
        .ok_or_else(|| invalid("the Lipschitz bound needs a κ with a log exponent"))?;
    let a = weighted_norm(f, 1.5, phi)?.powi(2);
    let b = weighted_norm(f, 2.0, phi)?.powi(2);
    if a == 0.0 || b == 0.0 {
        return Ok(None);
    }
    let mu = 1.0 / phi.kappa().eval(b / a);
    let l2 = f.l2_norm();
    let sob = Sample::new(
        sobolev_norm(f, s, true),
        mu * a.powf(2.0 - s) * b.powf(s - 1.5),
    );
    let sq = Sample::new(
        weighted_norm_pow(f, 1.75, phi, 2.0)?,
        (a * b).powf(0.25) / mu,
    );
    let lip = Sample::new(
        spectral::derivative(f, 1).max_abs(),
        (4.0 + b / (a + l2 * l2)).ln().powf(0.5 - exponent) * (a.sqrt() + l2),
    );
    match (sob, sq, lip) {
        (Some(sobolev), Some(phi_squared), Some(lipschitz)) => Ok(Some(InterpolationRecord {
            s,
            a,
            b,
            mu,
            sobolev,
            phi_squared,
            lipschitz,
        })),
        _ => Ok(None),
    }
}

/// `[sobolev, phi_squared, lipschitz]` ratio reports over an ensemble.
pub fn interpolation_ensemble(ens: &Ensemble, kappa: &Kappa, s: f64) -> Result<[RatioReport; 3]> {
    let phi = lab_phi(kappa, &ens.grid()?)?;
    let recs = ens.map(|i| check_interpolation(&ens.field(i)?, &phi, s))?;
    let pick = |id: &str, k: fn(&InterpolationRecord) -> Sample| {
        let sides = recs
            .iter()
            .map(|r| r.as_ref().map_or((0.0, 0.0), |r| (k(r).lhs, k(r).rhs)));
        RatioReport::from_sides(id, Some(*ens), sides)
    };
    Ok([
        pick("interpolation-sobolev", |r| r.sobolev),
        pick("interpolation-phi-squared", |r| r.phi_squared),
        pick("interpolation-lipschitz", |r| r.lipschitz),
    ])
}

/// `Q(f)` of the energy inequality.
pub fn energy_q(f: &Field, phi: &Phi) -> Result<f64> {
    let h = |s| sobolev_norm(f, s, true);
    let inh = |s| sobolev_norm(f, s, false);
    let h74 = h(1.75);
    Ok((h(2.0) + h74 * h74) * weighted_norm(f, 1.5, phi)?
        + weighted_norm(f, 1.75, phi)? * inh(1.75)
        + (inh(19.0 / 12.0).powf(1.5) + h74.sqrt())
            * weighted_norm_pow(f, 1.75, phi, 2.0)?.sqrt()
            * h74)
}

/// `∫ |D^{2,φ}f|² / (1 + fₓ²) dx` by the trapezoidal rule on the grid.
fn dissipation(f: &Field, phi: &Phi) -> Result<f64> {
    let d = weighted_operator(f, 2.0, phi, 1.0)?;
    let fx = spectral::derivative(f, 1);
    let h = f.grid().spacing();
    Ok(h * d
        .samples()
        .iter()
        .zip(fx.samples())
        .map(|(d, s)| d * d / (1.0 + s * s))
        .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyStep {
    pub t: f64,
    /// `(A_{k+1} - A_k) / dt`.
    pub da_dt: f64,
    /// Trapezoidal average of the dissipation integral.
    pub dissipation: f64,
    /// Trapezoidal average of `Q(f) ‖|D|^{2,φ} f‖`.
    pub q_term: f64,
    /// `C · q_term - (da_dt + dissipation)`.
    pub slack: f64,
    /// `C₂ (√A + A) μ B - (dA/dt + C₁ δ B)`, averaged the same way.
    pub monitor_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyInequalityReport {
    pub c: f64,
    pub steps: Vec<EnergyStep>,
    pub min_slack: f64,
    pub min_monitor_slack: f64,
    /// Smallest `C ≥ 0` making every slack non-negative.
    pub calibrated_c: f64,
    /// The dissipation integral dominated `B / (1 + max fₓ²)` at every record.
    pub dissipation_floor_holds: bool,
}

/// Reconstructs the energy inequality along `trace`, which must hold every
/// state (cadence 1, states kept).
pub fn check_energy_inequality(
    trace: &EnergyTrace,
    cfg: &SimConfig,
    c: f64,
) -> Result<EnergyInequalityReport> {
    if cfg.cadence != 1 || trace.states.len() != trace.records.len() {
        return Err(invalid(
            "the energy inequality needs every step recorded with its state (cadence 1)",
        ));
    }
    let m = &trace.monitors;
    let phi = &m.phi;
    let k = &cfg.constants;
    let mut per_record = Vec::with_capacity(trace.states.len());
    let mut floor_ok = true;
    for (f, r) in trace.states.iter().zip(&trace.records) {
        let d = dissipation(f, phi)?;
        let q = energy_q(f, phi)? * r.b.sqrt();
        let lip = spectral::derivative(f, 1).max_abs();
        floor_ok &= d >= r.b / (1.0 + lip * lip) * (1.0 - 1e-12);
        let growth = k.c2 * (r.a.sqrt() + r.a) * r.mu * r.b;
        per_record.push((d, q, growth, k.c1 * r.delta * r.b));
    }
    let mut steps = Vec::new();
    let mut calibrated: f64 = 0.0;
    for (w, p) in trace.records.windows(2).zip(per_record.windows(2)) {
        let dt = w[1].t - w[0].t;
        let da = (w[1].a - w[0].a) / dt;
        let avg = |i: fn(&(f64, f64, f64, f64)) -> f64| 0.5 * (i(&p[0]) + i(&p[1]));
        let (d, q) = (avg(|x| x.0), avg(|x| x.1));
        if q > 0.0 {
            calibrated = calibrated.max((da + d) / q);
        }
        steps.push(EnergyStep {
            t: w[0].t,
            da_dt: da,
            dissipation: d,
            q_term: q,
            slack: c * q - (da + d),
            monitor_slack: avg(|x| x.2) - (da + avg(|x| x.3)),
        });
    }
    let min = |f: fn(&EnergyStep) -> f64| steps.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(EnergyInequalityReport {
        c,
        min_slack: min(|s| s.slack),
        min_monitor_slack: min(|s| s.monitor_slack),
        calibrated_c: calibrated,
        dissipation_floor_holds: floor_ok,
        steps,
    })
}
