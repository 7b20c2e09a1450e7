//! Agreement between independent routes to the same quantity: spectral
//! against finite-difference norms, and `T(f)g` against its
//! paralinearization.

use std::f64::consts::PI;

use serde::Serialize;

use super::{Ensemble, RatioReport};
use crate::error::Result;
use crate::muskat::{check_decomposition, AlphaQuadrature, Fault, QuadSpec};
use crate::norms::{
    c_of_s, gagliardo_seminorm, sobolev_norm_unitary, triebel_lizorkin_norm, weighted_norm,
    FdParams, HMesh,
};
use crate::weights::Kappa;

use super::estimates::lab_phi;

#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalenceReport {
    pub s: f64,
    /// Gagliardo over spectral, one entry per sample.
    pub ratios: Vec<f64>,
    /// The same ratios on the refined h-mesh.
    pub refined: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Largest relative change of a ratio under mesh refinement.
    pub mesh_change: f64,
}

/// Second-difference Gagliardo semi-norm with weight `κ(1/|h|)` against the
/// spectral norm `‖|D|^{s,φ} f‖`.
pub fn check_norm_equivalence(
    ens: &Ensemble,
    kappa: &Kappa,
    s: f64,
) -> Result<NormEquivalenceReport> {
    let grid = ens.grid()?;
    let phi = lab_phi(kappa, &grid)?;
    let mesh = HMesh::for_grid(&grid);
    let fine = mesh.refined();
    let pairs = ens.map(|i| {
        let f = ens.field(i)?;
        let spectral = weighted_norm(&f, s, &phi)?;
        let coarse = gagliardo_seminorm(&f, s, kappa, &mesh)? / spectral;
        let refined = gagliardo_seminorm(&f, s, kappa, &fine)? / spectral;
        Ok((coarse, refined))
    })?;
    let (ratios, refined): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let mesh_change = ratios
        .iter()
        .zip(&refined)
        .map(|(a, b)| (b / a - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(NormEquivalenceReport {
        s,
        ratios,
        refined,
        min,
        max,
        mesh_change,
    })
}

/// `‖u‖²_{F^s_{2,2}} / (4π c(s) ‖u‖²_{Ḣ^s})` with the unitary `Ḣ^s`
/// normalisation; exactly 1 in the continuum.
pub fn check_se0(ens: &Ensemble, s: f64) -> Result<RatioReport> {
    let c = c_of_s(s)?;
    let mesh = HMesh::for_grid(&ens.grid()?);
    let prm = FdParams {
        s,
        p: 2.0,
        q: 2.0,
        m: 1,
        mesh,
    };
    let sides = ens.map(|i| {
        let f = ens.field(i)?;
        let fd = triebel_lizorkin_norm(&f, &prm)?.powi(2);
        Ok((fd, 4.0 * PI * c * sobolev_norm_unitary(&f, s).powi(2)))
    })?;
    Ok(RatioReport::from_sides(
        &format!("se0-s{s}"),
        Some(*ens),
        sides,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionSummary {
    pub fault: Fault,
    pub samples: usize,
    /// Largest `residual / (1 + scale)`.
    pub max_normalised_residual: f64,
    pub max_residual: f64,
}

/// The paralinearization residual over random pairs `(f, g)`.
pub fn check_decomposition_ensemble(
    ens: &Ensemble,
    quad: &QuadSpec,
    fault: Fault,
) -> Result<DecompositionSummary> {
    let q = AlphaQuadrature::new(&ens.grid()?, quad)?;
    let reports = ens.map(|i| {
        let (f, g) = ens.pair(i)?;
        check_decomposition(&f, &g, &q, fault)
    })?;
    Ok(DecompositionSummary {
        fault,
        samples: reports.len(),
        max_normalised_residual: reports
            .iter()
            .map(|r| r.residual / (1.0 + r.scale))
            .fold(0.0, f64::max),
        max_residual: reports.iter().map(|r| r.residual).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se0_holds_on_a_small_ensemble() {
        let e = Ensemble {
            samples: 4,
            ..Ensemble::default()
        };
        let r = check_se0(&e, 0.5).unwrap();
        assert!(
            r.samples.iter().all(|s| (s.ratio - 1.0).abs() < 0.05),
            "{:?}",
            r.samples
        );
    }

    #[test]
    fn decomposition_residual_and_faults() {
        let e = Ensemble {
            samples: 3,
            ..Ensemble::default()
        };
        let ok = check_decomposition_ensemble(&e, &QuadSpec::default(), Fault::None).unwrap();
        assert!(ok.max_normalised_residual < 1e-9);
        let bad = check_decomposition_ensemble(&e, &QuadSpec::default(), Fault::VSign).unwrap();
        assert!(bad.max_normalised_residual > 1e-6);
    }

    #[test]
    fn norm_routes_agree_up_to_a_bounded_factor() {
        let e = Ensemble {
            samples: 4,
            ..Ensemble::default()
        };
        let r = check_norm_equivalence(&e, &Kappa::power_log(1.0 / 3.0).unwrap(), 1.5).unwrap();
        assert!(r.min > 0.0 && r.max.is_finite());
        assert!(r.mesh_change < 0.01, "{}", r.mesh_change);
    }
}
