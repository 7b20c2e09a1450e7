//! Empirical checks of the functional inequalities behind the energy
//! estimates. Each check evaluates both sides on random band-limited fields
//! and reports ratio statistics; the constants are recorded as regression
//! baselines, never compared with theoretical values.

mod baseline;
mod energy;
mod estimates;
mod routes;

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::muskat::QuadSpec;
use crate::spectral::Grid;
use crate::weights::Kappa;
use crate::Field;

pub use baseline::{check_drift, Baselines, Drift, DRIFT_TOLERANCE};
pub use energy::{
    check_energy_inequality, check_interpolation, energy_q, interpolation_ensemble,
    EnergyInequalityReport, EnergyStep, InterpolationRecord,
};
pub use estimates::{
    check_commutator_d1phi, check_contraction, check_hardy, check_hilbert_commutator,
    check_r_bound, check_v_bound, commutator_d1phi_sample, contraction_gap, hardy_corpus,
    hilbert_commutator_sample, lab_phi, r_bound_sample, v_bound_sample, ContractionReport,
    HardyCase, HardyReport,
};
pub use routes::{
    check_decomposition_ensemble, check_norm_equivalence, check_se0, DecompositionSummary,
    NormEquivalenceReport,
};

/// Law of a random field ensemble: independent modes `1 ≤ j ≤ max_mode` with
/// amplitudes `j^{-decay} · N(0, 1)` on both `cos` and `sin`, rescaled so the
/// largest absolute sample equals `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub half_length: f64,
    pub len: usize,
    pub max_mode: usize,
    pub decay: f64,
    pub amplitude: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self {
            half_length: PI,
            len: 64,
            max_mode: 16,
            decay: 3.0,
            amplitude: 0.5,
            samples: 50,
            seed: 7,
        }
    }
}

/// Offset separating the second member of a pair from the first.
const PAIR_STREAM: u64 = 1 << 32;

impl Ensemble {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.len)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        // the 2/3 rule needs the products of two samples to stay unaliased
        if self.max_mode == 0 || self.max_mode > grid.len() / 3 {
            return Err(invalid(format!(
                "max_mode must lie in [1, {}] for N = {}",
                grid.len() / 3,
                grid.len()
            )));
        }
        if !(self.decay.is_finite() && self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(invalid(
                "decay and amplitude must be finite, amplitude >= 0",
            ));
        }
        if self.samples == 0 {
            return Err(invalid("an ensemble needs at least one sample"));
        }
        Ok(())
    }

    /// The field drawn from stream `seed + index`.
    pub fn field(&self, index: u64) -> Result<Field> {
        let grid = self.grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(index));
        let coeffs: Vec<(f64, f64, f64)> = (1..=self.max_mode)
            .map(|j| {
                let w = (j as f64).powf(-self.decay);
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                (grid.wavenumber(j), w * a, w * b)
            })
            .collect();
        let f = Field::from_fn(grid, |x| {
            coeffs
                .iter()
                .map(|&(k, a, b)| a * (k * x).cos() + b * (k * x).sin())
                .sum()
        });
        let m = f.max_abs();
        Ok(if m > 0.0 {
            f.scale(self.amplitude / m)
        } else {
            f
        })
    }

    pub fn pair(&self, index: u64) -> Result<(Field, Field)> {
        Ok((
            self.field(index)?,
            self.field(index.wrapping_add(PAIR_STREAM))?,
        ))
    }

    pub fn with_samples(self, samples: usize) -> Self {
        Self { samples, ..self }
    }

    /// Evaluates `f` on every index in parallel, keeping the index order.
    pub(crate) fn map<T: Send>(
        &self,
        f: impl Fn(u64) -> Result<T> + Sync + Send,
    ) -> Result<Vec<T>> {
        self.validate()?;
        (0..self.samples as u64).into_par_iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl Sample {
    /// `None` when the right-hand side vanishes.
    pub fn new(lhs: f64, rhs: f64) -> Option<Self> {
        (rhs > 0.0).then(|| Self {
            lhs,
            rhs,
            ratio: lhs / rhs,
        })
    }
}

/// LHS/RHS statistics of one inequality over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub id: String,
    pub ensemble: Option<Ensemble>,
    pub samples: Vec<Sample>,
    /// Samples dropped because their right-hand side vanished.
    pub excluded: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

impl RatioReport {
    pub fn from_sides(
        id: &str,
        ensemble: Option<Ensemble>,
        sides: impl IntoIterator<Item = (f64, f64)>,
    ) -> Self {
        let mut samples = Vec::new();
        let mut excluded = 0;
        for (lhs, rhs) in sides {
            match Sample::new(lhs, rhs) {
                Some(s) => samples.push(s),
                None => excluded += 1,
            }
        }
        let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
        let mean_ratio = if samples.is_empty() {
            0.0
        } else {
            samples.iter().map(|s| s.ratio).sum::<f64>() / samples.len() as f64
        };
        Self {
            id: id.to_owned(),
            ensemble,
            samples,
            excluded,
            max_ratio,
            mean_ratio,
        }
    }

    pub fn min_ratio(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.ratio)
            .fold(f64::INFINITY, f64::min)
    }

    /// Every retained ratio is finite.
    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.ratio.is_finite())
    }
}

/// Ratio statistics of the whole lab on one ensemble law.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub reports: Vec<RatioReport>,
    pub norm_equivalence: NormEquivalenceReport,
    /// Maximum ratio per report plus the norm-equivalence interval.
    pub statistics: Baselines,
}

/// Samples used for the norm-equivalence interval.
pub const NORM_EQUIVALENCE_SAMPLES: usize = 100;

pub fn ratio_suite(ens: &Ensemble, quad: &QuadSpec) -> Result<SuiteOutcome> {
    let k13 = Kappa::power_log(1.0 / 3.0)?;
    let mut reports = vec![
        check_v_bound(ens, quad)?,
        check_commutator_d1phi(ens, &k13, quad)?,
        check_commutator_d1phi(ens, &Kappa::Constant { value: 1.0 }, quad)?,
        check_r_bound(ens, quad)?,
        check_hilbert_commutator(ens)?,
    ];
    reports.extend(interpolation_ensemble(ens, &k13, 1.75)?);
    for s in [0.25, 0.5, 0.75] {
        reports.push(check_se0(ens, s)?);
    }
    let norm_equivalence =
        check_norm_equivalence(&ens.with_samples(NORM_EQUIVALENCE_SAMPLES), &k13, 1.5)?;
    let mut statistics = Baselines::default();
    for r in &reports {
        statistics.insert(r.id.clone(), r.max_ratio);
    }
    statistics.insert("norm-equivalence-min", norm_equivalence.min);
    statistics.insert("norm-equivalence-max", norm_equivalence.max);
    Ok(SuiteOutcome {
        reports,
        norm_equivalence,
        statistics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_is_deterministic_and_scaled() {
        let e = Ensemble::default();
        let a = e.field(3).unwrap();
        let b = e.field(3).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert!((a.max_abs() - e.amplitude).abs() < 1e-15);
        let (f, g) = e.pair(3).unwrap();
        assert_eq!(f.samples(), a.samples());
        assert_ne!(f.samples(), g.samples());
        // band-limited to max_mode
        let cut = crate::spectral::cutoff(&f, e.max_mode as f64).unwrap();
        assert!(f.sub(&cut).l2_norm() < 1e-13);
    }

    #[test]
    fn ensemble_validation() {
        let e = Ensemble {
            max_mode: 30,
            ..Ensemble::default()
        };
        assert!(e.validate().is_err());
        assert!(Ensemble {
            samples: 0,
            ..Ensemble::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_rhs_samples_are_counted() {
        let r = RatioReport::from_sides("x", None, [(1.0, 2.0), (0.0, 0.0), (3.0, 1.0)]);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.samples.len(), 2);
        assert_eq!(r.max_ratio, 3.0);
        assert_eq!(r.mean_ratio, 1.75);
    }
}
