//! Time integration of the truncated system `∂ₜf = -Λf + J_n(T(f)f)`,
//! `f(0) = J_n f₀`, with energy monitors along the way.
//!
//! The linear part is integrated exactly by the factor `e^{-|ξ|t}`; the
//! projected nonlinearity is advanced by the explicit midpoint rule, which
//! makes the scheme second order and leaves the band `|ξ| ≤ n` invariant.

mod regime;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::muskat::{apply_t, lyapunov, AlphaQuadrature, QuadSpec};
use crate::norms::weighted_norm;
use crate::spectral::{self, Grid, Symbol};
use crate::weights::{data_adapted_kappa, tabulate_phi, Kappa, Phi, PhiSpec};
use crate::Field;

pub use regime::{
    envelope, predicted_t0, smallness_check, smallness_crossing, smallness_value, two_solution_gap,
    ExistenceTime, GapTrace, Smallness, DEFAULT_C0,
};

/// Which κ the energy monitors use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightChoice {
    PowerLog {
        a: f64,
    },
    /// κ₀ built from the initial datum.
    DataAdapted,
}

impl Default for WeightChoice {
    fn default() -> Self {
        WeightChoice::PowerLog { a: 1.0 / 3.0 }
    }
}

/// The constants `C₁`, `C₂` of the a priori estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Grid,
    /// Frequency cutoff `n` of `J_n`.
    pub cutoff: f64,
    pub weight: WeightChoice,
    pub dt: f64,
    pub t_final: f64,
    pub quad: QuadSpec,
    /// Record every `cadence` steps (the final state is always recorded).
    pub cadence: usize,
    pub constants: Constants,
    /// Keep the recorded states, needed by the energy-inequality check.
    pub keep_states: bool,
}

impl SimConfig {
    /// `0.5 · min(1/n, spacing)`.
    pub fn default_dt(grid: &Grid, cutoff: f64) -> f64 {
        0.5 * (1.0 / cutoff).min(grid.spacing())
    }

    pub fn new(grid: Grid, cutoff: f64, t_final: f64) -> Self {
        Self {
            grid,
            cutoff,
            weight: WeightChoice::default(),
            dt: Self::default_dt(&grid, cutoff),
            t_final,
            quad: QuadSpec::default(),
            cadence: 1,
            constants: Constants::default(),
            keep_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff <= self.grid.nyquist()) {
            return Err(invalid(format!(
                "cutoff {} must lie in (0, {}] (the Nyquist wavenumber)",
                self.cutoff,
                self.grid.nyquist()
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid(format!(
                "final time must be >= 0, got {}",
                self.t_final
            )));
        }
        if self.cadence == 0 {
            return Err(invalid("output cadence must be at least 1"));
        }
        if let WeightChoice::PowerLog { a } = self.weight {
            if !(a > 0.0 && a <= 1.0) {
                return Err(invalid(format!(
                    "power-log exponent must lie in (0, 1], got {a}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub l2: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub delta: f64,
    pub mu: f64,
    pub lyapunov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    StepFailure { t: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub records: Vec<EnergyRecord>,
    pub termination: Termination,
    /// Step actually used: `T / ceil(T / dt)`.
    pub dt: f64,
    pub steps: usize,
    /// `‖f(0)‖²` of the projected initial datum.
    pub initial_l2_sq: f64,
    /// Recorded states, when requested.
    pub states: Vec<Field>,
    pub final_state: Field,
    pub monitors: Arc<Monitors>,
}

/// Everything needed to evaluate `A`, `B`, `δ`, `μ` and the Lyapunov
/// functional for one run.
#[derive(Debug, Clone)]
pub struct Monitors {
    pub kappa: Kappa,
    pub phi: Phi,
    pub log_exponent: f64,
    pub quad: AlphaQuadrature,
    pub initial_l2_sq: f64,
}

impl Monitors {
    pub fn new(f0: &Field, weight: WeightChoice, quad: AlphaQuadrature) -> Result<Self> {
        let kappa = match weight {
            WeightChoice::PowerLog { a } => Kappa::power_log(a)?,
            WeightChoice::DataAdapted => data_adapted_kappa(f0)?,
        };
        let log_exponent = kappa
            .log_exponent()
            .expect("both weight choices carry an exponent");
        let spec = PhiSpec {
            lambda_max: (2.0 * f0.grid().nyquist()).max(10.0),
            ..PhiSpec::default()
        };
        let phi = tabulate_phi(&kappa, &spec)?;
        Ok(Self {
            kappa,
            phi,
            log_exponent,
            quad,
            initial_l2_sq: f0.l2_norm().powi(2),
        })
    }

    /// `δ = (1 + ln(4 + B/(A + ‖f₀‖²))^{1-2a} (A + ‖f₀‖²))⁻¹`.
    pub fn delta(&self, a_val: f64, b_val: f64) -> f64 {
        if b_val == 0.0 {
            return 1.0;
        }
        let m = a_val + self.initial_l2_sq;
        1.0 / (1.0 + (4.0 + b_val / m).ln().powf(1.0 - 2.0 * self.log_exponent) * m)
    }

    /// `μ = κ(B/A)⁻¹`.
    pub fn mu(&self, a_val: f64, b_val: f64) -> f64 {
        if b_val == 0.0 || a_val == 0.0 {
            return 1.0;
        }
        1.0 / self.kappa.eval(b_val / a_val)
    }

    pub fn record(&self, t: f64, f: &Field) -> Result<EnergyRecord> {
        let a = weighted_norm(f, 1.5, &self.phi)?.powi(2);
        let b = weighted_norm(f, 2.0, &self.phi)?.powi(2);
        Ok(EnergyRecord {
            t,
            l2: f.l2_norm(),
            a,
            b,
            delta: self.delta(a, b),
            mu: self.mu(a, b),
            lyapunov: lyapunov(f, &self.quad),
        })
    }
}

fn decay(f: &Field, tau: f64) -> Field {
    spectral::apply_multiplier(f, &Symbol::radial(move |k| (-k * tau).exp(), false))
        .expect("radial symbol is hermitian")
}

/// One integrating-factor midpoint step of length `dt`.
pub fn step(f: &Field, dt: f64, cutoff: f64, quad: &AlphaQuadrature) -> Result<Field> {
    let n0 = spectral::cutoff(&apply_t(f, f, quad)?, cutoff)?;
    let half = decay(&f.add(&n0.scale(0.5 * dt)), 0.5 * dt);
    let n1 = spectral::cutoff(&apply_t(&half, &half, quad)?, cutoff)?;
    spectral::cutoff(&decay(f, dt).add(&decay(&n1, 0.5 * dt).scale(dt)), cutoff)
}

/// Integrates from `f₀` to `t_final`, recording the energy monitors.
pub fn simulate(f0: &Field, cfg: &SimConfig) -> Result<EnergyTrace> {
    cfg.validate()?;
    if *f0.grid() != cfg.grid {
        return Err(invalid(
            "initial datum lives on a different grid than the configuration",
        ));
    }
    let quad = AlphaQuadrature::new(&cfg.grid, &cfg.quad)?;
    let mut f = spectral::cutoff(f0, cfg.cutoff)?;
    let monitors = Arc::new(Monitors::new(&f, cfg.weight, quad.clone())?);
    let steps = if cfg.t_final == 0.0 {
        0
    } else {
        (cfg.t_final / cfg.dt - 1e-9).ceil() as usize
    };
    let dt = if steps == 0 {
        cfg.dt
    } else {
        cfg.t_final / steps as f64
    };
    let blowup = 1e6 * (1.0 + f.l2_norm());

    let mut records = vec![monitors.record(0.0, &f)?];
    let mut states = Vec::new();
    if cfg.keep_states {
        states.push(f.clone());
    }
    let mut termination = Termination::Completed;
    for k in 1..=steps {
        let t = k as f64 * dt;
        let next = match step(&f, dt, cfg.cutoff, &quad) {
            Ok(next) => next,
            Err(e) => {
                termination = Termination::StepFailure {
                    t,
                    reason: e.to_string(),
                };
                break;
            }
        };
        if !next.is_finite() || next.l2_norm() > blowup {
            termination = Termination::StepFailure {
                t,
                reason: "solution left the finite range".into(),
            };
            break;
        }
        f = next;
        if k % cfg.cadence == 0 || k == steps {
            records.push(monitors.record(t, &f)?);
            if cfg.keep_states {
                states.push(f.clone());
            }
        }
    }
    Ok(EnergyTrace {
        records,
        termination,
        dt,
        steps,
        initial_l2_sq: monitors.initial_l2_sq,
        states,
        final_state: f,
        monitors,
    })
}

impl EnergyTrace {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Converts a step failure into an error.
    pub fn into_result(self) -> Result<Self> {
        match &self.termination {
            Termination::Completed => Ok(self),
            Termination::StepFailure { t, reason } => Err(Error::StepFailure {
                t: *t,
                reason: reason.clone(),
            }),
        }
    }
}
