//! The JSON run configuration.
//!
//! Every section is optional and falls back to the documented defaults;
//! unknown keys are rejected. Errors carry the dotted path of the offending
//! field together with the line and column in the document.

use std::f64::consts::PI;

use muskat_core::lab::Ensemble;
use muskat_core::muskat::QuadSpec;
use muskat_core::solver::{Constants, SimConfig, WeightChoice, DEFAULT_C0};
use muskat_core::{Field, Grid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_cutoff")]
    pub cutoff_n: f64,
    #[serde(default)]
    pub weight: WeightSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub quad: QuadSpec,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default = "default_c0")]
    pub smallness_c0: f64,
    /// Only read by `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Half-length: the torus is `[-L, L)`.
    #[serde(rename = "L", default = "default_half_length")]
    pub half_length: f64,
    #[serde(rename = "N", default = "default_len")]
    pub len: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            half_length: default_half_length(),
            len: default_len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// `power-log` or `data-adapted`.
    #[serde(default = "default_kind")]
    pub kind: WeightKind,
    /// Exponent of `ln(4+r)^a`; only meaningful for `power-log`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            a: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    PowerLog,
    DataAdapted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// `None` picks `0.5 · min(1/n, spacing)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "T", default = "default_t_final")]
    pub t_final: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: default_t_final(),
        }
    }
}

/// `f₀(x) = Σ cos·cos(ξ_k x) + sin·sin(ξ_k x)` plus an optional random part.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub modes: Vec<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomInit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    /// Mode index; the wavenumber is `π k / L`.
    pub k: usize,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Random band-limited data drawn with the top-level `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    pub max_mode: usize,
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// Largest absolute sample.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_cadence")]
    pub cadence: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            cadence: default_cadence(),
        }
    }
}

/// Cells are the product `amplitudes × cutoffs × dts`; each amplitude scales
/// the whole initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub amplitudes: Vec<f64>,
    pub cutoffs: Vec<f64>,
    pub dts: Vec<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_half_length() -> f64 {
    16.0 * PI
}
fn default_len() -> usize {
    256
}
fn default_cutoff() -> f64 {
    4.0
}
fn default_kind() -> WeightKind {
    WeightKind::PowerLog
}
fn default_t_final() -> f64 {
    1.0
}
fn default_decay() -> f64 {
    3.0
}
fn default_cadence() -> usize {
    1
}
fn default_c0() -> f64 {
    DEFAULT_C0
}
fn default_workers() -> usize {
    1
}

fn constraint(path: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.to_owned(),
        msg: msg.into(),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        HarnessError::Config {
            path,
            msg: format!("{inner}"),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, HarnessError> {
        Grid::new(self.grid.half_length, self.grid.len).map_err(|e| {
            let path = if self.grid.len < 8 || !self.grid.len.is_power_of_two() {
                "grid.N"
            } else {
                "grid.L"
            };
            constraint(path, e.to_string())
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let grid = self.grid()?;
        match (self.weight.kind, self.weight.a) {
            (WeightKind::PowerLog, Some(a)) if !(a > 0.0 && a <= 1.0) => {
                return Err(constraint(
                    "weight.a",
                    format!("must lie in (0, 1], got {a}"),
                ));
            }
            (WeightKind::DataAdapted, Some(_)) => {
                return Err(constraint(
                    "weight.a",
                    "not used by the data-adapted weight",
                ));
            }
            _ => {}
        }
        if self.weight.kind == WeightKind::DataAdapted
            && self.init.modes.is_empty()
            && self.init.random.is_none()
        {
            return Err(constraint(
                "init",
                "the data-adapted weight needs a nonzero initial datum",
            ));
        }
        for (i, m) in self.init.modes.iter().enumerate() {
            if m.k == 0 || m.k > grid.len() / 2 {
                return Err(constraint(
                    &format!("init.modes[{i}].k"),
                    format!("must lie in [1, {}]", grid.len() / 2),
                ));
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return Err(constraint(
                    &format!("init.modes[{i}]"),
                    "coefficients must be finite",
                ));
            }
        }
        if let Some(r) = self.init.random {
            self.ensemble(r)
                .validate()
                .map_err(|e| constraint("init.random", e.to_string()))?;
        }
        if !(self.smallness_c0 > 0.0 && self.smallness_c0.is_finite()) {
            return Err(constraint("smallness_c0", "must be positive"));
        }
        if !(self.constants.c1 > 0.0 && self.constants.c2 > 0.0) {
            return Err(constraint("constants", "C₁ and C₂ must be positive"));
        }
        self.sim_config(&grid, self.cutoff_n, self.time.dt)
            .validate()
            .map_err(|e| {
                let msg = e.to_string();
                let path = if msg.contains("cutoff") {
                    "cutoff_n"
                } else if msg.contains("time step") {
                    "time.dt"
                } else if msg.contains("final time") {
                    "time.T"
                } else if msg.contains("cadence") {
                    "output.cadence"
                } else {
                    "quad"
                };
                constraint(path, msg)
            })?;
        muskat_core::muskat::AlphaQuadrature::new(&grid, &self.quad)
            .map_err(|e| constraint("quad", e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.amplitudes.is_empty() || s.cutoffs.is_empty() || s.dts.is_empty() {
                return Err(constraint("sweep", "every axis needs at least one value"));
            }
            if s.workers == 0 {
                return Err(constraint("sweep.workers", "must be at least 1"));
            }
            for (i, a) in s.amplitudes.iter().enumerate() {
                if !a.is_finite() {
                    return Err(constraint(
                        &format!("sweep.amplitudes[{i}]"),
                        "must be finite",
                    ));
                }
            }
            for (i, &n) in s.cutoffs.iter().enumerate() {
                self.sim_config(&grid, n, None)
                    .validate()
                    .map_err(|e| constraint(&format!("sweep.cutoffs[{i}]"), e.to_string()))?;
            }
            for (i, &dt) in s.dts.iter().enumerate() {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(constraint(&format!("sweep.dts[{i}]"), "must be positive"));
                }
            }
        }
        Ok(())
    }

    fn ensemble(&self, r: RandomInit) -> Ensemble {
        Ensemble {
            half_length: self.grid.half_length,
            len: self.grid.len,
            max_mode: r.max_mode,
            decay: r.decay,
            amplitude: r.amplitude,
            samples: 1,
            seed: self.seed,
        }
    }

    pub fn weight_choice(&self) -> WeightChoice {
        match self.weight.kind {
            WeightKind::PowerLog => WeightChoice::PowerLog {
                a: self.weight.a.unwrap_or(1.0 / 3.0),
            },
            WeightKind::DataAdapted => WeightChoice::DataAdapted,
        }
    }

    pub fn sim_config(&self, grid: &Grid, cutoff: f64, dt: Option<f64>) -> SimConfig {
        let mut cfg = SimConfig::new(*grid, cutoff, self.time.t_final);
        cfg.weight = self.weight_choice();
        if let Some(dt) = dt {
            cfg.dt = dt;
        }
        cfg.quad = self.quad;
        cfg.cadence = self.output.cadence;
        cfg.constants = self.constants;
        cfg
    }

    /// The unscaled initial datum.
    pub fn initial_datum(&self) -> Result<Field, HarnessError> {
        let grid = self.grid()?;
        let modes: Vec<(f64, Mode)> = self
            .init
            .modes
            .iter()
            .map(|m| (grid.wavenumber(m.k), *m))
            .collect();
        let mut f = Field::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(k, m)| m.cos * (k * x).cos() + m.sin * (k * x).sin())
                .sum()
        });
        if let Some(r) = self.init.random {
            f = f.add(
                &self
                    .ensemble(r)
                    .field(0)
                    .map_err(|e| constraint("init.random", e.to_string()))?,
            );
        }
        Ok(f)
    }

    /// SHA-256 of the canonical serialisation (defaults filled, fixed key
    /// order), in hex.
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

pub fn digest_of<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_vec(value).expect("configuration types serialise");
    format!("{:x}", Sha256::digest(&canonical))
}
