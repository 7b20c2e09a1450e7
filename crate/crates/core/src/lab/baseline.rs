//! Stored ratio statistics and the drift test against them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative change of a statistic that counts as a regression.
pub const DRIFT_TOLERANCE: f64 = 0.10;

/// Named scalar statistics, serialised as a flat JSON object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Baselines(pub BTreeMap<String, f64>);

impl Baselines {
    /// The statistics recorded with this build.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../../baselines.json")).expect("bundled baselines parse")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("baselines: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("a map of floats serialises")
    }

    pub fn insert(&mut self, id: impl Into<String>, value: f64) {
        self.0.insert(id.into(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Drift {
    pub id: String,
    pub baseline: f64,
    /// `None` when the statistic was not produced.
    pub observed: Option<f64>,
    pub relative: f64,
    pub pass: bool,
}

/// Compares every baseline entry with its observed value.
pub fn check_drift(baselines: &Baselines, observed: &Baselines, tolerance: f64) -> Vec<Drift> {
    baselines
        .0
        .iter()
        .map(|(id, &base)| {
            let obs = observed.0.get(id).copied();
            let relative = match obs {
                Some(o) if base != 0.0 => ((o - base) / base).abs(),
                Some(o) => o.abs(),
                None => f64::INFINITY,
            };
            Drift {
                id: id.clone(),
                baseline: base,
                observed: obs,
                relative,
                pass: relative <= tolerance,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_flags_changes_and_missing_entries() {
        let mut base = Baselines::default();
        base.insert("a", 2.0);
        base.insert("b", 1.0);
        base.insert("c", 5.0);
        let mut obs = Baselines::default();
        obs.insert("a", 2.1);
        obs.insert("b", 1.2);
        let d = check_drift(&base, &obs, DRIFT_TOLERANCE);
        assert_eq!(
            d.iter().map(|d| d.pass).collect::<Vec<_>>(),
            [true, false, false]
        );
        assert!(Baselines::from_json(&base.to_json()).unwrap() == base);
    }

    #[test]
    fn bundled_baselines_load() {
        assert!(!Baselines::builtin().0.is_empty());
    }
}
