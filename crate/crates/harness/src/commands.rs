use std::path::Path;

use muskat_core::lab::{
    check_contraction, check_decomposition_ensemble, check_drift, check_hardy, hardy_corpus,
    ratio_suite, Baselines, Drift, Ensemble, RatioReport, DRIFT_TOLERANCE,
};
use muskat_core::muskat::{Fault, QuadSpec};
use muskat_core::solver::{
    predicted_t0, simulate, smallness_check, smallness_crossing, EnergyRecord, EnergyTrace,
    ExistenceTime, SimConfig, Smallness, Termination, WeightChoice, DEFAULT_C0,
};
use muskat_core::spectral::cutoff;
use muskat_core::weights::{tabulate_phi, Kappa, PhiSpec};
use muskat_core::{Field, Grid};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{digest_of, RunConfig};
use crate::error::HarnessError;
use crate::output::{create_dir, csv, fmt_float, stamped_json, trace_csv, trace_svg, write_file};

/// Per-step rises allowed before a monotonicity verdict turns false.
pub const L2_STEP_TOL: f64 = 1e-8;
pub const A_STEP_TOL: f64 = 1e-8;
pub const LYAPUNOV_STEP_TOL: f64 = 1e-7;

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub steps: usize,
    pub dt: f64,
    pub records: usize,
    #[serde(rename = "final")]
    pub last: EnergyRecord,
    pub smallness: Smallness,
    /// Only for the data-adapted weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_t0: Option<ExistenceTime>,
}

fn max_rise(trace: &EnergyTrace, pick: fn(&EnergyRecord) -> f64) -> f64 {
    trace
        .records
        .windows(2)
        .map(|w| pick(&w[1]) - pick(&w[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Writes `trace.csv`, `trace.svg` and `summary.json` into `out`. A step
/// failure still writes everything, then reports a runtime error.
pub fn cmd_simulate(
    mut cfg: RunConfig,
    seed: Option<u64>,
    out: &Path,
) -> Result<RunSummary, HarnessError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let digest = cfg.digest();
    let grid = cfg.grid()?;
    let f0 = cfg.initial_datum()?;
    let sim = cfg.sim_config(&grid, cfg.cutoff_n, cfg.time.dt);
    let trace = simulate(&f0, &sim)?;
    let projected = cutoff(&f0, sim.cutoff)?;
    let smallness = smallness_check(&projected, cfg.smallness_c0)?;
    let predicted_t0 = match sim.weight {
        WeightChoice::DataAdapted => Some(predicted_t0(
            &projected,
            &trace.monitors.kappa,
            &sim.constants,
        )?),
        WeightChoice::PowerLog { .. } => None,
    };
    let summary = RunSummary {
        termination: trace.termination.clone(),
        steps: trace.steps,
        dt: trace.dt,
        records: trace.records.len(),
        last: *trace
            .records
            .last()
            .expect("the initial record is always present"),
        smallness,
        predicted_t0,
    };
    create_dir(out)?;
    write_file(
        &out.join("trace.csv"),
        trace_csv(&trace.records, &digest).as_bytes(),
    )?;
    write_file(
        &out.join("trace.svg"),
        trace_svg(&trace.records, &digest).as_bytes(),
    )?;
    write_file(
        &out.join("summary.json"),
        stamped_json(&summary, &digest).as_bytes(),
    )?;
    if let Termination::StepFailure { t, reason } = &trace.termination {
        return Err(HarnessError::Runtime(format!(
            "step failure at t = {t}: {reason}"
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub amplitude: f64,
    pub cutoff: f64,
    pub dt: f64,
    pub completed: bool,
    pub last: EnergyRecord,
    pub smallness: Smallness,
    pub l2_nonincreasing: bool,
    pub a_nonincreasing: bool,
    pub lyapunov_nonincreasing: bool,
}

const SWEEP_HEADER: &str =
    "cell,amplitude,cutoff,dt,status,t,l2,A,B,lyapunov,smallness,smallness_pass,\
l2_nonincreasing,A_nonincreasing,lyapunov_nonincreasing";

#[derive(Serialize)]
struct CellSpec<'a> {
    sweep_digest: &'a str,
    amplitude: f64,
    cutoff: f64,
    dt: f64,
}

fn run_cell(
    base: &Field,
    cfg: &RunConfig,
    grid: &Grid,
    digest: &str,
    cell: usize,
    (amplitude, n, dt): (f64, f64, f64),
    out: &Path,
) -> Result<SweepRow, HarnessError> {
    let f0 = base.scale(amplitude);
    let sim = cfg.sim_config(grid, n, Some(dt));
    let trace = simulate(&f0, &sim)?;
    let cell_digest = digest_of(&CellSpec {
        sweep_digest: digest,
        amplitude,
        cutoff: n,
        dt,
    });
    let dir = out.join(format!("cell-{cell:03}"));
    create_dir(&dir)?;
    write_file(
        &dir.join("trace.csv"),
        trace_csv(&trace.records, &cell_digest).as_bytes(),
    )?;
    Ok(SweepRow {
        cell,
        amplitude,
        cutoff: n,
        dt,
        completed: trace.completed(),
        last: *trace
            .records
            .last()
            .expect("the initial record is always present"),
        smallness: smallness_check(&cutoff(&f0, n)?, cfg.smallness_c0)?,
        l2_nonincreasing: max_rise(&trace, |r| r.l2) <= L2_STEP_TOL,
        a_nonincreasing: max_rise(&trace, |r| r.a) <= A_STEP_TOL,
        lyapunov_nonincreasing: max_rise(&trace, |r| r.lyapunov) <= LYAPUNOV_STEP_TOL,
    })
}

/// Runs every cell of `amplitudes × cutoffs × dts`, one trace per cell plus
/// `summary.csv`. Failed cells appear in the summary with status `failed`.
pub fn cmd_sweep(
    cfg: RunConfig,
    workers: Option<usize>,
    out: &Path,
) -> Result<Vec<SweepRow>, HarnessError> {
    let Some(sweep) = cfg.sweep.clone() else {
        return Err(HarnessError::Config {
            path: "sweep".into(),
            msg: "a sweep needs a `sweep` section".into(),
        });
    };
    let workers = workers.unwrap_or(sweep.workers);
    if workers == 0 {
        return Err(HarnessError::Config {
            path: "--workers".into(),
            msg: "must be at least 1".into(),
        });
    }
    let digest = cfg.digest();
    let grid = cfg.grid()?;
    let base = cfg.initial_datum()?;
    let mut cells = Vec::new();
    for &a in &sweep.amplitudes {
        for &n in &sweep.cutoffs {
            cells.extend(sweep.dts.iter().map(|&dt| (a, n, dt)));
        }
    }
    create_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let results: Vec<Result<SweepRow, HarnessError>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &cell)| run_cell(&base, &cfg, &grid, &digest, i, cell, out))
            .collect()
    });

    let mut failed = Vec::new();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (i, (r, &(a, n, dt))) in results.into_iter().zip(&cells).enumerate() {
        let head = vec![i.to_string(), fmt_float(a), fmt_float(n), fmt_float(dt)];
        match r {
            Ok(row) => {
                if !row.completed {
                    failed.push(i);
                }
                let l = row.last;
                let mut line = head;
                line.push(
                    if row.completed {
                        "completed"
                    } else {
                        "step-failure"
                    }
                    .into(),
                );
                line.extend([l.t, l.l2, l.a, l.b, l.lyapunov, row.smallness.value].map(fmt_float));
                line.extend(
                    [
                        row.smallness.pass,
                        row.l2_nonincreasing,
                        row.a_nonincreasing,
                        row.lyapunov_nonincreasing,
                    ]
                    .map(|b| b.to_string()),
                );
                lines.push(line);
                rows.push(row);
            }
            Err(e) => {
                failed.push(i);
                let mut line = head;
                line.push("failed".into());
                line.extend(std::iter::repeat_n(String::new(), 10));
                lines.push(line);
                eprintln!("cell {i}: {e}");
            }
        }
    }
    write_file(
        &out.join("summary.csv"),
        csv(SWEEP_HEADER, lines, &digest).as_bytes(),
    )?;
    if !failed.is_empty() {
        return Err(HarnessError::Runtime(format!(
            "{} of {} cells failed: {failed:?}",
            failed.len(),
            cells.len()
        )));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum WeightTable {
    PowerLog,
    Constant,
}

#[derive(Serialize)]
struct WeightSpec {
    kind: &'static str,
    a: Option<f64>,
    lambda_min: f64,
    lambda_max: f64,
    per_decade: usize,
}

/// Writes `phi.csv`: the tabulated φ next to κ and their ratio.
pub fn cmd_weights(kind: WeightTable, a: Option<f64>, out: &Path) -> Result<(), HarnessError> {
    let (kappa, name) = match (kind, a) {
        (WeightTable::PowerLog, Some(a)) => {
            if !(a > 0.0 && a <= 1.0) {
                return Err(HarnessError::Config {
                    path: "--a".into(),
                    msg: format!("must lie in (0, 1], got {a}"),
                });
            }
            let k = Kappa::power_log(a).map_err(|e| HarnessError::Config {
                path: "--a".into(),
                msg: e.to_string(),
            })?;
            (k, "power-log")
        }
        (WeightTable::PowerLog, None) => {
            return Err(HarnessError::Config {
                path: "--a".into(),
                msg: "power-log needs an exponent".into(),
            })
        }
        (WeightTable::Constant, _) => (Kappa::Constant { value: 1.0 }, "constant"),
    };
    let spec = PhiSpec {
        allow_degenerate: kind == WeightTable::Constant,
        ..PhiSpec::default()
    };
    let digest = digest_of(&WeightSpec {
        kind: name,
        a: a.filter(|_| kind == WeightTable::PowerLog),
        lambda_min: spec.lambda_min,
        lambda_max: spec.lambda_max,
        per_decade: spec.per_decade,
    });
    let phi = tabulate_phi(&kappa, &spec)?;
    let rows = phi.nodes().map(|(l, v)| {
        let k = kappa.eval(l);
        vec![fmt_float(l), fmt_float(v), fmt_float(k), fmt_float(v / k)]
    });
    let table = csv("lambda,phi,kappa,ratio", rows, &digest);
    create_dir(out)?;
    write_file(&out.join("phi.csv"), table.as_bytes())
}

/// Options of `verify` beyond the output directory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyOptions {
    /// Deliberate defect in the paralinearization, to prove the check bites.
    pub fault: Fault,
    /// Baselines to compare against instead of the bundled ones.
    pub baselines: Option<Baselines>,
}

/// A pass/fail check with its measured value and limit.
#[derive(Debug, Clone, Serialize)]
pub struct Invariant {
    pub id: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Invariant {
    fn at_most(id: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            id: id.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    fn at_least(id: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            id: id.into(),
            value,
            limit,
            pass: value >= limit,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyOutcome {
    pub invariants: Vec<Invariant>,
    pub drift: Vec<Drift>,
    pub failures: Vec<String>,
}

const CONTRACTION_SAMPLES: usize = 1_000_000;
const CONTRACTION_RANGE: f64 = 100.0;
const VERIFY_SEED: u64 = 2024;
const MAX_PRINCIPLE_RUNS: u64 = 4;
const IDENTITY_TOL: f64 = 1e-9;
const HARDY_SLACK: f64 = 1e-6;
const BAND_TOL: f64 = 1e-13;

#[derive(Serialize)]
struct VerifySpec<'a> {
    ensemble: Ensemble,
    quad: QuadSpec,
    fault: Fault,
    baselines: &'a Baselines,
    contraction_samples: usize,
    seed: u64,
    max_principle_runs: u64,
}

/// Small-data runs on a coarse default-length grid: each datum is scaled to
/// half its smallness threshold.
fn max_principle_invariants() -> Result<Vec<Invariant>, HarnessError> {
    let grid = Grid::with_len(128)?;
    let ens = Ensemble {
        half_length: grid.half_length(),
        len: 128,
        max_mode: 32,
        seed: VERIFY_SEED,
        ..Ensemble::default()
    };
    let traces = (0..MAX_PRINCIPLE_RUNS)
        .into_par_iter()
        .map(|i| -> Result<(SimConfig, EnergyTrace), HarnessError> {
            let f = ens.field(i)?;
            let eps = smallness_crossing(&f, DEFAULT_C0)?.unwrap_or(1.0);
            let mut cfg = SimConfig::new(grid, 4.0, 2.0);
            cfg.keep_states = true;
            let tr = simulate(&f.scale(0.5 * eps), &cfg)?;
            Ok((cfg, tr))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let completed = traces.iter().filter(|(_, t)| t.completed()).count();
    let worst = |pick: fn(&EnergyRecord) -> f64| {
        traces
            .iter()
            .map(|(_, t)| max_rise(t, pick))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut band: f64 = 0.0;
    for (cfg, t) in &traces {
        for s in &t.states {
            band = band.max(s.sub(&cutoff(s, cfg.cutoff)?).l2_norm());
        }
    }
    Ok(vec![
        Invariant::at_least(
            "max-principle-runs-completed",
            completed as f64,
            MAX_PRINCIPLE_RUNS as f64,
        ),
        Invariant::at_most("max-principle", worst(|r| r.l2), L2_STEP_TOL),
        Invariant::at_most("band-invariance", band, BAND_TOL),
        Invariant::at_most(
            "lyapunov-nonincreasing",
            worst(|r| r.lyapunov),
            LYAPUNOV_STEP_TOL,
        ),
    ])
}

#[derive(Serialize)]
struct LabReports<'a> {
    reports: &'a [RatioReport],
    norm_equivalence: &'a muskat_core::lab::NormEquivalenceReport,
    contraction: muskat_core::lab::ContractionReport,
    hardy: Vec<HardyEntry>,
    decomposition: muskat_core::lab::DecompositionSummary,
}

#[derive(Serialize)]
struct HardyEntry {
    name: &'static str,
    report: muskat_core::lab::HardyReport,
}

#[derive(Serialize)]
struct Observed<'a> {
    baselines: &'a Baselines,
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    invariants: &'a [Invariant],
    drift: &'a [Drift],
    failures: &'a [String],
}

/// Runs the lab suite and the hard invariants. Writes `lab_reports.json`,
/// `verify.json` and `observed_baselines.json`; fails with the identifiers of
/// every failing check.
pub fn cmd_verify(opts: &VerifyOptions, out: &Path) -> Result<VerifyOutcome, HarnessError> {
    let baselines = opts.baselines.clone().unwrap_or_else(Baselines::builtin);
    let ens = Ensemble::default();
    let quad = QuadSpec::default();
    let digest = digest_of(&VerifySpec {
        ensemble: ens,
        quad,
        fault: opts.fault,
        baselines: &baselines,
        contraction_samples: CONTRACTION_SAMPLES,
        seed: VERIFY_SEED,
        max_principle_runs: MAX_PRINCIPLE_RUNS,
    });

    let suite = ratio_suite(&ens, &quad)?;
    let contraction = check_contraction(CONTRACTION_SAMPLES, CONTRACTION_RANGE, VERIFY_SEED)?;
    let decomposition = check_decomposition_ensemble(&ens, &quad, opts.fault)?;
    let mut hardy = Vec::new();
    for case in hardy_corpus() {
        hardy.push(HardyEntry {
            name: case.name,
            report: check_hardy(case.u.as_ref(), case.support, &case.breaks)?,
        });
    }

    let mut invariants = vec![
        Invariant::at_least("contraction-lemma", contraction.min_gap, -1e-12),
        Invariant::at_most(
            "paralinearization-identity",
            decomposition.max_normalised_residual,
            IDENTITY_TOL,
        ),
    ];
    for h in &hardy {
        // the reported ratio already divides by 4∫u²
        invariants.push(Invariant::at_most(
            format!("hardy-{}", h.name),
            h.report.ratio.unwrap_or(0.0),
            1.0 + HARDY_SLACK,
        ));
    }
    for r in &suite.reports {
        invariants.push(Invariant::at_least(
            format!("finite-{}", r.id),
            r.is_finite() as u8 as f64,
            1.0,
        ));
    }
    invariants.extend(max_principle_invariants()?);
    let drift = check_drift(&baselines, &suite.statistics, DRIFT_TOLERANCE);

    let failures: Vec<String> = invariants
        .iter()
        .filter(|i| !i.pass)
        .map(|i| i.id.clone())
        .chain(
            drift
                .iter()
                .filter(|d| !d.pass)
                .map(|d| format!("baseline:{}", d.id)),
        )
        .collect();

    create_dir(out)?;
    let lab = LabReports {
        reports: &suite.reports,
        norm_equivalence: &suite.norm_equivalence,
        contraction,
        hardy,
        decomposition,
    };
    write_file(
        &out.join("lab_reports.json"),
        stamped_json(&lab, &digest).as_bytes(),
    )?;
    let verify = VerifyFile {
        invariants: &invariants,
        drift: &drift,
        failures: &failures,
    };
    write_file(
        &out.join("verify.json"),
        stamped_json(&verify, &digest).as_bytes(),
    )?;
    let observed = Observed {
        baselines: &suite.statistics,
    };
    write_file(
        &out.join("observed_baselines.json"),
        stamped_json(&observed, &digest).as_bytes(),
    )?;

    if !failures.is_empty() {
        return Err(HarnessError::Verification(failures));
    }
    Ok(VerifyOutcome {
        invariants,
        drift,
        failures,
    })
}

/// Reads baselines either as a flat `{id: value}` object or as the
/// `observed_baselines.json` written by `verify`.
pub fn load_baselines(text: &str) -> Result<Baselines, HarnessError> {
    let bad = |msg: String| HarnessError::Config {
        path: "--baselines".into(),
        msg,
    };
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let map = v.get("baselines").cloned().unwrap_or(v);
    serde_json::from_value(map).map_err(|e| bad(e.to_string()))
}
