//! Writers for traces, tables, reports and plots. Every file carries the
//! config digest; float formatting is fixed so identical runs give identical
//! bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use muskat_core::solver::EnergyRecord;
use serde::Serialize;

use crate::error::HarnessError;

pub const TRACE_HEADER: &str = "t,l2,A,B,delta,mu,lyapunov";

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a header, fixed-format rows and a trailing `# config_digest=`
/// line.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>, digest: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let _ = writeln!(out, "# config_digest={digest}");
    out
}

pub fn trace_csv(records: &[EnergyRecord], digest: &str) -> String {
    let rows = records.iter().map(|r| {
        [r.t, r.l2, r.a, r.b, r.delta, r.mu, r.lyapunov]
            .iter()
            .map(|&x| fmt_float(x))
            .collect()
    });
    csv(TRACE_HEADER, rows, digest)
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    version: &'static str,
    config_digest: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON of `body` (a struct or map) with the version and digest added
/// in front.
pub fn stamped_json<T: Serialize>(body: &T, digest: &str) -> String {
    let stamped = Stamped {
        version: env!("CARGO_PKG_VERSION"),
        config_digest: digest,
        body,
    };
    let mut s = serde_json::to_string_pretty(&stamped).expect("reports serialise");
    s.push('\n');
    s
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 150.0;
const MARGIN: f64 = 60.0;

/// Line plot of `l2`, `A` and `B` against `t`, one panel per series with its
/// own vertical range.
pub fn trace_svg(records: &[EnergyRecord], digest: &str) -> String {
    type Series = (&'static str, fn(&EnergyRecord) -> f64);
    let series: [Series; 3] = [("l2", |r| r.l2), ("A", |r| r.a), ("B", |r| r.b)];
    let width = PANEL_W + 2.0 * MARGIN;
    let height = series.len() as f64 * (PANEL_H + MARGIN) + MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<desc>config_digest={digest}</desc>");
    let t_max = records.last().map_or(0.0, |r| r.t);
    for (p, (name, pick)) in series.iter().enumerate() {
        let top = MARGIN + p as f64 * (PANEL_H + MARGIN);
        let values: Vec<f64> = records.iter().map(pick).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // a flat series gets a unit band so it draws as a line
        let (lo, hi) = if records.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let x = |t: f64| {
            MARGIN
                + if t_max > 0.0 {
                    PANEL_W * t / t_max
                } else {
                    0.0
                }
        };
        let y = |v: f64| top + PANEL_H * (hi - v) / (hi - lo);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{:.1}">{name}</text>"#,
            top - 6.0
        );
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{hi:.3e}</text>"#, top + 12.0);
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{lo:.3e}</text>"#, top + PANEL_H);
        let points: Vec<String> = records
            .iter()
            .zip(&values)
            .map(|(r, &v)| format!("{:.2},{:.2}", x(r.t), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
    }
    let bottom = height - MARGIN + 20.0;
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{bottom}">t = 0</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{bottom}" text-anchor="end">t = {t_max}</text>"#,
        MARGIN + PANEL_W
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> EnergyRecord {
        EnergyRecord {
            t,
            l2: 1.0 - 0.1 * t,
            a: 0.5,
            b: 0.25,
            delta: 1.0,
            mu: 1.0,
            lyapunov: 0.0,
        }
    }

    #[test]
    fn trace_csv_layout() {
        let s = trace_csv(&[rec(0.0), rec(1.0)], "abc");
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1].split(',').count(), 7);
        assert!(lines[2].starts_with("1.0000000000000000e0,9.0000000000000002e-1"));
        assert_eq!(lines[3], "# config_digest=abc");
    }

    #[test]
    fn stamped_json_puts_the_digest_first() {
        #[derive(Serialize)]
        struct B {
            x: f64,
        }
        let s = stamped_json(&B { x: 1.5 }, "d");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["config_digest"], "d");
        assert_eq!(v["x"], 1.5);
        assert!(s.find("config_digest").unwrap() < s.find("\"x\"").unwrap());
    }

    #[test]
    fn svg_survives_flat_and_empty_series() {
        assert!(trace_svg(&[rec(0.0)], "d").contains("config_digest=d"));
        assert!(trace_svg(&[], "d").ends_with("</svg>\n"));
    }
}
