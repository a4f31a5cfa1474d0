//! File formats: shot-set CSV with a metadata sidecar, scan-data CSV, and
//! key-value report documents.
//!
//! All floating-point output is printed with 17 significant digits so files
//! round-trip bit-exactly through `f64`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::EstimateReport;
use crate::fitting::{FitResult, ScanAxis, ScanData, ScanPoint};
use crate::sampling::{RunMeta, ShotRecord, ShotSet};
use crate::statistics::Grouping;

/// 17 significant digits: exact round trip for any finite `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sidecar metadata path for a data file: `run.csv` -> `run.meta.toml`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta.toml")
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// shot sets
// ---------------------------------------------------------------------------

/// Write a shot set as `shot,m1,m2,m3` CSV plus a TOML sidecar carrying every
/// generation parameter and the seed.
pub fn write_shot_set(set: &ShotSet, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(set.len() * 64 + 32);
    out.push_str("shot,m1,m2,m3\n");
    for (i, r) in set.records().iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            fmt_float(r.m1),
            fmt_float(r.m2),
            fmt_float(r.m3)
        ));
    }
    fs::write(path, out)?;

    let meta = toml::to_string_pretty(set.meta())
        .map_err(|e| parse_err(path, format!("metadata serialization failed: {e}")))?;
    fs::write(sidecar_path(path), meta)?;
    Ok(())
}

/// Read a shot set written by [`write_shot_set`] (CSV plus sidecar).
pub fn read_shot_set(path: &Path) -> Result<ShotSet> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path)?;
    let meta: RunMeta = toml::from_str(&meta_text)
        .map_err(|e| parse_err(&meta_path, format!("bad metadata: {e}")))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(path, e.to_string()))?;
        if row.len() != 4 {
            return Err(parse_err(path, format!("expected 4 columns, got {}", row.len())));
        }
        let field = |i: usize| -> Result<f64> {
            row[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(path, format!("bad float {:?}: {e}", &row[i])))
        };
        records.push(ShotRecord {
            m1: field(1)?,
            m2: field(2)?,
            m3: field(3)?,
        });
    }
    ShotSet::from_records(records, meta)
}

// ---------------------------------------------------------------------------
// scan data (for fitting)
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct ScanDataMeta {
    scanned_axis: ScanAxis,
    z: f64,
}

/// Write fit input data as `x,M1,Msum` CSV plus a sidecar naming the scanned
/// axis and the interaction length.
pub fn write_scan_data(data: &ScanData, path: &Path) -> Result<()> {
    let mut out = String::from("x,M1,Msum\n");
    for p in &data.points {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_float(p.x),
            fmt_float(p.m1),
            fmt_float(p.msum)
        ));
    }
    fs::write(path, out)?;
    let meta = ScanDataMeta {
        scanned_axis: data.scanned_axis,
        z: data.z,
    };
    let text = toml::to_string_pretty(&meta)
        .map_err(|e| parse_err(path, format!("metadata serialization failed: {e}")))?;
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub fn read_scan_data(path: &Path) -> Result<ScanData> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path)?;
    let meta: ScanDataMeta = toml::from_str(&meta_text)
        .map_err(|e| parse_err(&meta_path, format!("bad metadata: {e}")))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(path, e.to_string()))?;
        if row.len() != 3 {
            return Err(parse_err(path, format!("expected 3 columns, got {}", row.len())));
        }
        let field = |i: usize| -> Result<f64> {
            row[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(path, format!("bad float {:?}: {e}", &row[i])))
        };
        points.push(ScanPoint {
            x: field(0)?,
            m1: field(1)?,
            msum: field(2)?,
        });
    }
    let data = ScanData {
        points,
        scanned_axis: meta.scanned_axis,
        z: meta.z,
    };
    data.validate()?;
    Ok(data)
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

/// Render an estimate report as a key-value document.
pub fn estimate_report_text(report: &EstimateReport) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("shots_used", report.shots_used.to_string());
    line("dark_corrected", report.dark_corrected.to_string());
    for j in 0..3 {
        line(&format!("mean_{}", j + 1), fmt_float(report.mean[j]));
        line(
            &format!("stderr_mean_{}", j + 1),
            fmt_float(report.stderr_mean[j]),
        );
    }
    for g in Grouping::ALL {
        if let Some(v) = report.eps_hat.get(&g) {
            line(&format!("eps_{}", g.key()), fmt_float(*v));
        }
        if let Some(v) = report.stderr_eps.get(&g) {
            line(&format!("stderr_eps_{}", g.key()), fmt_float(*v));
        }
        if let Some(v) = report.r_hat.get(&g) {
            line(&format!("r_{}", g.key()), fmt_float(*v));
        }
        if let Some(v) = report.stderr_r.get(&g) {
            line(&format!("stderr_r_{}", g.key()), fmt_float(*v));
        }
    }
    for u in &report.undefined {
        line("undefined", format!("{u:?}"));
    }
    out
}

/// Header for the one-line CSV rendering of an estimate report.
pub const ESTIMATE_CSV_HEADER: &str = "shots,dark_corrected,mean_1,mean_2,mean_3,\
eps_12,eps_13,eps_23,eps_1_23,r_12,r_13,r_23,r_1_23,stderr_r_1_23";

/// One-line CSV rendering for scan aggregation; undefined entries are empty.
pub fn estimate_csv_row(report: &EstimateReport) -> String {
    let opt = |v: Option<&f64>| v.map(|v| fmt_float(*v)).unwrap_or_default();
    let mut fields = vec![
        report.shots_used.to_string(),
        report.dark_corrected.to_string(),
    ];
    fields.extend(report.mean.iter().map(|m| fmt_float(*m)));
    for g in [
        Grouping::Arm1Arm2,
        Grouping::Arm1Arm3,
        Grouping::Arm2Arm3,
        Grouping::Arm1VsSum,
    ] {
        fields.push(opt(report.eps_hat.get(&g)));
    }
    for g in [
        Grouping::Arm1Arm2,
        Grouping::Arm1Arm3,
        Grouping::Arm2Arm3,
        Grouping::Arm1VsSum,
    ] {
        fields.push(opt(report.r_hat.get(&g)));
    }
    fields.push(opt(report.stderr_r.get(&Grouping::Arm1VsSum)));
    fields.join(",")
}

/// Render a fit result as a key-value document.
pub fn fit_result_text(result: &FitResult) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("converged", result.converged.to_string());
    line("rss", fmt_float(result.rss));
    line("evaluations", result.evaluations.to_string());
    line("fixed_coupling", fmt_float(result.fixed_coupling));
    line("eta_1", fmt_float(result.eta_1));
    line("eta_sum", fmt_float(result.eta_sum));
    line("mu_scale", fmt_float(result.mu_scale));
    for (name, (lo, hi)) in &result.confidence {
        line(
            &format!("ci95_{name}"),
            format!("[{}, {}]", fmt_float(*lo), fmt_float(*hi)),
        );
    }
    out
}

/// Write text to a path, or to stdout when no path is given.
pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
