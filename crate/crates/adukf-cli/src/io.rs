//! Strict CSV writers and readers: fixed column order, '.' decimals, exact
//! headers, newline-terminated rows, metadata lines prefixed with '#'.

use std::io::Write;
use std::path::Path;

use adukf::scenario::{MeasurementSample, TruthSample, NOISE_GENERATOR_ID};

use crate::AppError;

pub const TRUTH_HEADER: &str = "t_d,u_Lpd,x1,x2,x3,x4,x5,x6,y1_clean,y2_clean,y3_clean";
pub const MEASUREMENTS_HEADER: &str = "t_d,u_Lpd,y1,y2,y3";
pub const ESTIMATES_HEADER: &str =
    "t_d,xhat1,xhat2,xhat3,xhat4,xhat5,xhat6,P_diag1,P_diag2,P_diag3,P_diag4,P_diag5,P_diag6";
pub const SUMMARY_HEADER: &str =
    "seed,variant,gamma,nrmse_x,nrmse_y,wall_time_s,median_cost_evals,median_iters,error";

fn io_err(path: &Path, e: std::io::Error) -> AppError {
    AppError::usage(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, content: &str) -> Result<(), AppError> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| io_err(path, e))
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

pub fn write_truth(path: &Path, seed: u64, truth: &[TruthSample<f64>]) -> Result<(), AppError> {
    let mut out = format!("# seed={seed} generator={NOISE_GENERATOR_ID}\n{TRUTH_HEADER}\n");
    for s in truth {
        let mut row = vec![s.t, s.u];
        row.extend_from_slice(&s.x);
        row.extend_from_slice(&s.y_clean);
        push_row(&mut out, &row);
    }
    write_file(path, &out)
}

pub fn write_measurements(
    path: &Path,
    seed: u64,
    series: &[MeasurementSample<f64>],
) -> Result<(), AppError> {
    let mut out = format!("# seed={seed} generator={NOISE_GENERATOR_ID}\n{MEASUREMENTS_HEADER}\n");
    for s in series {
        let mut row = vec![s.t, s.u];
        row.extend_from_slice(&s.y);
        push_row(&mut out, &row);
    }
    write_file(path, &out)
}

/// One estimate row: time, posterior mean, covariance diagonal.
pub struct EstimateRow {
    pub t: f64,
    pub mean: Vec<f64>,
    pub p_diag: Vec<f64>,
}

pub fn write_estimates(path: &Path, rows: &[EstimateRow]) -> Result<(), AppError> {
    let mut out = format!("{ESTIMATES_HEADER}\n");
    for r in rows {
        let mut row = vec![r.t];
        row.extend_from_slice(&r.mean);
        row.extend_from_slice(&r.p_diag);
        push_row(&mut out, &row);
    }
    write_file(path, &out)
}

/// Parsed measurement file: `(t, u, y)` per row.
pub struct MeasurementFile {
    pub rows: Vec<(f64, f64, [f64; 3])>,
}

pub fn read_measurements(path: &Path) -> Result<MeasurementFile, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| AppError::usage(format!("{}: empty file", path.display())))?;
    if header != MEASUREMENTS_HEADER {
        return Err(AppError::usage(format!(
            "{}: header mismatch: expected '{MEASUREMENTS_HEADER}', found '{header}'",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(AppError::usage(format!(
                "{}: row {}: expected 5 columns, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 5];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|e| {
                AppError::usage(format!("{}: row {}: {e}", path.display(), lineno + 1))
            })?;
        }
        rows.push((vals[0], vals[1], [vals[2], vals[3], vals[4]]));
    }
    if rows.is_empty() {
        return Err(AppError::usage(format!("{}: no data rows", path.display())));
    }
    Ok(MeasurementFile { rows })
}

/// One summary row of the benchmark sweep.
pub struct SummaryRow {
    pub seed: u64,
    pub variant: String,
    pub gamma: f64,
    pub nrmse_x: Option<f64>,
    pub nrmse_y: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub median_cost_evals: Option<f64>,
    pub median_iters: Option<f64>,
    pub error: Option<String>,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), AppError> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(',', ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.variant,
            r.gamma,
            opt(r.nrmse_x),
            opt(r.nrmse_y),
            opt(r.wall_time_s),
            opt(r.median_cost_evals),
            opt(r.median_iters),
            err
        ));
    }
    write_file(path, &out)
}
