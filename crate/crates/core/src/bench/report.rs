use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::svg::{heatmap, line_chart, Series};
use super::MetricTable;
use crate::error::{config_err, Result};
use crate::estimator::{write_records_csv, EstimateRecord};
use crate::linalg::Matrix;
use crate::nn::write_attention_csv;

/// Files written on every report; the attention heatmap pair is added when a
/// map is supplied.
pub const REPORT_FILES: [&str; 11] = [
    "rmse_vs_snr.csv",
    "cdf_aoa.csv",
    "cdf_toa.csv",
    "cdf_pos.csv",
    "records.csv",
    "rmse_aoa_vs_snr.svg",
    "rmse_toa_vs_snr.svg",
    "rmse_pos_vs_snr.svg",
    "cdf_aoa.svg",
    "cdf_toa.svg",
    "cdf_pos.svg",
];

/// Writes `bytes` to a hidden temporary next to `path`, then renames it over
/// `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn rmse_csv(table: &MetricTable) -> String {
    let mut s = String::from("method,snr_db,rmse_aoa_deg,rmse_toa_ns,rmse_pos_m\n");
    for r in &table.rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.method, r.snr_db, r.rmse_aoa_deg, r.rmse_toa_ns, r.rmse_pos_m));
    }
    s
}

/// `(value, fraction ≤ value)` at each distinct value of an ascending list.
pub(crate) fn cdf_steps(sorted: &[f64]) -> Vec<(f64, f64)> {
    let n = sorted.len();
    (0..n)
        .filter(|&i| i + 1 == n || sorted[i + 1] != sorted[i])
        .map(|i| (sorted[i], (i + 1) as f64 / n as f64))
        .collect()
}

fn cdf_csv(table: &MetricTable, pick: impl Fn(&super::MethodErrors) -> &Vec<f64>) -> String {
    let mut s = String::from("method,error_value,cdf\n");
    for (method, errs) in &table.errors {
        for (v, f) in cdf_steps(pick(errs)) {
            s.push_str(&format!("{method},{v},{f}\n"));
        }
    }
    s
}

fn rmse_series(table: &MetricTable, pick: impl Fn(&super::MetricRow) -> f64) -> Vec<Series> {
    table
        .methods()
        .into_iter()
        .map(|m| Series {
            label: m.to_string(),
            points: table.rows.iter().filter(|r| r.method == m).map(|r| (r.snr_db, pick(r))).collect(),
        })
        .collect()
}

fn cdf_series(table: &MetricTable, pick: impl Fn(&super::MethodErrors) -> &Vec<f64>) -> Vec<Series> {
    table
        .errors
        .iter()
        .map(|(m, e)| Series { label: m.to_string(), points: cdf_steps(pick(e)) })
        .collect()
}

/// Writes CSV tables, raw records and SVG plots into `out_dir`. Fails
/// before touching the filesystem when the table holds no method.
pub fn emit_report(
    table: &MetricTable,
    records: &[EstimateRecord],
    attention: Option<&Matrix>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if table.errors.is_empty() {
        return Err(config_err("report has no methods"));
    }
    fs::create_dir_all(out_dir)?;
    let mut files: Vec<(&str, Vec<u8>)> = vec![
        ("rmse_vs_snr.csv", rmse_csv(table).into_bytes()),
        ("cdf_aoa.csv", cdf_csv(table, |e| &e.aoa_deg).into_bytes()),
        ("cdf_toa.csv", cdf_csv(table, |e| &e.toa_ns).into_bytes()),
        ("cdf_pos.csv", cdf_csv(table, |e| &e.pos_m).into_bytes()),
    ];
    let mut rec = Vec::new();
    write_records_csv(&mut rec, records)?;
    files.push(("records.csv", rec));
    let charts = [
        ("rmse_aoa_vs_snr.svg", "AoA RMSE versus SNR", "SNR (dB)", "RMSE (deg)", rmse_series(table, |r| r.rmse_aoa_deg)),
        ("rmse_toa_vs_snr.svg", "ToA RMSE versus SNR", "SNR (dB)", "RMSE (ns)", rmse_series(table, |r| r.rmse_toa_ns)),
        ("rmse_pos_vs_snr.svg", "Position RMSE versus SNR", "SNR (dB)", "RMSE (m)", rmse_series(table, |r| r.rmse_pos_m)),
        ("cdf_aoa.svg", "AoA error CDF", "absolute error (deg)", "CDF", cdf_series(table, |e| &e.aoa_deg)),
        ("cdf_toa.svg", "ToA error CDF", "absolute error (ns)", "CDF", cdf_series(table, |e| &e.toa_ns)),
        ("cdf_pos.svg", "Position error CDF", "absolute error (m)", "CDF", cdf_series(table, |e| &e.pos_m)),
    ];
    for (name, title, x, y, series) in charts {
        files.push((name, line_chart(title, x, y, &series).into_bytes()));
    }
    if let Some(map) = attention {
        let mut csv = Vec::new();
        write_attention_csv(map, &mut csv)?;
        files.push(("attention_heatmap.csv", csv));
        files.push(("attention_heatmap.svg", heatmap("Mean attention", map, "query token", "key token").into_bytes()));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
