//! Error and field statistics: per-frame mean-L1 displacement error,
//! cross-method error ratios, strain statistics from solved gradient
//! parameters, and ordinary least-squares line fits.

use std::path::Path;

use crate::engine::DisplacementField;
use crate::error::{Error, Result};
use crate::shapefn::Monomial;
use crate::synth::GroundTruth;

/// Mean absolute error and standard deviation of one displacement
/// component over the converged points of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentError {
    /// Mean L1 deviation from the ground truth, pixels.
    pub mean_l1: f64,
    /// Standard deviation of the signed deviations, pixels.
    pub sd: f64,
}

/// Per-frame measurement error, computed separately for `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameError {
    pub frame: usize,
    pub u: ComponentError,
    pub v: ComponentError,
    pub n_converged: usize,
    pub n_total: usize,
}

fn component_stats(devs: &[f64]) -> ComponentError {
    let n = devs.len() as f64;
    let mean_l1 = devs.iter().map(|d| d.abs()).sum::<f64>() / n;
    let mean = devs.iter().sum::<f64>() / n;
    let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    ComponentError {
        mean_l1,
        sd: var.sqrt(),
    }
}

/// Compares a field against the exact ground truth over converged points.
pub fn frame_error(field: &DisplacementField, truth: &GroundTruth) -> Result<FrameError> {
    let mut du = Vec::with_capacity(field.points.len());
    let mut dv = Vec::with_capacity(field.points.len());
    for (x, y, params) in field.converged_points() {
        let (u_true, v_true) = truth.displacement(field.frame, x, y);
        let (u, v) = params.displacement();
        du.push(u - u_true);
        dv.push(v - v_true);
    }
    if du.is_empty() {
        return Err(Error::NoConvergedPoints);
    }
    Ok(FrameError {
        frame: field.frame,
        u: component_stats(&du),
        v: component_stats(&dv),
        n_converged: du.len(),
        n_total: field.points.len(),
    })
}

/// Ratio of mean errors over the frames retained by `filter` (applied to
/// the first tuple element, typically time in seconds):
/// `mean(a) / mean(b)`.
///
/// Both lists must cover the same frames after filtering.
pub fn error_ratio(
    errors_a: &[(f64, f64)],
    errors_b: &[(f64, f64)],
    filter: impl Fn(f64) -> bool,
) -> Result<f64> {
    let a: Vec<&(f64, f64)> = errors_a.iter().filter(|(t, _)| filter(*t)).collect();
    let b: Vec<&(f64, f64)> = errors_b.iter().filter(|(t, _)| filter(*t)).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mean_a = a.iter().map(|(_, e)| e).sum::<f64>() / a.len() as f64;
    let mean_b = b.iter().map(|(_, e)| e).sum::<f64>() / b.len() as f64;
    Ok(mean_a / mean_b)
}

/// Mean and spread of the solved first-order strain parameters over the
/// converged points of a field. No numerical differentiation is involved;
/// the statistics read the `u_x` and `v_y` parameters directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainStats {
    pub mean_ux: f64,
    pub mean_vy: f64,
    pub sd_ux: f64,
    pub sd_vy: f64,
    pub n: usize,
}

pub fn strain_stats(field: &DisplacementField) -> Result<StrainStats> {
    if !field.layout.contains(Monomial::X) || !field.layout.contains(Monomial::Y) {
        return Err(Error::SpecLacksGradients);
    }
    let mut ux = Vec::new();
    let mut vy = Vec::new();
    for (_, _, params) in field.converged_points() {
        ux.push(params.u_coeff(Monomial::X));
        vy.push(params.v_coeff(Monomial::Y));
    }
    if ux.is_empty() {
        return Err(Error::NoConvergedPoints);
    }
    let sx = component_stats(&ux);
    let sy = component_stats(&vy);
    let n = ux.len() as f64;
    Ok(StrainStats {
        mean_ux: ux.iter().sum::<f64>() / n,
        mean_vy: vy.iter().sum::<f64>() / n,
        sd_ux: sx.sd,
        sd_vy: sy.sd,
        n: ux.len(),
    })
}

/// Ordinary least-squares line fit with the coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `1 - SS_res / SS_tot`; defined as 0 when the ordinate has zero
    /// variance (see `zero_variance_y`).
    pub r_squared: f64,
    pub zero_variance_y: bool,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::DegenerateAbscissa);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx = x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>();
    if sxx <= 0.0 {
        return Err(Error::DegenerateAbscissa);
    }
    let sxy = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>();
    let ss_res = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum::<f64>();
    let zero_variance_y = ss_tot == 0.0;
    let r_squared = if zero_variance_y {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        zero_variance_y,
    })
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::BadCsvFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes per-frame errors of several runs:
/// `frame, method, noise_level, mean_l1_u, sd_u, mean_l1_v, sd_v, n_converged`.
pub fn write_frame_errors_csv(
    path: impl AsRef<Path>,
    rows: &[(String, f64, FrameError)],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record([
        "frame",
        "method",
        "noise_level",
        "mean_l1_u",
        "sd_u",
        "mean_l1_v",
        "sd_v",
        "n_converged",
    ])
    .map_err(csv_error(path))?;
    for (method, noise, e) in rows {
        w.write_record(&[
            e.frame.to_string(),
            method.clone(),
            format!("{noise}"),
            format!("{}", e.u.mean_l1),
            format!("{}", e.u.sd),
            format!("{}", e.v.mean_l1),
            format!("{}", e.v.sd),
            e.n_converged.to_string(),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back [`write_frame_errors_csv`] output.
pub fn read_frame_errors_csv(path: impl AsRef<Path>) -> Result<Vec<(String, f64, FrameError)>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::BadCsvFile {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error(path))?;
        let field = |i: usize| -> Result<&str> {
            row.get(i).ok_or_else(|| bad(format!("short row at {i}")))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| bad(format!("bad number: {e}")))
        };
        rows.push((
            field(1)?.to_string(),
            num(2)?,
            FrameError {
                frame: field(0)?
                    .parse()
                    .map_err(|e| bad(format!("bad frame: {e}")))?,
                u: ComponentError {
                    mean_l1: num(3)?,
                    sd: num(4)?,
                },
                v: ComponentError {
                    mean_l1: num(5)?,
                    sd: num(6)?,
                },
                n_converged: field(7)?
                    .parse()
                    .map_err(|e| bad(format!("bad count: {e}")))?,
                n_total: 0,
            },
        ));
    }
    Ok(rows)
}

/// Writes a ratio table: rows are noise levels, columns the methods
/// normalized by a baseline method.
pub fn write_ratio_table_csv(
    path: impl AsRef<Path>,
    method_names: &[String],
    rows: &[(f64, Vec<f64>)],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    let mut header = vec!["noise_pct".to_string()];
    header.extend(method_names.iter().cloned());
    w.write_record(&header).map_err(csv_error(path))?;
    for (noise, values) in rows {
        let mut record = vec![format!("{noise}")];
        record.extend(values.iter().map(|v| format!("{v}")));
        w.write_record(&record).map_err(csv_error(path))?;
    }
    w.flush()?;
    Ok(())
}
