//! Confidence Region Calibration (CRC) curves.
//!
//! A CRC curve records, for every `delta` on a uniform grid, the fraction of
//! regions that miss the true label and the average region width. Regions are
//! well-calibrated when the error fraction never exceeds `delta`. Two scalar
//! summaries are derived from the curve: the area of the error line above the
//! diagonal and the area under the width line.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ForecastVector, OrderedForecast};
use crate::util::write_atomic;

pub const DEFAULT_GRID_INTERVALS: usize = 100;
pub const DEFAULT_LOOSE_TOLERANCE: f64 = 1e-4;

const CRC_HEADER: [&str; 4] = ["confidence", "delta", "err", "unc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrcCurve {
    grid_deltas: Vec<f64>,
    err_at: Vec<f64>,
    unc_at: Vec<f64>,
    n: usize,
}

impl CrcCurve {
    pub fn new(grid_deltas: Vec<f64>, err_at: Vec<f64>, unc_at: Vec<f64>, n: usize) -> Result<Self> {
        let len = grid_deltas.len();
        if len < 2 {
            return Err(Error::InvalidParameter(format!(
                "a CRC curve needs at least 2 grid points, got {len}"
            )));
        }
        if err_at.len() != len || unc_at.len() != len {
            return Err(Error::LengthMismatch(format!(
                "grid has {len} points, err has {}, unc has {}",
                err_at.len(),
                unc_at.len()
            )));
        }
        if grid_deltas[0] != 0.0 || grid_deltas[len - 1] != 1.0 {
            return Err(Error::InvalidParameter(
                "CRC grid must start at delta 0 and end at delta 1".into(),
            ));
        }
        if grid_deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "CRC grid deltas must be strictly ascending".into(),
            ));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !err_at.iter().all(in_unit) || !unc_at.iter().all(in_unit) {
            return Err(Error::InvalidParameter(
                "CRC err and unc values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            grid_deltas,
            err_at,
            unc_at,
            n,
        })
    }

    pub fn grid_deltas(&self) -> &[f64] {
        &self.grid_deltas
    }

    pub fn err_at(&self) -> &[f64] {
        &self.err_at
    }

    pub fn unc_at(&self) -> &[f64] {
        &self.unc_at
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.grid_deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_deltas.is_empty()
    }

    pub fn grid_intervals(&self) -> usize {
        self.grid_deltas.len() - 1
    }
}

/// `{0, 1/g, ..., 1}`.
pub fn uniform_grid(intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| i as f64 / intervals as f64)
        .collect()
}

/// CRC curve of a labeled forecast batch on a uniform grid of
/// `grid_intervals` intervals.
pub fn compute_crc_curve(forecasts: &[ForecastVector], grid_intervals: usize) -> Result<CrcCurve> {
    if grid_intervals < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 intervals, got {grid_intervals}"
        )));
    }
    let Some(first) = forecasts.first() else {
        return Err(Error::LengthMismatch("no forecasts for a CRC curve".into()));
    };
    let num_labels = first.num_labels();
    let mut ordered = Vec::with_capacity(forecasts.len());
    for f in forecasts {
        if f.true_label().is_none() {
            return Err(Error::MissingTrueLabel(f.example_id().to_string()));
        }
        if f.num_labels() != num_labels {
            return Err(Error::InvalidForecast {
                example_id: f.example_id().to_string(),
                reason: format!("has {} labels, batch expects {num_labels}", f.num_labels()),
            });
        }
        ordered.push(OrderedForecast::new(f));
    }

    let grid = uniform_grid(grid_intervals);
    let n = forecasts.len();
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&delta| {
            let mut errors = 0usize;
            let mut width = 0usize;
            for o in &ordered {
                errors += usize::from(o.errs(delta).unwrap_or(false));
                width += o.region_size(delta);
            }
            (
                errors as f64 / n as f64,
                width as f64 / (n * num_labels) as f64,
            )
        })
        .collect();
    let (err_at, unc_at) = points.into_iter().unzip();
    CrcCurve::new(grid, err_at, unc_at, n)
}

/// Area of `max(0, err - delta)` over `delta`, by the trapezium rule with the
/// diagonal crossing interpolated inside intervals where the sign changes.
pub fn err_above_area(curve: &CrcCurve) -> f64 {
    let excess: Vec<f64> = curve
        .grid_deltas
        .iter()
        .zip(&curve.err_at)
        .map(|(d, e)| e - d)
        .collect();
    curve
        .grid_deltas
        .windows(2)
        .zip(excess.windows(2))
        .map(|(d, f)| positive_part_area(d[1] - d[0], f[0], f[1]))
        .sum()
}

fn positive_part_area(width: f64, f0: f64, f1: f64) -> f64 {
    if f0 <= 0.0 && f1 <= 0.0 {
        0.0
    } else if f0 >= 0.0 && f1 >= 0.0 {
        width * (f0 + f1) / 2.0
    } else if f0 > 0.0 {
        // triangle from the left end to the crossing
        width * f0 * f0 / (f0 - f1) / 2.0
    } else {
        width * f1 * f1 / (f1 - f0) / 2.0
    }
}

/// Trapezium-rule area under the average width line.
pub fn avg_width_area(curve: &CrcCurve) -> f64 {
    curve
        .grid_deltas
        .windows(2)
        .zip(curve.unc_at.windows(2))
        .map(|(d, u)| (d[1] - d[0]) * (u[0] + u[1]) / 2.0)
        .sum()
}

/// Strict and loosened well-calibratedness of a CRC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationVerdict {
    pub err_above_area: f64,
    pub avg_width_area: f64,
    pub strict_calibrated: bool,
    pub loose_calibrated: bool,
    pub loose_tolerance: f64,
}

impl CalibrationVerdict {
    pub fn from_areas(err_above_area: f64, avg_width_area: f64, loose_tolerance: f64) -> Self {
        Self {
            err_above_area,
            avg_width_area,
            strict_calibrated: err_above_area == 0.0,
            loose_calibrated: err_above_area <= loose_tolerance,
            loose_tolerance,
        }
    }
}

pub fn verdict(curve: &CrcCurve, loose_tolerance: f64) -> Result<CalibrationVerdict> {
    if loose_tolerance.is_nan() || loose_tolerance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "loose tolerance {loose_tolerance} must be >= 0"
        )));
    }
    Ok(CalibrationVerdict::from_areas(
        err_above_area(curve),
        avg_width_area(curve),
        loose_tolerance,
    ))
}

/// JSON summary written next to a CRC table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrcSummary {
    pub n: usize,
    pub grid_intervals: usize,
    pub err_above_area: f64,
    pub avg_width_area: f64,
    pub strict_calibrated: bool,
    pub loose_calibrated: bool,
    pub loose_tolerance: f64,
}

impl CrcSummary {
    pub fn new(curve: &CrcCurve, verdict: &CalibrationVerdict) -> Self {
        Self {
            n: curve.n,
            grid_intervals: curve.grid_intervals(),
            err_above_area: verdict.err_above_area,
            avg_width_area: verdict.avg_width_area,
            strict_calibrated: verdict.strict_calibrated,
            loose_calibrated: verdict.loose_calibrated,
            loose_tolerance: verdict.loose_tolerance,
        }
    }
}

/// Writes the CRC table as CSV, one row per grid point, confidence descending
/// from 1. Floats use the shortest representation that round-trips.
pub fn write_crc_table<W: Write>(curve: &CrcCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::parse(0, e.to_string());
    w.write_record(CRC_HEADER).map_err(csv_err)?;
    for i in 0..curve.len() {
        let delta = curve.grid_deltas[i];
        w.write_record([
            (1.0 - delta).to_string(),
            delta.to_string(),
            curve.err_at[i].to_string(),
            curve.unc_at[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(())
}

/// Parses a CRC table. `n` is not stored in the table and is reported as 0.
pub fn read_crc_table<R: Read>(input: R) -> Result<CrcCurve> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if header.iter().ne(CRC_HEADER) {
        return Err(Error::parse(
            1,
            format!("expected header `{}`", CRC_HEADER.join(",")),
        ));
    }
    let (mut grid, mut err, mut unc) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if record.len() != 4 {
            return Err(Error::parse(line, format!("expected 4 fields, got {}", record.len())));
        }
        let field = |k: usize| -> Result<f64> {
            record[k].trim().parse::<f64>().map_err(|_| {
                Error::parse(line, format!("`{}` is not a number ({})", &record[k], CRC_HEADER[k]))
            })
        };
        grid.push(field(1)?);
        err.push(field(2)?);
        unc.push(field(3)?);
    }
    if grid.is_empty() {
        return Err(Error::parse(1, "CRC table has no rows"));
    }
    CrcCurve::new(grid, err, unc, 0)
}

/// Writes `crc.csv` and `summary.json` (and `crc.svg` when asked) into `dir`.
pub fn emit_crc_data(
    curve: &CrcCurve,
    verdict: &CalibrationVerdict,
    dir: &Path,
    with_svg: bool,
) -> Result<()> {
    let mut table = Vec::new();
    write_crc_table(curve, &mut table)?;
    write_atomic(&dir.join("crc.csv"), &table)?;

    let mut summary = serde_json::to_vec_pretty(&CrcSummary::new(curve, verdict))?;
    summary.push(b'\n');
    write_atomic(&dir.join("summary.json"), &summary)?;

    if with_svg {
        write_atomic(&dir.join("crc.svg"), crate::svg::render_crc_svg(curve).as_bytes())?;
    }
    Ok(())
}
