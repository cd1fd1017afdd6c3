//! Forecast and region CSV formats.
//!
//! Forecast CSV: header `example_id,true_label,p_<label1>,...,p_<labelK>`.
//! Label names come from the header; `true_label` holds a label name or is
//! empty.
//!
//! Region CSV: header `example_id,delta,members,excluded_mass,err`, members
//! joined by `;` with the most probable first, `err` empty when the true label
//! is unknown.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::forecast::{ForecastVector, LabelId, LabelSpace, RegionPrediction};
use crate::metrics::err_indicator;

pub const REGION_HEADER: [&str; 5] = ["example_id", "delta", "members", "excluded_mass", "err"];

fn csv_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

pub fn read_forecast_csv<R: Read>(input: R) -> Result<(LabelSpace, Vec<ForecastVector>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    if header.len() < 4 || &header[0] != "example_id" || &header[1] != "true_label" {
        return Err(Error::parse(
            1,
            "expected header `example_id,true_label,p_<label>,...` with at least 2 labels",
        ));
    }
    let names = header
        .iter()
        .skip(2)
        .map(|h| {
            h.strip_prefix("p_")
                .map(str::to_string)
                .ok_or_else(|| Error::parse(1, format!("column `{h}` must start with `p_`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let space = LabelSpace::new(names).map_err(|e| Error::parse(1, e.to_string()))?;

    let mut forecasts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        let line = csv_line(&record, i + 2);
        if record.len() != header.len() {
            return Err(Error::parse(
                line,
                format!(
                    "expected {} probability columns, got {}",
                    space.len(),
                    record.len().saturating_sub(2)
                ),
            ));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(Error::parse(line, "empty example_id"));
        }
        let true_label = match &record[1] {
            "" => None,
            name => Some(
                space
                    .id_of(name)
                    .ok_or_else(|| Error::parse(line, format!("unknown true label `{name}`")))?,
            ),
        };
        let probs = record
            .iter()
            .skip(2)
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("`{cell}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let forecast = ForecastVector::new(id, probs, true_label)
            .map_err(|e| Error::parse(line, e.to_string()))?;
        forecasts.push(forecast);
    }
    Ok((space, forecasts))
}

pub fn write_forecast_csv<W: Write>(space: &LabelSpace, forecasts: &[ForecastVector], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::parse(0, e.to_string());
    let mut header = vec!["example_id".to_string(), "true_label".to_string()];
    header.extend(space.names().iter().map(|n| format!("p_{n}")));
    w.write_record(&header).map_err(to_err)?;
    for f in forecasts {
        if f.num_labels() != space.len() {
            return Err(Error::InvalidForecast {
                example_id: f.example_id().to_string(),
                reason: format!("has {} labels, label space has {}", f.num_labels(), space.len()),
            });
        }
        let mut rec = vec![
            f.example_id().to_string(),
            f.true_label().map(|l| space.name(l).to_string()).unwrap_or_default(),
        ];
        rec.extend(f.probs().iter().map(f64::to_string));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(())
}

/// One parsed row of a region CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub example_id: String,
    pub delta: f64,
    pub members: Vec<String>,
    pub excluded_mass: f64,
    pub err: Option<u8>,
}

pub fn write_region_csv<W: Write>(
    space: &LabelSpace,
    regions: &[RegionPrediction],
    true_labels: &[Option<LabelId>],
    out: W,
) -> Result<()> {
    if regions.len() != true_labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} regions but {} true labels",
            regions.len(),
            true_labels.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::parse(0, e.to_string());
    w.write_record(REGION_HEADER).map_err(to_err)?;
    for (r, t) in regions.iter().zip(true_labels) {
        let members: Vec<&str> = r.members().iter().map(|&l| space.name(l)).collect();
        w.write_record([
            r.example_id().to_string(),
            r.delta().to_string(),
            members.join(";"),
            r.excluded_mass().to_string(),
            t.map(|t| err_indicator(r, t).to_string()).unwrap_or_default(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(())
}

pub fn read_region_csv<R: Read>(input: R) -> Result<Vec<RegionRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    if header.iter().ne(REGION_HEADER) {
        return Err(Error::parse(1, format!("expected header `{}`", REGION_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        let line = csv_line(&record, i + 2);
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|_| Error::parse(line, format!("`{}` is not a number", &record[k])))
        };
        let err = match &record[4] {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(Error::parse(line, format!("err must be 0, 1 or empty, got `{other}`"))),
        };
        rows.push(RegionRow {
            example_id: record[0].to_string(),
            delta: num(1)?,
            members: record[2].split(';').map(str::to_string).collect(),
            excluded_mass: num(3)?,
            err,
        });
    }
    Ok(rows)
}
