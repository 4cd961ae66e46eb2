//! CSV ingestion into [`Dataset`]s.

use std::io::Read;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vmf::{Dataset, UNIT_TOL};

/// Largest deviation `|‖x‖ − 1|` that is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-6;

/// How rows of an input file map to points on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum InputFormat {
    /// One unit vector per row.
    UnitVectors,
    /// One angle in radians per row (circle).
    AnglesRadians,
    /// One angle in degrees per row (circle).
    AnglesDegrees,
    /// Raw profiles: each row is centered by its own mean and scaled to unit length.
    RawRowsNormalize,
}

/// Parsed input with notes about rows that were adjusted.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset,
    pub warnings: Vec<String>,
}

/// Centers `row` at its mean and scales it to unit norm; `None` if constant.
pub fn center_and_normalize(row: &[f64]) -> Option<Vec<f64>> {
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    let centered: Vec<f64> = row.iter().map(|v| v - mean).collect();
    let s = crate::vmf::norm(&centered);
    (s > 0.0 && s.is_finite()).then(|| centered.into_iter().map(|v| v / s).collect())
}

/// Reads a CSV file in the given format.
pub fn ingest(path: &Path, format: InputFormat, header: bool) -> Result<Ingested> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    ingest_reader(file, format, header)
}

pub fn ingest_reader<R: Read>(reader: R, format: InputFormat, header: bool) -> Result<Ingested> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut width = None;
    let mut flat = Vec::new();
    let mut warnings = Vec::new();
    for (idx, record) in csv.records().enumerate() {
        // 1-based data row, not counting the header
        let row = idx + 1;
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values = record
            .iter()
            .map(|f| {
                let v: f64 = f.parse().map_err(|_| Error::Input { row, message: format!("cannot parse {f:?} as a number") })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Input { row, message: format!("non-finite entry {f:?}") })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Input { row, message: format!("expected {w} columns, found {}", values.len()) })
            }
            _ => {}
        }
        match format {
            InputFormat::AnglesRadians | InputFormat::AnglesDegrees => {
                if values.len() != 1 {
                    return Err(Error::Input { row, message: format!("angle input needs one column, found {}", values.len()) });
                }
                let theta = if format == InputFormat::AnglesDegrees { values[0].to_radians() } else { values[0] };
                flat.extend([theta.cos(), theta.sin()]);
            }
            InputFormat::UnitVectors => {
                if values.len() < 2 {
                    return Err(Error::Input { row, message: "unit vectors need at least 2 columns".into() });
                }
                let r = crate::vmf::norm(&values);
                let dev = (r - 1.0).abs();
                if dev <= UNIT_TOL {
                    flat.extend(values);
                } else if dev <= RENORMALIZE_TOL {
                    warnings.push(format!("row {row}: norm {r} renormalized"));
                    flat.extend(values.iter().map(|v| v / r));
                } else {
                    return Err(Error::Input { row, message: format!("not a unit vector (norm {r})") });
                }
            }
            InputFormat::RawRowsNormalize => {
                if values.len() < 2 {
                    return Err(Error::Input { row, message: "raw rows need at least 2 columns".into() });
                }
                let x = center_and_normalize(&values)
                    .ok_or_else(|| Error::Input { row, message: "row is constant; its centered norm is zero".into() })?;
                flat.extend(x);
            }
        }
    }
    let p = match format {
        InputFormat::AnglesRadians | InputFormat::AnglesDegrees => 2,
        _ => width.unwrap_or(0),
    };
    if flat.is_empty() {
        return Err(Error::Input { row: 0, message: "no observations found".into() });
    }
    if warnings.len() > 5 {
        let extra = warnings.len() - 5;
        warnings.truncate(5);
        warnings.push(format!("{extra} more rows renormalized"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Ingested { data: Dataset::from_flat_unchecked(p, flat), warnings })
}
