//! File formats: observation CSV, polygon rings, gridded covariates,
//! region mask CSV and the SVG region map.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::SpaceTimePoint;
use crate::error::{Error, Result};
use crate::exceedance::RegionClass;
use crate::grid::PredictionGrid;
use crate::kriging::{CovariateBuilder, Dataset, Observation, Site};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueTransform {
    #[default]
    Identity,
    Sqrt,
    Log,
}

impl ValueTransform {
    pub fn apply(self, v: f64) -> std::result::Result<f64, String> {
        match self {
            ValueTransform::Identity => Ok(v),
            ValueTransform::Sqrt if v >= 0.0 => Ok(v.sqrt()),
            ValueTransform::Sqrt => Err(format!("sqrt of negative value {v}")),
            ValueTransform::Log if v > 0.0 => Ok(v.ln()),
            ValueTransform::Log => Err(format!("log of non-positive value {v}")),
        }
    }
}

/// Which CSV columns hold what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub x: String,
    pub y: String,
    pub time: String,
    pub value: String,
    /// Extra numeric columns carried on each site, in order.
    #[serde(default)]
    pub aux: Vec<String>,
    #[serde(default)]
    pub transform: ValueTransform,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn header_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("{}: missing column '{name}'", path.display())))
}

fn parse_cell(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::DataCell {
            row,
            column: column.to_string(),
            message: format!("'{raw}' is not a finite number"),
        }),
    }
}

/// Reads numeric records; `row` numbers in errors count data rows from 1.
fn read_numeric(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let idx = columns
        .iter()
        .map(|c| header_index(&headers, c, path))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::DataCell {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        rows.push(
            idx.iter()
                .zip(columns)
                .map(|(&i, c)| parse_cell(&record, i, row, c))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(rows)
}

/// One observation per row, with the value transform applied.
pub fn ingest_csv(
    path: &Path,
    mapping: &ColumnMapping,
    covariates: CovariateBuilder,
    target_time: f64,
) -> Result<Dataset> {
    let mut columns = vec![
        mapping.x.as_str(),
        mapping.y.as_str(),
        mapping.time.as_str(),
        mapping.value.as_str(),
    ];
    columns.extend(mapping.aux.iter().map(String::as_str));
    let rows = read_numeric(path, &columns)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let observations = rows
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let value = mapping.transform.apply(r[3]).map_err(|message| Error::DataCell {
                row: k + 1,
                column: mapping.value.clone(),
                message,
            })?;
            Ok(Observation {
                site: Site::new(SpaceTimePoint::new(r[0], r[1], r[2]), r[4..].to_vec()),
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(observations, covariates, target_time)
}

/// Polygon ring from a CSV with columns `x, y`.
pub fn read_polygon_csv(path: &Path) -> Result<Vec<[f64; 2]>> {
    let rows = read_numeric(path, &["x", "y"])?;
    Ok(rows.into_iter().map(|r| [r[0], r[1]]).collect())
}

/// Covariate values for every retained pixel from a CSV keyed by
/// `ix, iy`; returned in grid order.
pub fn read_grid_covariates(path: &Path, grid: &PredictionGrid, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut columns = vec!["ix", "iy"];
    columns.extend(names.iter().map(String::as_str));
    let rows = read_numeric(path, &columns)?;
    let mut by_cell = HashMap::new();
    for r in rows {
        by_cell.insert((r[0] as usize, r[1] as usize), r[2..].to_vec());
    }
    grid.cells
        .iter()
        .map(|c| {
            by_cell.get(&(c.ix, c.iy)).cloned().ok_or_else(|| {
                Error::Data(format!(
                    "{}: no covariates for pixel ({}, {})",
                    path.display(),
                    c.ix,
                    c.iy
                ))
            })
        })
        .collect()
}

/// One row of a region mask file.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRow {
    pub ix: usize,
    pub iy: usize,
    pub cx: f64,
    pub cy: f64,
    pub z_hat: f64,
    pub krig_sd: f64,
    pub z_prime: f64,
    pub region: RegionClass,
}

pub const MASK_HEADER: [&str; 8] = ["ix", "iy", "cx", "cy", "z_hat", "krig_sd", "z_prime", "region"];

/// Floats are written with `Display`, which round-trips exactly.
pub fn write_mask_csv(path: &Path, rows: &[MaskRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&MASK_HEADER.join(","));
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.ix, r.iy, r.cx, r.cy, r.z_hat, r.krig_sd, r.z_prime, r.region
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_mask_csv(path: &Path) -> Result<Vec<MaskRow>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().ne(MASK_HEADER) {
        return Err(Error::Data(format!("{}: unexpected mask header", path.display())));
    }
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::DataCell {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let num = |i: usize| -> Result<f64> {
            record.get(i).unwrap_or("").parse::<f64>().map_err(|_| Error::DataCell {
                row,
                column: MASK_HEADER[i].into(),
                message: "not a number".into(),
            })
        };
        let index = |i: usize| -> Result<usize> {
            record
                .get(i)
                .unwrap_or("")
                .parse::<usize>()
                .map_err(|_| Error::DataCell {
                    row,
                    column: MASK_HEADER[i].into(),
                    message: "not an index".into(),
                })
        };
        let region = RegionClass::parse(record.get(7).unwrap_or("")).ok_or_else(|| Error::DataCell {
            row,
            column: "region".into(),
            message: "unknown region class".into(),
        })?;
        rows.push(MaskRow {
            ix: index(0)?,
            iy: index(1)?,
            cx: num(2)?,
            cy: num(3)?,
            z_hat: num(4)?,
            krig_sd: num(5)?,
            z_prime: num(6)?,
            region,
        });
    }
    Ok(rows)
}

pub fn class_color(class: RegionClass) -> &'static str {
    match class {
        RegionClass::ConfidentExceed => "#f28e2b",
        RegionClass::PossibleExceed => "#4e79a7",
        RegionClass::ConfidentNotExceed => "#ffffff",
    }
}

fn class_label(class: RegionClass) -> &'static str {
    match class {
        RegionClass::ConfidentExceed => "confident exceedance",
        RegionClass::PossibleExceed => "possible exceedance",
        RegionClass::ConfidentNotExceed => "no exceedance",
    }
}

const PLOT_SIZE: f64 = 400.0;
const LEGEND_WIDTH: f64 = 190.0;

/// SVG map with one rect per retained pixel, north up, plus a legend.
pub fn render_svg(grid: &PredictionGrid, classes: &[RegionClass], title: &str) -> Result<String> {
    if classes.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} classes for {} pixels",
            classes.len(),
            grid.len()
        )));
    }
    let scale = PLOT_SIZE / grid.rect.width().max(grid.rect.height());
    let pw = grid.cell_width * scale;
    let ph = grid.cell_height * scale;
    let width = grid.nx as f64 * pw;
    let height = grid.ny as f64 * ph;
    let total_h = height.max(100.0) + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.2}" height="{:.2}" viewBox="0 0 {:.2} {:.2}">"#,
        width + LEGEND_WIDTH,
        total_h,
        width + LEGEND_WIDTH,
        total_h
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="0.00" y="30.00" width="{width:.2}" height="{height:.2}" fill="none" stroke="#999999" stroke-width="0.5"/>"##
    );
    let _ = writeln!(s, r#"<g id="pixels" shape-rendering="crispEdges">"#);
    for (cell, class) in grid.cells.iter().zip(classes) {
        let x = cell.ix as f64 * pw;
        let y = 30.0 + (grid.ny - 1 - cell.iy) as f64 * ph;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{pw:.2}" height="{ph:.2}" fill="{}" class="{}"/>"#,
            class_color(*class),
            class
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text x="0.00" y="18.00" font-family="sans-serif" font-size="13">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    for (k, class) in RegionClass::ALL.into_iter().enumerate() {
        let y = 40.0 + 22.0 * k as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{y:.2}" width="14.00" height="14.00" fill="{}" stroke="#333333" stroke-width="0.5"/>"##,
            width + 12.0,
            class_color(class)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            width + 32.0,
            y + 11.5,
            class_label(class)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn emit_plot(grid: &PredictionGrid, classes: &[RegionClass], title: &str, path: &Path) -> Result<()> {
    let svg = render_svg(grid, classes, title)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
