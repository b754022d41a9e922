// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV input and output for partially observed matrices.
//!
//! The file layout is a single table. By default each row is a coordinate and
//! each column a time point; `transpose` reads the other way round. Missing
//! cells are empty or spelled `NA` or `NaN` in any case. Values are written
//! with Rust's shortest round-trip formatting, so reading back what was
//! written reproduces the matrix exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};

/// Whether the first record holds labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// A header is assumed when some cell of the first record is neither a
    /// number nor a missing-value token.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    /// Rows are time points and columns are coordinates.
    pub transpose: bool,
    pub header: HeaderMode,
    /// The first column holds labels rather than data.
    pub index_col: bool,
}

/// A matrix read from CSV together with any labels found in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub matrix: MaskedMatrix,
    /// One label per time point, if the file had them.
    pub time_labels: Option<Vec<String>>,
    /// One label per coordinate, if the file had them.
    pub coord_labels: Option<Vec<String>>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn parse_cell(cell: &str) -> Option<Option<f64>> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Some(None);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Some(Some(x)),
        _ => None,
    }
}

fn parse_error(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line: line as usize,
        message: message.into(),
    }
}

/// Parses CSV text from any reader. `source` names the input in errors.
pub fn read_csv_from<R: Read>(reader: R, source: &str, options: &CsvOptions) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut row_labels: Vec<String> = Vec::new();
    let mut grid: Vec<Vec<Option<f64>>> = Vec::new();
    let mut width: Option<usize> = None;
    let skip = usize::from(options.index_col);

    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(source, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    source,
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        if record.len() <= skip {
            return Err(parse_error(source, line, "no data columns"));
        }
        let first = header.is_none() && grid.is_empty();
        let cells: Vec<&str> = record.iter().skip(skip).collect();
        if first {
            let is_header = match options.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => cells.iter().any(|c| parse_cell(c).is_none()),
            };
            if is_header {
                header = Some(cells.iter().map(|c| c.trim().to_string()).collect());
                continue;
            }
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            match parse_cell(cell) {
                Some(v) => row.push(v),
                None => {
                    return Err(parse_error(
                        source,
                        line,
                        format!(
                            "column {}: cannot parse {:?} as a finite number",
                            c + 1 + skip,
                            cell.trim()
                        ),
                    ))
                }
            }
        }
        if options.index_col {
            row_labels.push(record.get(0).unwrap_or("").trim().to_string());
        }
        grid.push(row);
    }

    if grid.is_empty() {
        return Err(parse_error(source, 0, "no data rows"));
    }
    let cols = grid[0].len();
    let (p, n) = if options.transpose {
        (cols, grid.len())
    } else {
        (grid.len(), cols)
    };
    if n < 2 {
        return Err(Error::TooShort { n, min: 2 });
    }
    let cell = |j: usize, t: usize| {
        if options.transpose {
            grid[t][j]
        } else {
            grid[j][t]
        }
    };
    let values = Array2::from_shape_fn((p, n), |(j, t)| cell(j, t).unwrap_or(0.0));
    let mask = Array2::from_shape_fn((p, n), |(j, t)| cell(j, t).is_some());
    let matrix = MaskedMatrix::new(values, mask)?;

    let row_labels = options.index_col.then_some(row_labels);
    let (time_labels, coord_labels) = if options.transpose {
        (row_labels, header)
    } else {
        (header, row_labels)
    };
    Ok(CsvData {
        matrix,
        time_labels,
        coord_labels,
    })
}

pub fn read_csv(path: &Path, options: &CsvOptions) -> Result<CsvData> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv_from(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        options,
    )
}

/// Writes one row per coordinate, `NA` for missing cells, with an optional
/// header of time labels.
pub fn write_csv_to<W: Write>(
    writer: W,
    m: &MaskedMatrix,
    time_labels: Option<&[String]>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    if let Some(labels) = time_labels {
        if labels.len() != m.n() {
            return Err(Error::invalid(format!(
                "{} time labels for {} time points",
                labels.len(),
                m.n()
            )));
        }
        w.write_record(labels).map_err(io)?;
    }
    let mut fields = Vec::with_capacity(m.n());
    for j in 0..m.p() {
        fields.clear();
        for (&x, &o) in m.row_values(j).iter().zip(m.row_mask(j).iter()) {
            fields.push(if o { x.to_string() } else { "NA".to_string() });
        }
        w.write_record(&fields).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, m: &MaskedMatrix, time_labels: Option<&[String]>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv_to(std::io::BufWriter::new(file), m, time_labels)
}
