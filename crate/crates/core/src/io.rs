//! Series CSV and parameter JSON files, plus serde adapters that write
//! matrices as row-major nested arrays.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{MatinarError, Result};
use crate::process::{IntMatrixSeries, ModelParams};
use crate::thinning::CountMatrix;

pub const SERIES_HEADER: [&str; 4] = ["t", "row", "col", "value"];

/// Writes the long format `t,row,col,value` (1-based row/col), ordered by
/// time, then row, then column.
pub fn write_series_csv<W: Write>(series: &IntMatrixSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER).map_err(csv_io)?;
    for (k, y) in series.items().iter().enumerate() {
        let t = (series.origin() + k).to_string();
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                w.write_record([
                    t.as_str(),
                    &(i + 1).to_string(),
                    &(j + 1).to_string(),
                    &y[(i, j)].to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn series_to_csv_string(series: &IntMatrixSeries) -> Result<String> {
    let mut buf = Vec::new();
    write_series_csv(series, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

fn csv_io(e: csv::Error) -> MatinarError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => MatinarError::Io(io),
        other => MatinarError::Parse {
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

fn parse_index(field: &str, name: &str, line: usize) -> Result<usize> {
    let field = field.trim();
    if field.is_empty() {
        return Err(MatinarError::Parse {
            line,
            msg: format!("missing value in column '{name}'"),
        });
    }
    field.parse::<usize>().map_err(|_| MatinarError::Parse {
        line,
        msg: format!("column '{name}' must be a nonnegative integer, got '{field}'"),
    })
}

/// Parses the long-format CSV. Rows may come in any order, but every
/// `(t, row, col)` cell of a contiguous time range must appear exactly once.
pub fn read_series_csv<R: Read>(input: R) -> Result<IntMatrixSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers().map_err(|e| MatinarError::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let names: Vec<String> = header
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if names != SERIES_HEADER {
        return Err(MatinarError::Parse {
            line: 1,
            msg: format!(
                "expected header 't,row,col,value', got '{}'",
                names.join(",")
            ),
        });
    }
    let mut cells: BTreeMap<(usize, usize, usize), (u64, usize)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| MatinarError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != 4 {
            return Err(MatinarError::Parse {
                line,
                msg: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let t = parse_index(&record[0], "t", line)?;
        let row = parse_index(&record[1], "row", line)?;
        let col = parse_index(&record[2], "col", line)?;
        if row == 0 || col == 0 {
            return Err(MatinarError::Parse {
                line,
                msg: "row and col are 1-based".into(),
            });
        }
        let value = record[3].trim();
        if value.is_empty() {
            return Err(MatinarError::Parse {
                line,
                msg: format!("missing value for t={t}, row={row}, col={col}"),
            });
        }
        let value = value.parse::<u64>().map_err(|_| MatinarError::Parse {
            line,
            msg: format!("value for t={t}, row={row}, col={col} must be a nonnegative integer, got '{value}'"),
        })?;
        if let Some((_, first)) = cells.insert((t, row, col), (value, line)) {
            return Err(MatinarError::Parse {
                line,
                msg: format!(
                    "duplicate cell t={t}, row={row}, col={col} (first seen at line {first})"
                ),
            });
        }
    }
    let (&(t0, _, _), _) = cells.first_key_value().ok_or(MatinarError::Parse {
        line: 2,
        msg: "no observations".into(),
    })?;
    let t1 = cells.last_key_value().map(|(k, _)| k.0).unwrap_or(t0);
    let rows = cells.keys().map(|k| k.1).max().unwrap_or(0);
    let cols = cells.keys().map(|k| k.2).max().unwrap_or(0);
    let mut items = Vec::with_capacity(t1 - t0 + 1);
    for t in t0..=t1 {
        let mut y = CountMatrix::zeros(rows, cols);
        for i in 1..=rows {
            for j in 1..=cols {
                let (v, _) = cells.get(&(t, i, j)).ok_or_else(|| MatinarError::Parse {
                    line: 0,
                    msg: format!("missing cell t={t}, row={i}, col={j}"),
                })?;
                y[(i - 1, j - 1)] = *v;
            }
        }
        items.push(y);
    }
    IntMatrixSeries::new(items, t0)
}

pub fn read_series_file(path: &Path) -> Result<IntMatrixSeries> {
    read_series_csv(fs::File::open(path)?)
}

pub fn write_series_file(series: &IntMatrixSeries, path: &Path) -> Result<()> {
    write_series_csv(series, fs::File::create(path)?)
}

pub fn read_params_file(path: &Path) -> Result<ModelParams> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_params_file(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(params)? + "\n")?;
    Ok(())
}

/// `#[serde(with = "rows")]` for a single matrix.
pub mod rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::RealMatrix;
    use crate::process::{from_rows, to_rows};

    pub fn serialize<S: Serializer>(m: &RealMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RealMatrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "rows_vec")]` for a list of matrices.
pub mod rows_vec {
    use serde::{Serialize, Serializer};

    use crate::linalg::RealMatrix;
    use crate::process::to_rows;

    pub fn serialize<S: Serializer>(ms: &[RealMatrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }
}

/// `#[serde(with = "rows_opt_vec")]` for an optional list of matrices.
pub mod rows_opt_vec {
    use serde::{Serialize, Serializer};

    use crate::linalg::RealMatrix;
    use crate::process::to_rows;

    pub fn serialize<S: Serializer>(ms: &Option<Vec<RealMatrix>>, s: S) -> Result<S::Ok, S::Error> {
        ms.as_ref()
            .map(|v| v.iter().map(to_rows).collect::<Vec<_>>())
            .serialize(s)
    }
}
