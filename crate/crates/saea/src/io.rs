//! Series and matrix CSV files, atomic writes and SHA-256 hashing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use saea_core::data::SeriesFrame;
use saea_core::Matrix;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::format::fmt_f64;

/// Expected header name of column `j` in a series CSV.
pub fn sensor_header(j: usize) -> String {
    format!("sensor_{j}")
}

fn csv_err(path: &Path, row: usize, col: usize, message: impl Into<String>) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        row,
        col,
        message: message.into(),
    }
}

fn parse_cell(path: &Path, row: usize, col: usize, cell: &str) -> CliResult<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        csv_err(
            path,
            row,
            col,
            format!("cannot parse {:?} as a number", cell),
        )
    })?;
    if !v.is_finite() {
        return Err(csv_err(
            path,
            row,
            col,
            format!("non-finite value {cell:?}"),
        ));
    }
    Ok(v)
}

/// Optional header and parsed numeric rows.
type ParsedCsv = (Option<Vec<String>>, Vec<Vec<f64>>);

fn read_rows(path: &Path, has_header: bool) -> CliResult<ParsedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io_err(path, e))?;
    let header = if has_header {
        Some(
            rdr.headers()
                .map_err(|e| csv_io_err(path, e))?
                .iter()
                .map(str::to_string)
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let mut width = header.as_ref().map(Vec::len);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_err(path, row, 1, e.to_string()))?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(csv_err(
                path,
                row,
                rec.len().min(w) + 1,
                format!("expected {w} fields, found {}", rec.len()),
            ));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell(path, row, j + 1, c))
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(vals);
    }
    Ok((header, rows))
}

fn csv_io_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => csv_err(path, 0, 0, format!("{other:?}")),
    }
}

fn to_matrix(path: &Path, rows: Vec<Vec<f64>>, cols: usize) -> CliResult<Matrix> {
    let t = rows.len();
    Matrix::from_vec(t, cols, rows.into_iter().flatten().collect())
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Read a series CSV with header `sensor_0,...,sensor_{N-1}`.
pub fn read_series(path: &Path, step_minutes: f64) -> CliResult<SeriesFrame> {
    let (header, rows) = read_rows(path, true)?;
    let header = header.unwrap_or_default();
    if header.is_empty() {
        return Err(csv_err(path, 0, 1, "missing header"));
    }
    for (j, h) in header.iter().enumerate() {
        if *h != sensor_header(j) {
            return Err(csv_err(
                path,
                0,
                j + 1,
                format!("expected header {:?}, found {h:?}", sensor_header(j)),
            ));
        }
    }
    if rows.is_empty() {
        return Err(csv_err(path, 1, 1, "no data rows"));
    }
    let m = to_matrix(path, rows, header.len())?;
    Ok(SeriesFrame::new(m, step_minutes)?)
}

/// Read a headerless numeric CSV matrix (adjacency, coefficient matrices).
pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    let (_, rows) = read_rows(path, false)?;
    if rows.is_empty() {
        return Err(csv_err(path, 1, 1, "empty matrix file"));
    }
    let cols = rows[0].len();
    to_matrix(path, rows, cols)
}

fn render_rows(m: &Matrix, header: Option<Vec<String>>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Write a series CSV with a `sensor_j` header.
pub fn write_series(path: &Path, values: &Matrix) -> CliResult<()> {
    let header = (0..values.cols()).map(sensor_header).collect();
    write_atomic(path, render_rows(values, Some(header)).as_bytes())
}

/// Write a headerless matrix CSV.
pub fn write_matrix(path: &Path, m: &Matrix) -> CliResult<()> {
    write_atomic(path, render_rows(m, None).as_bytes())
}

/// Write a CSV table with a header and preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Write `bytes` to a temporary sibling file, flush it, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp: PathBuf = path.with_file_name(format!(".{name}.tmp"));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

/// Create a directory and its parents.
pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Read a file into memory.
pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lowercase hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&read_bytes(path)?))
}
