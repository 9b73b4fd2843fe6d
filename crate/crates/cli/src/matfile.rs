//! Plain-text matrix files.
//!
//! ```text
//! file    := header row*
//! header  := rows cols          (two positive integers)
//! row     := value{cols}        (whitespace separated decimals)
//! ```
//! A `#` starts a comment running to the end of the line; blank lines are
//! ignored. Exactly `rows` data rows must follow the header.

use crate::error::{CliError, CliResult};
use conesv_core::numerics::Mat;
use std::fmt::Write as _;
use std::path::Path;

pub fn parse_matrix(text: &str, path: &str) -> CliResult<Mat> {
    let err = |line: usize, msg: String| CliError::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing \"rows cols\" header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| err(hline, format!("bad header `{header}`")))?;
    let [rows, cols] = dims[..] else {
        return Err(err(hline, format!("header needs two integers, got `{header}`")));
    };
    if rows == 0 || cols == 0 {
        return Err(err(hline, "dimensions must be positive".into()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, l) in lines {
        if seen == rows {
            return Err(err(lineno, format!("more than {rows} data rows")));
        }
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(lineno, format!("bad number `{t}`"))))
            .collect::<CliResult<_>>()?;
        if vals.len() != cols {
            return Err(err(lineno, format!("expected {cols} values, found {}", vals.len())));
        }
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(err(lineno, format!("non-finite value {v}")));
        }
        data.extend(vals);
        seen += 1;
    }
    if seen < rows {
        return Err(err(text.lines().count().max(1), format!("expected {rows} data rows, found {seen}")));
    }
    Ok(Mat::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> CliResult<Mat> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, &path.display().to_string())
}

/// Shortest round-trip decimal formatting, one row per line.
pub fn format_matrix(m: &Mat) -> String {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}

pub fn write_matrix(path: &Path, m: &Mat) -> CliResult<()> {
    std::fs::write(path, format_matrix(m)).map_err(|e| CliError::io(path, e))
}
