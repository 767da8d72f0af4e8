//! Text formats for sample sets and CSV output.
//!
//! `MST1`: header `MST1 n p1 p2`, then n blocks of p1 lines with p2
//! space-separated float64 values. `TST1`: header `TST1 n d p1 .. pd`, then
//! n blocks of prod(p) values, 8 per line, mode-1-fastest linear order.
//! `#` starts a comment line anywhere in either format. Values are written
//! with Rust's shortest round-trip formatting, so write -> read is bitwise
//! lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mopup_core::linalg::Matrix;
use mopup_core::spiked::{MatrixSampleSet, TensorSampleSet};
use mopup_core::Tensor;

use crate::CliError;

fn parse_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Numbered data lines with comments and blank lines removed.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_value(line: usize, token: &str) -> Result<f64, CliError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid float value '{token}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

fn parse_usize(line: usize, token: &str, what: &str) -> Result<usize, CliError> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{token}'")))
}

pub fn read_matrix_set(path: &Path) -> Result<MatrixSampleSet, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file, expected MST1 header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "MST1" {
        return Err(parse_err(hline, "expected header 'MST1 n p1 p2'"));
    }
    let n = parse_usize(hline, fields[1], "sample count")?;
    let p1 = parse_usize(hline, fields[2], "row dimension")?;
    let p2 = parse_usize(hline, fields[3], "column dimension")?;
    if n == 0 || p1 == 0 || p2 == 0 {
        return Err(parse_err(hline, "n, p1, p2 must all be positive"));
    }

    let mut samples = Vec::with_capacity(n);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p1);
    let mut last_line = hline;
    for (lineno, line) in lines {
        last_line = lineno;
        let mut row = Vec::with_capacity(p2);
        for token in line.split_whitespace() {
            row.push(parse_value(lineno, token)?);
        }
        if row.len() != p2 {
            return Err(parse_err(
                lineno,
                format!("expected {p2} values per row, found {}", row.len()),
            ));
        }
        rows.push(row);
        if rows.len() == p1 {
            let m = Matrix::from_fn(p1, p2, |i, j| rows[i][j]);
            samples.push(m);
            rows.clear();
            if samples.len() == n {
                break;
            }
        }
    }
    if samples.len() != n || !rows.is_empty() {
        return Err(parse_err(
            last_line,
            format!(
                "expected {} data rows ({n} samples of {p1} rows), found {}",
                n * p1,
                samples.len() * p1 + rows.len()
            ),
        ));
    }
    Ok(MatrixSampleSet::new(samples)?)
}

pub fn matrix_set_string(set: &MatrixSampleSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MST1 {} {} {}", set.n(), set.p1(), set.p2());
    for (i, m) in set.samples().iter().enumerate() {
        let _ = writeln!(out, "# sample {i}");
        for r in 0..m.nrows() {
            let line: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn write_matrix_set(set: &MatrixSampleSet, path: &Path) -> Result<(), CliError> {
    fs::write(path, matrix_set_string(set))?;
    Ok(())
}

pub fn read_tensor_set(path: &Path) -> Result<TensorSampleSet, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file, expected TST1 header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 3 || fields[0] != "TST1" {
        return Err(parse_err(hline, "expected header 'TST1 n d p1 .. pd'"));
    }
    let n = parse_usize(hline, fields[1], "sample count")?;
    let d = parse_usize(hline, fields[2], "tensor order")?;
    if fields.len() != 3 + d {
        return Err(parse_err(
            hline,
            format!("expected {d} dimensions after the order, found {}", fields.len() - 3),
        ));
    }
    let dims: Vec<usize> = fields[3..]
        .iter()
        .map(|t| parse_usize(hline, t, "dimension"))
        .collect::<Result<_, _>>()?;
    if n == 0 || d == 0 || dims.iter().any(|&p| p == 0) {
        return Err(parse_err(hline, "n, d, and all dimensions must be positive"));
    }
    let len: usize = dims.iter().product();

    let mut samples = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(len);
    let mut last_line = hline;
    for (lineno, line) in lines {
        last_line = lineno;
        for token in line.split_whitespace() {
            if samples.len() == n {
                return Err(parse_err(lineno, "trailing data after the final sample"));
            }
            data.push(parse_value(lineno, token)?);
            if data.len() == len {
                samples.push(Tensor::new(dims.clone(), std::mem::take(&mut data))?);
            }
        }
    }
    if samples.len() != n || !data.is_empty() {
        return Err(parse_err(
            last_line,
            format!(
                "expected {} values ({n} samples of {len}), found {}",
                n * len,
                samples.len() * len + data.len()
            ),
        ));
    }
    Ok(TensorSampleSet::new(samples)?)
}

pub fn tensor_set_string(set: &TensorSampleSet) -> String {
    let mut out = String::new();
    let dims: Vec<String> = set.dims().iter().map(|p| p.to_string()).collect();
    let _ = writeln!(
        out,
        "TST1 {} {} {}",
        set.n(),
        set.dims().len(),
        dims.join(" ")
    );
    for (i, t) in set.samples().iter().enumerate() {
        let _ = writeln!(out, "# sample {i}");
        for chunk in t.data().chunks(8) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn write_tensor_set(set: &TensorSampleSet, path: &Path) -> Result<(), CliError> {
    fs::write(path, tensor_set_string(set))?;
    Ok(())
}

/// Fitted loadings: header `MSB1 k`, then per mode a `p r` line followed by
/// p lines of r values. Used by `fit --out` and `fit --init file`.
pub fn loadings_string(loadings: &[&Matrix]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MSB1 {}", loadings.len());
    for (k, m) in loadings.iter().enumerate() {
        let _ = writeln!(out, "# mode {k}");
        let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            let line: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn write_loadings(loadings: &[&Matrix], path: &Path) -> Result<(), CliError> {
    fs::write(path, loadings_string(loadings))?;
    Ok(())
}

pub fn read_loadings(path: &Path) -> Result<Vec<Matrix>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file, expected MSB1 header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 || fields[0] != "MSB1" {
        return Err(parse_err(hline, "expected header 'MSB1 k'"));
    }
    let k = parse_usize(hline, fields[1], "mode count")?;
    let mut loadings = Vec::with_capacity(k);
    for _ in 0..k {
        let (sline, shape) = lines
            .next()
            .ok_or_else(|| parse_err(hline, "missing mode shape line"))?;
        let sf: Vec<&str> = shape.split_whitespace().collect();
        if sf.len() != 2 {
            return Err(parse_err(sline, "expected 'p r' shape line"));
        }
        let p = parse_usize(sline, sf[0], "dimension")?;
        let r = parse_usize(sline, sf[1], "rank")?;
        let mut m = Matrix::zeros(p, r);
        for i in 0..p {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| parse_err(sline, format!("expected {p} basis rows")))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != r {
                return Err(parse_err(
                    lineno,
                    format!("expected {r} values per row, found {}", tokens.len()),
                ));
            }
            for (j, token) in tokens.iter().enumerate() {
                m[(i, j)] = parse_value(lineno, token)?;
            }
        }
        loadings.push(m);
    }
    Ok(loadings)
}

/// RFC-4180 field quoting; our fields are numeric or bare identifiers, so
/// this only triggers on the rare free-text column.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}
