//! Plain-text matrix serialization.
//!
//! A matrix is a header line `rows cols` followed by `rows` lines of `cols`
//! whitespace-separated entries. Complex entries are written `re+imj` / `re-imj`,
//! real entries as plain decimals. Values use the shortest representation that
//! round-trips, so a write/read cycle is bit-exact.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{ComplexMatrix, RealMatrix};
use crate::error::{Error, Result};

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", z.re, sign, z.im.abs())
}

pub fn parse_complex(token: &str) -> Option<Complex64> {
    let body = token.strip_suffix('j')?;
    let bytes = body.as_bytes();
    // Split at the last sign that is not leading and not part of an exponent.
    let split = (1..bytes.len()).rev().find(|&i| {
        (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
    })?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].parse().ok()?;
    Some(Complex64::new(re, im))
}

pub fn write_complex_matrix(m: &ComplexMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| format_complex(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn write_real_matrix(m: &RealMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Reads consecutive lines into a matrix; `line_no` is the 1-based number of the
/// header line, used in error messages.
fn read_block<'a, T>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Option<(usize, usize, Vec<T>)>> {
    let Some((line_no, header)) = lines.next() else {
        return Ok(None);
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected `rows cols`, found `{header}`"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected `rows cols`, found `{header}`"),
        });
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (n, line) = lines.next().ok_or(Error::Parse {
            line: line_no + r + 1,
            message: "unexpected end of input".into(),
        })?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse(tok).ok_or_else(|| Error::Parse {
                line: n,
                message: format!("bad entry `{tok}`"),
            })?);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line: n,
                message: format!("expected {cols} entries, found {}", data.len() - before),
            });
        }
    }
    Ok(Some((rows, cols, data)))
}

fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_complex_matrix(text: &str) -> Result<ComplexMatrix> {
    let mut lines = significant_lines(text);
    let (rows, cols, data) = read_block(&mut lines, parse_complex)?.ok_or(Error::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    ComplexMatrix::new(rows, cols, data)
}

pub fn parse_real_matrix(text: &str) -> Result<RealMatrix> {
    let mut lines = significant_lines(text);
    let (rows, cols, data) =
        read_block(&mut lines, |t| t.parse::<f64>().ok())?.ok_or(Error::Parse {
            line: 1,
            message: "empty input".into(),
        })?;
    RealMatrix::new(rows, cols, data)
}

/// Reads a sequence of complex matrices. Lines for which `side` returns `true` are
/// handed to it instead of the matrix reader (used for sidecar annotations).
pub fn parse_complex_matrices(
    text: &str,
    mut side: impl FnMut(usize, &str) -> Result<bool>,
) -> Result<Vec<ComplexMatrix>> {
    let mut rest = Vec::new();
    for (n, line) in significant_lines(text) {
        if !side(n, line)? {
            rest.push((n, line));
        }
    }
    let mut it = rest.into_iter();
    let mut out = Vec::new();
    while let Some((rows, cols, data)) = read_block(&mut it, parse_complex)? {
        out.push(ComplexMatrix::new(rows, cols, data)?);
    }
    Ok(out)
}
