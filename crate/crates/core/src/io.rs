//! Plain-text matrix and vector exchange.
//!
//! Matrices are CSV with one row per line and no header; every float is
//! written with 17 significant digits so a write/read cycle is lossless.

use std::io::Write;

use nalgebra::DMatrix;

use crate::{Error, Real, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

pub fn write_matrix_csv<T: Real, W: Write>(mut out: W, m: &DMatrix<T>) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| fmt_float(m[(i, j)].as_f64()))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn matrix_to_csv<T: Real>(m: &DMatrix<T>) -> String {
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, m).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

/// Parses a dense matrix from CSV text. Blank lines and `#` comments are skipped.
pub fn parse_matrix_csv<T: Real>(text: &str) -> Result<DMatrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: format!("{tok:?}: {e}"),
                    })
            })
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv<T: Real>(path: impl AsRef<std::path::Path>) -> Result<DMatrix<T>> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = parse_matrix_csv::<f64>("1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn csv_roundtrip_is_lossless(vals in proptest::collection::vec(-1e6f64..1e6, 9)) {
            let m = DMatrix::from_row_slice(3, 3, &vals);
            let back: DMatrix<f64> = parse_matrix_csv(&matrix_to_csv(&m)).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
