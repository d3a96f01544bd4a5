//! Dense double-precision matrices and the plain-text serialization format.
//!
//! The on-disk format is: a header line with `rows` (square) or `rows cols`
//! (rectangular), followed by one line per row of space-separated decimals
//! printed with enough digits to round-trip `f64` exactly.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The workhorse dense matrix type. All entries are `f64`.
pub type Mat = DMatrix<f64>;

/// Returns an error if any entry is NaN or infinite.
pub fn ensure_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn ensure_square(m: &Mat) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: m.nrows(),
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Frobenius norm ‖WWᵀ − I‖_F, the measured distance from the orthogonality
/// constraint.
pub fn orthogonality_defect(w: &Mat) -> f64 {
    let p = w.nrows();
    let mut g = w * w.transpose();
    for i in 0..p {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

/// Writes a matrix in the text format. Square matrices get a one-number
/// header, rectangular ones a two-number header.
pub fn write_matrix<W: Write>(out: &mut W, m: &Mat) -> Result<()> {
    if m.nrows() == m.ncols() {
        writeln!(out, "{}", m.nrows())?;
    } else {
        writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Reads a matrix in the text format produced by [`write_matrix`].
pub fn read_matrix<R: BufRead>(input: &mut R) -> Result<Mat> {
    let mut header = String::new();
    if input.read_line(&mut header)? == 0 {
        return Err(Error::Parse("unexpected end of input reading header".into()));
    }
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match dims.as_slice() {
        [p] => (*p, *p),
        [r, c] => (*r, *c),
        _ => return Err(Error::Parse(format!("bad header line {header:?}"))),
    };
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("zero-sized matrix".into()));
    }
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Parse(format!("unexpected end of input at row {i}")));
        }
        let entries: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad entry {t:?} in row {i}"))))
            .collect::<std::result::Result<_, _>>()?;
        if entries.len() != cols {
            return Err(Error::Parse(format!(
                "row {i} has {} entries, expected {cols}",
                entries.len()
            )));
        }
        for (j, x) in entries.into_iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defect_of_identity_is_zero() {
        assert_eq!(orthogonality_defect(&Mat::identity(4, 4)), 0.0);
    }

    #[test]
    fn defect_of_scaled_identity() {
        // W = 2I_2: WWᵀ − I = 3I_2, norm 3√2
        let w = Mat::identity(2, 2) * 2.0;
        let d = orthogonality_defect(&w);
        assert!((d - 3.0 * 2.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = Mat::from_fn(3, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0));
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        let back = read_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rectangular_round_trip() {
        let m = Mat::from_fn(2, 5, |i, j| (i * 7 + j) as f64 * 0.1 - 0.3);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        let back = read_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn read_rejects_ragged_rows() {
        let text = "2\n1.0 2.0\n3.0\n";
        assert!(read_matrix(&mut text.as_bytes()).is_err());
    }

    #[test]
    fn non_finite_is_detected() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(ensure_finite(&m).is_err());
    }
}
