//! Matrix Market exchange format for real dense coefficient matrices.
//!
//! Reads `coordinate` and `array` layouts with `real` or `integer` fields and
//! `general`, `symmetric` or `skew-symmetric` symmetry. Writes `coordinate real general`
//! with shortest round-trip decimals.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::function::fmt_f64;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

pub fn read(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| ingest(path, format!("cannot read: {e}")))?;
    parse(&text).map_err(|msg| ingest(path, msg))
}

pub fn write(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format(m)).map_err(Error::Io)
}

fn ingest(path: &Path, msg: String) -> Error {
    Error::Ingest { path: path.display().to_string(), msg }
}

pub fn format(m: &DMatrix<f64>) -> String {
    let nnz = m.iter().filter(|x| **x != 0.0).count();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nnz);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let x = m[(i, j)];
            if x != 0.0 {
                let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt_f64(x));
            }
        }
    }
    out
}

pub fn parse(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(format!("line 1: invalid banner `{header}`"));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(format!("line 1: unsupported format `{other}`")),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(format!("line 1: unsupported field `{other}`")),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(format!("line 1: unsupported symmetry `{other}`")),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or("missing size line")?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| format!("line {}: bad size `{t}`: {e}", size_line + 1)))
        .collect::<std::result::Result<_, _>>()?;
    let num = |t: &str, line: usize| t.parse::<f64>().map_err(|e| format!("line {}: bad value `{t}`: {e}", line + 1));

    if coordinate {
        let [rows, cols, nnz] = dims[..] else {
            return Err(format!("line {}: coordinate size line needs rows cols nnz", size_line + 1));
        };
        if symmetry != Symmetry::General && rows != cols {
            return Err("symmetric storage requires a square matrix".into());
        }
        let mut m = DMatrix::zeros(rows, cols);
        let mut count = 0;
        for (line, l) in data {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(format!("line {}: expected `row col value`", line + 1));
            }
            let i: usize = t[0].parse().map_err(|e| format!("line {}: bad row: {e}", line + 1))?;
            let j: usize = t[1].parse().map_err(|e| format!("line {}: bad column: {e}", line + 1))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(format!("line {}: index ({i}, {j}) out of range", line + 1));
            }
            let v = num(t[2], line)?;
            m[(i - 1, j - 1)] += v;
            if i != j {
                match symmetry {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j - 1, i - 1)] += v,
                    Symmetry::Skew => m[(j - 1, i - 1)] -= v,
                }
            }
            count += 1;
        }
        if count != nnz {
            return Err(format!("expected {nnz} entries, found {count}"));
        }
        Ok(m)
    } else {
        let [rows, cols] = dims[..] else {
            return Err(format!("line {}: array size line needs rows cols", size_line + 1));
        };
        let mut values = Vec::new();
        for (line, l) in data {
            for t in l.split_whitespace() {
                values.push(num(t, line)?);
            }
        }
        let mut m = DMatrix::zeros(rows, cols);
        let mut it = values.into_iter();
        let mut next = || it.next().ok_or_else(|| "too few array entries".to_string());
        for j in 0..cols {
            let start = match symmetry {
                Symmetry::General => 0,
                Symmetry::Symmetric => j,
                Symmetry::Skew => j + 1,
            };
            for i in start..rows {
                let v = next()?;
                m[(i, j)] = v;
                match symmetry {
                    Symmetry::General => {}
                    Symmetry::Symmetric => m[(j, i)] = v,
                    Symmetry::Skew => m[(j, i)] = -v,
                }
            }
        }
        if next().is_ok() {
            return Err("too many array entries".into());
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_coordinate() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1\n2 2 1\n").unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
    }

    #[test]
    fn symmetric_and_array() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 -1\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 0.0]));
        let a = parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
        let s = parse("%%MatrixMarket matrix array real skew-symmetric\n2 2\n5\n").unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.0, -5.0, 5.0, 0.0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n").is_err());
        assert!(parse("not a banner\n").is_err());
    }

    #[test]
    fn ingest_error_names_file() {
        let err = read(Path::new("/nonexistent/a.mtx")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/a.mtx"));
    }

    proptest! {
        #[test]
        fn write_then_read_is_bit_exact(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut state = seed;
            let m = DMatrix::from_fn(rows, cols, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if state % 3 == 0 { 0.0 } else { f64::from_bits((state >> 12) | 0x3ff0_0000_0000_0000) - 1.5 }
            });
            let back = parse(&format(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
