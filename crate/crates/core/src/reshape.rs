//! Vector/matrix reshaping operators.
//!
//! These define how blocks of the design vector become ROM matrices, and how
//! gradient matrices are flattened back into design coordinates. All full
//! reshapes are column-major; the triangular ones fill row by row.

use nalgebra::{DMatrix, Scalar};
use num_traits::Zero;

use crate::error::{Error, Result};

/// Length of the upper-triangular parameterization of an `n x n` matrix.
pub const fn upper_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Length of the strictly upper-triangular parameterization of an `n x n` matrix.
pub const fn strict_upper_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Vector to full `n x m` matrix, column-major.
pub fn vtf<T: Scalar + Copy>(v: &[T], n: usize, m: usize) -> Result<DMatrix<T>> {
    if v.len() != n * m {
        return Err(Error::Dimension(format!(
            "vtf expects {} entries for a {n}x{m} matrix, got {}",
            n * m,
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(n, m, v))
}

/// Full matrix to vector (the `vec` operator).
pub fn ftv<T: Scalar + Copy>(mat: &DMatrix<T>) -> Vec<T> {
    mat.as_slice().to_vec()
}

/// Vector to upper-triangular matrix, filled row by row.
pub fn vtu<T: Scalar + Copy + Zero>(v: &[T], n: usize) -> Result<DMatrix<T>> {
    if v.len() != upper_len(n) {
        return Err(Error::Dimension(format!(
            "vtu expects {} entries for n = {n}, got {}",
            upper_len(n),
            v.len()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[(i, j)] = v[k];
            k += 1;
        }
    }
    Ok(out)
}

/// Upper triangle (including the diagonal) to vector, row by row.
/// Strictly-lower entries are ignored.
pub fn utv<T: Scalar + Copy>(mat: &DMatrix<T>) -> Vec<T> {
    let n = mat.nrows();
    let mut out = Vec::with_capacity(upper_len(n));
    for i in 0..n {
        for j in i..mat.ncols() {
            out.push(mat[(i, j)]);
        }
    }
    out
}

/// Vector to strictly upper-triangular matrix, filled row by row.
pub fn vtsu<T: Scalar + Copy + Zero>(v: &[T], n: usize) -> Result<DMatrix<T>> {
    if v.len() != strict_upper_len(n) {
        return Err(Error::Dimension(format!(
            "vtsu expects {} entries for n = {n}, got {}",
            strict_upper_len(n),
            v.len()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            out[(i, j)] = v[k];
            k += 1;
        }
    }
    Ok(out)
}

/// Strict upper triangle to vector, row by row.
pub fn sutv<T: Scalar + Copy>(mat: &DMatrix<T>) -> Vec<T> {
    let n = mat.nrows();
    let mut out = Vec::with_capacity(strict_upper_len(n));
    for i in 0..n {
        for j in (i + 1)..mat.ncols() {
            out.push(mat[(i, j)]);
        }
    }
    out
}
