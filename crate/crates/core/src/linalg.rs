//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `s I - a` for a real square matrix.
pub fn shifted_resolvent_matrix(a: &DMatrix<f64>, s: Complex64) -> CMatrix {
    let n = a.nrows();
    CMatrix::from_fn(n, n, |i, j| {
        let v = Complex64::new(-a[(i, j)], 0.0);
        if i == j {
            v + s
        } else {
            v
        }
    })
}

/// Solves `m x = rhs`; `None` when `m` is numerically singular.
pub fn solve(m: CMatrix, rhs: &CMatrix) -> Option<CMatrix> {
    let lu = m.lu();
    let x = lu.solve(rhs)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].norm()];
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn sigma_max(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

/// A singular triplet `m v = sigma u`, with `u` the left and `v` the right vector.
#[derive(Clone, Debug)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub left: CVector,
    pub right: CVector,
    /// Distance to the nearest other singular value (infinite when there is none).
    pub gap: f64,
}

/// All `min(rows, cols)` singular triplets in descending order.
pub fn singular_triplets(m: &CMatrix) -> Vec<SingularTriplet> {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        let sigma = z.norm();
        let phase = if sigma > 0.0 { z / sigma } else { Complex64::new(1.0, 0.0) };
        return vec![SingularTriplet {
            sigma,
            left: CVector::from_element(1, phase),
            right: CVector::from_element(1, Complex64::new(1.0, 0.0)),
            gap: f64::INFINITY,
        }];
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    order
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let gap = sorted
                .iter()
                .enumerate()
                .filter(|(q, _)| *q != pos)
                .map(|(_, s)| (s - sorted[pos]).abs())
                .fold(f64::INFINITY, f64::min);
            SingularTriplet {
                sigma: svd.singular_values[i],
                left: u.column(i).into_owned(),
                right: v_t.row(i).adjoint(),
                gap,
            }
        })
        .collect()
}

/// Largest real part over the eigenvalues of a real square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix (only the lower triangle is read).
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::INFINITY;
    }
    a.clone().symmetric_eigen().eigenvalues.min()
}

pub fn is_skew_symmetric(a: &DMatrix<f64>) -> bool {
    a.is_square() && (a + a.transpose()).iter().all(|x| *x == 0.0)
}

pub fn is_symmetric(a: &DMatrix<f64>) -> bool {
    a.is_square() && (a - a.transpose()).iter().all(|x| *x == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_satisfies_definition() {
        let m = CMatrix::from_fn(3, 2, |i, j| Complex64::new((i + 2 * j) as f64 - 1.0, (i * j) as f64 * 0.3 + 0.1));
        let trips = singular_triplets(&m);
        assert_eq!(trips.len(), 2);
        assert!(trips[0].sigma >= trips[1].sigma);
        for t in &trips {
            let lhs = &m * &t.right;
            let rhs = &t.left * Complex64::new(t.sigma, 0.0);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_triplet() {
        let m = CMatrix::from_element(1, 1, Complex64::new(3.0, -4.0));
        let t = &singular_triplets(&m)[0];
        assert_eq!(t.sigma, 5.0);
        assert!(((&m * &t.right)[0] - t.left[0] * 5.0).norm() < 1e-15);
    }
}
