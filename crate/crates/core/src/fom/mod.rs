//! Full-order models: anything that can evaluate `H(s, p)`.

mod manifest;
mod msd;
pub mod mtx;

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::function::{ParamBox, ScalarFunction};
use crate::linalg::{self, CMatrix};

pub use manifest::{load_manifest, write_manifest, ManifestTerm};
pub use msd::{msd_chain, MsdChain, MsdParams};

/// Evaluation contract for transfer functions `H(s, p)`.
pub trait TransferSource: Send + Sync {
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix>;
}

impl<T: TransferSource + ?Sized> TransferSource for &T {
    fn inputs(&self) -> usize {
        (**self).inputs()
    }
    fn outputs(&self) -> usize {
        (**self).outputs()
    }
    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix> {
        (**self).transfer(s, p)
    }
}

impl<T: TransferSource + ?Sized> TransferSource for Box<T> {
    fn inputs(&self) -> usize {
        (**self).inputs()
    }
    fn outputs(&self) -> usize {
        (**self).outputs()
    }
    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix> {
        (**self).transfer(s, p)
    }
}

/// `H(i omega, p) - H_r(i omega, p)` in spectral norm.
pub fn error_sigma(fom: &dyn TransferSource, rom: &dyn TransferSource, omega: f64, p: &[f64]) -> Result<f64> {
    let s = Complex64::new(0.0, omega);
    let diff = fom.transfer(s, p)? - rom.transfer(s, p)?;
    Ok(linalg::sigma_max(&diff))
}

/// One summand `f(p) M` of a parameter-separable matrix function.
#[derive(Clone, Debug)]
pub struct Term {
    pub matrix: DMatrix<f64>,
    pub func: ScalarFunction,
}

impl Term {
    pub fn new(matrix: DMatrix<f64>, func: ScalarFunction) -> Self {
        Self { matrix, func }
    }

    pub fn constant(matrix: DMatrix<f64>) -> Self {
        Self { matrix, func: ScalarFunction::Constant(1.0) }
    }
}

/// Which matrix of `E x' = A x + B u, y = C x + D u` a term contributes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FomFamily {
    E,
    A,
    B,
    C,
    D,
}

impl FomFamily {
    pub const ALL: [FomFamily; 5] = [FomFamily::E, FomFamily::A, FomFamily::B, FomFamily::C, FomFamily::D];

    pub fn name(self) -> &'static str {
        match self {
            FomFamily::E => "e",
            FomFamily::A => "a",
            FomFamily::B => "b",
            FomFamily::C => "c",
            FomFamily::D => "d",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

/// Parameter-separable LTI system: every matrix is a sum `sum_i f_i(p) M_i`.
///
/// An empty `E` list means `E = I`; an empty `D` list means `D = 0`.
#[derive(Clone, Debug)]
pub struct ParamSeparableLti {
    pub e: Vec<Term>,
    pub a: Vec<Term>,
    pub b: Vec<Term>,
    pub c: Vec<Term>,
    pub d: Vec<Term>,
    pub domain: ParamBox,
    n_x: usize,
    n_u: usize,
    n_y: usize,
}

impl ParamSeparableLti {
    pub fn new(
        e: Vec<Term>,
        a: Vec<Term>,
        b: Vec<Term>,
        c: Vec<Term>,
        d: Vec<Term>,
        domain: ParamBox,
    ) -> Result<Self> {
        let first = |terms: &[Term], what: &str| {
            terms
                .first()
                .map(|t| t.matrix.shape())
                .ok_or_else(|| Error::Dimension(format!("model needs at least one {what} term")))
        };
        let (n_x, _) = first(&a, "A")?;
        let (_, n_u) = first(&b, "B")?;
        let (n_y, _) = first(&c, "C")?;
        let check = |terms: &[Term], shape: (usize, usize), what: &str| -> Result<()> {
            for t in terms {
                if t.matrix.shape() != shape {
                    return Err(Error::Dimension(format!(
                        "{what} term has shape {:?}, expected {shape:?}",
                        t.matrix.shape()
                    )));
                }
                if let Some(axis) = t.func.axis() {
                    if axis >= domain.dim() {
                        return Err(Error::Dimension(format!(
                            "{what} term references parameter axis {axis} but the domain has {} axes",
                            domain.dim()
                        )));
                    }
                }
            }
            Ok(())
        };
        check(&e, (n_x, n_x), "E")?;
        check(&a, (n_x, n_x), "A")?;
        check(&b, (n_x, n_u), "B")?;
        check(&c, (n_y, n_x), "C")?;
        check(&d, (n_y, n_u), "D")?;
        Ok(Self { e, a, b, c, d, domain, n_x, n_u, n_y })
    }

    pub fn states(&self) -> usize {
        self.n_x
    }

    pub fn terms(&self, family: FomFamily) -> &[Term] {
        match family {
            FomFamily::E => &self.e,
            FomFamily::A => &self.a,
            FomFamily::B => &self.b,
            FomFamily::C => &self.c,
            FomFamily::D => &self.d,
        }
    }

    fn combine(terms: &[Term], p: &[f64], shape: (usize, usize)) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(shape.0, shape.1);
        for t in terms {
            out += &t.matrix * t.func.eval(p);
        }
        out
    }

    /// `(E, A, B, C, D)` at `p`.
    pub fn matrices(&self, p: &[f64]) -> [DMatrix<f64>; 5] {
        let n = self.n_x;
        let e = if self.e.is_empty() { DMatrix::identity(n, n) } else { Self::combine(&self.e, p, (n, n)) };
        [
            e,
            Self::combine(&self.a, p, (n, n)),
            Self::combine(&self.b, p, (n, self.n_u)),
            Self::combine(&self.c, p, (self.n_y, n)),
            Self::combine(&self.d, p, (self.n_y, self.n_u)),
        ]
    }
}

impl TransferSource for ParamSeparableLti {
    fn inputs(&self) -> usize {
        self.n_u
    }

    fn outputs(&self) -> usize {
        self.n_y
    }

    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix> {
        if !self.domain.contains(p) {
            log::debug!("evaluating full-order model outside its parameter box at p = {p:?}");
        }
        let [e, a, b, c, d] = self.matrices(p);
        let pencil = CMatrix::from_fn(self.n_x, self.n_x, |i, j| s * e[(i, j)] - a[(i, j)]);
        let x = linalg::solve(pencil, &linalg::to_complex(&b)).ok_or_else(|| Error::Singular { s, p: p.to_vec() })?;
        Ok(linalg::to_complex(&c) * x + linalg::to_complex(&d))
    }
}

/// Memoizes `H(s, p)` by exact bit pattern of `(s, p)`.
pub struct CachedSource<S> {
    inner: S,
    cache: Mutex<HashMap<Vec<u64>, CMatrix>>,
}

impl<S: TransferSource> CachedSource<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn clear(&self) {
        self.cache.lock().expect("cache poisoned").clear();
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: TransferSource> TransferSource for CachedSource<S> {
    fn inputs(&self) -> usize {
        self.inner.inputs()
    }

    fn outputs(&self) -> usize {
        self.inner.outputs()
    }

    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix> {
        let key: Vec<u64> = [s.re, s.im].iter().chain(p).map(|x| x.to_bits()).collect();
        if let Some(h) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(h.clone());
        }
        let h = self.inner.transfer(s, p)?;
        self.cache.lock().expect("cache poisoned").insert(key, h.clone());
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn identity_system_at_zero() {
        let n = 3;
        let sys = ParamSeparableLti::new(
            vec![Term::constant(DMatrix::identity(n, n))],
            vec![Term::constant(-DMatrix::identity(n, n))],
            vec![Term::constant(DMatrix::identity(n, n))],
            vec![Term::constant(DMatrix::identity(n, n))],
            vec![],
            ParamBox::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let h = sys.transfer(Complex64::new(0.0, 0.0), &[0.5]).unwrap();
        assert!((h - linalg::to_complex(&DMatrix::identity(n, n))).norm() < 1e-15);
    }

    #[test]
    fn affine_scalar_model() {
        // A(p) = A0 - p A1 with A0 = -1, A1 = 1  =>  H(0, p) = 1 / (1 + p)
        let sys = ParamSeparableLti::new(
            vec![],
            vec![
                Term::constant(scalar(-1.0)),
                Term::new(scalar(1.0), ScalarFunction::Affine { axis: 0, slope: -1.0, intercept: 0.0 }),
            ],
            vec![Term::constant(scalar(1.0))],
            vec![Term::constant(scalar(1.0))],
            vec![],
            ParamBox::interval(0.0, 10.0).unwrap(),
        )
        .unwrap();
        for p in [0.0, 0.5, 3.0, 10.0] {
            let h = sys.transfer(Complex64::new(0.0, 0.0), &[p]).unwrap()[(0, 0)];
            assert!((h - Complex64::new(1.0 / (1.0 + p), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let n = 4;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { -2.0 - i as f64 } else { 0.3 * (i as f64 - j as f64) });
        let sys = ParamSeparableLti::new(
            vec![],
            vec![Term::constant(a)],
            vec![Term::constant(DMatrix::from_fn(n, 2, |i, j| (i + j) as f64))],
            vec![Term::constant(DMatrix::from_fn(1, n, |_, j| 1.0 - j as f64))],
            vec![Term::constant(DMatrix::from_element(1, 2, 0.5))],
            ParamBox::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        for (re, im) in [(0.0, 1.0), (0.5, -3.0), (1.0, 0.1)] {
            let s = Complex64::new(re, im);
            let h1 = sys.transfer(s.conj(), &[0.0]).unwrap();
            let h2 = sys.transfer(s, &[0.0]).unwrap().map(|z| z.conj());
            assert!((h1 - h2).norm() < 1e-13);
        }
    }

    #[test]
    fn singular_pencil_reports_point() {
        let sys = ParamSeparableLti::new(
            vec![],
            vec![Term::constant(scalar(0.0))],
            vec![Term::constant(scalar(1.0))],
            vec![Term::constant(scalar(1.0))],
            vec![],
            ParamBox::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let err = sys.transfer(Complex64::new(0.0, 0.0), &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = ParamSeparableLti::new(
            vec![],
            vec![Term::constant(DMatrix::identity(2, 2))],
            vec![Term::constant(DMatrix::zeros(3, 1))],
            vec![Term::constant(DMatrix::zeros(1, 2))],
            vec![],
            ParamBox::interval(0.0, 1.0).unwrap(),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn cache_returns_identical_values() {
        let sys = ParamSeparableLti::new(
            vec![],
            vec![Term::constant(scalar(-1.0))],
            vec![Term::constant(scalar(1.0))],
            vec![Term::constant(scalar(1.0))],
            vec![],
            ParamBox::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let cached = CachedSource::new(sys);
        let s = Complex64::new(0.0, 2.0);
        let a = cached.transfer(s, &[0.1]).unwrap();
        let b = cached.transfer(s, &[0.1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(cached.len(), 1);
    }
}
