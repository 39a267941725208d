//! Port-Hamiltonian mass-spring-damper chain with the damping scale as parameter.
//!
//! Stencil: `n` masses `m` in a line. Spring `i` couples mass `i` and mass `i+1`
//! (`i < n`); spring `n` ties the last mass to a wall, all with stiffness `k`.
//! Every mass has a damper of coefficient `c` to ground, scaled by the parameter
//! `p`. The state interleaves displacement and momentum, `x = (q_1, p_1, ..., q_n, p_n)`,
//! with Hamiltonian `x^T Q x / 2`. The single input is a force on the first mass and the
//! collocated output is its velocity:
//!
//! ```text
//! x' = (J - p R0) Q x + B u,   y = B^T Q x
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fom::{ParamSeparableLti, Term, TransferSource};
use crate::function::{ParamBox, ScalarFunction};
use crate::linalg::CMatrix;
use crate::rom::PhCheck;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MsdParams {
    pub masses: usize,
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for MsdParams {
    fn default() -> Self {
        Self { masses: 50, mass: 4.0, stiffness: 4.0, damping: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct MsdChain {
    pub params: MsdParams,
    pub j: DMatrix<f64>,
    /// Dissipation at `p = 1`; `R(p) = p R0`.
    pub r0: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub domain: ParamBox,
    lti: ParamSeparableLti,
}

pub fn msd_chain(masses: usize, mass: f64, stiffness: f64, damping: f64) -> Result<MsdChain> {
    MsdChain::new(MsdParams { masses, mass, stiffness, damping }, ParamBox::interval(0.5, 1.5)?)
}

impl MsdChain {
    pub fn new(params: MsdParams, domain: ParamBox) -> Result<Self> {
        let MsdParams { masses: n, mass, stiffness: k, damping: c } = params;
        if n == 0 {
            return Err(Error::Parameter("the chain needs at least one mass".into()));
        }
        if !(mass > 0.0 && k > 0.0 && c > 0.0) || !(mass.is_finite() && k.is_finite() && c.is_finite()) {
            return Err(Error::Parameter(format!(
                "mass, stiffness and damping must be positive, got m = {mass}, k = {k}, c = {c}"
            )));
        }
        if domain.dim() != 1 {
            return Err(Error::Parameter("the chain has a single (damping) parameter".into()));
        }
        let nx = 2 * n;
        let pos = |i: usize| 2 * i;
        let mom = |i: usize| 2 * i + 1;

        let mut j = DMatrix::zeros(nx, nx);
        let mut r0 = DMatrix::zeros(nx, nx);
        let mut q = DMatrix::zeros(nx, nx);
        for i in 0..n {
            j[(pos(i), mom(i))] = 1.0;
            j[(mom(i), pos(i))] = -1.0;
            r0[(mom(i), mom(i))] = c;
            q[(mom(i), mom(i))] = 1.0 / mass;
        }
        // stiffness matrix of the chain, spring i between masses i and i+1, last spring to the wall
        for i in 0..n {
            let wall = i + 1 == n;
            let (a, b) = (pos(i), if wall { None } else { Some(pos(i + 1)) });
            q[(a, a)] += k;
            if let Some(b) = b {
                q[(b, b)] += k;
                q[(a, b)] -= k;
                q[(b, a)] -= k;
            }
        }
        let mut b = DMatrix::zeros(nx, 1);
        b[(mom(0), 0)] = 1.0;

        let lti = ParamSeparableLti::new(
            vec![],
            vec![
                Term::constant(&j * &q),
                Term::new(-(&r0 * &q), ScalarFunction::Affine { axis: 0, slope: 1.0, intercept: 0.0 }),
            ],
            vec![Term::constant(b.clone())],
            vec![Term::constant(b.transpose() * &q)],
            vec![],
            domain.clone(),
        )?;
        Ok(Self { params, j, r0, q, b, domain, lti })
    }

    pub fn states(&self) -> usize {
        self.j.nrows()
    }

    pub fn dissipation(&self, p: &[f64]) -> DMatrix<f64> {
        &self.r0 * p[0]
    }

    pub fn system_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        (&self.j - self.dissipation(p)) * &self.q
    }

    pub fn ph_check(&self, p: &[f64]) -> PhCheck {
        PhCheck::new(&self.j, &self.dissipation(p), &self.q)
    }

    /// The same model as a generic parameter-separable system.
    pub fn lti(&self) -> &ParamSeparableLti {
        &self.lti
    }
}

impl TransferSource for MsdChain {
    fn inputs(&self) -> usize {
        1
    }

    fn outputs(&self) -> usize {
        1
    }

    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix> {
        self.lti.transfer(s, p)
    }
}
