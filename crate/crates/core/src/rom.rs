//! Stable parametric reduced-order models parameterized by a flat design vector.
//!
//! The system matrix is assembled in dissipative-Hamiltonian form
//! `A = (J - R~) Q~` with `J` skew-symmetric and `R`, `Q` symmetric positive
//! semi-definite for every design vector, so stability never has to be
//! imposed as a constraint. `R~ = R + eps_r I` and `Q~ = Q + eps_q I`.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fom::TransferSource;
use crate::function::ScalarFunction;
use crate::linalg::{self, CMatrix};
use crate::reshape::{strict_upper_len, upper_len, vtf, vtsu, vtu};

pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_INIT_SCALE: f64 = 0.1;

/// Matrix families, in design-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    B,
    C,
    D,
    J,
    R,
    Q,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::B, Family::C, Family::D, Family::J, Family::R, Family::Q];

    pub fn name(self) -> &'static str {
        match self {
            Family::B => "b",
            Family::C => "c",
            Family::D => "d",
            Family::J => "j",
            Family::R => "r",
            Family::Q => "q",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RomDims {
    pub order: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl RomDims {
    pub fn new(order: usize, inputs: usize, outputs: usize) -> Self {
        Self { order, inputs, outputs }
    }

    /// Design-vector length of one block of `family`.
    pub fn block_len(&self, family: Family) -> usize {
        let (r, m, q) = (self.order, self.inputs, self.outputs);
        match family {
            Family::B => r * m,
            Family::C => q * r,
            Family::D => q * m,
            Family::J => strict_upper_len(r),
            Family::R | Family::Q => upper_len(r),
        }
    }
}

/// Scalar ansatz functions per matrix family plus structural options.
#[derive(Clone, Debug)]
pub struct AnsatzSpec {
    pub b: Vec<ScalarFunction>,
    pub c: Vec<ScalarFunction>,
    pub d: Vec<ScalarFunction>,
    pub j: Vec<ScalarFunction>,
    pub r: Vec<ScalarFunction>,
    pub q: Vec<ScalarFunction>,
    /// Build `R = V_R V_R^T`, `Q = V_Q V_Q^T` from weighted sums of triangular factors,
    /// which admits ansatz functions of either sign.
    pub psd_safe: bool,
    /// Port-Hamiltonian output `y = B^T Q~ x` with zero feedthrough; `C`/`D` carry no design entries.
    pub port_hamiltonian: bool,
    pub eps_q: f64,
    pub eps_r: f64,
}

impl AnsatzSpec {
    /// The same function list for every family.
    pub fn uniform(funcs: Vec<ScalarFunction>) -> Self {
        Self {
            b: funcs.clone(),
            c: funcs.clone(),
            d: funcs.clone(),
            j: funcs.clone(),
            r: funcs.clone(),
            q: funcs,
            psd_safe: false,
            port_hamiltonian: false,
            eps_q: DEFAULT_EPS,
            eps_r: DEFAULT_EPS,
        }
    }

    /// Port-Hamiltonian ansatz: the function list is used for `B`, `J`, `R` and `Q`.
    pub fn port_hamiltonian(funcs: Vec<ScalarFunction>) -> Self {
        let mut spec = Self::uniform(funcs);
        spec.c.clear();
        spec.d.clear();
        spec.port_hamiltonian = true;
        spec
    }

    pub fn funcs(&self, family: Family) -> &[ScalarFunction] {
        match family {
            Family::B => &self.b,
            Family::C => &self.c,
            Family::D => &self.d,
            Family::J => &self.j,
            Family::R => &self.r,
            Family::Q => &self.q,
        }
    }

    pub fn funcs_mut(&mut self, family: Family) -> &mut Vec<ScalarFunction> {
        match family {
            Family::B => &mut self.b,
            Family::C => &mut self.c,
            Family::D => &mut self.d,
            Family::J => &mut self.j,
            Family::R => &mut self.r,
            Family::Q => &mut self.q,
        }
    }

    pub fn kappa(&self, family: Family) -> usize {
        self.funcs(family).len()
    }

    pub fn validate(&self, dims: &RomDims) -> Result<()> {
        if dims.order == 0 || dims.inputs == 0 || dims.outputs == 0 {
            return Err(Error::Parameter("ROM order, inputs and outputs must be positive".into()));
        }
        if !(self.eps_q >= 0.0 && self.eps_r >= 0.0) {
            return Err(Error::Parameter("eps_q and eps_r must be nonnegative".into()));
        }
        if self.port_hamiltonian {
            if dims.inputs != dims.outputs {
                return Err(Error::Dimension(format!(
                    "port-Hamiltonian ROMs need as many outputs as inputs, got {} and {}",
                    dims.outputs, dims.inputs
                )));
            }
            if !self.c.is_empty() || !self.d.is_empty() {
                return Err(Error::Structure(
                    "port-Hamiltonian ansatz determines C and D; their function lists must be empty".into(),
                ));
            }
        }
        if !self.psd_safe {
            for family in [Family::R, Family::Q] {
                if let Some(f) = self.funcs(family).iter().find(|f| !f.is_certified_nonnegative()) {
                    return Err(Error::Structure(format!(
                        "ansatz function {f:?} of family {} is not certified nonnegative; enable psd_safe",
                        family.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub family: Family,
    pub index: usize,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Partition of the design vector into `(family, index)` blocks, ordered B, C, D, J, R, Q.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaLayout {
    blocks: Vec<Block>,
    len: usize,
}

impl ThetaLayout {
    pub fn new(dims: &RomDims, ansatz: &AnsatzSpec) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for family in Family::ALL {
            let len = dims.block_len(family);
            for index in 0..ansatz.kappa(family) {
                blocks.push(Block { family, index, offset, len });
                offset += len;
            }
        }
        Self { blocks, len: offset }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn family_blocks(&self, family: Family) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(move |b| b.family == family)
    }
}

/// Dimensions, ansatz and design-vector layout of a parametric ROM.
#[derive(Clone, Debug)]
pub struct RomStructure {
    pub dims: RomDims,
    pub ansatz: AnsatzSpec,
    layout: ThetaLayout,
}

/// All ROM matrices at one parameter value.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub j: DMatrix<f64>,
    /// Unshifted dissipation `R(p)`.
    pub r: DMatrix<f64>,
    /// Unshifted energy matrix `Q(p)`.
    pub q: DMatrix<f64>,
    pub r_shifted: DMatrix<f64>,
    pub q_shifted: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Factors `U` with `dR/dtheta = f (vtu(e) U^T + U vtu(e)^T)`, one per R block.
    pub r_factors: Vec<DMatrix<f64>>,
    pub q_factors: Vec<DMatrix<f64>>,
    /// Ansatz function values per family, in layout order.
    pub weights: [Vec<f64>; 6],
}

impl Assembled {
    pub fn weights(&self, family: Family) -> &[f64] {
        &self.weights[family as usize]
    }

    /// `A = (J - R~) Q~`.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        (&self.j - &self.r_shifted) * &self.q_shifted
    }
}

impl RomStructure {
    pub fn new(dims: RomDims, ansatz: AnsatzSpec) -> Result<Self> {
        ansatz.validate(&dims)?;
        let layout = ThetaLayout::new(&dims, &ansatz);
        Ok(Self { dims, ansatz, layout })
    }

    pub fn layout(&self) -> &ThetaLayout {
        &self.layout
    }

    pub fn n_theta(&self) -> usize {
        self.layout.len()
    }

    /// I.i.d. uniform design vector on `[-scale, scale]`.
    pub fn random_theta(&self, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.n_theta()).map(|_| rng.random_range(-scale..=scale)).collect()
    }

    pub fn assemble(&self, theta: &[f64], p: &[f64]) -> Result<Assembled> {
        if theta.len() != self.n_theta() {
            return Err(Error::Dimension(format!(
                "design vector has length {}, layout expects {}",
                theta.len(),
                self.n_theta()
            )));
        }
        let RomDims { order: r, inputs: m, outputs: q } = self.dims;
        let ansatz = &self.ansatz;
        let weights: [Vec<f64>; 6] = Family::ALL.map(|f| ansatz.funcs(f).iter().map(|g| g.eval(p)).collect());
        if !ansatz.psd_safe {
            for family in [Family::R, Family::Q] {
                if let Some(w) = weights[family as usize].iter().find(|w| **w < 0.0) {
                    return Err(Error::Structure(format!(
                        "ansatz function of family {} is negative ({w}) at p = {p:?}",
                        family.name()
                    )));
                }
            }
        }

        let mut b = DMatrix::zeros(r, m);
        let mut c = DMatrix::zeros(q, r);
        let mut d = DMatrix::zeros(q, m);
        let mut j = DMatrix::zeros(r, r);
        let mut r_factors = Vec::new();
        let mut q_factors = Vec::new();
        let mut r_mat = DMatrix::zeros(r, r);
        let mut q_mat = DMatrix::zeros(r, r);
        let mut v_r = DMatrix::zeros(r, r);
        let mut v_q = DMatrix::zeros(r, r);

        for block in self.layout.blocks() {
            let w = weights[block.family as usize][block.index];
            let slice = &theta[block.range()];
            match block.family {
                Family::B => b += vtf(slice, r, m)? * w,
                Family::C => c += vtf(slice, q, r)? * w,
                Family::D => d += vtf(slice, q, m)? * w,
                Family::J => {
                    let s = vtsu(slice, r)?;
                    j += (&s - s.transpose()) * w;
                }
                Family::R | Family::Q => {
                    let u = vtu(slice, r)?;
                    let (mat, v, factors) = if block.family == Family::R {
                        (&mut r_mat, &mut v_r, &mut r_factors)
                    } else {
                        (&mut q_mat, &mut v_q, &mut q_factors)
                    };
                    if ansatz.psd_safe {
                        *v += &u * w;
                    } else {
                        *mat += &u * u.transpose() * w;
                        factors.push(u);
                    }
                }
            }
        }
        if ansatz.psd_safe {
            r_mat = &v_r * v_r.transpose();
            q_mat = &v_q * v_q.transpose();
            r_factors = vec![v_r; ansatz.kappa(Family::R)];
            q_factors = vec![v_q; ansatz.kappa(Family::Q)];
        }
        let identity = DMatrix::<f64>::identity(r, r);
        let r_shifted = &r_mat + &identity * ansatz.eps_r;
        let q_shifted = &q_mat + &identity * ansatz.eps_q;
        if ansatz.port_hamiltonian {
            c = b.transpose() * &q_shifted;
            d = DMatrix::zeros(q, m);
        }
        Ok(Assembled { j, r: r_mat, q: q_mat, r_shifted, q_shifted, b, c, d, r_factors, q_factors, weights })
    }

    /// Transfer function `C (sI - A)^{-1} B + D` at `(s, p)`.
    pub fn transfer(&self, theta: &[f64], s: Complex64, p: &[f64]) -> Result<CMatrix> {
        let asm = self.assemble(theta, p)?;
        transfer_of(&asm, s, p)
    }
}

/// Transfer function of already assembled matrices.
pub fn transfer_of(asm: &Assembled, s: Complex64, p: &[f64]) -> Result<CMatrix> {
    let phi = linalg::shifted_resolvent_matrix(&asm.system_matrix(), s);
    let x = linalg::solve(phi, &linalg::to_complex(&asm.b)).ok_or_else(|| Error::Singular { s, p: p.to_vec() })?;
    Ok(linalg::to_complex(&asm.c) * x + linalg::to_complex(&asm.d))
}

/// Outcome of the port-Hamiltonian structure checks at one parameter value.
#[derive(Clone, Debug)]
pub struct PhCheck {
    pub j_skew: bool,
    pub r_symmetric: bool,
    pub q_symmetric: bool,
    pub min_eig_r: f64,
    pub min_eig_q: f64,
    /// Smallest eigenvalue of `Q^T R Q` (the passivity matrix with `P = S = N = 0`).
    pub min_eig_passivity: f64,
}

impl PhCheck {
    pub fn new(j: &DMatrix<f64>, r: &DMatrix<f64>, q: &DMatrix<f64>) -> Self {
        let w = q.transpose() * r * q;
        let w = (&w + w.transpose()) * 0.5;
        Self {
            j_skew: linalg::is_skew_symmetric(j),
            r_symmetric: linalg::is_symmetric(r),
            q_symmetric: linalg::is_symmetric(q),
            min_eig_r: linalg::min_symmetric_eigenvalue(r),
            min_eig_q: linalg::min_symmetric_eigenvalue(q),
            min_eig_passivity: linalg::min_symmetric_eigenvalue(&w),
        }
    }

    /// All conditions hold with eigenvalues allowed down to `-tol` times the matrix scale.
    pub fn holds(&self, tol: f64) -> bool {
        self.j_skew
            && self.r_symmetric
            && self.q_symmetric
            && self.min_eig_r >= -tol
            && self.min_eig_q >= -tol
            && self.min_eig_passivity >= -tol
    }
}

/// A parametric ROM: structure plus a concrete design vector.
#[derive(Clone, Debug)]
pub struct ParametricRom {
    pub structure: RomStructure,
    pub theta: Vec<f64>,
}

impl ParametricRom {
    pub fn new(structure: RomStructure, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != structure.n_theta() {
            return Err(Error::Dimension(format!(
                "design vector has length {}, layout expects {}",
                theta.len(),
                structure.n_theta()
            )));
        }
        Ok(Self { structure, theta })
    }

    pub fn zeros(structure: RomStructure) -> Self {
        let theta = vec![0.0; structure.n_theta()];
        Self { structure, theta }
    }

    pub fn dims(&self) -> RomDims {
        self.structure.dims
    }

    pub fn assemble(&self, p: &[f64]) -> Result<Assembled> {
        self.structure.assemble(&self.theta, p)
    }

    pub fn system_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.assemble(p)?.system_matrix())
    }

    /// Structure check of `(J, R~, Q~)` at `p`.
    pub fn ph_check(&self, p: &[f64]) -> Result<PhCheck> {
        let asm = self.assemble(p)?;
        Ok(PhCheck::new(&asm.j, &asm.r_shifted, &asm.q_shifted))
    }
}

impl TransferSource for ParametricRom {
    fn inputs(&self) -> usize {
        self.structure.dims.inputs
    }

    fn outputs(&self) -> usize {
        self.structure.dims.outputs
    }

    fn transfer(&self, s: Complex64, p: &[f64]) -> Result<CMatrix> {
        self.structure.transfer(&self.theta, s, p)
    }
}
