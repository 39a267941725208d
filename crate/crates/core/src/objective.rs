//! Level-thresholded surrogate of the sampled H-infinity x L-infinity error and its
//! analytic gradient.
//!
//! For a level `gamma > 0` and samples `(omega_i, p_i)` the loss is
//!
//! ```text
//! L(theta) = 1/gamma * sum_i sum_j ([sigma_j(H(i omega_i, p_i) - H_r(i omega_i, p_i; theta)) - gamma]_+)^2
//! ```
//!
//! Only singular values above `gamma` contribute, to both the value and the gradient.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::TransferSource;
use crate::linalg::{self, CMatrix, CVector, SingularTriplet};
use crate::rom::{Assembled, Family, RomStructure};

/// Relative singular-value gap below which a gradient is flagged as a subgradient.
pub const SIMPLE_GAP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub omega: f64,
    pub p: Vec<f64>,
}

impl SamplePoint {
    pub fn new(omega: f64, p: Vec<f64>) -> Self {
        Self { omega, p }
    }

    pub fn s(&self) -> Complex64 {
        Complex64::new(0.0, self.omega)
    }
}

/// A sample point together with the full-order response there.
#[derive(Clone, Debug)]
pub struct Sample {
    pub point: SamplePoint,
    pub fom: CMatrix,
}

impl Sample {
    pub fn evaluate(fom: &dyn TransferSource, point: SamplePoint) -> Result<Self> {
        let value = fom.transfer(point.s(), &point.p)?;
        Ok(Self { point, fom: value })
    }
}

/// Evaluates the full-order model at every point, in parallel.
pub fn evaluate_samples(fom: &dyn TransferSource, points: Vec<SamplePoint>) -> Result<Vec<Sample>> {
    points.into_par_iter().map(|pt| Sample::evaluate(fom, pt)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub value: f64,
    /// `[sigma_j - gamma]_+` per sample and singular-value index.
    pub residuals: Vec<Vec<f64>>,
    /// Indices of samples with at least one positive residual.
    pub active: Vec<usize>,
    /// Largest singular value per sample.
    pub sigma_max: Vec<f64>,
}

/// Per-sample ROM quantities reused by value and gradient.
struct Response {
    diff: CMatrix,
    phi_inv: CMatrix,
}

fn response(asm: &Assembled, a: &DMatrix<f64>, sample: &Sample) -> Result<Response> {
    let s = sample.point.s();
    let phi = linalg::shifted_resolvent_matrix(a, s);
    let phi_inv = phi
        .try_inverse()
        .filter(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular { s, p: sample.point.p.clone() })?;
    let hr = linalg::to_complex(&asm.c) * (&phi_inv * linalg::to_complex(&asm.b)) + linalg::to_complex(&asm.d);
    Ok(Response { diff: &sample.fom - hr, phi_inv })
}

/// Adds `scale * grad_theta sigma` for the singular triplet `(sigma, u, v)` of
/// `H - H_r` into `grad`.
fn accumulate_sigma_gradient(
    structure: &RomStructure,
    asm: &Assembled,
    phi_inv: &CMatrix,
    left: &CVector,
    right: &CVector,
    scale: f64,
    grad: &mut [f64],
) {
    let r = structure.dims.order;
    let m = structure.dims.inputs;
    let q = structure.dims.outputs;
    let b = linalg::to_complex(&asm.b);
    let c = linalg::to_complex(&asm.c);
    let q_shift = linalg::to_complex(&asm.q_shifted);
    let j_minus_r = linalg::to_complex(&(&asm.j - &asm.r_shifted));

    // x = Phi^{-1} B v,  y^T = u^H C Phi^{-1}
    let x: CVector = phi_inv * (&b * right);
    let y: CVector = (left.adjoint() * &c * phi_inv).transpose();
    let qx: CVector = &q_shift * &x;
    let u_conj: CVector = left.map(|z| z.conj());

    let layout = structure.layout();
    let ph = structure.ansatz.port_hamiltonian;

    // Y1 = Q~ x y^T
    let y1 = &qx * y.transpose();
    // Y2 = x (y^T (J - R~)) plus, with y = B^T Q~ x, the output-side term x (B conj(u))^T
    let mut g_row = y.transpose() * &j_minus_r;
    if ph {
        g_row += (&b * &u_conj).transpose();
    }
    let y2 = &x * g_row;

    for block in layout.blocks() {
        let w = asm.weights(block.family)[block.index] * scale;
        if w == 0.0 {
            continue;
        }
        let out = &mut grad[block.range()];
        match block.family {
            Family::B => {
                for col in 0..m {
                    for row in 0..r {
                        let mut z = y[row] * right[col];
                        if ph {
                            z += qx[row] * left[col].conj();
                        }
                        out[row + r * col] -= w * z.re;
                    }
                }
            }
            Family::C => {
                for col in 0..r {
                    for row in 0..q {
                        out[row + q * col] -= w * (u_conj[row] * x[col]).re;
                    }
                }
            }
            Family::D => {
                for col in 0..m {
                    for row in 0..q {
                        out[row + q * col] -= w * (u_conj[row] * right[col]).re;
                    }
                }
            }
            Family::J => {
                let mut k = 0;
                for i in 0..r {
                    for jj in (i + 1)..r {
                        out[k] += w * (y1[(i, jj)] - y1[(jj, i)]).re;
                        k += 1;
                    }
                }
            }
            Family::R | Family::Q => {
                let (factor, sign, g) = if block.family == Family::R {
                    (&asm.r_factors[block.index], 1.0, &y1)
                } else {
                    (&asm.q_factors[block.index], -1.0, &y2)
                };
                let u = linalg::to_complex(factor);
                let sym = (g + g.transpose()) * u;
                let mut k = 0;
                for i in 0..r {
                    for jj in i..r {
                        out[k] += sign * w * sym[(i, jj)].re;
                        k += 1;
                    }
                }
            }
        }
    }
}

/// Value and gradient of `sigma_j(H(s, p) - H_r(s, p; theta))` for purely imaginary `s = i omega`.
///
/// Logs a warning when `sigma_j` is not simple; the returned vector is then one
/// element of the subdifferential.
pub fn singular_gradient(
    structure: &RomStructure,
    theta: &[f64],
    fom: &dyn TransferSource,
    point: &SamplePoint,
    index: usize,
) -> Result<(f64, Vec<f64>)> {
    let sample = Sample::evaluate(fom, point.clone())?;
    singular_gradient_at(structure, theta, &sample, index)
}

pub fn singular_gradient_at(
    structure: &RomStructure,
    theta: &[f64],
    sample: &Sample,
    index: usize,
) -> Result<(f64, Vec<f64>)> {
    let asm = structure.assemble(theta, &sample.point.p)?;
    let a = asm.system_matrix();
    let resp = response(&asm, &a, sample)?;
    let triplets = linalg::singular_triplets(&resp.diff);
    let t = triplets.get(index).ok_or_else(|| {
        Error::Dimension(format!("singular value index {index} out of range ({} available)", triplets.len()))
    })?;
    warn_if_degenerate(t, triplets[0].sigma, &sample.point);
    let mut grad = vec![0.0; structure.n_theta()];
    accumulate_sigma_gradient(structure, &asm, &resp.phi_inv, &t.left, &t.right, 1.0, &mut grad);
    Ok((t.sigma, grad))
}

fn warn_if_degenerate(t: &SingularTriplet, sigma_max: f64, point: &SamplePoint) {
    if t.sigma == 0.0 || t.gap <= SIMPLE_GAP_TOL * sigma_max {
        log::warn!(
            "singular value {} at omega = {}, p = {:?} is not simple; using a subgradient",
            t.sigma,
            point.omega,
            point.p
        );
    }
}

/// The thresholded loss over a fixed sample set.
pub struct Objective<'a> {
    structure: &'a RomStructure,
    samples: &'a [Sample],
    gamma: f64,
    /// Sample indices grouped by identical parameter value.
    groups: Vec<Vec<usize>>,
}

struct SampleTerm {
    index: usize,
    residuals: Vec<f64>,
    sigma_max: f64,
    grad: Option<Vec<f64>>,
}

impl<'a> Objective<'a> {
    pub fn new(structure: &'a RomStructure, samples: &'a [Sample], gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
        }
        if samples.is_empty() {
            return Err(Error::Parameter("sample set is empty".into()));
        }
        let (m, q) = (structure.dims.inputs, structure.dims.outputs);
        if let Some(s) = samples.iter().find(|s| s.fom.shape() != (q, m)) {
            return Err(Error::Dimension(format!(
                "full-order response has shape {:?}, ROM has {q} outputs and {m} inputs",
                s.fom.shape()
            )));
        }
        let mut groups: Vec<(Vec<u64>, Vec<usize>)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            let key: Vec<u64> = s.point.p.iter().map(|x| x.to_bits()).collect();
            let slot = *index.entry(key.clone()).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(i);
        }
        Ok(Self { structure, samples, gamma, groups: groups.into_iter().map(|(_, g)| g).collect() })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_theta(&self) -> usize {
        self.structure.n_theta()
    }

    fn terms(&self, theta: &[f64], with_grad: bool) -> Result<Vec<SampleTerm>> {
        let gamma = self.gamma;
        let per_group: Vec<Result<Vec<SampleTerm>>> = self
            .groups
            .par_iter()
            .map(|group| {
                let p = &self.samples[group[0]].point.p;
                let asm = self.structure.assemble(theta, p)?;
                let a = asm.system_matrix();
                group
                    .iter()
                    .map(|&i| {
                        let sample = &self.samples[i];
                        let resp = response(&asm, &a, sample)?;
                        let (residuals, sigma_max, grad) = if with_grad {
                            let triplets = linalg::singular_triplets(&resp.diff);
                            let sigma_max = triplets.first().map_or(0.0, |t| t.sigma);
                            let residuals: Vec<f64> = triplets.iter().map(|t| (t.sigma - gamma).max(0.0)).collect();
                            let mut grad = None;
                            for (t, res) in triplets.iter().zip(&residuals) {
                                if *res > 0.0 {
                                    warn_if_degenerate(t, sigma_max, &sample.point);
                                    let g = grad.get_or_insert_with(|| vec![0.0; theta.len()]);
                                    let scale = 2.0 / gamma * res;
                                    accumulate_sigma_gradient(
                                        self.structure,
                                        &asm,
                                        &resp.phi_inv,
                                        &t.left,
                                        &t.right,
                                        scale,
                                        g,
                                    );
                                }
                            }
                            (residuals, sigma_max, grad)
                        } else {
                            let sv = linalg::singular_values(&resp.diff);
                            let sigma_max = sv.first().copied().unwrap_or(0.0);
                            (sv.iter().map(|s| (s - gamma).max(0.0)).collect(), sigma_max, None)
                        };
                        Ok(SampleTerm { index: i, residuals, sigma_max, grad })
                    })
                    .collect()
            })
            .collect();
        let mut terms = Vec::with_capacity(self.samples.len());
        for group in per_group {
            terms.extend(group?);
        }
        terms.sort_by_key(|t| t.index);
        Ok(terms)
    }

    fn breakdown(&self, terms: &[SampleTerm]) -> LossBreakdown {
        let mut value = 0.0;
        let mut active = Vec::new();
        for t in terms {
            let part: f64 = t.residuals.iter().map(|r| r * r).sum();
            if t.residuals.iter().any(|r| *r > 0.0) {
                active.push(t.index);
            }
            value += part;
        }
        LossBreakdown {
            value: value / self.gamma,
            residuals: terms.iter().map(|t| t.residuals.clone()).collect(),
            active,
            sigma_max: terms.iter().map(|t| t.sigma_max).collect(),
        }
    }

    pub fn loss(&self, theta: &[f64]) -> Result<LossBreakdown> {
        Ok(self.breakdown(&self.terms(theta, false)?))
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.loss(theta)?.value)
    }

    pub fn value_and_gradient(&self, theta: &[f64]) -> Result<(LossBreakdown, Vec<f64>)> {
        let terms = self.terms(theta, true)?;
        let mut grad = vec![0.0; theta.len()];
        for t in &terms {
            if let Some(g) = &t.grad {
                for (acc, x) in grad.iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
        Ok((self.breakdown(&terms), grad))
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(theta)?.1)
    }
}

/// Evaluates the full-order model at `points` and returns the loss breakdown.
pub fn loss(
    structure: &RomStructure,
    theta: &[f64],
    fom: &dyn TransferSource,
    gamma: f64,
    points: &[SamplePoint],
) -> Result<LossBreakdown> {
    let samples = evaluate_samples(fom, points.to_vec())?;
    Objective::new(structure, &samples, gamma)?.loss(theta)
}

pub fn loss_gradient(
    structure: &RomStructure,
    theta: &[f64],
    fom: &dyn TransferSource,
    gamma: f64,
    points: &[SamplePoint],
) -> Result<Vec<f64>> {
    let samples = evaluate_samples(fom, points.to_vec())?;
    Objective::new(structure, &samples, gamma)?.gradient(theta)
}
