//! Bisection over the error level `gamma` with adaptive sample refinement.
//!
//! Each step refines the sample grid against the current ROM at the trial level, then
//! minimizes the thresholded loss warm-started from the previous iterate. A level is
//! accepted when the minimum is at most `eps2`.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fom::{CachedSource, TransferSource};
use crate::function::fmt_f64;
use crate::linalg;
use crate::objective::{evaluate_samples, Objective, SamplePoint};
use crate::rom::RomStructure;
use crate::sampling::{RefineOptions, SampleGrid};

use super::lbfgs::{minimize, LbfgsOptions};

#[derive(Clone, Debug)]
pub struct SobmorOptions {
    /// Initial upper bound; defaults to 1.1 times the largest full-order gain on the initial grid.
    pub gamma_u: Option<f64>,
    /// Relative bracket width at which bisection stops.
    pub eps1: f64,
    /// Largest loss value for which a level counts as attained.
    pub eps2: f64,
    /// Inner iteration budget; defaults to `min(10 n_theta, 5000)`.
    pub max_inner: Option<usize>,
    pub inner: LbfgsOptions,
    pub refine: RefineOptions,
    pub max_outer: usize,
    /// Bisection also stops once `gamma_u` falls below this fraction of its initial value.
    pub gamma_floor: f64,
    /// Record wall-clock times in the trace.
    pub timing: bool,
}

impl Default for SobmorOptions {
    fn default() -> Self {
        Self {
            gamma_u: None,
            eps1: 1e-2,
            eps2: 1e-6,
            max_inner: None,
            inner: LbfgsOptions { f_rel_tol: 1e-10, patience: 20, ..LbfgsOptions::default() },
            refine: RefineOptions::default(),
            max_outer: 100,
            gamma_floor: 1e-12,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BisectionStep {
    pub iteration: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub n_samples: usize,
    pub inner_iters: usize,
    pub wall_ms: u128,
    /// Largest error over the samples after minimization.
    pub max_sample_error: f64,
    pub theta_start: Vec<f64>,
    pub theta_end: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BisectionTrace {
    pub gamma_u0: f64,
    pub steps: Vec<BisectionStep>,
    pub timing: bool,
}

impl BisectionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,gamma,alpha,accepted,n_samples,inner_iters,wall_ms,max_sample_error\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.iteration,
                fmt_f64(s.gamma),
                fmt_f64(s.alpha),
                u8::from(s.accepted),
                s.n_samples,
                s.inner_iters,
                if self.timing { s.wall_ms } else { 0 },
                fmt_f64(s.max_sample_error)
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SobmorResult {
    /// Iterate of the last accepted level.
    pub theta: Vec<f64>,
    pub gamma_u: f64,
    pub gamma_l: f64,
    pub trace: BisectionTrace,
    pub grid: SampleGrid,
    /// Largest sampled error of the returned ROM when its level was accepted.
    pub training_max_error: f64,
    pub budget_exhausted: bool,
}

/// Runs the bisection from `theta0` on the initial grid `grid`.
pub fn sobmor(
    fom: &dyn TransferSource,
    structure: &RomStructure,
    theta0: &[f64],
    mut grid: SampleGrid,
    options: &SobmorOptions,
) -> Result<SobmorResult> {
    let n_theta = structure.n_theta();
    if theta0.len() != n_theta {
        return Err(Error::Dimension(format!("theta has length {}, expected {n_theta}", theta0.len())));
    }
    if (fom.inputs(), fom.outputs()) != (structure.dims.inputs, structure.dims.outputs) {
        return Err(Error::Dimension(format!(
            "full-order model has {} inputs and {} outputs, ROM has {} and {}",
            fom.inputs(),
            fom.outputs(),
            structure.dims.inputs,
            structure.dims.outputs
        )));
    }
    if !(options.eps1 > 0.0 && options.eps2 >= 0.0) {
        return Err(Error::Parameter("eps1 must be positive and eps2 nonnegative".into()));
    }
    let fom = CachedSource::new(fom);
    let points_of = |grid: &SampleGrid| -> Vec<SamplePoint> {
        grid.physical_points().into_iter().map(|x| SamplePoint::new(x[0], x[1..].to_vec())).collect()
    };

    let gamma_u0 = match options.gamma_u {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::Parameter(format!("gamma_u must be positive, got {g}"))),
        None => {
            let samples = evaluate_samples(&fom, points_of(&grid))?;
            let peak = samples.iter().map(|s| linalg::sigma_max(&s.fom)).fold(0.0, f64::max);
            if !(peak > 0.0) {
                return Err(Error::Parameter(
                    "full-order gain vanishes on the initial grid; set gamma_u explicitly".into(),
                ));
            }
            1.1 * peak
        }
    };
    let max_inner = options.max_inner.unwrap_or_else(|| (10 * n_theta).min(5000));
    let inner = LbfgsOptions { max_iters: max_inner, ..options.inner.clone() };

    let mut trace = BisectionTrace { gamma_u0, steps: Vec::new(), timing: options.timing };
    let (mut gamma_l, mut gamma_u) = (0.0, gamma_u0);
    let mut theta = theta0.to_vec();
    let mut accepted_theta: Option<(Vec<f64>, f64)> = None;
    let mut budget_exhausted = false;

    while trace.steps.len() < options.max_outer
        && (gamma_u - gamma_l) / (gamma_u + gamma_l) > options.eps1
        && gamma_u > options.gamma_floor * gamma_u0
    {
        let iteration = trace.steps.len();
        let gamma = (gamma_u + gamma_l) / 2.0;
        let start = Instant::now();

        let field = |x: &[f64]| -> f64 {
            let (s, p) = (Complex64::new(0.0, x[0]), &x[1..]);
            match (fom.transfer(s, p), structure.transfer(&theta, s, p)) {
                (Ok(h), Ok(hr)) => linalg::sigma_max(&(h - hr)),
                (Err(e), _) | (_, Err(e)) => {
                    log::warn!("error field undefined at omega = {}, p = {p:?}: {e}", x[0]);
                    f64::NAN
                }
            }
        };
        match grid.refine(&field, gamma, &options.refine) {
            Ok(report) => log::debug!("refinement at gamma = {gamma}: {report:?}"),
            Err(Error::Budget { budget }) => {
                log::warn!("continuing with a partially refined grid at the vertex budget {budget}");
                budget_exhausted = true;
            }
            Err(e) => return Err(e),
        }
        let samples = evaluate_samples(&fom, points_of(&grid))?;
        let objective = Objective::new(structure, &samples, gamma)?;
        let theta_start = theta.clone();
        let min = minimize(|t| objective.value_and_gradient(t).map(|(b, g)| (b.value, g)), &theta, &inner)?;
        theta = min.x;
        let max_sample_error = objective.loss(&theta)?.sigma_max.into_iter().fold(0.0, f64::max);
        let accepted = min.value <= options.eps2;
        if accepted {
            gamma_u = gamma;
            accepted_theta = Some((theta.clone(), max_sample_error));
        } else {
            gamma_l = gamma;
        }
        log::info!(
            "bisection {iteration}: gamma = {gamma:.6e}, loss = {:.3e}, {} samples, {} inner iterations, {}",
            min.value,
            samples.len(),
            min.iterations,
            if accepted { "accepted" } else { "rejected" }
        );
        trace.steps.push(BisectionStep {
            iteration,
            gamma,
            alpha: min.value,
            accepted,
            n_samples: samples.len(),
            inner_iters: min.iterations,
            wall_ms: start.elapsed().as_millis(),
            max_sample_error,
            theta_start,
            theta_end: theta.clone(),
        });
    }

    let Some((theta, training_max_error)) = accepted_theta else {
        return Err(Error::Bracket { gamma_u: gamma_u0, trace_csv: trace.to_csv() });
    };
    Ok(SobmorResult { theta, gamma_u, gamma_l, trace, grid, training_max_error, budget_exhausted })
}
