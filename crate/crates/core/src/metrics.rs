//! A-posteriori error estimates on dense evaluation grids.
//!
//! All H-infinity figures are sup-over-a-grid values and therefore lower bounds of
//! the true norms.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::TransferSource;
use crate::function::{fmt_f64, logspace, tensor_product};
use crate::linalg::{self, CMatrix};

pub const DEFAULT_OMEGA_POINTS: usize = 400;
pub const DEFAULT_P_POINTS: usize = 100;
const POLISH_ROUNDS: usize = 3;
const GOLDEN_STEPS: usize = 60;
/// Largest fraction of failed evaluations an estimate tolerates.
const MAX_SKIP_FRACTION: f64 = 0.1;

/// `DEFAULT_OMEGA_POINTS` log-spaced frequencies spanning six decades around `center`.
pub fn default_omega_grid(center: f64) -> Vec<f64> {
    logspace(center * 1e-3, center * 1e3, DEFAULT_OMEGA_POINTS)
}

fn error_matrix(fom: &dyn TransferSource, rom: &dyn TransferSource, omega: f64, p: &[f64]) -> Result<CMatrix> {
    let s = Complex64::new(0.0, omega);
    Ok(fom.transfer(s, p)? - rom.transfer(s, p)?)
}

fn check_dims(fom: &dyn TransferSource, rom: &dyn TransferSource) -> Result<()> {
    if (fom.inputs(), fom.outputs()) != (rom.inputs(), rom.outputs()) {
        return Err(Error::Dimension(format!(
            "full-order model has {} inputs and {} outputs, ROM has {} and {}",
            fom.inputs(),
            fom.outputs(),
            rom.inputs(),
            rom.outputs()
        )));
    }
    Ok(())
}

fn check_omega_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter("frequency grid is empty".into()));
    }
    if grid.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("frequency grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfEstimate {
    pub value: f64,
    pub argmax_omega: f64,
    pub skipped: usize,
}

/// Grid maximum of `sigma_max(H - H_r)` over `omega_grid` at `p`, polished by
/// golden-section search in `log10(omega)` around the best grid point.
pub fn hinf_estimate(
    fom: &dyn TransferSource,
    rom: &dyn TransferSource,
    p: &[f64],
    omega_grid: &[f64],
) -> Result<HinfEstimate> {
    check_dims(fom, rom)?;
    check_omega_grid(omega_grid)?;
    let sigma = |w: f64| error_matrix(fom, rom, w, p).map(|e| linalg::sigma_max(&e)).ok().filter(|v| v.is_finite());
    let values: Vec<Option<f64>> = omega_grid.iter().map(|&w| sigma(w)).collect();
    let skipped = values.iter().filter(|v| v.is_none()).count();
    if skipped as f64 > MAX_SKIP_FRACTION * omega_grid.len() as f64 {
        return Err(Error::Estimator { skipped, total: omega_grid.len() });
    }
    if skipped > 0 {
        log::warn!("{skipped} of {} frequency evaluations failed at p = {p:?}", omega_grid.len());
    }
    let (k, best) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let mut est = HinfEstimate { value: best, argmax_omega: omega_grid[k], skipped };

    let mut lo = omega_grid[k.saturating_sub(1)].log10();
    let mut hi = omega_grid[(k + 1).min(omega_grid.len() - 1)].log10();
    for _ in 0..POLISH_ROUNDS {
        if hi <= lo {
            break;
        }
        let (x, v) = golden_max(|x| sigma(10f64.powf(x)).unwrap_or(f64::NEG_INFINITY), lo, hi);
        if v > est.value {
            est.value = v;
            est.argmax_omega = 10f64.powf(x);
        }
        let centre = est.argmax_omega.log10();
        let half = (hi - lo) / 4.0;
        lo = (centre - half).max(lo);
        hi = (centre + half).min(hi);
    }
    Ok(est)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterRecord {
    pub p: Vec<f64>,
    pub hinf: f64,
    pub argmax_omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub records: Vec<ParameterRecord>,
    /// Largest per-parameter value.
    pub hinf_linf: f64,
    pub argmax_omega: f64,
    pub argmax_p: Vec<f64>,
    pub h2_l2: Option<f64>,
    pub omega_points: usize,
    pub omega_range: (f64, f64),
}

impl ErrorReport {
    /// Header `p1..pk,hinf,argmax_omega`; per-parameter rows, then a `composite` row
    /// (and an `h2_l2` row if present) tagged in the first column.
    pub fn to_csv(&self) -> String {
        let k = self.records.first().map_or(0, |r| r.p.len()).max(1);
        let mut out = String::new();
        for i in 1..=k {
            let _ = write!(out, "p{i},");
        }
        out.push_str("hinf,argmax_omega\n");
        for r in &self.records {
            for x in &r.p {
                let _ = write!(out, "{},", fmt_f64(*x));
            }
            let _ = writeln!(out, "{},{}", fmt_f64(r.hinf), fmt_f64(r.argmax_omega));
        }
        let pad = ",".repeat(k - 1);
        let _ = writeln!(out, "composite{pad},{},{}", fmt_f64(self.hinf_linf), fmt_f64(self.argmax_omega));
        if let Some(h2) = self.h2_l2 {
            let _ = writeln!(out, "h2_l2{pad},{},", fmt_f64(h2));
        }
        out
    }
}

/// Per-parameter H-infinity estimates and their maximum.
pub fn hinf_linf_estimate(
    fom: &dyn TransferSource,
    rom: &dyn TransferSource,
    p_grid: &[Vec<f64>],
    omega_grid: &[f64],
) -> Result<ErrorReport> {
    if p_grid.is_empty() {
        return Err(Error::Parameter("parameter grid is empty".into()));
    }
    check_dims(fom, rom)?;
    check_omega_grid(omega_grid)?;
    let estimates: Vec<HinfEstimate> =
        p_grid.par_iter().map(|p| hinf_estimate(fom, rom, p, omega_grid)).collect::<Result<_>>()?;
    let records: Vec<ParameterRecord> = p_grid
        .iter()
        .zip(&estimates)
        .map(|(p, e)| ParameterRecord { p: p.clone(), hinf: e.value, argmax_omega: e.argmax_omega })
        .collect();
    let best = records.iter().fold(&records[0], |b, r| if r.hinf > b.hinf { r } else { b });
    Ok(ErrorReport {
        hinf_linf: best.hinf,
        argmax_omega: best.argmax_omega,
        argmax_p: best.p.clone(),
        records,
        h2_l2: None,
        omega_points: omega_grid.len(),
        omega_range: (omega_grid[0], omega_grid[omega_grid.len() - 1]),
    })
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            (left + right) / 2.0
        })
        .collect()
}

/// Joint frequency/parameter L2 norm of the Frobenius error.
///
/// The frequency integral is a trapezoid rule in `ln(omega)` over `omega_grid`, doubled
/// for negative frequencies; the parameter integral is a tensor trapezoid rule over
/// `p_axes` (an axis with a single point contributes weight one). Returns infinity
/// when the error does not vanish at high frequency.
pub fn h2_l2_estimate(
    fom: &dyn TransferSource,
    rom: &dyn TransferSource,
    p_axes: &[Vec<f64>],
    omega_grid: &[f64],
) -> Result<f64> {
    check_dims(fom, rom)?;
    check_omega_grid(omega_grid)?;
    if p_axes.is_empty() || p_axes.iter().any(Vec::is_empty) {
        return Err(Error::Parameter("parameter grid is empty".into()));
    }
    let p_points = tensor_product(p_axes);
    let weight_axes: Vec<Vec<f64>> = p_axes.iter().map(|a| trapezoid_weights(a)).collect();
    let p_weights: Vec<f64> = tensor_product(&weight_axes).iter().map(|w| w.iter().product()).collect();
    let logs: Vec<f64> = omega_grid.iter().map(|w| w.ln()).collect();
    let w_weights = trapezoid_weights(&logs);

    let far = omega_grid[omega_grid.len() - 1] * 1e9;
    for p in &p_points {
        let e = error_matrix(fom, rom, far, p)?;
        let scale = 1.0 + linalg::sigma_max(&fom.transfer(Complex64::new(0.0, far), p)?);
        if linalg::sigma_max(&e) > 1e-8 * scale {
            log::warn!("error has a feedthrough term at p = {p:?}; H2 norm is infinite");
            return Ok(f64::INFINITY);
        }
    }

    let total = omega_grid.len() * p_points.len();
    let terms: Vec<Option<f64>> = p_points
        .par_iter()
        .zip(&p_weights)
        .flat_map_iter(|(p, pw)| {
            omega_grid.iter().zip(&w_weights).map(move |(&w, ww)| {
                error_matrix(fom, rom, w, p).ok().map(|e| e.norm_squared() * w * ww * pw).filter(|v| v.is_finite())
            })
        })
        .collect();
    let skipped = terms.iter().filter(|t| t.is_none()).count();
    if skipped as f64 > MAX_SKIP_FRACTION * total as f64 {
        return Err(Error::Estimator { skipped, total });
    }
    let integral: f64 = terms.iter().flatten().sum();
    // two half-lines, then the 1/(2 pi) normalisation
    Ok((2.0 * integral / (2.0 * std::f64::consts::PI)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::ParamSeparableLti;
    use crate::function::{linspace, ParamBox};
    use nalgebra::DMatrix;

    fn first_order(pole: f64) -> ParamSeparableLti {
        let m = |x: f64| vec![crate::fom::Term::constant(DMatrix::from_element(1, 1, x))];
        ParamSeparableLti::new(vec![], m(-pole), m(1.0), m(1.0), vec![], ParamBox::interval(0.0, 1.0).unwrap())
            .unwrap()
    }

    struct Zero;
    impl TransferSource for Zero {
        fn inputs(&self) -> usize {
            1
        }
        fn outputs(&self) -> usize {
            1
        }
        fn transfer(&self, _: Complex64, _: &[f64]) -> Result<CMatrix> {
            Ok(CMatrix::zeros(1, 1))
        }
    }

    #[test]
    fn hinf_of_first_order_system() {
        let e = first_order(1.0);
        let grid = logspace(1e-3, 1e3, 400);
        let est = hinf_estimate(&e, &Zero, &[0.5], &grid).unwrap();
        assert!((est.value - 1.0).abs() < 1e-6, "{est:?}");
        assert_eq!(hinf_estimate(&e, &e, &[0.5], &grid).unwrap().value, 0.0);
    }

    #[test]
    fn hinf_polish_finds_resonance_between_grid_points() {
        // lightly damped second-order system with peak 1/(2 zeta sqrt(1 - zeta^2))
        let zeta: f64 = 0.01;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0 * zeta]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let t = crate::fom::Term::constant;
        let sys = ParamSeparableLti::new(vec![], vec![t(a)], vec![t(b)], vec![t(c)], vec![], ParamBox::interval(0.0, 1.0).unwrap())
            .unwrap();
        let exact = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        let est = hinf_estimate(&sys, &Zero, &[0.0], &logspace(0.1, 10.0, 41)).unwrap();
        assert!((est.value - exact).abs() < 1e-6 * exact, "{} vs {exact}", est.value);
    }

    #[test]
    fn composite_is_max_over_parameters() {
        let e = first_order(1.0);
        let grid = logspace(1e-2, 1e2, 50);
        let ps: Vec<Vec<f64>> = linspace(0.0, 1.0, 5).into_iter().map(|p| vec![p]).collect();
        let rep = hinf_linf_estimate(&e, &Zero, &ps, &grid).unwrap();
        assert!(rep.records.iter().all(|r| r.hinf <= rep.hinf_linf && (r.hinf - rep.records[0].hinf).abs() < 1e-15));
        let csv = rep.to_csv();
        assert!(csv.starts_with("p1,hinf,argmax_omega\n"));
        assert!(csv.lines().last().unwrap().starts_with("composite,"));
    }

    #[test]
    fn h2_of_first_order_system() {
        let e = first_order(1.0);
        let grid = logspace(1e-3, 1e3, 2000);
        let h2 = h2_l2_estimate(&e, &Zero, &[linspace(0.0, 1.0, 3)], &grid).unwrap();
        let exact = 0.5f64.sqrt();
        assert!((h2 - exact).abs() < 0.01 * exact, "{h2}");
        assert_eq!(h2_l2_estimate(&e, &e, &[vec![0.5]], &grid).unwrap(), 0.0);
    }

    #[test]
    fn h2_flags_feedthrough() {
        struct Const;
        impl TransferSource for Const {
            fn inputs(&self) -> usize {
                1
            }
            fn outputs(&self) -> usize {
                1
            }
            fn transfer(&self, _: Complex64, _: &[f64]) -> Result<CMatrix> {
                Ok(CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))
            }
        }
        assert!(h2_l2_estimate(&Const, &Zero, &[vec![0.0]], &[1.0, 2.0]).unwrap().is_infinite());
    }

    #[test]
    fn bad_grids_rejected() {
        let e = first_order(1.0);
        assert!(hinf_estimate(&e, &Zero, &[0.0], &[]).is_err());
        assert!(hinf_estimate(&e, &Zero, &[0.0], &[2.0, 1.0]).is_err());
        assert!(hinf_linf_estimate(&e, &Zero, &[], &[1.0]).is_err());
    }
}
