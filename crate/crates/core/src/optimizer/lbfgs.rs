//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Stop once the infinity norm of the gradient is at most this.
    pub grad_tol: f64,
    pub memory: usize,
    /// Stop after `patience` consecutive iterations with relative decrease below this.
    /// Zero disables the test.
    pub f_rel_tol: f64,
    pub patience: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            grad_tol: 1e-8,
            memory: 10,
            f_rel_tol: 0.0,
            patience: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    Stagnation,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

struct Trial {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    fg: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    opts: &'a LbfgsOptions,
    evals: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    /// Trial evaluation; failures and non-finite values count as `+inf`.
    fn eval(&mut self, alpha: f64) -> Trial {
        self.evals += 1;
        let x = axpy(self.x, alpha, self.d);
        match (self.fg)(&x) {
            Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => {
                let slope = dot(&g, self.d);
                Trial { alpha, f, g, slope }
            }
            _ => Trial { alpha, f: f64::INFINITY, g: Vec::new(), slope: f64::NAN },
        }
    }

    fn armijo(&self, t: &Trial) -> bool {
        t.f <= self.f0 + self.opts.c1 * t.alpha * self.slope0
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.slope.abs() <= -self.opts.c2 * self.slope0
    }

    fn run(&mut self, alpha0: f64) -> Option<Trial> {
        let mut prev = Trial { alpha: 0.0, f: self.f0, g: Vec::new(), slope: self.slope0 };
        let mut alpha = alpha0;
        let mut best: Option<Trial> = None;
        for i in 0..self.opts.max_line_search {
            let t = self.eval(alpha);
            if !t.f.is_finite() {
                return self.zoom(prev, t, &mut best);
            }
            if !self.armijo(&t) || (i > 0 && t.f >= prev.f) {
                return self.zoom(prev, t, &mut best);
            }
            if self.curvature(&t) {
                return Some(t);
            }
            if t.slope >= 0.0 {
                return self.zoom(t, prev, &mut best);
            }
            alpha *= 2.0;
            best = Some(Trial { alpha: t.alpha, f: t.f, g: t.g.clone(), slope: t.slope });
            prev = t;
        }
        best
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial, best: &mut Option<Trial>) -> Option<Trial> {
        if lo.alpha > 0.0 && self.armijo(&lo) {
            *best = Some(Trial { alpha: lo.alpha, f: lo.f, g: lo.g.clone(), slope: lo.slope });
        }
        for _ in 0..self.opts.max_line_search {
            let alpha = interpolate(&lo, &hi);
            if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs()).max(1e-300) {
                break;
            }
            let t = self.eval(alpha);
            if !t.f.is_finite() || !self.armijo(&t) || t.f >= lo.f {
                hi = t;
            } else {
                if self.curvature(&t) {
                    return Some(t);
                }
                if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                *best = Some(Trial { alpha: t.alpha, f: t.f, g: t.g.clone(), slope: t.slope });
                lo = t;
            }
        }
        best.take()
    }
}

/// Safeguarded cubic interpolation in `[lo, hi]`, falling back to bisection.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = a + (b - a) / 2.0;
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let x = b - (b - a) * (hi.slope + d2 - d1) / denom;
    let (l, u) = (a.min(b), a.max(b));
    let margin = 0.1 * (u - l);
    if x.is_finite() && x > l + margin && x < u - margin {
        x
    } else {
        mid
    }
}

/// Minimizes `fg`, which returns the value and gradient at a point.
///
/// The starting point must evaluate to finite values. Returns the final (best) iterate;
/// a line search that finds no decrease ends the run with [`Termination::LineSearchFailed`].
pub fn minimize<F>(mut fg: F, x0: &[f64], opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimization(format!("non-finite objective at the starting point (value {f})")));
    }
    if g.len() != x.len() {
        return Err(Error::Dimension(format!("gradient has length {}, expected {}", g.len(), x.len())));
    }
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stalled = 0;
    let mut iterations = 0;
    let termination = loop {
        if inf_norm(&g) <= opts.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iters {
            break Termination::MaxIterations;
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let alpha0 = if history.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let mut ls = LineSearch { fg: &mut fg, x: &x, d: &d, f0: f, slope0: slope, opts, evals: 0 };
        let found = ls.run(alpha0);
        evaluations += ls.evals;
        let Some(t) = found else {
            if history.is_empty() {
                break Termination::LineSearchFailed;
            }
            history.clear();
            continue;
        };
        iterations += 1;
        let x_new = axpy(&x, t.alpha, &d);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = t.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory.max(1) {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = f - t.f;
        x = x_new;
        f = t.f;
        g = t.g;
        if opts.f_rel_tol > 0.0 && decrease <= opts.f_rel_tol * f.abs().max(f64::MIN_POSITIVE) {
            stalled += 1;
            if stalled >= opts.patience.max(1) {
                break Termination::Stagnation;
            }
        } else {
            stalled = 0;
        }
    };
    Ok(Minimum { grad_norm: inf_norm(&g), x, value: f, iterations, evaluations, termination })
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn rosenbrock_converges() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &LbfgsOptions::default()).unwrap();
        assert!(m.value < 1e-8, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn quadratic_exact_minimum() {
        let diag = [1.0, 10.0, 100.0, 0.5];
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = x.iter().zip(diag).map(|(x, d)| 0.5 * d * (x - 1.0).powi(2)).sum();
            Ok((v, x.iter().zip(diag).map(|(x, d)| d * (x - 1.0)).collect()))
        };
        let m = minimize(f, &[0.0; 4], &LbfgsOptions::default()).unwrap();
        assert_eq!(m.termination, Termination::GradientTolerance);
        assert!(m.x.iter().all(|x| (x - 1.0).abs() < 1e-8));
    }

    #[test]
    fn iterates_decrease_monotonically() {
        let mut seen = Vec::new();
        let opts = LbfgsOptions { max_iters: 30, ..Default::default() };
        let m = minimize(
            |x: &[f64]| {
                let r = rosenbrock(x)?;
                seen.push((x.to_vec(), r.0));
                Ok(r)
            },
            &[-1.2, 1.0],
            &opts,
        )
        .unwrap();
        assert!(m.value <= seen[0].1);
        assert!(m.iterations <= 30);
    }

    #[test]
    fn respects_iteration_budget() {
        let opts = LbfgsOptions { max_iters: 3, ..Default::default() };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(m.iterations, 3);
        assert_eq!(m.termination, Termination::MaxIterations);
    }

    #[test]
    fn zero_gradient_start_returns_immediately() {
        let m = minimize(|_: &[f64]| Ok((0.0, vec![0.0; 3])), &[1.0, 2.0, 3.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(m.iterations, 0);
        assert_eq!(m.x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        assert!(minimize(|_: &[f64]| Ok((f64::NAN, vec![0.0])), &[0.0], &LbfgsOptions::default()).is_err());
    }

    #[test]
    fn failing_trial_points_are_avoided() {
        // undefined for x >= 2, minimum at 1.5
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] >= 2.0 {
                return Err(Error::Optimization("outside domain".into()));
            }
            Ok(((x[0] - 1.5).powi(2), vec![2.0 * (x[0] - 1.5)]))
        };
        let m = minimize(f, &[-10.0], &LbfgsOptions::default()).unwrap();
        assert!((m.x[0] - 1.5).abs() < 1e-6, "{m:?}");
    }
}
