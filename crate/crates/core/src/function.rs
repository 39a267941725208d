//! Scalar ansatz functions `f(p)` and the axis-aligned parameter box.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Piecewise-linear hat on `[a, b]`, peaking with value one at the midpoint.
pub fn hat(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::Parameter(format!("hat requires a < b, got a = {a}, b = {b}")));
    }
    Ok(hat_unchecked(x, a, b))
}

fn hat_unchecked(x: f64, a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if x <= a || x >= b {
        0.0
    } else if x <= mid {
        2.0 * (x - a) / (b - a)
    } else {
        -2.0 * (x - b) / (b - a)
    }
}

pub type UserFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A scalar function of the model parameter vector.
#[derive(Clone)]
pub enum ScalarFunction {
    Constant(f64),
    /// Hat function acting on one component of `p`.
    Hat { axis: usize, lo: f64, hi: f64 },
    /// `slope * p[axis] + intercept`; used for affinely parameterized full-order models.
    Affine { axis: usize, slope: f64, intercept: f64 },
    /// Arbitrary user function. Cannot be serialized.
    User { name: String, func: UserFn },
}

impl ScalarFunction {
    pub fn constant(c: f64) -> Self {
        Self::Constant(c)
    }

    pub fn hat(axis: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("hat requires finite a < b, got a = {lo}, b = {hi}")));
        }
        Ok(Self::Hat { axis, lo, hi })
    }

    pub fn user(name: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::User { name: name.into(), func: Arc::new(func) }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Hat { axis, lo, hi } => hat_unchecked(p[*axis], *lo, *hi),
            Self::Affine { axis, slope, intercept } => slope * p[*axis] + intercept,
            Self::User { func, .. } => func(p),
        }
    }

    /// True when the function provably never takes negative values.
    pub fn is_certified_nonnegative(&self) -> bool {
        match self {
            Self::Constant(c) => *c >= 0.0,
            Self::Hat { .. } => true,
            Self::Affine { slope, intercept, .. } => *slope == 0.0 && *intercept >= 0.0,
            Self::User { .. } => false,
        }
    }

    /// Largest parameter axis referenced, if any.
    pub fn axis(&self) -> Option<usize> {
        match self {
            Self::Hat { axis, .. } | Self::Affine { axis, .. } => Some(*axis),
            _ => None,
        }
    }

    /// Textual descriptor, e.g. `hat(0, 0.5, 1.5)`. `None` for user functions.
    pub fn descriptor(&self) -> Option<String> {
        match self {
            Self::Constant(c) => Some(format!("const({})", fmt_f64(*c))),
            Self::Hat { axis, lo, hi } => Some(format!("hat({axis}, {}, {})", fmt_f64(*lo), fmt_f64(*hi))),
            Self::Affine { axis, slope, intercept } => Some(format!(
                "affine({axis}, {}, {})",
                fmt_f64(*slope),
                fmt_f64(*intercept)
            )),
            Self::User { .. } => None,
        }
    }

    /// Parses a descriptor produced by [`ScalarFunction::descriptor`].
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let open = text.find('(').ok_or_else(|| format!("expected name(args), got `{text}`"))?;
        if !text.ends_with(')') {
            return Err(format!("missing closing parenthesis in `{text}`"));
        }
        let name = text[..open].trim();
        let args: Vec<&str> = text[open + 1..text.len() - 1].split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"));
        let idx = |s: &str| s.parse::<usize>().map_err(|e| format!("bad axis `{s}`: {e}"));
        match (name, args.as_slice()) {
            ("const", [c]) => Ok(Self::Constant(num(c)?)),
            ("hat", [a, lo, hi]) => Self::hat(idx(a)?, num(lo)?, num(hi)?).map_err(|e| e.to_string()),
            ("affine", [a, m, c]) => Ok(Self::Affine { axis: idx(a)?, slope: num(m)?, intercept: num(c)? }),
            _ => Err(format!("unknown function descriptor `{text}`")),
        }
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::User { name, .. } => write!(f, "user({name})"),
            other => f.write_str(&other.descriptor().unwrap_or_default()),
        }
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `count` hats on uniformly spaced knots over `[lo, hi]` along `axis`.
///
/// The knots include both interval ends and each hat spans its two neighbouring
/// knots, so the family sums to one on `[lo, hi]`. With `count == 1` a constant
/// one is returned.
pub fn uniform_hats(axis: usize, lo: f64, hi: f64, count: usize) -> Result<Vec<ScalarFunction>> {
    if count == 0 {
        return Err(Error::Parameter("at least one ansatz function is required".into()));
    }
    if !(lo < hi) {
        return Err(Error::Parameter(format!("empty interval [{lo}, {hi}]")));
    }
    if count == 1 {
        return Ok(vec![ScalarFunction::Constant(1.0)]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            let peak = lo + i as f64 * step;
            ScalarFunction::hat(axis, peak - step, peak + step)
        })
        .collect()
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_k, hi_k]` of admissible parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Parameter("parameter box bounds must be nonempty and of equal length".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Parameter(format!("invalid parameter interval [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Tensor grid with `counts[i]` equispaced points per axis, first axis fastest.
    pub fn tensor_grid(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|i| linspace(self.lo[i], self.hi[i], counts[i])).collect();
        tensor_product(&axes)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.log10(), hi.log10(), n).into_iter().map(|e| 10f64.powf(e)).collect()
}

/// Cartesian product of axes; the first axis varies fastest.
pub fn tensor_product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(Vec::len).product();
    (0..total)
        .map(|mut k| {
            axes.iter()
                .map(|axis| {
                    let x = axis[k % axis.len()];
                    k /= axis.len();
                    x
                })
                .collect()
        })
        .collect()
}
