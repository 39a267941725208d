//! Adaptive sampling of the joint frequency/parameter domain.
//!
//! Vertices live in scaled coordinates: `log10(omega)` for the frequency axis and
//! the raw value for each parameter axis. Every edge joins two vertices that differ
//! in exactly one coordinate, with no third vertex between them. An edge is split at
//! its midpoint when the difference quotients through the midpoint suggest that the
//! error field may exceed the current level between the endpoints; each new vertex
//! is then wired to its nearest neighbour on both sides along every axis.
//!
//! The difference quotients are estimates of the slope, not certified bounds, so the
//! along-edge guarantee is heuristic in practice.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function::{fmt_f64, linspace, tensor_product, ParamBox};

const KEY_RESOLUTION: f64 = 1e9;
pub const DEFAULT_MAX_VERTICES: usize = 20_000;
pub const DEFAULT_MIN_EDGE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisScale {
    Log10,
    Linear,
}

impl AxisScale {
    pub fn to_scaled(self, x: f64) -> f64 {
        match self {
            AxisScale::Log10 => x.log10(),
            AxisScale::Linear => x,
        }
    }

    pub fn to_physical(self, x: f64) -> f64 {
        match self {
            AxisScale::Log10 => 10f64.powf(x),
            AxisScale::Linear => x,
        }
    }
}

/// Split test for one edge with endpoint values `phi1`, `phi2`, midpoint value `phi_mid`
/// and scaled length `h`.
///
/// Splits iff `d* h >= 2 (gamma + gamma*) - phi1 - phi2` with `gamma* = max(phi1, phi2)`
/// and `d*` the larger magnitude of the two difference quotients through the midpoint,
/// used as an estimate of a bound on `|d phi|` along the edge.
pub fn edge_needs_split(phi1: f64, phi2: f64, phi_mid: f64, h: f64, gamma: f64) -> Result<bool> {
    if !(h > 0.0) {
        return Err(Error::Structure(format!("edge of non-positive length {h}")));
    }
    let half = h / 2.0;
    let d1 = ((phi_mid - phi1) / half).abs();
    let d2 = ((phi2 - phi_mid) / half).abs();
    let d_star = d1.max(d2);
    let gamma_star = phi1.max(phi2);
    Ok(d_star * h >= 2.0 * (gamma + gamma_star) - phi1 - phi2)
}

/// Sufficient condition for `phi < gamma* + tau` inside a hyperrectangle with
/// `2^l` corner values, per-axis derivative bounds and side lengths.
///
/// `gamma*` is the largest corner value. The implication only holds when the bounds are
/// true bounds of the partial derivatives over the whole cell.
pub fn cell_certificate(corner_values: &[f64], bounds: &[f64], sides: &[f64], tau: f64) -> Result<bool> {
    let dim = sides.len();
    if bounds.len() != dim {
        return Err(Error::Structure(format!("{} derivative bounds for {dim} axes", bounds.len())));
    }
    if dim >= usize::BITS as usize || corner_values.len() != 1usize << dim {
        return Err(Error::Structure(format!(
            "a {dim}-dimensional cell has {} corners, got {}",
            1usize << dim.min(63),
            corner_values.len()
        )));
    }
    let gamma_star = corner_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = corner_values.iter().sum::<f64>() / corner_values.len() as f64;
    let lhs: f64 = bounds.iter().zip(sides).map(|(l, d)| l * d).sum();
    Ok(lhs < 2.0 * gamma_star + 2.0 * tau - 2.0 * mean)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOptions {
    /// Edges shorter than this fraction of their axis extent are never split.
    pub min_edge: f64,
    pub max_vertices: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { min_edge: DEFAULT_MIN_EDGE, max_vertices: DEFAULT_MAX_VERTICES }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RefineReport {
    pub sweeps: usize,
    pub added: usize,
    /// Edges that met the split criterion but were at the minimum length.
    pub refused: usize,
}

type LineKey = (usize, Vec<i64>);

/// Vertex/edge graph over the scaled `(omega, p)` box.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    scales: Vec<AxisScale>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    vertices: Vec<Vec<f64>>,
    keys: HashMap<Vec<i64>, usize>,
    /// For each axis, vertices on a common axis-parallel line keyed by position along it.
    lines: HashMap<LineKey, BTreeMap<i64, usize>>,
    edges: BTreeSet<(usize, usize)>,
    values: Vec<Option<f64>>,
}

impl SampleGrid {
    /// Tensor grid: `counts[0]` log-spaced frequencies, then `counts[1..]` equispaced
    /// points per parameter axis.
    pub fn initial(omega_range: (f64, f64), domain: &ParamBox, counts: &[usize]) -> Result<Self> {
        let (w_lo, w_hi) = omega_range;
        if !(w_lo > 0.0 && w_lo < w_hi && w_hi.is_finite()) {
            return Err(Error::Parameter(format!("invalid frequency range [{w_lo}, {w_hi}]")));
        }
        if counts.len() != domain.dim() + 1 {
            return Err(Error::Parameter(format!(
                "need {} point counts (frequency plus each parameter), got {}",
                domain.dim() + 1,
                counts.len()
            )));
        }
        let mut scales = vec![AxisScale::Log10];
        let mut lo = vec![w_lo.log10()];
        let mut hi = vec![w_hi.log10()];
        for i in 0..domain.dim() {
            scales.push(AxisScale::Linear);
            lo.push(domain.lo[i]);
            hi.push(domain.hi[i]);
        }
        for (i, &c) in counts.iter().enumerate() {
            let degenerate = lo[i] == hi[i];
            if c < 2 && !(degenerate && c == 1) {
                return Err(Error::Parameter(format!("axis {i} needs at least two points, got {c}")));
            }
            if degenerate && c != 1 {
                return Err(Error::Parameter(format!("axis {i} has an empty range; use a single point")));
            }
        }
        let axes: Vec<Vec<f64>> = (0..counts.len()).map(|i| linspace(lo[i], hi[i], counts[i])).collect();
        let mut grid = Self::empty(scales, lo, hi);
        for point in tensor_product(&axes) {
            grid.push_vertex(point);
        }
        // full axis-aligned edge set
        let strides: Vec<usize> = (0..counts.len()).map(|i| counts[..i].iter().product()).collect();
        let total: usize = counts.iter().product();
        for v in 0..total {
            for axis in 0..counts.len() {
                let coord = (v / strides[axis]) % counts[axis];
                if coord + 1 < counts[axis] {
                    grid.add_edge(v, v + strides[axis]);
                }
            }
        }
        Ok(grid)
    }

    fn empty(scales: Vec<AxisScale>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self {
            scales,
            lo,
            hi,
            vertices: Vec::new(),
            keys: HashMap::new(),
            lines: HashMap::new(),
            edges: BTreeSet::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Vertex in scaled coordinates.
    pub fn scaled(&self, v: usize) -> &[f64] {
        &self.vertices[v]
    }

    /// Vertex in physical coordinates `(omega, p_1, ..., p_k)`.
    pub fn physical(&self, v: usize) -> Vec<f64> {
        self.vertices[v].iter().zip(&self.scales).map(|(x, s)| s.to_physical(*x)).collect()
    }

    pub fn physical_points(&self) -> Vec<Vec<f64>> {
        (0..self.num_vertices()).map(|v| self.physical(v)).collect()
    }

    /// Field value recorded by the last refinement, if any.
    pub fn value(&self, v: usize) -> Option<f64> {
        self.values[v]
    }

    pub fn find_vertex(&self, scaled: &[f64]) -> Option<usize> {
        self.keys.get(&self.key(scaled)).copied()
    }

    fn key_1d(&self, axis: usize, x: f64) -> i64 {
        let extent = self.hi[axis] - self.lo[axis];
        let t = if extent > 0.0 { (x - self.lo[axis]) / extent } else { 0.0 };
        (t * KEY_RESOLUTION).round() as i64
    }

    fn key(&self, scaled: &[f64]) -> Vec<i64> {
        scaled.iter().enumerate().map(|(i, x)| self.key_1d(i, *x)).collect()
    }

    fn line_key(key: &[i64], axis: usize) -> LineKey {
        let mut rest = key.to_vec();
        rest[axis] = 0;
        (axis, rest)
    }

    fn push_vertex(&mut self, scaled: Vec<f64>) -> usize {
        let key = self.key(&scaled);
        if let Some(&v) = self.keys.get(&key) {
            return v;
        }
        let v = self.vertices.len();
        for axis in 0..self.dim() {
            self.lines.entry(Self::line_key(&key, axis)).or_default().insert(key[axis], v);
        }
        self.keys.insert(key, v);
        self.vertices.push(scaled);
        self.values.push(None);
        v
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.edges.insert((a.min(b), a.max(b)));
        }
    }

    fn remove_edge(&mut self, a: usize, b: usize) {
        self.edges.remove(&(a.min(b), a.max(b)));
    }

    /// Nearest vertices below and above `v` along `axis`.
    pub fn axis_neighbors(&self, v: usize, axis: usize) -> (Option<usize>, Option<usize>) {
        let key = self.key(&self.vertices[v]);
        let Some(line) = self.lines.get(&Self::line_key(&key, axis)) else {
            return (None, None);
        };
        let below = line.range(..key[axis]).next_back().map(|(_, &u)| u);
        let above = line.range(key[axis] + 1..).next().map(|(_, &u)| u);
        (below, above)
    }

    /// All Hamming-distance-one neighbours of `v` not separated from it by another vertex.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for axis in 0..self.dim() {
            let (a, b) = self.axis_neighbors(v, axis);
            out.extend(a);
            out.extend(b);
        }
        out
    }

    /// Inserts `scaled` (typically an edge midpoint) and wires it to all its neighbours,
    /// dropping any edge that would now span it.
    pub fn insert_vertex(&mut self, scaled: Vec<f64>) -> usize {
        if let Some(v) = self.find_vertex(&scaled) {
            return v;
        }
        let v = self.push_vertex(scaled);
        for axis in 0..self.dim() {
            let (below, above) = self.axis_neighbors(v, axis);
            if let (Some(a), Some(b)) = (below, above) {
                self.remove_edge(a, b);
            }
            for n in below.into_iter().chain(above) {
                self.add_edge(v, n);
            }
        }
        v
    }

    /// Axis along which the edge `(a, b)` runs, or `None` if it is not axis-aligned.
    pub fn edge_axis(&self, a: usize, b: usize) -> Option<usize> {
        let (ka, kb) = (self.key(&self.vertices[a]), self.key(&self.vertices[b]));
        let differing: Vec<usize> = (0..self.dim()).filter(|&i| ka[i] != kb[i]).collect();
        (differing.len() == 1).then(|| differing[0])
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn check_well_formed(&self) -> std::result::Result<(), String> {
        for &(a, b) in &self.edges {
            let axis = self.edge_axis(a, b).ok_or_else(|| format!("edge ({a}, {b}) is not axis-aligned"))?;
            let (below, above) = self.axis_neighbors(a, axis);
            let ka = self.key(&self.vertices[a])[axis];
            let kb = self.key(&self.vertices[b])[axis];
            let adjacent = if kb > ka { above == Some(b) } else { below == Some(b) };
            if !adjacent {
                return Err(format!("edge ({a}, {b}) spans an intermediate vertex"));
            }
        }
        if self.keys.len() != self.vertices.len() {
            return Err("duplicate vertices".into());
        }
        Ok(())
    }

    fn evaluate_missing<F>(&mut self, field: &F)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let missing: Vec<usize> = (0..self.num_vertices()).filter(|&v| self.values[v].is_none()).collect();
        let points: Vec<Vec<f64>> = missing.iter().map(|&v| self.physical(v)).collect();
        let vals: Vec<f64> = points.par_iter().map(|p| field(p)).collect();
        for (v, x) in missing.into_iter().zip(vals) {
            self.values[v] = Some(x);
        }
    }

    fn midpoint(&self, a: usize, b: usize) -> Vec<f64> {
        self.vertices[a].iter().zip(&self.vertices[b]).map(|(x, y)| x + (y - x) / 2.0).collect()
    }

    /// Refines until no edge meets the split criterion at level `gamma`.
    ///
    /// `field` receives physical coordinates `(omega, p...)`. All vertex values are
    /// recomputed on entry. When the vertex budget is reached the partially refined
    /// grid is kept and [`Error::Budget`] returned.
    pub fn refine<F>(&mut self, field: &F, gamma: f64, options: &RefineOptions) -> Result<RefineReport>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("refinement level must be positive, got {gamma}")));
        }
        self.values.iter_mut().for_each(|v| *v = None);
        self.evaluate_missing(field);
        let mut report = RefineReport::default();
        let mut refused: BTreeSet<(usize, usize)> = BTreeSet::new();
        // values at midpoints of edges that were tested and kept
        let mut mid_cache: HashMap<(usize, usize), f64> = HashMap::new();
        loop {
            report.sweeps += 1;
            let edges: Vec<(usize, usize)> = self.edges.iter().copied().collect();
            let untested: Vec<(usize, usize)> =
                edges.iter().copied().filter(|e| !mid_cache.contains_key(e)).collect();
            let mids: Vec<Vec<f64>> = untested.iter().map(|&(a, b)| self.scaled_to_physical(&self.midpoint(a, b))).collect();
            let vals: Vec<f64> = mids.par_iter().map(|p| field(p)).collect();
            mid_cache.extend(untested.into_iter().zip(vals));

            let mut added = false;
            for (a, b) in edges {
                if !self.has_edge(a, b) {
                    continue;
                }
                let axis = self
                    .edge_axis(a, b)
                    .ok_or_else(|| Error::Structure(format!("edge ({a}, {b}) is not axis-aligned")))?;
                let h = (self.vertices[b][axis] - self.vertices[a][axis]).abs();
                let (phi1, phi2) = (self.values[a].expect("evaluated"), self.values[b].expect("evaluated"));
                let phi_mid = mid_cache[&(a, b)];
                if !edge_needs_split(phi1, phi2, phi_mid, h, gamma)? {
                    continue;
                }
                let extent = self.hi[axis] - self.lo[axis];
                if h < options.min_edge * extent {
                    if refused.insert((a, b)) {
                        log::debug!("edge ({a}, {b}) meets the split criterion but is at the minimum length");
                        report.refused += 1;
                    }
                    continue;
                }
                if self.num_vertices() >= options.max_vertices {
                    log::warn!("sampling grid reached its vertex budget of {}", options.max_vertices);
                    self.evaluate_missing(field);
                    return Err(Error::Budget { budget: options.max_vertices });
                }
                let mid = self.midpoint(a, b);
                self.remove_edge(a, b);
                let v = self.insert_vertex(mid);
                self.values[v] = Some(phi_mid);
                report.added += 1;
                added = true;
            }
            self.evaluate_missing(field);
            if !added {
                break;
            }
        }
        Ok(report)
    }

    fn scaled_to_physical(&self, scaled: &[f64]) -> Vec<f64> {
        scaled.iter().zip(&self.scales).map(|(x, s)| s.to_physical(*x)).collect()
    }

    /// Section-tagged CSV: vertex rows `vertex,id,omega,p...,phi` followed by
    /// edge rows `edge,id,source,target` padded to the same width.
    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = String::from("section,id,omega");
        for i in 1..dim {
            let _ = write!(out, ",p{i}");
        }
        out.push_str(",phi\n");
        for v in 0..self.num_vertices() {
            let _ = write!(out, "vertex,{v}");
            for x in self.physical(v) {
                let _ = write!(out, ",{}", fmt_f64(x));
            }
            match self.values[v] {
                Some(phi) => {
                    let _ = writeln!(out, ",{}", fmt_f64(phi));
                }
                None => out.push_str(",\n"),
            }
        }
        for (i, (a, b)) in self.edges.iter().enumerate() {
            let _ = write!(out, "edge,{i},{a},{b}");
            for _ in 2..=dim {
                out.push(',');
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(nw: usize, np: usize) -> SampleGrid {
        SampleGrid::initial((1.0, 100.0), &ParamBox::interval(0.0, 1.0).unwrap(), &[nw, np]).unwrap()
    }

    #[test]
    fn initial_grid_combinatorics() {
        let g = unit_grid(3, 3);
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.num_edges(), 12);
        g.check_well_formed().unwrap();
        let omegas: Vec<f64> = (0..3).map(|v| g.physical(v)[0]).collect();
        assert!((omegas[1] / omegas[0] - omegas[2] / omegas[1]).abs() < 1e-12);
        let b = ParamBox::interval(0.0, 1.0).unwrap();
        for v in 0..9 {
            let p = g.physical(v);
            assert!(p[0] >= 1.0 - 1e-12 && p[0] <= 100.0 + 1e-9 && b.contains(&p[1..]));
        }
    }

    #[test]
    fn initial_grid_validation() {
        let b = ParamBox::interval(0.0, 1.0).unwrap();
        assert!(SampleGrid::initial((1.0, 1.0), &b, &[3, 3]).is_err());
        assert!(SampleGrid::initial((0.0, 1.0), &b, &[3, 3]).is_err());
        assert!(SampleGrid::initial((1.0, 2.0), &b, &[1, 3]).is_err());
        assert!(SampleGrid::initial((1.0, 2.0), &b, &[3]).is_err());
    }

    #[test]
    fn split_criterion_cases() {
        // constant field never splits
        assert!(!edge_needs_split(0.3, 0.3, 0.3, 1.0, 0.1).unwrap());
        // linear field with slope m: d1 = d2 = |m|
        for (m, gamma) in [(0.5, 0.1), (0.5, 0.3), (-0.5, 0.1), (2.0, 0.2)] {
            let (phi1, h): (f64, f64) = (1.2, 1.0);
            let phi2 = phi1 + m * h;
            let rhs = 2.0 * gamma + 2.0 * phi1.max(phi2) - phi1 - phi2;
            assert_eq!(edge_needs_split(phi1, phi2, phi1 + m * h / 2.0, h, gamma).unwrap(), m.abs() * h >= rhs);
        }
        // bump in the middle of a flat edge
        assert!(edge_needs_split(0.0, 0.0, 1.0, 1.0, 0.1).unwrap());
        assert!(edge_needs_split(0.0, 0.0, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn zero_field_leaves_grid_unchanged() {
        let mut g = unit_grid(4, 3);
        let before: Vec<_> = g.edges().collect();
        let rep = g.refine(&|_: &[f64]| 0.0, 0.1, &RefineOptions::default()).unwrap();
        assert_eq!(rep.added, 0);
        assert_eq!(g.num_vertices(), 12);
        assert_eq!(g.edges().collect::<Vec<_>>(), before);
    }

    #[test]
    fn refine_keeps_invariants_and_vertices() {
        let mut g = unit_grid(5, 4);
        let field = |x: &[f64]| {
            let (w, p) = (x[0].log10(), x[1]);
            (-((w - 1.13).powi(2) + (p - 0.41).powi(2)) / 0.01).exp()
        };
        let before = g.num_vertices();
        let old: Vec<Vec<f64>> = (0..before).map(|v| g.scaled(v).to_vec()).collect();
        g.refine(&field, 0.05, &RefineOptions::default()).unwrap();
        assert!(g.num_vertices() > before);
        for (v, x) in old.iter().enumerate() {
            assert_eq!(g.scaled(v), x.as_slice());
        }
        g.check_well_formed().unwrap();
    }

    #[test]
    fn vertex_budget_is_reported() {
        let mut g = unit_grid(3, 3);
        let field = |x: &[f64]| (50.0 * x[1]).sin().abs() * 10.0 + x[0].sin().abs();
        let opts = RefineOptions { max_vertices: 15, ..Default::default() };
        let err = g.refine(&field, 1e-3, &opts).unwrap_err();
        assert!(matches!(err, Error::Budget { budget: 15 }));
        assert_eq!(g.num_vertices(), 15);
        g.check_well_formed().unwrap();
    }

    #[test]
    fn cell_certificate_cases() {
        assert!(cell_certificate(&[0.5; 4], &[0.0, 0.0], &[1.0, 1.0], 1e-3).unwrap());
        assert!(cell_certificate(&[0.5; 3], &[0.0, 0.0], &[1.0, 1.0], 1e-3).is_err());
        assert!(cell_certificate(&[0.5; 4], &[0.0], &[1.0, 1.0], 1e-3).is_err());
    }

    #[test]
    fn csv_has_header_and_sections() {
        let mut g = unit_grid(2, 2);
        g.refine(&|_: &[f64]| 1.0, 0.5, &RefineOptions::default()).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "section,id,omega,p1,phi");
        assert_eq!(lines.iter().filter(|l| l.starts_with("vertex,")).count(), 4);
        assert_eq!(lines.iter().filter(|l| l.starts_with("edge,")).count(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 5));
    }
}
