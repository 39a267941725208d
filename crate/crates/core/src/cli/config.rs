//! Run configuration.
//!
//! ```text
//! [fom]
//! source = msd            # or: manifest
//! manifest = model/manifest.txt
//! masses = 50
//! mass = 4
//! stiffness = 4
//! damping = 1
//! p_lo = 0.5              # parameter box of the builtin chain
//! p_hi = 1.5
//!
//! [rom]
//! order = 10
//! ansatz = hat            # or: const
//! kappa = 2
//! port_hamiltonian = true
//! psd_safe = false
//! eps_q = 1e-8
//! eps_r = 1e-8
//! theta_scale = 1.0
//! # optional per-family lists override the default ansatz, e.g.
//! # j = const(1.0) ; hat(0, 0.5, 1.5)
//!
//! [optimizer]
//! gamma_u = 1.0
//! eps1 = 1e-2
//! eps2 = 1e-6
//! max_inner = 500
//! max_outer = 100
//! grad_tol = 1e-8
//! memory = 10
//!
//! [grid]
//! omega_lo = 1e-2
//! omega_hi = 1e2
//! omega_points = 21
//! p_points = 5
//! max_vertices = 20000
//! min_edge = 1e-6
//!
//! [evaluate]
//! omega_points = 400
//! p_points = 100
//!
//! [run]
//! seed = 1
//! out = out
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fom::{load_manifest, MsdChain, MsdParams, ParamSeparableLti, TransferSource};
use crate::function::{uniform_hats, ParamBox, ScalarFunction};
use crate::ini::{Document, Entry};
use crate::metrics::{DEFAULT_OMEGA_POINTS, DEFAULT_P_POINTS};
use crate::optimizer::SobmorOptions;
use crate::rom::{AnsatzSpec, Family, RomDims, RomStructure};

#[derive(Clone, Debug)]
pub enum FomSource {
    Msd(MsdParams, ParamBox),
    Manifest(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnsatzKind {
    Hat,
    Const,
}

#[derive(Clone, Debug)]
pub struct RomConfig {
    pub order: usize,
    pub ansatz: AnsatzKind,
    pub kappa: usize,
    pub overrides: Vec<(Family, Vec<ScalarFunction>)>,
    pub port_hamiltonian: bool,
    pub psd_safe: bool,
    pub eps_q: f64,
    pub eps_r: f64,
    pub theta_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub omega_points: usize,
    pub p_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub omega_points: usize,
    pub p_points: usize,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub fom: FomSource,
    pub rom: RomConfig,
    pub optimizer: SobmorOptions,
    pub grid: GridConfig,
    pub eval: EvalConfig,
    pub seed: u64,
    pub out: PathBuf,
}

/// A loaded full-order model with its parameter box.
pub struct LoadedFom {
    pub model: Box<dyn TransferSource>,
    pub domain: ParamBox,
}

impl std::fmt::Debug for LoadedFom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadedFom").field("domain", &self.domain).finish_non_exhaustive()
    }
}

const SECTIONS: &[&str] = &["fom", "rom", "optimizer", "grid", "evaluate", "run"];

fn opt<T: std::str::FromStr>(doc: &Document, section: &str, key: &str) -> Result<Option<(T, usize)>>
where
    T::Err: std::fmt::Display,
{
    match doc.section(section).and_then(|s| s.get(key)) {
        Some(e) => Ok(Some((e.parse(doc)?, e.line))),
        None => Ok(None),
    }
}

fn value<T: std::str::FromStr>(doc: &Document, section: &str, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(opt(doc, section, key)?.map_or(default, |(v, _)| v))
}

fn line_of(doc: &Document, section: &str, key: &str) -> usize {
    doc.section(section).and_then(|s| s.get(key)).map_or_else(|| doc.section(section).map_or(0, |s| s.line), |e| e.line)
}

fn positive(doc: &Document, section: &str, key: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(doc.error(line_of(doc, section, key), format!("`{key}` must be positive, got {x}")))
    }
}

fn parse_funcs(doc: &Document, e: &Entry) -> Result<Vec<ScalarFunction>> {
    e.value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| ScalarFunction::parse(s).map_err(|m| doc.error(e.line, m)))
        .collect()
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let doc = Document::read(path)?;
        Self::from_document(&doc, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, path: &str, base: &Path) -> Result<Self> {
        Self::from_document(&Document::parse(text, path)?, base)
    }

    fn from_document(doc: &Document, base: &Path) -> Result<Self> {
        doc.check_sections(SECTIONS)?;
        doc.check_keys("fom", &["source", "manifest", "masses", "mass", "stiffness", "damping", "p_lo", "p_hi"])?;
        doc.check_keys(
            "rom",
            &[
                "order", "ansatz", "kappa", "port_hamiltonian", "psd_safe", "eps_q", "eps_r", "theta_scale", "b", "c",
                "d", "j", "r", "q",
            ],
        )?;
        doc.check_keys(
            "optimizer",
            &["gamma_u", "eps1", "eps2", "max_inner", "max_outer", "grad_tol", "memory", "timing"],
        )?;
        doc.check_keys("grid", &["omega_lo", "omega_hi", "omega_points", "p_points", "max_vertices", "min_edge"])?;
        doc.check_keys("evaluate", &["omega_lo", "omega_hi", "omega_points", "p_points"])?;
        doc.check_keys("run", &["seed", "out"])?;

        let source: String = value(doc, "fom", "source", "msd".to_string())?;
        let fom = match source.as_str() {
            "msd" => {
                let d = MsdParams::default();
                let params = MsdParams {
                    masses: value(doc, "fom", "masses", d.masses)?,
                    mass: value(doc, "fom", "mass", d.mass)?,
                    stiffness: value(doc, "fom", "stiffness", d.stiffness)?,
                    damping: value(doc, "fom", "damping", d.damping)?,
                };
                if params.masses == 0 {
                    return Err(doc.error(line_of(doc, "fom", "masses"), "`masses` must be at least 1"));
                }
                for (key, x) in [("mass", params.mass), ("stiffness", params.stiffness), ("damping", params.damping)] {
                    positive(doc, "fom", key, x)?;
                }
                let bound = |key: &str, default: f64| -> Result<Vec<f64>> {
                    match doc.section("fom").and_then(|s| s.get(key)) {
                        Some(e) => e.parse_list(doc),
                        None => Ok(vec![default]),
                    }
                };
                let (lo, hi) = (bound("p_lo", 0.5)?, bound("p_hi", 1.5)?);
                let domain = ParamBox::new(lo, hi).map_err(|e| doc.error(line_of(doc, "fom", "p_hi"), e.to_string()))?;
                if domain.dim() != 1 {
                    return Err(doc.error(line_of(doc, "fom", "p_lo"), "the builtin chain has one parameter"));
                }
                FomSource::Msd(params, domain)
            }
            "manifest" => {
                let line = line_of(doc, "fom", "manifest");
                let rel: String = opt(doc, "fom", "manifest")?
                    .map(|(v, _)| v)
                    .ok_or_else(|| doc.error(line, "`manifest` is required when source = manifest"))?;
                let path = base.join(rel);
                if !path.is_file() {
                    return Err(doc.error(line, format!("manifest file {} does not exist", path.display())));
                }
                FomSource::Manifest(path)
            }
            other => {
                return Err(doc.error(line_of(doc, "fom", "source"), format!("unknown source `{other}` (msd|manifest)")))
            }
        };

        let order: usize = value(doc, "rom", "order", 2)?;
        if order == 0 {
            return Err(doc.error(line_of(doc, "rom", "order"), "`order` must be at least 1"));
        }
        let ansatz = match value(doc, "rom", "ansatz", "hat".to_string())?.as_str() {
            "hat" => AnsatzKind::Hat,
            "const" => AnsatzKind::Const,
            other => return Err(doc.error(line_of(doc, "rom", "ansatz"), format!("unknown ansatz `{other}` (hat|const)"))),
        };
        let kappa: usize = value(doc, "rom", "kappa", 2)?;
        if kappa == 0 {
            return Err(doc.error(line_of(doc, "rom", "kappa"), "`kappa` must be at least 1"));
        }
        let mut overrides = Vec::new();
        if let Some(section) = doc.section("rom") {
            for family in Family::ALL {
                if let Some(e) = section.get(family.name()) {
                    overrides.push((family, parse_funcs(doc, e)?));
                }
            }
        }
        let eps_q = value(doc, "rom", "eps_q", 1e-8)?;
        let eps_r = value(doc, "rom", "eps_r", 1e-8)?;
        if !(eps_q >= 0.0 && eps_r >= 0.0) {
            return Err(doc.error(line_of(doc, "rom", "eps_q"), "eps_q and eps_r must be nonnegative"));
        }
        let rom = RomConfig {
            order,
            ansatz,
            kappa,
            overrides,
            port_hamiltonian: value(doc, "rom", "port_hamiltonian", true)?,
            psd_safe: value(doc, "rom", "psd_safe", false)?,
            eps_q,
            eps_r,
            theta_scale: positive(doc, "rom", "theta_scale", value(doc, "rom", "theta_scale", 1.0)?)?,
        };

        let mut optimizer = SobmorOptions::default();
        if let Some((g, _)) = opt::<f64>(doc, "optimizer", "gamma_u")? {
            optimizer.gamma_u = Some(positive(doc, "optimizer", "gamma_u", g)?);
        }
        optimizer.eps1 = positive(doc, "optimizer", "eps1", value(doc, "optimizer", "eps1", optimizer.eps1)?)?;
        optimizer.eps2 = positive(doc, "optimizer", "eps2", value(doc, "optimizer", "eps2", optimizer.eps2)?)?;
        optimizer.max_inner = opt(doc, "optimizer", "max_inner")?.map(|(v, _)| v);
        optimizer.max_outer = value(doc, "optimizer", "max_outer", optimizer.max_outer)?;
        optimizer.inner.grad_tol = value(doc, "optimizer", "grad_tol", optimizer.inner.grad_tol)?;
        optimizer.inner.memory = value(doc, "optimizer", "memory", optimizer.inner.memory)?;
        optimizer.timing = value(doc, "optimizer", "timing", false)?;
        optimizer.refine.max_vertices = value(doc, "grid", "max_vertices", optimizer.refine.max_vertices)?;
        optimizer.refine.min_edge =
            positive(doc, "grid", "min_edge", value(doc, "grid", "min_edge", optimizer.refine.min_edge)?)?;

        let grid = GridConfig {
            omega_lo: positive(doc, "grid", "omega_lo", value(doc, "grid", "omega_lo", 1e-2)?)?,
            omega_hi: positive(doc, "grid", "omega_hi", value(doc, "grid", "omega_hi", 1e2)?)?,
            omega_points: value(doc, "grid", "omega_points", 21)?,
            p_points: value(doc, "grid", "p_points", 5)?,
        };
        if grid.omega_lo >= grid.omega_hi {
            return Err(doc.error(line_of(doc, "grid", "omega_hi"), "omega_lo must be below omega_hi"));
        }
        if grid.omega_points < 2 || grid.p_points < 2 {
            return Err(doc.error(line_of(doc, "grid", "omega_points"), "grids need at least two points per axis"));
        }
        let eval = EvalConfig {
            omega_lo: positive(doc, "evaluate", "omega_lo", value(doc, "evaluate", "omega_lo", grid.omega_lo)?)?,
            omega_hi: positive(doc, "evaluate", "omega_hi", value(doc, "evaluate", "omega_hi", grid.omega_hi)?)?,
            omega_points: value(doc, "evaluate", "omega_points", DEFAULT_OMEGA_POINTS)?,
            p_points: value(doc, "evaluate", "p_points", DEFAULT_P_POINTS)?,
        };
        if eval.omega_lo >= eval.omega_hi || eval.omega_points == 0 || eval.p_points == 0 {
            return Err(doc.error(line_of(doc, "evaluate", "omega_hi"), "invalid evaluation grid"));
        }
        let out: String = value(doc, "run", "out", "out".to_string())?;
        Ok(Self { fom, rom, optimizer, grid, eval, seed: value(doc, "run", "seed", 1)?, out: base.join(out) })
    }

    pub fn load_fom(&self) -> Result<LoadedFom> {
        match &self.fom {
            FomSource::Msd(params, domain) => {
                let chain = MsdChain::new(*params, domain.clone())?;
                Ok(LoadedFom { domain: domain.clone(), model: Box::new(chain) })
            }
            FomSource::Manifest(path) => {
                let lti: ParamSeparableLti = load_manifest(path)?;
                Ok(LoadedFom { domain: lti.domain.clone(), model: Box::new(lti) })
            }
        }
    }

    /// ROM structure for a model with the given port counts and parameter box.
    pub fn structure(&self, inputs: usize, outputs: usize, domain: &ParamBox) -> Result<RomStructure> {
        let c = &self.rom;
        let funcs = match c.ansatz {
            AnsatzKind::Const => vec![ScalarFunction::constant(1.0)],
            AnsatzKind::Hat if domain.lo[0] < domain.hi[0] => uniform_hats(0, domain.lo[0], domain.hi[0], c.kappa)?,
            AnsatzKind::Hat => vec![ScalarFunction::constant(1.0)],
        };
        let mut spec = if c.port_hamiltonian { AnsatzSpec::port_hamiltonian(funcs) } else { AnsatzSpec::uniform(funcs) };
        for (family, list) in &c.overrides {
            *spec.funcs_mut(*family) = list.clone();
        }
        spec.psd_safe = c.psd_safe;
        spec.eps_q = c.eps_q;
        spec.eps_r = c.eps_r;
        RomStructure::new(RomDims::new(c.order, inputs, outputs), spec)
    }
}

/// Maps parameter errors raised while interpreting a config onto its path.
pub fn config_error(path: &Path, err: Error) -> Error {
    match err {
        Error::Parameter(msg) | Error::Structure(msg) => Error::Config { path: path.display().to_string(), line: 0, msg },
        other => other,
    }
}
