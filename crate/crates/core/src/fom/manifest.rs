//! Model manifests: a parameter box plus one line per term,
//! `family = file.mtx ; function`, with paths relative to the manifest.
//!
//! ```text
//! [model]
//! p_lo = 0.5
//! p_hi = 1.5
//!
//! [terms]
//! a = a_0.mtx ; const(1.0)
//! a = a_1.mtx ; affine(0, 1.0, 0.0)
//! b = b_0.mtx ; const(1.0)
//! c = c_0.mtx ; const(1.0)
//! ```
//!
//! Families are `e`, `a`, `b`, `c`, `d`; missing `e` means identity, missing `d` means zero.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fom::{mtx, FomFamily, ParamSeparableLti, Term};
use crate::function::{fmt_f64, ParamBox, ScalarFunction};
use crate::ini::Document;

#[derive(Clone, Debug)]
pub struct ManifestTerm {
    pub family: FomFamily,
    pub file: PathBuf,
    pub func: ScalarFunction,
}

pub fn load_manifest(path: &Path) -> Result<ParamSeparableLti> {
    let doc = Document::read(path)?;
    doc.check_sections(&["model", "terms"])?;
    doc.check_keys("model", &["p_lo", "p_hi"])?;
    let model = doc.section("model").ok_or_else(|| doc.error(0, "missing [model] section"))?;
    let bound = |key: &str| {
        model
            .get(key)
            .ok_or_else(|| doc.error(model.line, format!("missing `{key}` in [model]")))
            .and_then(|e| e.parse_list(&doc))
    };
    let domain = ParamBox::new(bound("p_lo")?, bound("p_hi")?)
        .map_err(|e| doc.error(model.line, e.to_string()))?;

    let base = path.parent().unwrap_or(Path::new("."));
    let mut families: [Vec<Term>; 5] = Default::default();
    for section in doc.sections("terms") {
        for entry in &section.entries {
            let family = FomFamily::from_name(&entry.key)
                .ok_or_else(|| doc.error(entry.line, format!("unknown family `{}`", entry.key)))?;
            let (file, func) = entry
                .value
                .split_once(';')
                .ok_or_else(|| doc.error(entry.line, "expected `file ; function`"))?;
            let func = ScalarFunction::parse(func).map_err(|msg| doc.error(entry.line, msg))?;
            let file = base.join(file.trim());
            if !file.exists() {
                return Err(doc.error(entry.line, format!("matrix file {} does not exist", file.display())));
            }
            let matrix = mtx::read(&file)?;
            families[family as usize].push(Term::new(matrix, func));
        }
    }
    let [e, a, b, c, d] = families;
    ParamSeparableLti::new(e, a, b, c, d, domain).map_err(|err| Error::Ingest {
        path: path.display().to_string(),
        msg: err.to_string(),
    })
}

/// Writes every term of `model` as `<family>_<i>.mtx` into `dir` plus `manifest.txt`;
/// returns the manifest path.
pub fn write_manifest(dir: &Path, model: &ParamSeparableLti) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ");
    let mut text = String::from("# parmor model manifest\n[model]\n");
    let _ = writeln!(text, "p_lo = {}", join(&model.domain.lo));
    let _ = writeln!(text, "p_hi = {}", join(&model.domain.hi));
    text.push_str("\n[terms]\n");
    for family in FomFamily::ALL {
        for (i, term) in model.terms(family).iter().enumerate() {
            let func = term.func.descriptor().ok_or_else(|| {
                Error::Parameter("user-defined functions cannot be written to a manifest".into())
            })?;
            let name = format!("{}_{i}.mtx", family.name());
            mtx::write(&dir.join(&name), &term.matrix)?;
            let _ = writeln!(text, "{} = {name} ; {func}", family.name());
        }
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, text)?;
    Ok(path)
}
