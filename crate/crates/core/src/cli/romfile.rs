//! Plain-text ROM files.
//!
//! ```text
//! [dims]
//! order = 2
//! inputs = 1
//! outputs = 1
//! [options]
//! port_hamiltonian = true
//! psd_safe = false
//! eps_q = 1e-8
//! eps_r = 1e-8
//! [ansatz]
//! b = hat(0, 0.5, 1.5)
//! j = const(1.0)
//! [theta]
//! 1.0000000000000000e0
//! ```
//!
//! Ansatz lines repeat per function in order. `[theta]` must come last and holds
//! one value per line with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::function::{fmt_f64, ScalarFunction};
use crate::ini::Document;
use crate::rom::{AnsatzSpec, Family, ParametricRom, RomDims, RomStructure};

pub fn format_rom(rom: &ParametricRom) -> Result<String> {
    let s = &rom.structure;
    let mut out = String::from("# parmor reduced-order model\n[dims]\n");
    let _ = writeln!(out, "order = {}\ninputs = {}\noutputs = {}", s.dims.order, s.dims.inputs, s.dims.outputs);
    let a = &s.ansatz;
    let _ = writeln!(
        out,
        "[options]\nport_hamiltonian = {}\npsd_safe = {}\neps_q = {}\neps_r = {}",
        a.port_hamiltonian,
        a.psd_safe,
        fmt_f64(a.eps_q),
        fmt_f64(a.eps_r)
    );
    out.push_str("[ansatz]\n");
    for family in Family::ALL {
        for f in a.funcs(family) {
            let d = f
                .descriptor()
                .ok_or_else(|| Error::Parameter(format!("ansatz function {f:?} cannot be written to a ROM file")))?;
            let _ = writeln!(out, "{} = {d}", family.name());
        }
    }
    out.push_str("[theta]\n");
    for x in &rom.theta {
        let _ = writeln!(out, "{x:.16e}");
    }
    Ok(out)
}

pub fn parse_rom(text: &str, path: &str) -> Result<ParametricRom> {
    let lines: Vec<&str> = text.lines().collect();
    let split = lines
        .iter()
        .position(|l| l.split('#').next().unwrap_or("").trim().eq_ignore_ascii_case("[theta]"))
        .ok_or_else(|| Error::Config { path: path.into(), line: lines.len(), msg: "missing [theta] section".into() })?;
    let doc = Document::parse(&lines[..split].join("\n"), path)?;
    doc.check_sections(&["dims", "options", "ansatz"])?;
    doc.check_keys("dims", &["order", "inputs", "outputs"])?;
    doc.check_keys("options", &["port_hamiltonian", "psd_safe", "eps_q", "eps_r"])?;
    doc.check_keys("ansatz", &["b", "c", "d", "j", "r", "q"])?;
    let dims = doc.section("dims").ok_or_else(|| doc.error(0, "missing [dims] section"))?;
    let get = |key: &str| dims.get(key).ok_or_else(|| doc.error(dims.line, format!("missing `{key}` in [dims]")));
    let dims_v = RomDims::new(get("order")?.parse(&doc)?, get("inputs")?.parse(&doc)?, get("outputs")?.parse(&doc)?);

    let mut ansatz = AnsatzSpec::uniform(Vec::new());
    if let Some(opts) = doc.section("options") {
        if let Some(e) = opts.get("port_hamiltonian") {
            ansatz.port_hamiltonian = e.parse(&doc)?;
        }
        if let Some(e) = opts.get("psd_safe") {
            ansatz.psd_safe = e.parse(&doc)?;
        }
        if let Some(e) = opts.get("eps_q") {
            ansatz.eps_q = e.parse(&doc)?;
        }
        if let Some(e) = opts.get("eps_r") {
            ansatz.eps_r = e.parse(&doc)?;
        }
    }
    for section in doc.sections("ansatz") {
        for e in &section.entries {
            let family = Family::from_name(&e.key).ok_or_else(|| doc.error(e.line, "unknown family"))?;
            let f = ScalarFunction::parse(&e.value).map_err(|m| doc.error(e.line, m))?;
            ansatz.funcs_mut(family).push(f);
        }
    }
    let structure = RomStructure::new(dims_v, ansatz).map_err(|e| doc.error(0, e.to_string()))?;

    let mut theta = Vec::new();
    for (i, raw) in lines.iter().enumerate().skip(split + 1) {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let x: f64 = content.parse().map_err(|e| Error::Config {
            path: path.into(),
            line: i + 1,
            msg: format!("invalid theta value `{content}`: {e}"),
        })?;
        theta.push(x);
    }
    ParametricRom::new(structure, theta).map_err(|e| Error::Config { path: path.into(), line: lines.len(), msg: e.to_string() })
}

pub fn read_rom(path: &Path) -> Result<ParametricRom> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        line: 0,
        msg: format!("cannot read ROM file: {e}"),
    })?;
    parse_rom(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::uniform_hats;

    #[test]
    fn round_trip_is_bit_exact() {
        let funcs = uniform_hats(0, 0.5, 1.5, 2).unwrap();
        for spec in [AnsatzSpec::uniform(funcs.clone()), AnsatzSpec::port_hamiltonian(funcs)] {
            let s = RomStructure::new(RomDims::new(3, 1, 1), spec).unwrap();
            let theta = s.random_theta(1.0, 42);
            let rom = ParametricRom::new(s, theta.clone()).unwrap();
            let text = format_rom(&rom).unwrap();
            let back = parse_rom(&text, "rom.txt").unwrap();
            assert_eq!(back.theta, theta);
            assert_eq!(format_rom(&back).unwrap(), text);
        }
    }

    #[test]
    fn wrong_theta_length_is_rejected() {
        let s = RomStructure::new(RomDims::new(2, 1, 1), AnsatzSpec::uniform(vec![ScalarFunction::constant(1.0)])).unwrap();
        let mut text = format_rom(&ParametricRom::zeros(s)).unwrap();
        text.push_str("1.0\n");
        assert!(matches!(parse_rom(&text, "x"), Err(Error::Config { .. })));
    }
}
