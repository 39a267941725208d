//! Command-line front end: `reduce`, `evaluate`, `generate-msd` and `grid-dump`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;
mod romfile;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fom::{write_manifest, MsdChain, MsdParams, TransferSource};
use crate::function::{linspace, logspace, ParamBox};
use crate::metrics::{h2_l2_estimate, hinf_linf_estimate};
use crate::optimizer::sobmor;
use crate::rom::ParametricRom;
use crate::sampling::SampleGrid;

pub use config::{AnsatzKind, EvalConfig, FomSource, GridConfig, LoadedFom, RomConfig, RunConfig};
pub use romfile::{format_rom, parse_rom, read_rom};

pub const ROM_FILE: &str = "rom.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const REPORT_FILE: &str = "error_report.csv";

#[derive(Debug, Parser)]
#[command(name = "parmor", version, about = "Reduced-order models of parametric LTI systems")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the bisection and write the ROM, the trace and the final sample grid.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Record wall-clock times in the trace.
        #[arg(long)]
        timing: bool,
    },
    /// Estimate the error of a ROM against the configured full-order model.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rom: PathBuf,
        #[arg(long)]
        omega_points: Option<usize>,
        #[arg(long)]
        p_points: Option<usize>,
    },
    /// Write the mass-spring-damper chain as Matrix Market files plus a manifest.
    GenerateMsd {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 4.0)]
        m: f64,
        #[arg(long, default_value_t = 4.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        p_lo: f64,
        #[arg(long, default_value_t = 1.5)]
        p_hi: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the initial sample grid, optionally refined against a ROM's error at `--gamma`.
    GridDump {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rom: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Ingest { .. } | Error::Dimension(_) | Error::Usage(_) => 2,
        _ => 1,
    }
}

/// Writes `contents` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::read(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn initial_grid(cfg: &RunConfig, domain: &ParamBox) -> Result<SampleGrid> {
    let mut counts = vec![cfg.grid.omega_points];
    counts.extend((0..domain.dim()).map(|i| if domain.lo[i] == domain.hi[i] { 1 } else { cfg.grid.p_points }));
    SampleGrid::initial((cfg.grid.omega_lo, cfg.grid.omega_hi), domain, &counts)
}

fn check_ports(fom: &dyn TransferSource, rom: &ParametricRom) -> Result<()> {
    let d = rom.dims();
    if (fom.inputs(), fom.outputs()) != (d.inputs, d.outputs) {
        return Err(Error::Dimension(format!(
            "ROM has {} inputs and {} outputs, the full-order model has {} and {}",
            d.inputs,
            d.outputs,
            fom.inputs(),
            fom.outputs()
        )));
    }
    Ok(())
}

pub fn cmd_reduce(common: &Common, timing: bool) -> Result<()> {
    let mut cfg = load_config(common)?;
    cfg.optimizer.timing |= timing;
    let fom = cfg.load_fom()?;
    let structure = cfg
        .structure(fom.model.inputs(), fom.model.outputs(), &fom.domain)
        .map_err(|e| config::config_error(&common.config, e))?;
    let theta0 = structure.random_theta(cfg.rom.theta_scale, cfg.seed);
    let grid = initial_grid(&cfg, &fom.domain).map_err(|e| config::config_error(&common.config, e))?;
    log::info!("reducing to order {} with {} design parameters", structure.dims.order, structure.n_theta());
    let result = match sobmor(fom.model.as_ref(), &structure, &theta0, grid, &cfg.optimizer) {
        Ok(r) => r,
        Err(Error::Bracket { gamma_u, trace_csv }) => {
            write_atomic(&cfg.out.join(TRACE_FILE), &trace_csv)?;
            return Err(Error::Bracket { gamma_u, trace_csv });
        }
        Err(e) => return Err(e),
    };
    let rom = ParametricRom::new(structure, result.theta)?;
    write_atomic(&cfg.out.join(ROM_FILE), &format_rom(&rom)?)?;
    write_atomic(&cfg.out.join(TRACE_FILE), &result.trace.to_csv())?;
    write_atomic(&cfg.out.join(GRID_FILE), &result.grid.to_csv())?;
    log::info!(
        "final level {:.6e} (bracket [{:.6e}, {:.6e}]), {} samples",
        result.training_max_error,
        result.gamma_l,
        result.gamma_u,
        result.grid.num_vertices()
    );
    Ok(())
}

pub fn cmd_evaluate(common: &Common, rom_path: &Path, omega_points: Option<usize>, p_points: Option<usize>) -> Result<()> {
    let cfg = load_config(common)?;
    let fom = cfg.load_fom()?;
    let rom = read_rom(rom_path)?;
    check_ports(fom.model.as_ref(), &rom)?;
    let e = &cfg.eval;
    let omega = logspace(e.omega_lo, e.omega_hi, omega_points.unwrap_or(e.omega_points).max(1));
    let n_p = p_points.unwrap_or(e.p_points).max(1);
    let d = &fom.domain;
    let axes: Vec<Vec<f64>> =
        (0..d.dim()).map(|i| if d.lo[i] == d.hi[i] { vec![d.lo[i]] } else { linspace(d.lo[i], d.hi[i], n_p) }).collect();
    let p_grid = crate::function::tensor_product(&axes);
    let mut report = hinf_linf_estimate(fom.model.as_ref(), &rom, &p_grid, &omega)?;
    report.h2_l2 = Some(h2_l2_estimate(fom.model.as_ref(), &rom, &axes, &omega)?);
    write_atomic(&cfg.out.join(REPORT_FILE), &report.to_csv())
}

pub fn cmd_generate_msd(params: MsdParams, domain: (f64, f64), out: &Path) -> Result<PathBuf> {
    let usage = |e: Error| Error::Usage(e.to_string());
    let domain = ParamBox::interval(domain.0, domain.1).map_err(usage)?;
    let chain = MsdChain::new(params, domain).map_err(usage)?;
    write_manifest(out, chain.lti())
}

pub fn cmd_grid_dump(common: &Common, rom_path: Option<&Path>, gamma: Option<f64>) -> Result<()> {
    let cfg = load_config(common)?;
    let fom = cfg.load_fom()?;
    let mut grid = initial_grid(&cfg, &fom.domain).map_err(|e| config::config_error(&common.config, e))?;
    if let Some(gamma) = gamma {
        let rom = match rom_path {
            Some(p) => read_rom(p)?,
            None => {
                let s = cfg.structure(fom.model.inputs(), fom.model.outputs(), &fom.domain)?;
                ParametricRom::zeros(s)
            }
        };
        check_ports(fom.model.as_ref(), &rom)?;
        let field = |x: &[f64]| crate::fom::error_sigma(fom.model.as_ref(), &rom, x[0], &x[1..]).unwrap_or(f64::NAN);
        match grid.refine(&field, gamma, &cfg.optimizer.refine) {
            Ok(_) | Err(Error::Budget { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    write_atomic(&cfg.out.join(GRID_FILE), &grid.to_csv())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Reduce { common, timing } => cmd_reduce(&common, timing),
        Command::Evaluate { common, rom, omega_points, p_points } => cmd_evaluate(&common, &rom, omega_points, p_points),
        Command::GenerateMsd { n, m, k, c, p_lo, p_hi, out, seed: _ } => {
            let params = MsdParams { masses: n, mass: m, stiffness: k, damping: c };
            cmd_generate_msd(params, (p_lo, p_hi), &out).map(|_| ())
        }
        Command::GridDump { common, rom, gamma } => cmd_grid_dump(&common, rom.as_deref(), gamma),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
