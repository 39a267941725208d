#![allow(dead_code)]

use parmor::fom::TransferSource;
use parmor::function::{uniform_hats, ParamBox};
use parmor::linalg;
use parmor::objective::SamplePoint;
use parmor::rom::{AnsatzSpec, ParametricRom, RomDims, RomStructure};
use parmor::sampling::SampleGrid;

pub fn hat_structure(order: usize, kappa: usize, ph: bool, io: (usize, usize)) -> RomStructure {
    let funcs = uniform_hats(0, 0.5, 1.5, kappa).unwrap();
    let spec = if ph { AnsatzSpec::port_hamiltonian(funcs) } else { AnsatzSpec::uniform(funcs) };
    RomStructure::new(RomDims::new(order, io.0, io.1), spec).unwrap()
}

/// A stable random "full-order model" built from the ROM parameterization itself.
pub fn random_fom(order: usize, io: (usize, usize), seed: u64) -> ParametricRom {
    let s = hat_structure(order, 2, false, io);
    let theta = s.random_theta(1.0, seed);
    ParametricRom::new(s, theta).unwrap()
}

pub fn grid_points(grid: &SampleGrid) -> Vec<SamplePoint> {
    grid.physical_points().into_iter().map(|x| SamplePoint::new(x[0], x[1..].to_vec())).collect()
}

/// Largest `sigma_max(H - H_r)` over `points`.
pub fn max_error(fom: &dyn TransferSource, rom: &dyn TransferSource, points: &[SamplePoint]) -> f64 {
    points
        .iter()
        .map(|pt| {
            let d = fom.transfer(pt.s(), &pt.p).unwrap() - rom.transfer(pt.s(), &pt.p).unwrap();
            linalg::sigma_max(&d)
        })
        .fold(0.0, f64::max)
}

pub fn unit_box() -> ParamBox {
    ParamBox::interval(0.5, 1.5).unwrap()
}
