mod common;

use common::*;
use parmor::error::Error;
use parmor::fom::msd_chain;
use parmor::optimizer::{sobmor, SobmorOptions};
use parmor::rom::ParametricRom;
use parmor::sampling::SampleGrid;

fn small_grid() -> SampleGrid {
    SampleGrid::initial((1e-2, 1e2), &unit_box(), &[9, 3]).unwrap()
}

#[test]
fn zero_error_fixture_halves_the_level() {
    let s = hat_structure(3, 2, true, (1, 1));
    let theta = s.random_theta(1.0, 3);
    let fom = ParametricRom::new(s.clone(), theta.clone()).unwrap();
    let opts = SobmorOptions { gamma_u: Some(1.0), ..Default::default() };
    let res = sobmor(&fom, &s, &theta, small_grid(), &opts).unwrap();
    for (k, step) in res.trace.steps.iter().enumerate() {
        assert!(step.accepted);
        assert_eq!(step.gamma, 0.5f64.powi(k as i32 + 1));
        assert_eq!(step.alpha, 0.0);
    }
    assert_eq!(res.gamma_u, res.trace.steps.last().unwrap().gamma);
    assert!(res.gamma_u <= opts.gamma_floor);
    assert_eq!(res.theta, theta);
}

#[test]
fn warm_start_and_bracket_invariants() {
    let chain = msd_chain(3, 4.0, 4.0, 1.0).unwrap();
    let s = hat_structure(2, 2, true, (1, 1));
    let theta0 = s.random_theta(1.0, 1);
    let opts = SobmorOptions { eps1: 0.05, ..Default::default() };
    let res = sobmor(&chain, &s, &theta0, small_grid(), &opts).unwrap();
    let steps = &res.trace.steps;
    assert_eq!(steps[0].theta_start, theta0);
    for w in steps.windows(2) {
        assert_eq!(w[1].theta_start, w[0].theta_end, "inner solver must start from the previous iterate");
    }
    let (mut lo, mut hi) = (0.0, res.trace.gamma_u0);
    for st in steps {
        assert!(lo < st.gamma && st.gamma < hi);
        if st.accepted {
            assert!(st.alpha <= opts.eps2);
            hi = st.gamma;
        } else {
            lo = st.gamma;
        }
    }
    assert_eq!((lo, hi), (res.gamma_l, res.gamma_u));
    assert!((res.gamma_u - res.gamma_l) / (res.gamma_u + res.gamma_l) <= opts.eps1);
    let last = steps.iter().rev().find(|s| s.accepted).unwrap();
    assert_eq!(res.theta, last.theta_end);
    // stable final ROM across the parameter box
    let rom = ParametricRom::new(s, res.theta).unwrap();
    for p in parmor::function::linspace(0.5, 1.5, 50) {
        assert!(parmor::linalg::spectral_abscissa(&rom.system_matrix(&[p]).unwrap()) < 0.0);
    }
}

#[test]
fn unattainable_upper_bound_is_a_bracket_failure() {
    let chain = msd_chain(3, 4.0, 4.0, 1.0).unwrap();
    let s = hat_structure(1, 1, true, (1, 1));
    let opts = SobmorOptions { gamma_u: Some(1e-6), max_inner: Some(5), ..Default::default() };
    match sobmor(&chain, &s, &s.random_theta(1.0, 1), small_grid(), &opts) {
        Err(Error::Bracket { gamma_u, trace_csv }) => {
            assert_eq!(gamma_u, 1e-6);
            assert!(trace_csv.lines().count() > 1);
            assert!(trace_csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some("0")));
        }
        other => panic!("expected a bracket failure, got {other:?}"),
    }
}

#[test]
fn trace_csv_layout() {
    let s = hat_structure(2, 1, true, (1, 1));
    let theta = s.random_theta(1.0, 2);
    let fom = ParametricRom::new(s.clone(), theta.clone()).unwrap();
    let opts = SobmorOptions { gamma_u: Some(1.0), max_outer: 3, ..Default::default() };
    let res = sobmor(&fom, &s, &theta, small_grid(), &opts).unwrap();
    let csv = res.trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iter,gamma,alpha,accepted,n_samples,inner_iters,wall_ms,max_sample_error");
    let (head, tail) = lines[1].rsplit_once(',').unwrap();
    assert_eq!(head, "0,0.5,0.0,1,27,0,0");
    assert!(tail.parse::<f64>().unwrap() < 1e-12);
    assert_eq!(lines.len(), 4);
    assert!(!csv.contains('\r'));
}

#[test]
fn rejects_mismatched_inputs() {
    let s = hat_structure(2, 1, true, (1, 1));
    let fom = random_fom(3, (2, 2), 1);
    let r = sobmor(&fom, &s, &s.random_theta(1.0, 1), small_grid(), &SobmorOptions::default());
    assert!(matches!(r, Err(Error::Dimension(_))));
    let chain = msd_chain(2, 1.0, 1.0, 1.0).unwrap();
    let r = sobmor(&chain, &s, &[0.0], small_grid(), &SobmorOptions::default());
    assert!(matches!(r, Err(Error::Dimension(_))));
}
