use parmor::function::ParamBox;
use parmor::sampling::{cell_certificate, edge_needs_split, RefineOptions, SampleGrid};
use proptest::prelude::*;

fn grid(counts: [usize; 2]) -> SampleGrid {
    SampleGrid::initial((1.0, 100.0), &ParamBox::interval(0.0, 1.0).unwrap(), &counts).unwrap()
}

/// Narrow tent in scaled frequency, constant in p.
fn tent(centre: f64, width: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| (1.0 - (x[0].log10() - centre).abs() / width).max(0.0)
}

#[test]
fn two_dimensional_insert_connect_terminate() {
    // 3 x 2 grid; scaled frequencies 0, 1, 2 and p in {0, 1}
    let mut g = grid([3, 2]);
    assert_eq!(g.num_edges(), 7);
    let field = tent(0.5, 1e-3);
    let report = g.refine(&field, 0.75, &RefineOptions::default()).unwrap();
    assert_eq!(report.added, 2);
    g.check_well_formed().unwrap();

    let bottom = g.find_vertex(&[0.5, 0.0]).expect("midpoint of the lower edge");
    let top = g.find_vertex(&[0.5, 1.0]).expect("midpoint of the upper edge");
    let v = |w: f64, p: f64| g.find_vertex(&[w, p]).unwrap();
    // split edges removed, halves present
    assert!(!g.has_edge(v(0.0, 0.0), v(1.0, 0.0)));
    assert!(!g.has_edge(v(0.0, 1.0), v(1.0, 1.0)));
    for (a, b) in [(v(0.0, 0.0), bottom), (bottom, v(1.0, 0.0)), (v(0.0, 1.0), top), (top, v(1.0, 1.0))] {
        assert!(g.has_edge(a, b));
    }
    // the two midpoints are Hamming-1 neighbours and get linked
    assert!(g.has_edge(bottom, top));
    let mut nb = g.neighbors(bottom);
    nb.sort();
    let mut expected = vec![v(0.0, 0.0), v(1.0, 0.0), top];
    expected.sort();
    assert_eq!(nb, expected);
    assert_eq!(g.num_vertices(), 8);
    assert_eq!(g.num_edges(), 10);

    // a second pass at the same level changes nothing
    let again = g.refine(&field, 0.75, &RefineOptions::default()).unwrap();
    assert_eq!(again.added, 0);
}

#[test]
fn narrow_peak_is_resolved_in_one_dimension() {
    let b = ParamBox::interval(1.0, 1.0).unwrap();
    let mut g = SampleGrid::initial((1e-2, 1e2), &b, &[9, 1]).unwrap();
    let (w0, width) = (0.1234f64, 0.05);
    let field = move |x: &[f64]| 1.0 / (1.0 + ((x[0].log10() - w0) / width).powi(2));
    let gamma = 0.05;
    g.refine(&field, gamma, &RefineOptions::default()).unwrap();
    let grid_max = (0..g.num_vertices()).map(|v| g.value(v).unwrap()).fold(0.0, f64::max);
    let dense_max = parmor::function::linspace(-2.0, 2.0, 100_000)
        .into_iter()
        .map(|x| field(&[10f64.powf(x), 1.0]))
        .fold(0.0, f64::max);
    assert!(dense_max - grid_max < gamma, "grid {grid_max} dense {dense_max}");
}

#[test]
fn edge_soundness_for_piecewise_linear_fields() {
    // kinks on grid vertices: slopes per edge are exact, so un-split edges satisfy the bound
    let mut g = grid([6, 3]);
    let field = |x: &[f64]| {
        let w = x[0].log10();
        0.3 * (w - 0.8).abs() + 0.1 * x[1]
    };
    let gamma = 0.05;
    g.refine(&field, gamma, &RefineOptions::default()).unwrap();
    for (a, b) in g.edges().collect::<Vec<_>>() {
        let (za, zb) = (g.scaled(a).to_vec(), g.scaled(b).to_vec());
        let gamma_star = g.value(a).unwrap().max(g.value(b).unwrap());
        for t in parmor::function::linspace(0.0, 1.0, 101) {
            let z: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x + t * (y - x)).collect();
            let phi = field(&[10f64.powf(z[0]), z[1]]);
            assert!(phi < gamma_star + gamma + 1e-12, "edge ({a}, {b}) at t = {t}");
        }
    }
}

#[test]
fn cell_certificate_matches_dense_sampling_for_linear_fields() {
    // phi = 0.2 x + 0.1 y on [0, h]^2; exact partial bounds 0.2 and 0.1
    for h in [0.1, 0.5, 1.0, 2.0] {
        let corners = [0.0, 0.2 * h, 0.1 * h, 0.3 * h];
        let tau = 0.05;
        let ok = cell_certificate(&corners, &[0.2, 0.1], &[h, h], tau).unwrap();
        if ok {
            let gamma_star = corners.iter().copied().fold(f64::MIN, f64::max);
            for i in 0..=20 {
                for j in 0..=20 {
                    let (x, y) = (h * i as f64 / 20.0, h * j as f64 / 20.0);
                    assert!(0.2 * x + 0.1 * y < gamma_star + tau);
                }
            }
        }
    }
    // an underestimated bound certifies a cell with a planted interior spike: the result is
    // only meaningful when the bounds are valid
    assert!(cell_certificate(&[0.0; 4], &[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap());
}

proptest! {
    #[test]
    fn refine_preserves_well_formedness(
        cx in 0.1f64..1.9, cy in 0.05f64..0.95, width in 0.02f64..0.5, gamma in 0.01f64..0.5,
        nw in 2usize..6, np in 2usize..5,
    ) {
        let mut g = grid([nw, np]);
        let old: Vec<Vec<f64>> = (0..g.num_vertices()).map(|v| g.scaled(v).to_vec()).collect();
        let field = move |x: &[f64]| (-((x[0].log10() - cx).powi(2) + (x[1] - cy).powi(2)) / (width * width)).exp();
        let opts = RefineOptions { max_vertices: 3000, ..Default::default() };
        let _ = g.refine(&field, gamma, &opts);
        prop_assert!(g.check_well_formed().is_ok());
        for (v, x) in old.iter().enumerate() {
            prop_assert_eq!(g.scaled(v), x.as_slice());
        }
        for (a, b) in g.edges().collect::<Vec<_>>() {
            prop_assert!(g.edge_axis(a, b).is_some());
        }
    }

    #[test]
    fn split_rule_is_the_displayed_inequality(
        phi1 in 0.0f64..2.0, phi2 in 0.0f64..2.0, mid in 0.0f64..2.0, h in 1e-3f64..3.0, gamma in 1e-3f64..1.0,
    ) {
        let d1 = ((mid - phi1) / (h / 2.0)).abs();
        let d2 = ((phi2 - mid) / (h / 2.0)).abs();
        let expected = d1.max(d2) * h >= 2.0 * (gamma + phi1.max(phi2)) - phi1 - phi2;
        prop_assert_eq!(edge_needs_split(phi1, phi2, mid, h, gamma).unwrap(), expected);
    }
}
