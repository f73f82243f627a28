use proptest::prelude::*;

use cournot_core::counterfactual::*;
use cournot_core::distributions::{Law, Univariate};
use cournot_core::quadrature::GaussLegendre;
use cournot_core::simulator::{simulate_panel, TrendSpec};
use cournot_core::theta::{StructuralModel, ThetaParam};

fn degenerate_costs(m: &StructuralModel) -> StructuralModel {
    let mut out = m.clone();
    out.v_laws = m.v_laws.iter().map(|l| Law::Point(l.mean())).collect();
    out
}

#[test]
fn regimes_coincide_without_private_information() {
    let m = degenerate_costs(&StructuralModel::boundary_design());
    let r = compare_regimes(&m, &[0, 1], &TrendSpec::none(2), 50, 10, 1).unwrap();
    assert!(r.max_abs_output_gap < 1e-10);
    assert!((r.cs_ratio - 1.0).abs() < 1e-12);
}

#[test]
fn comparison_is_reproducible_and_reports_every_period() {
    let m = ThetaParam::mc_design().model().unwrap();
    let groups: Vec<usize> = (0..20).map(|i| i / 10).collect();
    let a = compare_regimes(&m, &groups, &TrendSpec::none(20), 30, 8, 5).unwrap();
    let b = compare_regimes(&m, &groups, &TrendSpec::none(20), 30, 8, 5).unwrap();
    assert_eq!(a.periods.len(), 30);
    assert_eq!(a.n_groups, 2);
    assert_eq!(a.cs_private_mean, b.cs_private_mean);
    assert_eq!(a.cs_complete_mean, b.cs_complete_mean);
    let path = std::env::temp_dir().join(format!("cournot-cf-{}.csv", std::process::id()));
    a.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert!(text.starts_with("period,regime,p,cs,q_group1,q_group2\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 30);
}

#[test]
fn surplus_gap_follows_output_variance() {
    // With interior outputs E[CS_c - CS_p] = β/2 ΣVar(V_i)(1/D² - 1/(λ+2β)²).
    let m = StructuralModel::boundary_design();
    let (d, own) = (m.lambda + 3.0 * m.beta, m.lambda + 2.0 * m.beta);
    let var_v: f64 = m.v_laws.iter().map(|l| l.variance()).sum();
    let want = 0.5 * m.beta * var_v * (d.powi(-2) - own.powi(-2));
    let r = compare_regimes(&m, &[0, 1], &TrendSpec::none(2), 500, 200, 3).unwrap();
    let got = r.cs_complete_mean - r.cs_private_mean;
    assert!(want < 0.0);
    assert!((got - want).abs() < 4.0 * r.cs_diff_se, "{got} vs {want} (se {})", r.cs_diff_se);
}

#[test]
fn firms_cluster_by_cost_group() {
    let theta = ThetaParam {
        groups: vec![
            cournot_core::theta::CostShape { a: 0.6, b: 3.0 },
            cournot_core::theta::CostShape { a: 3.0, b: 0.6 },
        ],
        ..ThetaParam::mc_design()
    };
    let sim = simulate_panel(&theta.model().unwrap(), &TrendSpec::none(20), 400, 2).unwrap();
    let g = kmeans_firms(&sim.panel, 2, 0).unwrap();
    let first = g.assignment[0];
    assert!(g.assignment[..10].iter().all(|&a| a == first));
    assert!(g.assignment[10..].iter().all(|&a| a != first));
}

#[test]
fn cluster_count_is_validated() {
    assert!(kmeans(&[(0.0, 0.0)], 2, 0, 1).is_err());
    assert!(kmeans(&[(0.0, 0.0)], 0, 0, 1).is_err());
}

proptest! {
    #[test]
    fn surplus_is_the_demand_triangle(beta in 0.01f64..5.0, q in 0.0f64..100.0, u in 0.0f64..1000.0) {
        let p = u - beta * q;
        let gl = GaussLegendre::new(8);
        let quad = gl.integrate(0.0, q, |x| u - beta * x - p);
        prop_assert!((consumer_surplus(beta, q) - quad).abs() <= 1e-9 * (1.0 + quad.abs()));
    }

    #[test]
    fn every_point_sits_with_its_nearest_centroid(pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 3..30),
                                                   k in 1usize..4, seed in 0u64..100) {
        prop_assume!(k <= pts.len());
        let g = kmeans(&pts, k, seed, 5).unwrap();
        prop_assert_eq!(g.assignment.len(), pts.len());
        let d2 = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
        let mut ss = 0.0;
        for (p, &a) in pts.iter().zip(&g.assignment) {
            let own = d2(*p, g.centroids[a]);
            ss += own;
            for c in &g.centroids {
                prop_assert!(own <= d2(*p, *c) + 1e-9);
            }
        }
        prop_assert!((ss - g.within_ss).abs() < 1e-6 * (1.0 + ss));
    }

    #[test]
    fn splitting_never_raises_within_ss(pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 4..20),
                                        seed in 0u64..100) {
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
        let total: f64 = pts.iter().map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2)).sum();
        let one = kmeans(&pts, 1, seed, 1).unwrap();
        prop_assert!((one.within_ss - total).abs() < 1e-9 * (1.0 + total));
        let two = kmeans(&pts, 2, seed, 3).unwrap();
        prop_assert!(two.within_ss <= total + 1e-9);
    }
}
