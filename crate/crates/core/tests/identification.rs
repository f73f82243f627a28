use proptest::prelude::*;

use cournot_core::distributions::{stream_rng, Law, ScaledBeta, Univariate};
use cournot_core::identification::*;
use cournot_core::simulator::{simulate_panel, simulate_regime, InfoRegime, TrendSpec};
use cournot_core::theta::{StructuralModel, WShock};

fn beta_law(a: f64, b: f64, lo: f64, hi: f64) -> Law {
    Law::Beta(ScaledBeta::new(a, b, None, hi - lo, lo).unwrap())
}

/// Smooth shocks whose characteristic functions decay slowly enough for the
/// deconvolution to reach the tails.
fn smooth_model() -> StructuralModel {
    let v = beta_law(2.0, 2.0, 1.0, 3.0);
    StructuralModel {
        beta: 0.5,
        lambda: 0.2,
        u_law: beta_law(2.0, 2.0, 30.0, 40.0),
        w_shock: WShock {
            w_bar: 0.5,
            a1: 2f64.ln(),
            a2: 0.0,
            truncation: None,
        },
        v_laws: vec![v.clone(), v],
    }
}

fn truth(m: &StructuralModel) -> Identified {
    Identified {
        beta: m.beta,
        lambda: m.lambda,
        mu_v: m.v_laws.iter().map(|l| l.mean()).collect(),
    }
}

#[test]
fn over_identified_slopes_agree_in_population() {
    let m = smooth_model();
    let src = Source::Population(&m);
    for (a, b) in [(0.25, 0.75), (0.1, 0.6), (0.4, 0.9)] {
        for i in 0..2 {
            let est = identify_beta(&src, i, a, b).unwrap();
            assert!((est.beta - 0.5).abs() < 1e-8, "({a}, {b}) firm {i}: {}", est.beta);
        }
    }
}

#[test]
fn conditional_common_shock_law_recovered() {
    let m = smooth_model();
    let cfg = IdentifyConfig {
        conditioning_u: vec![33.0, 35.0, 37.0],
        report_alpha: vec![0.5],
        ..Default::default()
    };
    let rep = identify(&Source::Population(&m), &cfg).unwrap();
    assert_eq!(rep.fw_given_u.len(), 3);
    for c in &rep.fw_given_u {
        let law = m.w_shock.given(c.u).unwrap();
        for (x, f) in c.points.iter().zip(&c.cdf) {
            assert!((f - law.cdf(*x)).abs() < 1e-2, "u {} x {x}: {f}", c.u);
        }
    }
}

#[test]
fn degenerate_common_shock_gives_unit_step() {
    let mut m = smooth_model();
    m.w_shock.w_bar = 0.0;
    let cfg = IdentifyConfig {
        conditioning_u: vec![35.0],
        report_alpha: vec![0.5],
        ..Default::default()
    };
    let rep = identify(&Source::Population(&m), &cfg).unwrap();
    let c = &rep.fw_given_u[0];
    assert!(c.points.iter().any(|&x| x < 0.0) && c.points.iter().any(|&x| x > 0.0));
    for (x, f) in c.points.iter().zip(&c.cdf) {
        assert_eq!(*f, if *x >= 0.0 { 1.0 } else { 0.0 });
    }
    assert!(c.warnings.iter().any(|w| w.contains("point mass")));
}

#[test]
fn joint_cdf_matches_monte_carlo() {
    let m = smooth_model();
    let src = Source::Population(&m);
    let id = truth(&m);
    let cfg = PhiConfig::default();
    let (fv, _) = identify_fv_averaged(&src, 0, &cfg.alpha_grid(), &id).unwrap();
    let w = [-0.3, -0.1, 0.0, 0.15, 0.3];
    let mut rng = stream_rng(17, 0);
    let draws: Vec<(f64, f64)> = (0..200_000)
        .map(|_| {
            let u = m.u_law.sample(&mut rng);
            (m.w_shock.given(u).unwrap().sample(&mut rng), u)
        })
        .collect();
    for u in [33.0, 36.0, 40.0] {
        let f = joint_cdf_wu(&src, 0, &w, u, &fv, &id, &cfg, 16).unwrap();
        for (wk, fk) in w.iter().zip(&f) {
            let mc = draws.iter().filter(|(x, s)| x <= wk && *s <= u).count() as f64 / draws.len() as f64;
            assert!((fk - mc).abs() < 1e-2, "w {wk} u {u}: {fk} vs {mc}");
        }
    }
}

#[test]
fn sample_mode_on_boundary_design() {
    let m = StructuralModel::boundary_design();
    let sim = simulate_panel(&m, &TrendSpec::none(2), 20_000, 3).unwrap();
    let cfg = IdentifyConfig::default();
    let rep = identify(
        &Source::Sample {
            panel: &sim.panel,
            band: cfg.band,
        },
        &cfg,
    )
    .unwrap();
    assert!((rep.beta_hat - 0.5).abs() < 0.02, "beta {}", rep.beta_hat);
    assert!(rep.diagnostics.as_ref().unwrap().all_pass);
    let u = rep.u_cdf.as_ref().unwrap();
    assert!(u.cdf.windows(2).all(|w| w[0] <= w[1]));
    for t in &rep.fv_tables {
        assert!(t.values.windows(2).all(|w| w[0] <= w[1]));
    }
    for c in &rep.fw_given_u {
        assert!(c.cdf.iter().all(|f| (0.0..=1.0).contains(f)));
        assert!(c.cdf.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn complete_information_is_detected() {
    let m = StructuralModel::boundary_design();
    let sim = simulate_regime(&m, &TrendSpec::none(2), 5000, 9, InfoRegime::Complete).unwrap();
    let d = test_private_information(&sim.panel, &DiagnosticConfig::default()).unwrap();
    assert!(d.firms.iter().all(|f| !f.pass));
}

#[test]
fn report_files_are_written() {
    let m = smooth_model();
    let cfg = IdentifyConfig {
        report_alpha: vec![0.25, 0.5, 0.75],
        ..Default::default()
    };
    let rep = identify(&Source::Population(&m), &cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("cournot-id-{}", std::process::id()));
    rep.write(&dir).unwrap();
    for f in ["identification_report.json", "fv_quantiles.csv", "fw_given_u.csv"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn population_round_trip(beta in 0.2f64..2.0, lambda in 0.01f64..1.0,
                             shapes in prop::collection::vec((0.5f64..4.0, 0.5f64..4.0, 0.5f64..3.0), 3),
                             w_bar in 0.1f64..1.0) {
        let v_laws: Vec<Law> = shapes.iter().enumerate()
            .map(|(i, &(a, b, len))| beta_law(a, b, 1.0 + i as f64, 1.0 + i as f64 + len))
            .collect();
        let m = StructuralModel {
            beta,
            lambda,
            u_law: beta_law(2.0, 3.0, 60.0, 90.0),
            w_shock: WShock { w_bar, a1: 0.5, a2: 0.0, truncation: None },
            v_laws,
        };
        let cfg = IdentifyConfig {
            phi_firms: vec![],
            report_alpha: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            ..Default::default()
        };
        let rep = identify(&Source::Population(&m), &cfg).unwrap();
        prop_assert!((rep.beta_hat - beta).abs() < 1e-8);
        prop_assert!((rep.lambda_hat - lambda).abs() < 1e-6);
        for (i, t) in rep.fv_tables.iter().enumerate() {
            prop_assert!((rep.mu_v_hat[i] - m.v_laws[i].mean()).abs() < 1e-6);
            for (a, v) in t.alpha.iter().zip(&t.values) {
                prop_assert!((v - m.v_laws[i].quantile(*a).unwrap()).abs() < 1e-6);
            }
        }
    }
}
