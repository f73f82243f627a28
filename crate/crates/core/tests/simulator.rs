use proptest::prelude::*;

use cournot_core::distributions::Univariate;
use cournot_core::panel::{LatentDraws, Panel};
use cournot_core::simulator::*;
use cournot_core::theta::{StructuralModel, ThetaParam};

#[test]
fn shocks_stay_inside_their_supports() {
    let model = ThetaParam::mc_design().model().unwrap();
    let sim = simulate_panel(&model, &TrendSpec::none(20), 500, 2).unwrap();
    let prim = model.primitives();
    for k in 0..sim.latent.len() {
        assert!(sim.latent.u[k] >= prim.u_lower);
        assert!(sim.latent.w[k] >= prim.w_bounds.0 && sim.latent.w[k] <= prim.w_bounds.1);
        for (v, &(lo, hi)) in sim.latent.v[k].iter().zip(&prim.v_bounds) {
            assert!(*v >= lo && *v <= hi);
        }
        assert!(sim.panel.p[k] >= 0.0);
        assert!(sim.panel.q[k].iter().all(|&q| q >= 0.0));
    }
}

#[test]
fn regimes_share_latent_shocks() {
    let model = StructuralModel::boundary_design();
    let a = simulate_regime(&model, &TrendSpec::none(2), 100, 4, InfoRegime::Private).unwrap();
    let b = simulate_regime(&model, &TrendSpec::none(2), 100, 4, InfoRegime::Complete).unwrap();
    assert_eq!(a.latent, b.latent);
    assert_ne!(a.panel, b.panel);
}

#[test]
fn outputs_average_to_interim_means() {
    // E[Q_i] = E[(U - W - A_i)/D]: check the sample mean of outputs against it.
    let model = StructuralModel::boundary_design();
    let sim = simulate_panel(&model, &TrendSpec::none(2), 200_000, 5).unwrap();
    let prim = model.primitives();
    let mean_u = model.u_law.mean();
    for i in 0..2 {
        let want = (mean_u - prim.a_coef(i)) / prim.big_d();
        let got = sim.panel.column(i).iter().sum::<f64>() / sim.panel.len() as f64;
        assert!((got - want).abs() < 0.05, "firm {i}: {got} vs {want}");
    }
}

#[test]
fn csv_round_trips() {
    let model = ThetaParam::mc_design().model().unwrap();
    let sim = simulate_panel(&model, &TrendSpec::none(20), 25, 7).unwrap();
    let dir = std::env::temp_dir().join(format!("cournot-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    sim.panel.write_csv(dir.join("panel.csv")).unwrap();
    sim.latent.write_csv(dir.join("latent.csv")).unwrap();
    let p = Panel::read_csv(dir.join("panel.csv")).unwrap();
    let l = LatentDraws::read_csv(dir.join("latent.csv")).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(p, sim.panel);
    assert_eq!(l, sim.latent);
}

#[test]
fn trend_needs_one_slope_per_firm() {
    let model = StructuralModel::boundary_design();
    let bad = TrendSpec {
        tau: 0.1,
        tau_s: vec![1.0],
    };
    assert!(simulate_panel(&model, &bad, 10, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trend_identity_holds(tau in 0.0f64..0.2, s in prop::collection::vec(-2.0f64..2.0, 20)) {
        let theta = ThetaParam::mc_design();
        let tr = TrendSpec { tau, tau_s: s.clone() };
        let want = -theta.beta / (theta.lambda + theta.beta) * s.iter().sum::<f64>();
        prop_assert!((tr.tau_d(theta.beta, theta.lambda) - want).abs() < 1e-12);
    }

    #[test]
    fn prefix_stable_in_length(seed in 0u64..1000, short in 1usize..30, extra in 1usize..30) {
        let model = StructuralModel::boundary_design();
        let tr = TrendSpec::none(2);
        let a = simulate_panel(&model, &tr, short, seed).unwrap();
        let b = simulate_panel(&model, &tr, short + extra, seed).unwrap();
        prop_assert_eq!(a.panel, b.panel.slice(0, short));
    }

    #[test]
    fn demand_shock_recovered_from_observables(seed in 0u64..1000) {
        let model = StructuralModel::boundary_design();
        let sim = simulate_panel(&model, &TrendSpec::none(2), 20, seed).unwrap();
        for (u, u_hat) in sim.latent.u.iter().zip(sim.panel.demand_shocks(model.beta)) {
            prop_assert!((u - u_hat).abs() < 1e-9);
        }
    }
}
