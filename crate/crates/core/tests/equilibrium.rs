use proptest::prelude::*;

use cournot_core::model::*;
use cournot_core::Error;

fn duopoly() -> ModelPrimitives {
    ModelPrimitives {
        beta: 0.5,
        lambda: 0.0,
        mu_v: vec![1.0, 1.0],
        v_bounds: vec![(0.0, 2.0), (0.0, 2.0)],
        w_bounds: (-0.5, 0.5),
        u_lower: 10.0,
    }
}

prop_compose! {
    fn primitives()(n in 2usize..6, beta in 0.1f64..2.0, lambda in 0.0f64..1.0, half_w in 0.0f64..1.0,
                    u_lower in 40.0f64..100.0, seeds in prop::collection::vec((0.0f64..5.0, 0.1f64..3.0, 0.0f64..1.0), 6))
                    -> ModelPrimitives {
        let v_bounds: Vec<(f64, f64)> = seeds[..n].iter().map(|&(lo, len, _)| (lo, lo + len)).collect();
        let mu_v = seeds[..n].iter().map(|&(lo, len, f)| lo + f * len).collect();
        ModelPrimitives { beta, lambda, mu_v, v_bounds, w_bounds: (-half_w, half_w), u_lower }
    }
}

#[test]
fn hand_solved_duopoly() {
    let eq = LinearEquilibrium::new(&duopoly()).unwrap();
    let q = eq
        .quantities(&MarketDraw {
            u: 10.0,
            w: 0.0,
            v: vec![1.0, 2.0],
        })
        .unwrap();
    assert_eq!(q, vec![6.0, 5.0]);
    assert_eq!(eq.price(&q, 10.0), 4.5);
}

#[test]
fn out_of_support_draws_are_rejected() {
    let eq = LinearEquilibrium::new(&duopoly()).unwrap();
    let bad_v = eq.quantity(0, 2.5, 0.0, 10.0);
    assert!(matches!(bad_v, Err(Error::OutOfSupport(_))));
    let bad_u = eq.quantity(0, 1.0, 0.0, 9.0);
    assert!(matches!(bad_u, Err(Error::OutOfSupport(_))));
}

#[test]
fn negative_output_floor_violates_assumption() {
    let mut p = duopoly();
    p.u_lower = 1.0;
    assert!(matches!(
        LinearEquilibrium::new(&p),
        Err(Error::AssumptionViolation(_))
    ));
    assert!(!check_assumption2(&p).unwrap().holds);
}

#[test]
fn complete_information_symmetric_oligopoly() {
    // Symmetric Cournot: q = (u - w - v) / (λ + (I+1)β).
    let q = complete_info_quantities(0.5, 0.2, &[1.0; 4], 0.5, 20.0).unwrap();
    for x in q {
        assert!((x - 18.5 / 2.7).abs() < 1e-12);
    }
}

#[test]
fn complete_information_prices_out_expensive_firms() {
    let q = complete_info_quantities(1.0, 0.0, &[1.0, 9.5], 0.0, 10.0).unwrap();
    assert_eq!(q[1], 0.0);
    assert!((q[0] - 4.5).abs() < 1e-12);
    let none = complete_info_quantities(1.0, 0.5, &[12.0, 15.0], 0.0, 10.0).unwrap();
    assert_eq!(none, vec![0.0, 0.0]);
}

proptest! {
    #[test]
    fn best_response_to_interim_beliefs(prim in primitives(), fv in prop::collection::vec(0.0f64..=1.0, 6),
                                        fw in 0.0f64..=1.0, du in 0.0f64..50.0) {
        let Ok(eq) = LinearEquilibrium::with_policy(&prim, PriceFloorPolicy::CheckRealized) else {
            return Ok(());
        };
        let n = prim.n_firms();
        let v: Vec<f64> = (0..n).map(|i| {
            let (lo, hi) = prim.v_bounds[i];
            lo + fv[i] * (hi - lo)
        }).collect();
        let w = prim.w_bounds.0 + fw * (prim.w_bounds.1 - prim.w_bounds.0);
        let u = prim.u_lower + du;
        let q = eq.quantities(&MarketDraw { u, w, v: v.clone() }).unwrap();
        for i in 0..n {
            let rivals: f64 = (0..n).filter(|&j| j != i).map(|j| eq.expected_quantity(j, w, u)).sum();
            let foc = u - w - v[i] - prim.own_slope() * q[i] - prim.beta * rivals;
            prop_assert!(foc.abs() < 1e-10, "firm {i}: {foc}");
            prop_assert!(q[i] >= 0.0);
        }
    }

    #[test]
    fn output_falls_with_own_cost_and_common_shock(prim in primitives(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let Ok(eq) = LinearEquilibrium::with_policy(&prim, PriceFloorPolicy::CheckRealized) else {
            return Ok(());
        };
        let (lo, hi) = prim.v_bounds[0];
        let (v1, v2) = (lo + a.min(b) * (hi - lo), lo + a.max(b) * (hi - lo));
        let u = prim.u_lower + 1.0;
        prop_assert!(eq.quantity(0, v1, 0.0, u).unwrap() >= eq.quantity(0, v2, 0.0, u).unwrap());
        let (wl, wh) = prim.w_bounds;
        prop_assert!(eq.quantity(0, v1, wl, u).unwrap() >= eq.quantity(0, v1, wh, u).unwrap());
    }

    #[test]
    fn mean_output_matches_interim_expectation(prim in primitives()) {
        // q_i is affine in v_i, so evaluating at the mean cost gives E[q_i | w, u].
        let Ok(eq) = LinearEquilibrium::with_policy(&prim, PriceFloorPolicy::CheckRealized) else {
            return Ok(());
        };
        let u = prim.u_lower + 3.0;
        for i in 0..prim.n_firms() {
            let at_mean = eq.quantity_unchecked(i, prim.mu_v[i], 0.0, u);
            prop_assert!((at_mean - eq.expected_quantity(i, 0.0, u)).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_information_slackness(n in 1usize..7, beta in 0.1f64..2.0, lambda in 0.0f64..1.0,
                                      v in prop::collection::vec(0.0f64..30.0, 7), u in 5.0f64..50.0) {
        let v = &v[..n];
        let q = complete_info_quantities(beta, lambda, v, 0.0, u).unwrap();
        let p = market_price(beta, &q, u);
        for i in 0..n {
            let margin = p - v[i] - (beta + lambda) * q[i];
            if q[i] > 0.0 {
                prop_assert!(margin.abs() < 1e-9);
            } else {
                prop_assert!(q[i] == 0.0 && margin <= 1e-9);
            }
        }
    }

    #[test]
    fn cournot_conduct_matches_bayes_nash(prim in primitives(), f in 0.0f64..=1.0) {
        let Ok(eq) = LinearEquilibrium::with_policy(&prim, PriceFloorPolicy::CheckRealized) else {
            return Ok(());
        };
        let n = prim.n_firms();
        let v: Vec<f64> = prim.v_bounds.iter().map(|&(lo, hi)| lo + f * (hi - lo)).collect();
        let draw = MarketDraw { u: prim.u_lower + 2.0, w: 0.0, v };
        let a = eq.quantities(&draw).unwrap();
        let b = solve_conduct_equilibrium(&prim, &ConductProfile::cournot(n), &draw).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
