mod common;

use entropic_orl::dp::brute_force_optimal_value;
use entropic_orl::{
    brute_force_value, evaluate_policy, model_win, optimal_values, risk_neutral_value, shift_scale,
    suboptimality, uniform_policy, DpError, RiskParams, StochasticPolicy,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BETAS: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];

#[test]
fn backward_recursion_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let (ns, na, h) = common::random_sizes(&mut rng, 1e5);
        let mdp = common::random_mdp(ns, na, h, &mut rng);
        let pi = common::random_policy(&mdp, &mut rng);
        for beta in BETAS {
            let p = RiskParams::new(beta, h).unwrap();
            let dp = evaluate_policy(&mdp, &pi, &p)
                .unwrap()
                .v(1, mdp.initial_state());
            let oracle = brute_force_value(&mdp, &pi, &p).unwrap();
            assert!(
                (dp - oracle).abs() <= 1e-10,
                "case {case} β={beta}: {dp} vs {oracle}"
            );
        }
    }
}

#[test]
fn optimal_values_match_policy_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 25 {
        let (ns, na, h) = common::random_sizes(&mut rng, 1e5);
        if (na as f64).powi((ns * h) as i32) > 4096.0 {
            continue;
        }
        let mdp = common::random_mdp(ns, na, h, &mut rng);
        for beta in BETAS {
            let p = RiskParams::new(beta, h).unwrap();
            let (table, greedy) = optimal_values(&mdp, &p).unwrap();
            let v_star = table.v(1, mdp.initial_state());
            let oracle = brute_force_optimal_value(&mdp, &p, 4096).unwrap();
            assert!(
                (v_star - oracle).abs() <= 1e-10,
                "β={beta}: {v_star} vs {oracle}"
            );
            let v_greedy = evaluate_policy(&mdp, &greedy, &p)
                .unwrap()
                .v(1, mdp.initial_state());
            assert_eq!(v_greedy, v_star);
        }
        checked += 1;
    }
}

#[test]
fn model_win_optimal_actions() {
    for horizon in [5, 10, 15, 20] {
        let mdp = model_win::<f64>(horizon).unwrap();
        for (beta, best) in [(0.5, 0), (1.0, 0), (-0.5, 1), (-1.0, 1)] {
            let p = RiskParams::new(beta, horizon).unwrap();
            let (table, policy) = optimal_values(&mdp, &p).unwrap();
            for h in 1..horizon {
                let row = table.q_row(h, 0);
                let chosen = (0..2).find(|&a| policy.probs(h, 0)[a] == 1.0).unwrap();
                assert_eq!(chosen, best, "H={horizon} β={beta} h={h} Q={row:?}");
                assert!(table.is_greedy(h, 0, best));
                if beta < 0.0 {
                    assert!(!table.is_greedy(h, 0, 0));
                }
            }
        }
    }
}

#[test]
fn model_win_two_steps_by_hand() {
    let mdp = model_win::<f64>(2).unwrap();
    let p = RiskParams::new(1.0, 2).unwrap();
    let expected = (0.5 * 1.5f64.exp() + 0.5 * 0.5f64.exp()).ln();
    let (table, _) = optimal_values(&mdp, &p).unwrap();
    assert!((table.v(1, 0) - expected).abs() <= 1e-12);
    assert!((brute_force_optimal_value(&mdp, &p, 1 << 12).unwrap() - expected).abs() <= 1e-12);
}

#[test]
fn value_is_monotone_in_beta() {
    let grid = [-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (ns, na, h) = common::random_sizes(&mut rng, f64::INFINITY);
        let mdp = common::random_mdp(ns, na, h, &mut rng);
        let pi = common::random_policy(&mdp, &mut rng);
        let values: Vec<f64> = grid
            .iter()
            .map(|&b| {
                evaluate_policy(&mdp, &pi, &RiskParams::new(b, h).unwrap())
                    .unwrap()
                    .v(1, mdp.initial_state())
            })
            .collect();
        for w in values.windows(2) {
            assert!(w[0] <= w[1] + 1e-12, "{values:?}");
        }
    }
}

#[test]
fn small_beta_approaches_expected_return() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let (ns, na, h) = common::random_sizes(&mut rng, f64::INFINITY);
        let mdp = common::random_mdp(ns, na, h, &mut rng);
        let pi = common::random_policy(&mdp, &mut rng);
        let mean = risk_neutral_value(&mdp, &pi).unwrap();
        for beta in [-1e-3, 1e-3] {
            let v = evaluate_policy(&mdp, &pi, &RiskParams::new(beta, h).unwrap())
                .unwrap()
                .v(1, mdp.initial_state());
            assert!((v - mean).abs() <= 1e-3 * (h * h) as f64);
        }
    }
    let mdp = model_win::<f64>(5).unwrap();
    let v = evaluate_policy(
        &mdp,
        &uniform_policy(&mdp),
        &RiskParams::new(1e-3, 5).unwrap(),
    )
    .unwrap()
    .v(1, 0);
    assert!((v - 2.5).abs() <= 0.025, "{v}");
}

#[test]
fn risk_neutral_value_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (ns, na, h) = common::random_sizes(&mut rng, 1e5);
        let mdp = common::random_mdp(ns, na, h, &mut rng);
        let pi = common::random_policy(&mdp, &mut rng);
        let mut mean = 0.0;
        entropic_orl::dp::enumerate_returns(&mdp, &pi, |p, r| mean += p * r).unwrap();
        assert!((risk_neutral_value(&mdp, &pi).unwrap() - mean).abs() <= 1e-12);
    }
}

#[test]
fn values_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let (ns, na, h) = common::random_sizes(&mut rng, f64::INFINITY);
        let mdp = common::random_mdp(ns, na, h, &mut rng);
        for beta in BETAS {
            let p = RiskParams::new(beta, h).unwrap();
            let (table, _) = optimal_values(&mdp, &p).unwrap();
            for step in 1..=h {
                for s in 0..ns {
                    let cap = (h + 1 - step) as f64;
                    assert!((0.0..=cap).contains(&table.v(step, s)));
                    for a in 0..na {
                        assert!(table.q(step, s, a) <= table.v(step, s));
                    }
                }
            }
            assert_eq!(table.v(h + 1, 0), 0.0);
            let pi = common::random_policy(&mdp, &mut rng);
            assert!(suboptimality(&mdp, &pi, &p).unwrap() >= -1e-12);
        }
    }
}

#[test]
fn error_paths() {
    let mdp = model_win::<f64>(3).unwrap();
    let wrong = RiskParams::new(0.5, 4).unwrap();
    assert!(optimal_values(&mdp, &wrong).is_err());
    let p = RiskParams::new(0.5, 3).unwrap();
    assert!(matches!(
        shift_scale(5.0, 2, &p),
        Err(DpError::OutOfRange { .. })
    ));
    assert!(matches!(
        shift_scale(0.0, 5, &p),
        Err(DpError::StepOutOfRange { .. })
    ));
    let bad = StochasticPolicy::<f64>::deterministic(&vec![vec![0; 2]; 3], 2, "x").unwrap();
    assert!(evaluate_policy(&mdp, &bad, &p).is_err());
    let big = model_win::<f64>(15).unwrap();
    let pb = RiskParams::new(0.5, 15).unwrap();
    assert!(matches!(
        brute_force_value(&big, &uniform_policy(&big), &pb),
        Err(DpError::EnumerationTooLarge { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn shift_scale_is_monotone_and_bounded(
        beta in prop_oneof![-2.0f64..-1e-3, 1e-3f64..2.0],
        horizon in 1usize..12,
        h_off in 0usize..12,
        u in 0.0f64..=1.0,
        v in 0.0f64..=1.0,
    ) {
        let h = 1 + h_off % (horizon + 1);
        let p = RiskParams::new(beta, horizon).unwrap();
        let cap = p.value_cap(h);
        let (f, g) = (u.min(v) * cap, u.max(v) * cap);
        let (sf, sg) = (shift_scale(f, h, &p).unwrap(), shift_scale(g, h, &p).unwrap());
        let r = p.r_beta();
        prop_assert!(sf >= 0.0 && sg <= r * (1.0 + 1e-12));
        prop_assert!(sf <= sg * (1.0 + 1e-12) + 1e-300);
        prop_assert_eq!(shift_scale(0.0, h, &p).unwrap(), 0.0);
    }
}
