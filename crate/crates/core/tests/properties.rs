use epe_core::epe::{
    epe_bellman_series, epe_optimal_policy, epe_telescoped, expected_td_error, mixed_objective, MixedObjectiveConfig,
};
use epe_core::fixtures;
use epe_core::gae::{gae_estimate, GaeConfig, SoftmaxPolicyParams};
use epe_core::rollout::{rollout, stream_rng};
use epe_core::solver::{
    bellman_residual, enumerate_deterministic_policies, policy_advantage, policy_evaluation, value_iteration,
    DEFAULT_TOLERANCE,
};
use epe_core::ValueEstimate;
use proptest::prelude::*;

fn sizes() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..=8, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_matches_telescoped((seed, n, na) in sizes()) {
        let mut rng = stream_rng(seed, 0);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, na);
        let a = epe_bellman_series(&mdp, &policy, &reward, &est).unwrap();
        let b = epe_telescoped(&mdp, &policy, &reward, &est).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn exact_values_satisfy_bellman((seed, n, na) in sizes()) {
        let mut rng = stream_rng(seed, 1);
        let (mdp, policy, reward, _) = fixtures::random_triple(&mut rng, n, na);
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        prop_assert!(bellman_residual(&mdp, &policy, &reward, v.values()).unwrap() <= 1e-10);
    }

    #[test]
    fn exact_estimate_has_zero_expected_error((seed, n, na) in sizes()) {
        let mut rng = stream_rng(seed, 2);
        let (mdp, policy, reward, _) = fixtures::random_triple(&mut rng, n, na);
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        let est = ValueEstimate::frozen(v.into_vec()).unwrap();
        for d in expected_td_error(&mdp, &policy, &reward, &est).unwrap() {
            prop_assert!(d.abs() <= 1e-9);
        }
    }

    #[test]
    fn estimate_shift_moves_epe_by_the_shift((seed, n, na) in sizes(), c in -5.0f64..5.0) {
        let mut rng = stream_rng(seed, 3);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, na);
        let shifted = ValueEstimate::frozen(est.values().iter().map(|x| x + c).collect()).unwrap();
        let a = epe_telescoped(&mdp, &policy, &reward, &est).unwrap();
        let b = epe_telescoped(&mdp, &policy, &reward, &shifted).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - c - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn epe_optimum_matches_enumeration(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 4);
        let mdp = fixtures::random_mdp(&mut rng, 3, 2, 0.8);
        let reward = fixtures::random_reward(&mut rng, 3);
        let est = fixtures::random_estimate(&mut rng, 3, 5.0);
        let (_, best) = epe_optimal_policy(&mdp, &reward, &est).unwrap();
        let brute = enumerate_deterministic_policies(&mdp)
            .unwrap()
            .map(|p| epe_telescoped(&mdp, &p, &reward, &est).unwrap().values()[0])
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((best.values()[0] - brute).abs() <= 1e-8);
    }

    #[test]
    fn value_iteration_dominates_every_policy(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 5);
        let mdp = fixtures::random_mdp(&mut rng, 4, 2, 0.9);
        let reward = fixtures::random_reward(&mut rng, 4);
        let vi = value_iteration(&mdp, &reward, DEFAULT_TOLERANCE).unwrap();
        prop_assert!(vi.residual <= DEFAULT_TOLERANCE);
        let policy = fixtures::random_policy(&mut rng, 4, 2);
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        for s in 0..4 {
            prop_assert!(v.get(s) <= vi.values.get(s) + 1e-8);
        }
    }

    #[test]
    fn mixed_objective_endpoints((seed, n, na) in sizes(), alpha in 0.0f64..=1.0) {
        let mut rng = stream_rng(seed, 6);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, na);
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        let u = epe_telescoped(&mdp, &policy, &reward, &est).unwrap();
        let zero = mixed_objective(&v, &est, MixedObjectiveConfig::new(0.0).unwrap()).unwrap();
        let mixed = mixed_objective(&v, &est, MixedObjectiveConfig::new(alpha).unwrap()).unwrap();
        for s in 0..n {
            prop_assert!((zero[s] - u.values()[s]).abs() <= 1e-12);
            let expected = alpha * v.get(s) + (1.0 - alpha) * u.values()[s];
            prop_assert!((mixed[s] - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn advantage_has_zero_policy_mean((seed, n, na) in sizes()) {
        let mut rng = stream_rng(seed, 7);
        let (mdp, policy, reward, _) = fixtures::random_triple(&mut rng, n, na);
        let adv = policy_advantage(&mdp, &policy, &reward).unwrap();
        for x in adv.policy_weighted(&policy).unwrap() {
            prop_assert!(x.abs() <= 1e-10);
        }
    }

    #[test]
    fn epsilon_greedy_rows_are_simplexes((seed, n, na) in sizes(), eps in 0.0f64..=1.0) {
        let mut rng = stream_rng(seed, 8);
        let policy = fixtures::random_policy(&mut rng, n, na).epsilon_greedy(eps).unwrap();
        for s in 0..n {
            let sum: f64 = policy.row(s).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(policy.row(s).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn softmax_rows_are_simplexes(logits in prop::collection::vec(-50.0f64..50.0, 12)) {
        let params = SoftmaxPolicyParams::new(4, 3, logits).unwrap();
        let policy = params.policy();
        for s in 0..4 {
            let sum: f64 = policy.row(s).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rollout_errors_recompute_bit_exact((seed, n, na) in sizes(), horizon in 1usize..100) {
        let mut rng = stream_rng(seed, 9);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, na);
        let traj = rollout(&mdp, &policy, &reward, &est, 0, horizon, &mut rng).unwrap();
        let gamma = mdp.discount();
        for w in traj.steps.windows(2) {
            prop_assert_eq!(w[0].next_state, w[1].state);
        }
        for r in &traj.steps {
            let again = reward.reward_at(r.state).unwrap() + gamma * est.get(r.next_state) - est.get(r.state);
            prop_assert_eq!(r.td_error.to_bits(), again.to_bits());
        }
    }

    #[test]
    fn gae_endpoints((seed, n, na) in sizes(), horizon in 1usize..200) {
        let mut rng = stream_rng(seed, 10);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, na);
        let traj = rollout(&mdp, &policy, &reward, &est, 0, horizon, &mut rng).unwrap();
        let zero = gae_estimate(&traj, GaeConfig::for_trajectory(&traj, 0.0).unwrap()).unwrap();
        for (a, r) in zero.iter().zip(&traj.steps) {
            prop_assert_eq!(a.to_bits(), r.td_error.to_bits());
        }
        let one = gae_estimate(&traj, GaeConfig::for_trajectory(&traj, 1.0).unwrap()).unwrap();
        let expected = traj.discounted_return() - traj.start_estimate + traj.truncation_correction();
        let scale = 1.0 + traj.discounted_return().abs() + traj.start_estimate.abs() + traj.truncation_correction().abs();
        prop_assert!((one[0] - expected).abs() <= 1e-12 * scale * horizon as f64);
    }
}
