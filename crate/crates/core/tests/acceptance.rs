//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::process::ExitCode;
use std::time::Instant;

use epe_core::batteries::{advantage_battery, argmax_battery, mixed_objective_battery, telescoping_battery};
use epe_core::fixtures;
use epe_core::gae::{gae_estimate, policy_gradient_step, sample_trajectories, GaeConfig, PsiChoice, SoftmaxPolicyParams};
use epe_core::goal_loop::{open_ended_loop, GoalSet, LoopConfig, TdConfig};
use epe_core::rollout::{rollout, stream_rng};
use epe_core::solver::policy_advantage;
use epe_core::{run_scenario, RewardModel, ScenarioConfig, ScenarioId, ValueEstimate};
use rand::Rng;

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn telescoping() -> Outcome {
    let t = Instant::now();
    let r = telescoping_battery(SEED, 1000, 8).expect("battery runs");
    let secs = t.elapsed().as_secs_f64();
    outcome(
        r.passed() && secs < 5.0,
        format!("{} triples, max |series - telescoped| = {:e} (<= 1e-9), {secs:.2}s (< 5s)", r.cases, r.max_error),
    )
}

fn argmax() -> Outcome {
    let t = Instant::now();
    let r = argmax_battery(SEED, 200, 4, 3).expect("battery runs");
    let secs = t.elapsed().as_secs_f64();
    outcome(
        r.passed() && secs < 10.0,
        format!("{} MDPs x 81 policies, max |V(argmax U) - V*| = {:e} (<= 1e-8), {secs:.2}s (< 10s)", r.cases, r.max_error),
    )
}

fn mixed() -> Outcome {
    let r = mixed_objective_battery(SEED, 200).expect("battery runs");
    outcome(r.passed(), format!("{} fixtures, max endpoint error = {:e} (<= 1e-12)", r.cases, r.max_error))
}

fn advantage() -> Outcome {
    let r = advantage_battery(SEED, 100).expect("battery runs");
    outcome(r.passed(), format!("{} (MDP, policy) pairs, max |sum pi A| = {:e} (<= 1e-10)", r.cases, r.max_error))
}

fn gae_endpoints() -> Outcome {
    let mut bit_exact = true;
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let mut rng = stream_rng(SEED, i);
        let n = rng.random_range(1..=8);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, 3);
        let traj = rollout(&mdp, &policy, &reward, &est, 0, 100, &mut rng).expect("rollout");
        let zero = gae_estimate(&traj, GaeConfig::for_trajectory(&traj, 0.0).unwrap()).unwrap();
        bit_exact &= zero.iter().zip(&traj.steps).all(|(a, r)| a.to_bits() == r.td_error.to_bits());
        let one = gae_estimate(&traj, GaeConfig::for_trajectory(&traj, 1.0).unwrap()).unwrap();
        let expected = traj.discounted_return() - traj.start_estimate + traj.truncation_correction();
        let scale = 1.0 + traj.discounted_return().abs() + traj.start_estimate.abs();
        worst = worst.max((one[0] - expected).abs() / scale);
    }
    outcome(
        bit_exact && worst <= 1e-12,
        format!("100 trajectories, lambda=0 bit-exact: {bit_exact}, lambda=1 max scaled gap = {worst:e} (<= 1e-12)"),
    )
}

fn policy_gradient() -> Outcome {
    let mut worst = 0.0_f64;
    let h = 1e-5;
    let shapes = [(2, 2), (5, 3), (4, 3)];
    for (k, &(ns, na)) in shapes.iter().enumerate() {
        let mut rng = stream_rng(SEED, 1000 + k as u64);
        for _ in 0..10 {
            let logits: Vec<f64> = (0..ns * na).map(|_| rng.random_range(-3.0..3.0)).collect();
            let params = SoftmaxPolicyParams::new(ns, na, logits.clone()).unwrap();
            for s in 0..ns {
                for a in 0..na {
                    let g = params.log_prob_gradient(s, a);
                    for b in 0..na {
                        let mut plus = logits.clone();
                        plus[s * na + b] += h;
                        let mut minus = logits.clone();
                        minus[s * na + b] -= h;
                        let fd = (SoftmaxPolicyParams::new(ns, na, plus).unwrap().log_prob(s, a)
                            - SoftmaxPolicyParams::new(ns, na, minus).unwrap().log_prob(s, a))
                            / (2.0 * h);
                        worst = worst.max((g[b] - fd).abs() / g[b].abs().max(1e-3));
                    }
                }
            }
        }
    }

    let run = |step_size: f64| {
        let mdp = fixtures::two_state_chain(0.5);
        let reward = RewardModel::goal_indicator(2, 1).unwrap();
        let est = ValueEstimate::zeros(2);
        let mut params = SoftmaxPolicyParams::zeros(2, 2).unwrap();
        let mut rng = stream_rng(SEED, 2000);
        let mut reached = None;
        for step in 1..=200 {
            let adv = policy_advantage(&mdp, &params.policy(), &reward).unwrap();
            let trajs = sample_trajectories(&mdp, &params, &reward, &est, 0, 20, 8, &mut rng).unwrap();
            params = policy_gradient_step(&params, &trajs, PsiChoice::ExactAdvantage(&adv), step_size).unwrap();
            if reached.is_none() && params.probs(0)[fixtures::MOVE] > 0.99 {
                reached = Some(step);
            }
        }
        (params.probs(0)[fixtures::MOVE], reached)
    };
    let (p, reached) = run(1.0);
    let (p_default, _) = run(0.1);
    outcome(
        worst <= 1e-6 && reached.is_some(),
        format!(
            "max relative finite-difference gap = {worst:e} (<= 1e-6); step 1.0: pi(move|s0) first > 0.99 at step {}, {p:.5} after 200 (step 0.1: {p_default:.5})",
            reached.map_or("never".to_string(), |s| s.to_string())
        ),
    )
}

fn played_out() -> Outcome {
    let report = run_scenario(&ScenarioConfig::default_for(ScenarioId::PlayedOut, SEED)).expect("scenario runs");
    let u = report.column("u").unwrap();
    let last = *report.column("u_after").unwrap().last().unwrap();
    outcome(
        report.passed,
        format!(
            "U(s0) {:.4} -> {:.6} over {} epochs (ratio {:.4}, <= 0.05), non-increasing",
            u[0],
            last,
            u.len(),
            last / u[0]
        ),
    )
}

fn goal_switching() -> Outcome {
    let mdp = fixtures::corridor(5, 0.9).unwrap();
    let goals = GoalSet::new(vec![1, 3], 5).unwrap();
    let config = LoopConfig {
        epochs: 40,
        steps_per_epoch: 200,
        td: TdConfig {
            learning_rate: 0.1,
            snapshot_period: 5,
            episode_length: Some(20),
        },
        seed: SEED,
        ..LoopConfig::default()
    };
    let log = open_ended_loop(&mdp, &goals, 0, &config).expect("loop runs");
    let again = open_ended_loop(&mdp, &goals, 0, &config).expect("loop runs");
    let mut crossing = None;
    let mut follows = true;
    for w in log.records.windows(2) {
        let next = &w[1];
        if next.u_values[0] < next.u_values[1] {
            crossing.get_or_insert(next.epoch);
            follows &= next.selected_index == 1;
        }
        if w[0].selected_index == 0 && w[0].u_after < w[0].u_values[1] {
            follows &= next.selected_index == 1;
        }
    }
    let deterministic = log == again;
    outcome(
        crossing.is_some() && follows && deterministic,
        format!(
            "first epoch selecting goal 3 after the crossing: {}, selection follows the crossing: {follows}, identical rerun: {deterministic}",
            crossing.map_or("none".to_string(), |e| e.to_string())
        ),
    )
}

fn information_choice() -> Outcome {
    let report =
        run_scenario(&ScenarioConfig::default_for(ScenarioId::InformationChoice, SEED)).expect("scenario runs");
    let gap = report.column("u_gap").unwrap();
    outcome(
        report.passed,
        format!(
            "uniform bias: U(informative) - U(uninformative) = {:e} at b=-0.2, {:e} at b=+0.2 (need > 0 and negated)",
            gap[0], gap[1]
        ),
    )
}

fn increasing_sequences() -> Outcome {
    let report =
        run_scenario(&ScenarioConfig::default_for(ScenarioId::IncreasingSequences, SEED)).expect("scenario runs");
    let gap = report.column("gap_start").unwrap();
    let same = report.column("identical_gap").unwrap();
    outcome(
        report.passed,
        format!(
            "gamma=0.9, constant mean estimate: U(increasing) - U(decreasing) = {:.6} (need > 0); identical branches gap = {:e}",
            gap[0], same[0]
        ),
    )
}

fn determinism() -> Outcome {
    let mut all = true;
    for id in ScenarioId::ALL {
        let cfg = ScenarioConfig::default_for(id, SEED);
        let a = run_scenario(&cfg).unwrap().to_csv_string().unwrap();
        let b = run_scenario(&cfg).unwrap().to_csv_string().unwrap();
        all &= a.as_bytes() == b.as_bytes();
    }
    outcome(all, "four scenarios, two runs each, byte-identical CSV")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("telescoping identity", telescoping),
        ("argmax invariance", argmax),
        ("mixed-objective endpoints", mixed),
        ("zero expected advantage", advantage),
        ("GAE endpoints", gae_endpoints),
        ("policy-gradient correctness", policy_gradient),
        ("played-out goal", played_out),
        ("goal switching", goal_switching),
        ("information-choice sign structure", information_choice),
        ("increasing-sequence preference", increasing_sequences),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
