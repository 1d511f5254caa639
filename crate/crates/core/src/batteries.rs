//! Randomized identity batteries over seeded MDP instances.

use std::fmt;

use rand::Rng;

use crate::epe::{epe_bellman_series, epe_telescoped, mixed_objective, MixedObjectiveConfig, ValueEstimate};
use crate::error::Result;
use crate::fixtures;
use crate::reward::RewardModel;
use crate::rollout::stream_rng;
use crate::solver::{
    enumerate_deterministic_policies, policy_advantage, policy_evaluation, value_iteration, DEFAULT_TOLERANCE,
};

pub const TELESCOPING_TOLERANCE: f64 = 1e-9;
pub const ARGMAX_TOLERANCE: f64 = 1e-8;
pub const MIXED_TOLERANCE: f64 = 1e-12;
pub const ADVANTAGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub name: &'static str,
    pub cases: usize,
    /// Largest deviation seen over all cases.
    pub max_error: f64,
    pub tolerance: f64,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl fmt::Display for BatteryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, max error {:e} (tolerance {:e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_error,
            self.tolerance
        )
    }
}

/// `|series − telescoped|` per state on random triples with 1..=`max_states` states.
pub fn telescoping_battery(seed: u64, cases: usize, max_states: usize) -> Result<BatteryReport> {
    let mut max_error = 0.0_f64;
    for i in 0..cases {
        let mut rng = stream_rng(seed, i as u64);
        let n = rng.random_range(1..=max_states);
        let na = rng.random_range(1..=3);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, na);
        let series = epe_bellman_series(&mdp, &policy, &reward, &est)?;
        let tele = epe_telescoped(&mdp, &policy, &reward, &est)?;
        for (a, b) in series.values().iter().zip(tele.values()) {
            max_error = max_error.max((a - b).abs());
        }
    }
    Ok(BatteryReport {
        name: "telescoping",
        cases,
        max_error,
        tolerance: TELESCOPING_TOLERANCE,
    })
}

/// The enumerated maximizer of `U(s0)` reaches the value-iteration optimum of `V(s0)`.
pub fn argmax_battery(seed: u64, cases: usize, n_states: usize, n_actions: usize) -> Result<BatteryReport> {
    let mut max_error = 0.0_f64;
    for i in 0..cases {
        let mut rng = stream_rng(seed, i as u64);
        let gamma = rng.random_range(0.0..=0.95);
        let mdp = fixtures::random_mdp(&mut rng, n_states, n_actions, gamma);
        let reward = fixtures::random_reward(&mut rng, n_states);
        let est = fixtures::random_estimate(&mut rng, n_states, 10.0);
        let best_v = value_iteration(&mdp, &reward, DEFAULT_TOLERANCE * 1e-2)?.values.get(0);

        let mut best: Option<(f64, f64)> = None;
        for policy in enumerate_deterministic_policies(&mdp)? {
            let u = epe_telescoped(&mdp, &policy, &reward, &est)?.values()[0];
            if best.is_none_or(|(bu, _)| u > bu) {
                best = Some((u, policy_evaluation(&mdp, &policy, &reward)?.get(0)));
            }
        }
        let (_, v_at_argmax) = best.expect("at least one policy");
        max_error = max_error.max((v_at_argmax - best_v).abs());
    }
    Ok(BatteryReport {
        name: "argmax invariance",
        cases,
        max_error,
        tolerance: ARGMAX_TOLERANCE,
    })
}

/// `α = 0` gives `U`, `α = 1` gives `V`, and `V̂ = V` gives `αV`.
pub fn mixed_objective_battery(seed: u64, cases: usize) -> Result<BatteryReport> {
    let mut max_error = 0.0_f64;
    let zero = MixedObjectiveConfig::new(0.0)?;
    let one = MixedObjectiveConfig::new(1.0)?;
    for i in 0..cases {
        let mut rng = stream_rng(seed, i as u64);
        let n = rng.random_range(1..=8);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, n, 2);
        let v = policy_evaluation(&mdp, &policy, &reward)?;
        let u = epe_telescoped(&mdp, &policy, &reward, &est)?;
        let alpha = MixedObjectiveConfig::new(rng.random_range(0.0..=1.0))?;
        let exact = ValueEstimate::frozen(v.values().to_vec())?;
        let checks = [
            (mixed_objective(&v, &est, zero)?, u.values().to_vec()),
            (mixed_objective(&v, &est, one)?, v.values().to_vec()),
            (
                mixed_objective(&v, &exact, alpha)?,
                v.values().iter().map(|x| alpha.alpha() * x).collect(),
            ),
        ];
        for (got, want) in &checks {
            for (a, b) in got.iter().zip(want) {
                max_error = max_error.max((a - b).abs());
            }
        }
    }
    Ok(BatteryReport {
        name: "mixed objective endpoints",
        cases,
        max_error,
        tolerance: MIXED_TOLERANCE,
    })
}

/// `Σ_a π(a|s) A^π(s, a)` at every state.
pub fn advantage_battery(seed: u64, cases: usize) -> Result<BatteryReport> {
    let mut max_error = 0.0_f64;
    for i in 0..cases {
        let mut rng = stream_rng(seed, i as u64);
        let n = rng.random_range(1..=8);
        let na = rng.random_range(1..=4);
        let gamma = rng.random_range(0.0..=0.95);
        let mdp = fixtures::random_mdp(&mut rng, n, na, gamma);
        let policy = fixtures::random_policy(&mut rng, n, na);
        let reward: RewardModel = fixtures::random_reward(&mut rng, n);
        let adv = policy_advantage(&mdp, &policy, &reward)?;
        for x in adv.policy_weighted(&policy)? {
            max_error = max_error.max(x.abs());
        }
    }
    Ok(BatteryReport {
        name: "zero expected advantage",
        cases,
        max_error,
        tolerance: ADVANTAGE_TOLERANCE,
    })
}

/// The full suite at its standard sizes.
pub fn identity_suite(seed: u64) -> Result<Vec<BatteryReport>> {
    Ok(vec![
        telescoping_battery(seed, 1000, 8)?,
        argmax_battery(seed, 200, 4, 3)?,
        mixed_objective_battery(seed, 200)?,
        advantage_battery(seed, 100)?,
    ])
}
