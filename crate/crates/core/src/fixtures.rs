//! Small MDP builders and seeded random instances shared by tests,
//! benchmarks, the identity batteries and the scenarios.

use rand::Rng;

use crate::epe::ValueEstimate;
use crate::mdp::{MdpSpec, TabularMdp};
use crate::policy::Policy;
use crate::reward::RewardModel;

pub const STAY: usize = 0;
pub const MOVE: usize = 1;

pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;

/// Two states; action 0 stays, action 1 moves to state 1 (state 1 absorbs).
pub fn two_state_chain(discount: f64) -> TabularMdp {
    MdpSpec::new(2, 2, discount)
        .edge(0, STAY, 0)
        .edge(0, MOVE, 1)
        .edge(1, STAY, 1)
        .edge(1, MOVE, 1)
        .build()
        .expect("chain fixture is valid")
}

/// Deterministic 1-D corridor with actions stay / left / right, clipped at
/// both ends.
pub fn corridor(length: usize, discount: f64) -> crate::error::Result<TabularMdp> {
    let mut spec = MdpSpec::new(length, 3, discount);
    for s in 0..length {
        spec = spec
            .edge(s, STAY, s)
            .edge(s, LEFT, s.saturating_sub(1))
            .edge(s, RIGHT, (s + 1).min(length.saturating_sub(1)));
    }
    spec.build()
}

/// Dense random MDP with skewed row weights.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, discount: f64) -> TabularMdp {
    let mut t = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>().powi(3)).collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            t.extend(row.iter().map(|w| w / sum));
        } else {
            t.extend((0..n_states).map(|j| if j == 0 { 1.0 } else { 0.0 }));
        }
    }
    TabularMdp::from_dense(n_states, n_actions, discount, t).expect("random rows are stochastic")
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Policy {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let row: Vec<f64> = (0..n_actions).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = row.iter().sum();
        let mut row: Vec<f64> = row.iter().map(|w| w / sum).collect();
        let rest: f64 = row[1..].iter().sum();
        row[0] = 1.0 - rest;
        probs.extend(row);
    }
    Policy::from_probs(n_states, n_actions, probs).expect("normalized rows")
}

/// Table reward with entries in `[-1, 1]`.
pub fn random_reward<R: Rng + ?Sized>(rng: &mut R, n_states: usize) -> RewardModel {
    RewardModel::table((0..n_states).map(|_| rng.random_range(-1.0..=1.0)).collect()).expect("finite rewards")
}

/// Frozen estimate with entries in `[-scale, scale]`.
pub fn random_estimate<R: Rng + ?Sized>(rng: &mut R, n_states: usize, scale: f64) -> ValueEstimate {
    ValueEstimate::frozen((0..n_states).map(|_| rng.random_range(-scale..=scale)).collect()).expect("finite")
}

/// Random `(MDP, π, R, V̂)` with `γ ∈ [0, 0.95]`.
pub fn random_triple<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
) -> (TabularMdp, Policy, RewardModel, ValueEstimate) {
    let gamma = rng.random_range(0.0..=0.95);
    let mdp = random_mdp(rng, n_states, n_actions, gamma);
    let policy = random_policy(rng, n_states, n_actions);
    let reward = random_reward(rng, n_states);
    let est = random_estimate(rng, n_states, 10.0);
    (mdp, policy, reward, est)
}
