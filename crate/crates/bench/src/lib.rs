//! Workloads shared by the benchmarks.

use epe_core::fixtures;
use epe_core::rollout::stream_rng;
use epe_core::{Policy, RewardModel, TabularMdp, ValueEstimate};

pub const SEED: u64 = 7;

/// Random MDP, policy, reward and frozen estimate of the given size.
pub fn triple(n_states: usize, n_actions: usize) -> (TabularMdp, Policy, RewardModel, ValueEstimate) {
    let mut rng = stream_rng(SEED, n_states as u64);
    fixtures::random_triple(&mut rng, n_states, n_actions)
}
