//! Seeded trajectory simulation with per-step TD errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::epe::{td_error, ValueEstimate};
use crate::error::{check_index, check_len, Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::reward::RewardModel;

/// Truncated tails must contribute at most this much discounted mass.
pub const TAIL_TOLERANCE: f64 = 1e-6;

const MAX_HORIZON: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// `R(s_t) + γ V̂(s_{t+1}) − V̂(s_t)` against the estimate frozen for the rollout.
    pub td_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start_state: usize,
    pub steps: Vec<TransitionRecord>,
    pub discount: f64,
    /// `V̂(s_0)` at rollout time.
    pub start_estimate: f64,
    /// `V̂(s_T)` for the state reached after the last record.
    pub final_estimate: f64,
    /// Fingerprint of the policy parameters that generated the actions, if known.
    pub policy_fingerprint: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> usize {
        self.steps.last().map_or(self.start_state, |r| r.next_state)
    }

    /// `Σ_t γ^t r_t` over the recorded steps.
    pub fn discounted_return(&self) -> f64 {
        discounted_sum(self.steps.iter().map(|r| r.reward), self.discount)
    }

    /// `Σ_t γ^t δ_t` over the recorded steps.
    pub fn discounted_td_sum(&self) -> f64 {
        discounted_sum(self.steps.iter().map(|r| r.td_error), self.discount)
    }

    /// `γ^T V̂(s_T)`, the bootstrap term dropped by truncation.
    pub fn truncation_correction(&self) -> f64 {
        self.discount.powi(self.steps.len() as i32) * self.final_estimate
    }

    pub fn with_fingerprint(mut self, fingerprint: u64) -> Self {
        self.policy_fingerprint = Some(fingerprint);
        self
    }
}

fn discounted_sum(values: impl Iterator<Item = f64>, discount: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for v in values {
        total += weight * v;
        weight *= discount;
    }
    total
}

/// Smallest `H ≥ 1` with `γ^H · bound ≤` [`TAIL_TOLERANCE`].
pub fn tail_horizon(discount: f64, bound: f64) -> usize {
    let bound = bound.abs();
    if discount <= 0.0 || bound <= TAIL_TOLERANCE {
        return 1;
    }
    let h = ((TAIL_TOLERANCE / bound).ln() / discount.ln()).ceil();
    let mut h = (h.max(1.0) as usize).min(MAX_HORIZON);
    // guard against ln rounding at the boundary
    while h < MAX_HORIZON && discount.powi(h as i32) * bound > TAIL_TOLERANCE {
        h += 1;
    }
    h
}

/// Horizon at which the dropped return tail plus the bootstrap term
/// `γ^H V̂(s_H)` together stay below [`TAIL_TOLERANCE`].
pub fn horizon_for(mdp: &TabularMdp, reward: &RewardModel, estimate: &ValueEstimate) -> usize {
    let value_bound = reward.max_abs() / (1.0 - mdp.discount());
    tail_horizon(mdp.discount(), value_bound + estimate.max_abs())
}

/// Independent generator for stream `index` under `master_seed`.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Simulates `horizon` steps from `s0` under `policy`, recording TD errors
/// against `estimate`, which stays fixed for the whole rollout.
#[allow(clippy::too_many_arguments)]
pub fn rollout<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
    s0: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let ns = mdp.n_states();
    policy.check_shape(ns, mdp.n_actions())?;
    reward.check_states(ns)?;
    check_len("value estimate", ns, estimate.len())?;
    check_index("start state", s0, ns)?;
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    estimate.ensure_frozen()?;

    let gamma = mdp.discount();
    let mut steps = Vec::with_capacity(horizon);
    let mut s = s0;
    for _ in 0..horizon {
        let a = policy.sample_action(s, rng)?;
        let next = mdp.sample_transition(s, a, rng)?;
        steps.push(TransitionRecord {
            state: s,
            action: a,
            reward: reward.get(s),
            next_state: next,
            td_error: td_error(reward, estimate, s, next, gamma)?,
        });
        s = next;
    }
    Ok(Trajectory {
        start_state: s0,
        steps,
        discount: gamma,
        start_estimate: estimate.get(s0),
        final_estimate: estimate.get(s),
        policy_fingerprint: None,
    })
}
