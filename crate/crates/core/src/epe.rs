//! Expected prediction error.
//!
//! The utility of a policy `π` at state `s` is the expected discounted sum
//! of signed TD errors measured against the agent's own value estimate `V̂`:
//!
//! ```text
//! U^π(s) = E[ Σ_t γ^t δ_t | s_0 = s, π ],   δ_t = R(s_t) + γ V̂(s_{t+1}) − V̂(s_t)
//! ```
//!
//! With `V̂` held fixed and bounded the series telescopes to
//! `U^π(s) = V^π(s) − V̂(s)`. This module computes `U` both ways (a linear
//! solve of the series and the telescoped closed form) plus a Monte Carlo
//! estimate, so each route can check the others.
//!
//! Every entry point requires a *frozen* estimate; passing a thawed one is an
//! error rather than a silent approximation.

use rand::Rng;

use crate::error::{check_index, check_len, Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::reward::RewardModel;
use crate::rollout::{horizon_for, rollout};
use crate::solver::{policy_evaluation, solve_discounted, value_iteration, ValueTable, DEFAULT_TOLERANCE};

/// The agent's own value estimate `V̂`, distinct from exact solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    values: Vec<f64>,
    frozen: bool,
}

impl ValueEstimate {
    /// A frozen estimate, ready for prediction-error computations.
    pub fn frozen(values: Vec<f64>) -> Result<Self> {
        Self::checked(values, true)
    }

    /// A mutable (learning) estimate; must be frozen before use here.
    pub fn thawed(values: Vec<f64>) -> Result<Self> {
        Self::checked(values, false)
    }

    fn checked(values: Vec<f64>, frozen: bool) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("value estimate"));
        }
        Ok(Self { values, frozen })
    }

    pub fn zeros(n_states: usize) -> Self {
        Self::constant(n_states, 0.0)
    }

    pub fn constant(n_states: usize, c: f64) -> Self {
        assert!(c.is_finite(), "constant estimate must be finite");
        Self {
            values: vec![c; n_states],
            frozen: true,
        }
    }

    /// `V + b` for every state.
    pub fn biased(exact: &ValueTable, bias: f64) -> Result<Self> {
        Self::frozen(exact.values().iter().map(|v| v + bias).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn thaw(mut self) -> Self {
        self.frozen = false;
        self
    }

    /// Mutable access; only available while thawed.
    pub fn values_mut(&mut self) -> Result<&mut [f64]> {
        if self.frozen {
            return Err(Error::invalid("value estimate", "frozen estimates are read-only"));
        }
        Ok(&mut self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn ensure_frozen(&self) -> Result<()> {
        if self.frozen {
            Ok(())
        } else {
            Err(Error::EstimateNotFrozen)
        }
    }

    fn check(&self, n_states: usize) -> Result<()> {
        self.ensure_frozen()?;
        check_len("value estimate", n_states, self.values.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpeMethod {
    Telescoped,
    BellmanSeries,
    MonteCarlo {
        state: usize,
        n_rollouts: usize,
        stderr: f64,
    },
}

/// `U(s)` together with how it was obtained.
///
/// Exact methods fill every state. A Monte Carlo result carries a single
/// value for the state named in its method tag.
#[derive(Debug, Clone, PartialEq)]
pub struct EpeResult {
    values: Vec<f64>,
    method: EpeMethod,
}

impl EpeResult {
    pub fn method(&self) -> EpeMethod {
        self.method
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `U(s)`, or `None` when the result does not cover `s`.
    pub fn value(&self, s: usize) -> Option<f64> {
        match self.method {
            EpeMethod::MonteCarlo { state, .. } => (s == state).then(|| self.values[0]),
            _ => self.values.get(s).copied(),
        }
    }

    pub fn stderr(&self) -> Option<f64> {
        match self.method {
            EpeMethod::MonteCarlo { stderr, .. } => Some(stderr),
            _ => None,
        }
    }
}

/// `δ = R(s) + γ V̂(s') − V̂(s)`.
pub fn td_error(reward: &RewardModel, estimate: &ValueEstimate, s: usize, s_next: usize, gamma: f64) -> Result<f64> {
    estimate.ensure_frozen()?;
    check_index("state", s, estimate.len())?;
    check_index("next state", s_next, estimate.len())?;
    check_index("state", s, reward.n_states())?;
    Ok(reward.get(s) + gamma * estimate.get(s_next) - estimate.get(s))
}

/// `E_π[δ | s]` for every state.
pub fn expected_td_error(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    policy.check_shape(ns, mdp.n_actions())?;
    reward.check_states(ns)?;
    estimate.check(ns)?;
    let gamma = mdp.discount();
    let v_hat = estimate.values();
    Ok((0..ns)
        .map(|s| {
            let next: f64 = policy
                .row(s)
                .iter()
                .enumerate()
                .map(|(a, &pa)| if pa == 0.0 { 0.0 } else { pa * mdp.expect(s, a, v_hat) })
                .sum();
            reward.get(s) + gamma * next - v_hat[s]
        })
        .collect())
}

/// `U^π = V^π − V̂`, with `V^π` from exact policy evaluation.
pub fn epe_telescoped(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
) -> Result<EpeResult> {
    estimate.check(mdp.n_states())?;
    let v = policy_evaluation(mdp, policy, reward)?;
    Ok(EpeResult {
        values: v.values().iter().zip(estimate.values()).map(|(v, e)| v - e).collect(),
        method: EpeMethod::Telescoped,
    })
}

/// Solves `U = d + γ P_π U` with `d(s) = E_π[δ | s]`, the discounted series of
/// expected TD errors, without using the telescoped form.
pub fn epe_bellman_series(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
) -> Result<EpeResult> {
    let d = expected_td_error(mdp, policy, reward, estimate)?;
    Ok(EpeResult {
        values: solve_discounted(mdp, policy, &d)?,
        method: EpeMethod::BellmanSeries,
    })
}

/// Mean and standard error of `Σ_t γ^t δ_t` over seeded rollouts from `s0`.
///
/// Rollouts are truncated where the discounted tail drops below 1e-6.
#[allow(clippy::too_many_arguments)]
pub fn epe_monte_carlo<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
    s0: usize,
    n_rollouts: usize,
    rng: &mut R,
) -> Result<EpeResult> {
    if n_rollouts == 0 {
        return Err(Error::invalid("n_rollouts", "must be at least 1"));
    }
    estimate.check(mdp.n_states())?;
    let horizon = horizon_for(mdp, reward, estimate);
    let mut stats = RunningStats::default();
    for _ in 0..n_rollouts {
        let traj = rollout(mdp, policy, reward, estimate, s0, horizon, rng)?;
        stats.push(traj.discounted_td_sum());
    }
    Ok(EpeResult {
        values: vec![stats.mean()],
        method: EpeMethod::MonteCarlo {
            state: s0,
            n_rollouts,
            stderr: stats.stderr(),
        },
    })
}

/// Welford accumulator; identical samples give exactly zero variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Weight between value seeking (`alpha = 1`) and surprise seeking (`alpha = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedObjectiveConfig {
    alpha: f64,
}

impl MixedObjectiveConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self { alpha })
        } else {
            Err(Error::invalid("alpha", format!("{alpha} outside [0, 1]")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `α V + (1 − α) U`, evaluated as `V − (1 − α) V̂`.
pub fn mixed_objective(v: &ValueTable, estimate: &ValueEstimate, config: MixedObjectiveConfig) -> Result<Vec<f64>> {
    estimate.check(v.len())?;
    let w = 1.0 - config.alpha;
    Ok(v.values().iter().zip(estimate.values()).map(|(v, e)| v - w * e).collect())
}

/// The EPE-maximizing stationary policy and its `U`.
///
/// `V̂` is a constant offset across policies, so the maximizer of `V^π − V̂`
/// is the maximizer of `V^π`; value iteration finds it exactly.
pub fn epe_optimal_policy(
    mdp: &TabularMdp,
    reward: &RewardModel,
    estimate: &ValueEstimate,
) -> Result<(Policy, EpeResult)> {
    estimate.check(mdp.n_states())?;
    let vi = value_iteration(mdp, reward, DEFAULT_TOLERANCE)?;
    let u = epe_telescoped(mdp, &vi.policy, reward, estimate)?;
    Ok((vi.policy, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rollout::stream_rng;
    use crate::solver::enumerate_deterministic_policies;

    fn chain() -> (TabularMdp, RewardModel, Policy) {
        (
            fixtures::two_state_chain(0.5),
            RewardModel::goal_indicator(2, 1).unwrap(),
            Policy::deterministic(&[1, 0], 2).unwrap(),
        )
    }

    #[test]
    fn td_error_cases() {
        let r0 = RewardModel::table(vec![0.0, 0.0]).unwrap();
        assert_eq!(td_error(&r0, &ValueEstimate::zeros(2), 0, 1, 0.9).unwrap(), 0.0);
        let c = ValueEstimate::constant(2, 4.0);
        assert_eq!(td_error(&r0, &c, 0, 1, 0.75).unwrap(), -(1.0 - 0.75) * 4.0);
        let thawed = ValueEstimate::thawed(vec![0.0; 2]).unwrap();
        assert_eq!(td_error(&r0, &thawed, 0, 1, 0.9), Err(Error::EstimateNotFrozen));
        assert!(td_error(&r0, &c, 0, 2, 0.9).is_err());
    }

    #[test]
    fn expected_td_error_vanishes_at_exact_values() {
        let mut rng = stream_rng(21, 0);
        let mdp = fixtures::random_mdp(&mut rng, 5, 3, 0.8);
        let reward = fixtures::random_reward(&mut rng, 5);
        let policy = fixtures::random_policy(&mut rng, 5, 3);
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        let est = ValueEstimate::frozen(v.into_vec()).unwrap();
        for d in expected_td_error(&mdp, &policy, &reward, &est).unwrap() {
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn telescoped_special_cases() {
        let (mdp, reward, policy) = chain();
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        let perfect = ValueEstimate::frozen(v.values().to_vec()).unwrap();
        let u = epe_telescoped(&mdp, &policy, &reward, &perfect).unwrap();
        assert!(u.values().iter().all(|&x| x == 0.0));
        let zero = epe_telescoped(&mdp, &policy, &reward, &ValueEstimate::zeros(2)).unwrap();
        assert_eq!(zero.values(), v.values());
        let optimistic = ValueEstimate::biased(&v, 0.5).unwrap();
        let u = epe_telescoped(&mdp, &policy, &reward, &optimistic).unwrap();
        assert_eq!(u.values(), &[-0.5, -0.5]);
        assert_eq!(u.method(), EpeMethod::Telescoped);
    }

    #[test]
    fn series_matches_telescoped() {
        let mut rng = stream_rng(22, 0);
        for _ in 0..50 {
            let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, 6, 3);
            let a = epe_telescoped(&mdp, &policy, &reward, &est).unwrap();
            let b = epe_bellman_series(&mdp, &policy, &reward, &est).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
            }
        }
        let (mdp, _, policy) = chain();
        let zero = RewardModel::table(vec![0.0, 0.0]).unwrap();
        let u = epe_bellman_series(&mdp, &policy, &zero, &ValueEstimate::zeros(2)).unwrap();
        assert!(u.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let mut rng = stream_rng(23, 0);
        let (mdp, policy, reward, est) = fixtures::random_triple(&mut rng, 4, 2);
        let exact = epe_telescoped(&mdp, &policy, &reward, &est).unwrap();
        let mc = epe_monte_carlo(&mdp, &policy, &reward, &est, 1, 10_000, &mut rng).unwrap();
        let se = mc.stderr().unwrap();
        assert!(se > 0.0);
        assert!((mc.value(1).unwrap() - exact.value(1).unwrap()).abs() <= 3.0 * se);
        assert_eq!(mc.value(0), None);

        // zero estimate: Monte Carlo EPE estimates V^π
        let v = policy_evaluation(&mdp, &policy, &reward).unwrap();
        let mc = epe_monte_carlo(&mdp, &policy, &reward, &ValueEstimate::zeros(4), 0, 10_000, &mut rng).unwrap();
        assert!((mc.value(0).unwrap() - v.get(0)).abs() <= 3.0 * mc.stderr().unwrap());

        // perfect estimate: zero mean
        let perfect = ValueEstimate::frozen(v.into_vec()).unwrap();
        let mc = epe_monte_carlo(&mdp, &policy, &reward, &perfect, 2, 10_000, &mut rng).unwrap();
        assert!(mc.value(2).unwrap().abs() <= 3.0 * mc.stderr().unwrap() + 1e-9);
    }

    #[test]
    fn deterministic_monte_carlo_has_no_noise() {
        let (mdp, reward, policy) = chain();
        let est = ValueEstimate::frozen(vec![0.3, -0.2]).unwrap();
        let mc = epe_monte_carlo(&mdp, &policy, &reward, &est, 0, 50, &mut stream_rng(1, 1)).unwrap();
        assert_eq!(mc.stderr(), Some(0.0));
        let exact = epe_telescoped(&mdp, &policy, &reward, &est).unwrap();
        assert!((mc.value(0).unwrap() - exact.value(0).unwrap()).abs() <= 1e-6);
        assert!(epe_monte_carlo(&mdp, &policy, &reward, &est, 0, 0, &mut stream_rng(1, 1)).is_err());
    }

    #[test]
    fn mixed_objective_endpoints() {
        let v = ValueTable::new(vec![1.0, 2.0, -3.0]).unwrap();
        let est = ValueEstimate::frozen(vec![0.5, 2.5, 1.0]).unwrap();
        let one = mixed_objective(&v, &est, MixedObjectiveConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(one, v.values());
        let zero = mixed_objective(&v, &est, MixedObjectiveConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(zero, vec![0.5, -0.5, -4.0]);
        let same = ValueEstimate::frozen(v.values().to_vec()).unwrap();
        let cfg = MixedObjectiveConfig::new(0.3).unwrap();
        for (m, x) in mixed_objective(&v, &same, cfg).unwrap().iter().zip(v.values()) {
            assert!((m - 0.3 * x).abs() <= 1e-12);
        }
        assert!(MixedObjectiveConfig::new(1.1).is_err());
        assert!(mixed_objective(&v, &ValueEstimate::zeros(2), cfg).is_err());
    }

    #[test]
    fn optimal_policy_ignores_estimate() {
        let (mdp, reward, _) = chain();
        let vi = value_iteration(&mdp, &reward, DEFAULT_TOLERANCE).unwrap();
        for est in [vec![0.0, 0.0], vec![5.0, -2.0], vec![-1.0, 10.0]] {
            let est = ValueEstimate::frozen(est).unwrap();
            let (p, _) = epe_optimal_policy(&mdp, &reward, &est).unwrap();
            assert_eq!(p, vi.policy);
        }
        let perfect = ValueEstimate::frozen(vi.values.values().to_vec()).unwrap();
        let (p, u) = epe_optimal_policy(&mdp, &reward, &perfect).unwrap();
        assert_eq!(p, vi.policy);
        assert!(u.values().iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn enumeration_argmax_of_u_is_argmax_of_v() {
        let mut rng = stream_rng(24, 0);
        for _ in 0..20 {
            let mdp = fixtures::random_mdp(&mut rng, 4, 3, 0.9);
            let reward = fixtures::random_reward(&mut rng, 4);
            let est = fixtures::random_estimate(&mut rng, 4, 5.0);
            let mut best_u = (f64::NEG_INFINITY, 0.0);
            let mut best_v = f64::NEG_INFINITY;
            for p in enumerate_deterministic_policies(&mdp).unwrap() {
                let u = epe_telescoped(&mdp, &p, &reward, &est).unwrap().value(0).unwrap();
                let v = policy_evaluation(&mdp, &p, &reward).unwrap().get(0);
                if u > best_u.0 {
                    best_u = (u, v);
                }
                best_v = best_v.max(v);
            }
            assert!((best_u.1 - best_v).abs() <= 1e-8);
        }
    }

    #[test]
    fn thawed_estimates_are_rejected_everywhere() {
        let (mdp, reward, policy) = chain();
        let thawed = ValueEstimate::thawed(vec![0.0, 0.0]).unwrap();
        assert_eq!(epe_telescoped(&mdp, &policy, &reward, &thawed), Err(Error::EstimateNotFrozen));
        assert_eq!(epe_bellman_series(&mdp, &policy, &reward, &thawed), Err(Error::EstimateNotFrozen));
        assert!(epe_optimal_policy(&mdp, &reward, &thawed).is_err());
        let v = ValueTable::new(vec![0.0, 0.0]).unwrap();
        assert!(mixed_objective(&v, &thawed, MixedObjectiveConfig::new(0.5).unwrap()).is_err());
        let mut t = thawed.clone();
        t.values_mut().unwrap()[0] = 1.0;
        assert!(t.freeze().values_mut().is_err());
    }
}
