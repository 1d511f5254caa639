//! Goal selection by maximal expected prediction error and the open-ended
//! loop that alternates goal selection with TD learning.
//!
//! Each candidate goal `g` owns an independent value estimate `V̂_g`. An epoch
//! picks `argmax_g U_g(s0)`, acts epsilon-greedily around the EPE-optimal
//! policy for that goal, and learns `V̂_g` by TD(0) against periodically
//! refreshed snapshots. As `V̂_g` approaches the true value the goal's EPE
//! drains to zero and other goals take over.

use std::io;

use rand::Rng;

use crate::epe::{epe_optimal_policy, epe_telescoped, MixedObjectiveConfig, ValueEstimate};
use crate::error::{check_index, check_len, Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::reward::RewardModel;
use crate::rollout::stream_rng;
use crate::solver::{policy_evaluation, value_iteration, DEFAULT_TOLERANCE};

/// Candidate goal states, in priority order for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSet {
    goals: Vec<usize>,
    n_states: usize,
}

impl GoalSet {
    pub fn new(goals: Vec<usize>, n_states: usize) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::EmptyGoalSet);
        }
        for (i, &g) in goals.iter().enumerate() {
            check_index("goal", g, n_states)?;
            if goals[..i].contains(&g) {
                return Err(Error::DuplicateGoal(g));
            }
        }
        Ok(Self { goals, n_states })
    }

    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn reward(&self, index: usize) -> RewardModel {
        RewardModel::goal_indicator(self.n_states, self.goals[index]).expect("goal validated at construction")
    }
}

/// Which policy stands in for the unknown optimal policy when scoring goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurrogateRule {
    /// Exact optimal policy for each candidate goal.
    #[default]
    OraclePolicy,
    /// Optimal policy of the previously selected goal, applied to every
    /// candidate. Falls back to the oracle before any goal was selected.
    CurrentGoalPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SelectionRule {
    /// `argmax_g U_g(s0)`.
    #[default]
    MaxEpe,
    /// `argmax_g [α V_g(s0) + (1 − α) U_g(s0)]`.
    Mixed(MixedObjectiveConfig),
}

/// TD(0) settings shared by every goal's estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdConfig {
    pub learning_rate: f64,
    /// Updates between snapshot refreshes; TD errors use the snapshot.
    pub snapshot_period: usize,
    /// Restart at the start state after this many steps.
    pub episode_length: Option<usize>,
}

impl Default for TdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            snapshot_period: 1,
            episode_length: None,
        }
    }
}

impl TdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::invalid("learning_rate", format!("{} outside [0, 1]", self.learning_rate)));
        }
        if self.snapshot_period == 0 {
            return Err(Error::invalid("snapshot_period", "must be at least 1"));
        }
        // a state updated every step of a window moves at most all the way to its target
        if self.learning_rate * self.snapshot_period as f64 > 1.0 {
            return Err(Error::invalid(
                "snapshot_period",
                "learning_rate * snapshot_period must not exceed 1",
            ));
        }
        if self.episode_length == Some(0) {
            return Err(Error::invalid("episode_length", "must be at least 1"));
        }
        Ok(())
    }
}

/// One value estimate per goal.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateBank {
    estimates: Vec<ValueEstimate>,
    td: TdConfig,
}

impl EstimateBank {
    /// Every goal starts from the constant `initial_value`.
    pub fn new(goal_set: &GoalSet, initial_value: f64, td: TdConfig) -> Result<Self> {
        if !initial_value.is_finite() {
            return Err(Error::NonFinite("initial value"));
        }
        let estimates = vec![ValueEstimate::constant(goal_set.n_states, initial_value); goal_set.len()];
        Self::from_estimates(goal_set, estimates, td)
    }

    pub fn from_estimates(goal_set: &GoalSet, estimates: Vec<ValueEstimate>, td: TdConfig) -> Result<Self> {
        td.validate()?;
        check_len("estimate bank", goal_set.len(), estimates.len())?;
        for e in &estimates {
            check_len("value estimate", goal_set.n_states, e.len())?;
        }
        Ok(Self { estimates, td })
    }

    pub fn estimate(&self, index: usize) -> &ValueEstimate {
        &self.estimates[index]
    }

    pub fn estimates(&self) -> &[ValueEstimate] {
        &self.estimates
    }

    pub fn td(&self) -> TdConfig {
        self.td
    }

    pub fn replace(&mut self, index: usize, estimate: ValueEstimate) -> Result<()> {
        check_len("value estimate", self.estimates[index].len(), estimate.len())?;
        self.estimates[index] = estimate.freeze();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalSelection {
    /// Position of the winner in the goal set.
    pub index: usize,
    /// Goal state of the winner.
    pub goal: usize,
    /// `U_g(s0)` for every candidate, in goal-set order.
    pub u_values: Vec<f64>,
    /// Scores actually maximized (equal to `u_values` under `MaxEpe`).
    pub scores: Vec<f64>,
    /// No candidate promises positive surprise.
    pub no_positive_surprise: bool,
}

fn surrogate_policy(
    mdp: &TabularMdp,
    goal_set: &GoalSet,
    index: usize,
    surrogate: SurrogateRule,
    previous: Option<usize>,
) -> Result<Policy> {
    let source = match (surrogate, previous) {
        (SurrogateRule::CurrentGoalPolicy, Some(prev)) => {
            check_index("previous goal", prev, goal_set.len())?;
            prev
        }
        _ => index,
    };
    Ok(value_iteration(mdp, &goal_set.reward(source), DEFAULT_TOLERANCE)?.policy)
}

/// `argmax_g U_g(s0)` with ties going to the lowest goal index.
pub fn select_goal(
    mdp: &TabularMdp,
    goal_set: &GoalSet,
    bank: &EstimateBank,
    s0: usize,
    surrogate: SurrogateRule,
    previous: Option<usize>,
) -> Result<GoalSelection> {
    select_goal_with_rule(mdp, goal_set, bank, s0, surrogate, SelectionRule::MaxEpe, previous)
}

pub fn select_goal_with_rule(
    mdp: &TabularMdp,
    goal_set: &GoalSet,
    bank: &EstimateBank,
    s0: usize,
    surrogate: SurrogateRule,
    rule: SelectionRule,
    previous: Option<usize>,
) -> Result<GoalSelection> {
    if goal_set.is_empty() {
        return Err(Error::EmptyGoalSet);
    }
    check_len("goal set states", mdp.n_states(), goal_set.n_states)?;
    check_len("estimate bank", goal_set.len(), bank.estimates.len())?;
    check_index("start state", s0, mdp.n_states())?;

    let mut u_values = Vec::with_capacity(goal_set.len());
    let mut scores = Vec::with_capacity(goal_set.len());
    for index in 0..goal_set.len() {
        let policy = surrogate_policy(mdp, goal_set, index, surrogate, previous)?;
        let reward = goal_set.reward(index);
        let estimate = bank.estimate(index);
        let u = epe_telescoped(mdp, &policy, &reward, estimate)?
            .value(s0)
            .expect("exact results cover every state");
        let score = match rule {
            SelectionRule::MaxEpe => u,
            SelectionRule::Mixed(cfg) => {
                let v = policy_evaluation(mdp, &policy, &reward)?.get(s0);
                cfg.alpha() * v + (1.0 - cfg.alpha()) * u
            }
        };
        u_values.push(u);
        scores.push(score);
    }
    let mut index = 0;
    for (i, &x) in scores.iter().enumerate().skip(1) {
        if x > scores[index] {
            index = i;
        }
    }
    Ok(GoalSelection {
        index,
        goal: goal_set.goals[index],
        no_positive_surprise: u_values.iter().all(|&u| u <= 0.0),
        u_values,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdStep {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// TD error against the snapshot in force at this step.
    pub td_error: f64,
    /// Importance ratio `π_target(a|s) / π_behavior(a|s)`.
    pub rho: f64,
    pub snapshot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdOutcome {
    /// Learned estimate, frozen.
    pub estimate: ValueEstimate,
    pub steps: Vec<TdStep>,
    /// The snapshot used by each window, indexed by `TdStep::snapshot`.
    pub snapshots: Vec<Vec<f64>>,
    /// Worst per-episode gap between the recorded `Σ γ^k δ_k` and its
    /// telescoped value under the estimate at episode start. Zero when the
    /// estimate does not drift within an episode.
    pub identity_residual: f64,
}

/// TD(0) evaluation of `target` from experience generated by `behavior`.
///
/// Updates are `V̂(s) ← V̂(s) + η ρ δ` with `ρ` the per-step importance ratio
/// (1 when the two policies coincide). `δ` uses a snapshot of `V̂` refreshed
/// every `snapshot_period` steps.
#[allow(clippy::too_many_arguments)]
pub fn td_learn<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    target: &Policy,
    behavior: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
    start: usize,
    n_steps: usize,
    config: &TdConfig,
    rng: &mut R,
) -> Result<TdOutcome> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    config.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be at least 1"));
    }
    target.check_shape(ns, na)?;
    behavior.check_shape(ns, na)?;
    reward.check_states(ns)?;
    check_len("value estimate", ns, estimate.len())?;
    check_index("start state", start, ns)?;
    for s in 0..ns {
        for a in 0..na {
            if target.prob(s, a) > 0.0 && behavior.prob(s, a) == 0.0 {
                return Err(Error::NoCoverage { state: s, action: a });
            }
        }
    }

    let gamma = mdp.discount();
    let eta = config.learning_rate;
    let mut live = estimate.values().to_vec();
    let mut snapshots: Vec<Vec<f64>> = Vec::new();
    let mut steps = Vec::with_capacity(n_steps);

    let mut identity_residual = 0.0_f64;
    let mut episode = EpisodeTally::new(&live, start);
    let mut s = start;
    for t in 0..n_steps {
        if let Some(len) = config.episode_length {
            if t > 0 && t % len == 0 {
                identity_residual = identity_residual.max(episode.residual(s));
                s = start;
                episode = EpisodeTally::new(&live, start);
            }
        }
        if t % config.snapshot_period == 0 {
            snapshots.push(live.clone());
        }
        let snap = snapshots.last().expect("snapshot taken at t = 0");
        let a = behavior.sample_action(s, rng)?;
        let next = mdp.sample_transition(s, a, rng)?;
        let r = reward.get(s);
        let delta = r + gamma * snap[next] - snap[s];
        let rho = target.prob(s, a) / behavior.prob(s, a);
        live[s] += eta * rho * delta;
        episode.push(r, delta, gamma);
        episode.end_estimate_state = next;
        steps.push(TdStep {
            state: s,
            action: a,
            reward: r,
            next_state: next,
            td_error: delta,
            rho,
            snapshot: snapshots.len() - 1,
        });
        s = next;
    }
    identity_residual = identity_residual.max(episode.residual(s));

    Ok(TdOutcome {
        estimate: ValueEstimate::frozen(live)?,
        steps,
        snapshots,
        identity_residual,
    })
}

/// Running sums for one episode's telescoping check.
struct EpisodeTally {
    start_values: Vec<f64>,
    start_state: usize,
    end_estimate_state: usize,
    weight: f64,
    ret: f64,
    td_sum: f64,
}

impl EpisodeTally {
    fn new(values: &[f64], start_state: usize) -> Self {
        Self {
            start_values: values.to_vec(),
            start_state,
            end_estimate_state: start_state,
            weight: 1.0,
            ret: 0.0,
            td_sum: 0.0,
        }
    }

    fn push(&mut self, reward: f64, delta: f64, gamma: f64) {
        self.ret += self.weight * reward;
        self.td_sum += self.weight * delta;
        self.weight *= gamma;
    }

    fn residual(&self, final_state: usize) -> f64 {
        debug_assert_eq!(final_state, self.end_estimate_state);
        let telescoped =
            self.ret - self.start_values[self.start_state] + self.weight * self.start_values[final_state];
        (self.td_sum - telescoped).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub epochs: usize,
    /// TD steps per epoch; 0 selects goals without learning.
    pub steps_per_epoch: usize,
    pub surrogate: SurrogateRule,
    pub selection: SelectionRule,
    pub td: TdConfig,
    /// Exploration around the EPE-optimal policy during learning.
    pub epsilon: f64,
    /// Initial `V̂_g(s)` for every goal and state.
    pub initial_value: f64,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            steps_per_epoch: 200,
            surrogate: SurrogateRule::OraclePolicy,
            selection: SelectionRule::MaxEpe,
            td: TdConfig::default(),
            epsilon: 0.1,
            initial_value: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopRecord {
    pub epoch: usize,
    pub selected_index: usize,
    pub selected_goal: usize,
    /// Pre-learning `U_g(s0)` for every goal.
    pub u_values: Vec<f64>,
    /// Selected goal's `U(s0)` recomputed after this epoch's learning.
    pub u_after: f64,
    /// Greedy policy pursued during the epoch.
    pub policy: Vec<usize>,
    pub td_updates: usize,
    pub identity_residual: f64,
    pub no_positive_surprise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopLog {
    pub goals: Vec<usize>,
    pub records: Vec<LoopRecord>,
}

/// Runs the goal-selection / learning alternation from `s0`.
pub fn open_ended_loop(mdp: &TabularMdp, goal_set: &GoalSet, s0: usize, config: &LoopConfig) -> Result<LoopLog> {
    let bank = EstimateBank::new(goal_set, config.initial_value, config.td)?;
    open_ended_loop_from(mdp, goal_set, bank, s0, config).map(|(log, _)| log)
}

/// As [`open_ended_loop`], starting from a given bank and returning the final one.
pub fn open_ended_loop_from(
    mdp: &TabularMdp,
    goal_set: &GoalSet,
    mut bank: EstimateBank,
    s0: usize,
    config: &LoopConfig,
) -> Result<(LoopLog, EstimateBank)> {
    if !(0.0..=1.0).contains(&config.epsilon) {
        return Err(Error::invalid("epsilon", format!("{} outside [0, 1]", config.epsilon)));
    }
    bank.td = config.td;
    config.td.validate()?;
    check_index("start state", s0, mdp.n_states())?;

    let mut records = Vec::with_capacity(config.epochs);
    let mut previous = None;
    for epoch in 0..config.epochs {
        let pick = select_goal_with_rule(mdp, goal_set, &bank, s0, config.surrogate, config.selection, previous)?;
        let reward = goal_set.reward(pick.index);
        let (target, _) = epe_optimal_policy(mdp, &reward, bank.estimate(pick.index))?;

        let (td_updates, identity_residual) = if config.steps_per_epoch > 0 {
            let behavior = target.epsilon_greedy(config.epsilon)?;
            let mut rng = stream_rng(config.seed, epoch as u64);
            let out = td_learn(
                mdp,
                &target,
                &behavior,
                &reward,
                bank.estimate(pick.index),
                s0,
                config.steps_per_epoch,
                &config.td,
                &mut rng,
            )?;
            bank.replace(pick.index, out.estimate)?;
            (out.steps.len(), out.identity_residual)
        } else {
            (0, 0.0)
        };

        let after = select_goal_with_rule(mdp, goal_set, &bank, s0, config.surrogate, config.selection, previous)?;
        records.push(LoopRecord {
            epoch,
            selected_index: pick.index,
            selected_goal: pick.goal,
            u_values: pick.u_values,
            u_after: after.u_values[pick.index],
            policy: target.actions().expect("value iteration returns a deterministic policy"),
            td_updates,
            identity_residual,
            no_positive_surprise: pick.no_positive_surprise,
        });
        previous = Some(pick.index);
    }
    Ok((
        LoopLog {
            goals: goal_set.goals.clone(),
            records,
        },
        bank,
    ))
}

impl LoopLog {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["epoch".to_string(), "selected_goal".to_string()];
        h.extend(self.goals.iter().map(|g| format!("u_goal_{g}")));
        h.push("identity_residual".into());
        h.push("no_positive_surprise".into());
        h
    }

    /// CSV with one row per epoch.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let io_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(self.header()).map_err(io_err)?;
        for r in &self.records {
            let mut row = vec![r.epoch.to_string(), r.selected_goal.to_string()];
            row.extend(r.u_values.iter().map(f64::to_string));
            row.push(r.identity_residual.to_string());
            row.push(r.no_positive_surprise.to_string());
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// `U(s0)` of goal position `index` across epochs.
    pub fn u_series(&self, index: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.u_values[index]).collect()
    }
}
