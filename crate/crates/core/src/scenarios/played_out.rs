use crate::config::{MdpDocument, Section};
use crate::error::{check_index, Error, Result};
use crate::goal_loop::{open_ended_loop, GoalSet, LoopConfig, TdConfig};

use super::{range_error, ScenarioId, ScenarioReport, World};

/// One goal in a world, learned by the open-ended loop until it is played out.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayedOutParams {
    pub world: World,
    pub start: usize,
    pub goal: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub episode_length: usize,
    pub learning_rate: f64,
    pub snapshot_period: usize,
    pub epsilon: f64,
    pub initial_value: f64,
    /// Final `U` must fall to this fraction of the initial `U`.
    pub threshold: f64,
    /// Slack allowed when checking that `U` never rises.
    pub monotone_slack: f64,
}

impl Default for PlayedOutParams {
    fn default() -> Self {
        Self {
            world: World::Corridor {
                length: 5,
                discount: 0.9,
            },
            start: 0,
            goal: 4,
            epochs: 60,
            steps_per_epoch: 200,
            episode_length: 20,
            learning_rate: 0.1,
            snapshot_period: 5,
            epsilon: 0.1,
            initial_value: 0.0,
            threshold: 0.05,
            monotone_slack: 1e-9,
        }
    }
}

impl PlayedOutParams {
    pub const KEYS: &'static [&'static str] = &[
        "corridor_length",
        "discount",
        "start",
        "goal",
        "epochs",
        "steps_per_epoch",
        "episode_length",
        "learning_rate",
        "snapshot_period",
        "epsilon",
        "initial_value",
        "threshold",
        "monotone_slack",
    ];

    pub(crate) fn from_section(sec: &Section, mdp: Option<MdpDocument>) -> Result<Self> {
        let d = Self::default();
        let goal_from_reward = mdp.as_ref().and_then(|m| m.reward.as_ref()).and_then(|r| r.goal());
        let p = Self {
            world: World::from_section(sec, mdp, d.world)?,
            start: sec.parse_or("start", d.start)?,
            goal: match sec.parse("goal")? {
                Some(g) => g,
                None => goal_from_reward.unwrap_or(d.goal),
            },
            epochs: sec.parse_or("epochs", d.epochs)?,
            steps_per_epoch: sec.parse_or("steps_per_epoch", d.steps_per_epoch)?,
            episode_length: sec.parse_or("episode_length", d.episode_length)?,
            learning_rate: sec.parse_or("learning_rate", d.learning_rate)?,
            snapshot_period: sec.parse_or("snapshot_period", d.snapshot_period)?,
            epsilon: sec.parse_or("epsilon", d.epsilon)?,
            initial_value: sec.parse_or("initial_value", d.initial_value)?,
            threshold: sec.parse_or("threshold", d.threshold)?,
            monotone_slack: sec.parse_or("monotone_slack", d.monotone_slack)?,
        };
        p.validate().map_err(|e| match e {
            Error::IndexOutOfRange { what, .. } => range_error(sec, what, "is outside the state space"),
            Error::InvalidParameter { name, reason } => range_error(sec, name, &reason),
            other => Error::config(sec.line, other.to_string()),
        })?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.world.n_states();
        check_index("start", self.start, n)?;
        check_index("goal", self.goal, n)?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.episode_length == 0 {
            return Err(Error::invalid("episode_length", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
        }
        if !self.initial_value.is_finite() {
            return Err(Error::invalid("initial_value", "must be finite"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid("threshold", "must lie in (0, 1]"));
        }
        if !(self.monotone_slack.is_finite() && self.monotone_slack >= 0.0) {
            return Err(Error::invalid("monotone_slack", "must be non-negative"));
        }
        self.td().validate()
    }

    fn td(&self) -> TdConfig {
        TdConfig {
            learning_rate: self.learning_rate,
            snapshot_period: self.snapshot_period,
            episode_length: Some(self.episode_length),
        }
    }
}

pub(super) fn run(p: &PlayedOutParams, seed: u64) -> Result<ScenarioReport> {
    p.validate()?;
    let mdp = p.world.build()?;
    let goals = GoalSet::new(vec![p.goal], mdp.n_states())?;
    let config = LoopConfig {
        epochs: p.epochs,
        steps_per_epoch: p.steps_per_epoch,
        td: p.td(),
        epsilon: p.epsilon,
        initial_value: p.initial_value,
        seed,
        ..LoopConfig::default()
    };
    let log = open_ended_loop(&mdp, &goals, p.start, &config)?;

    let rows: Vec<Vec<f64>> = log
        .records
        .iter()
        .map(|r| {
            vec![
                r.epoch as f64,
                r.selected_goal as f64,
                r.u_values[0],
                r.u_after,
                r.td_updates as f64,
                r.identity_residual,
            ]
        })
        .collect();

    let initial = log.records[0].u_values[0];
    let mut series: Vec<f64> = log.records.iter().map(|r| r.u_values[0]).collect();
    series.push(log.records.last().expect("epochs >= 1").u_after);
    let monotone = series.windows(2).all(|w| w[1] <= w[0] + p.monotone_slack);
    let drained = *series.last().expect("non-empty") <= p.threshold * initial;

    Ok(ScenarioReport::new(
        ScenarioId::PlayedOut,
        &["epoch", "selected_goal", "u", "u_after", "td_updates", "identity_residual"],
        rows,
        "exact U(s0) per epoch from dense policy evaluation of the EPE-optimal policy",
    )?
    .expect("final U <= threshold * initial U, and U never rises", monotone && drained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epe::{epe_telescoped, mixed_objective, MixedObjectiveConfig, ValueEstimate};
    use crate::fixtures;
    use crate::policy::Policy;
    use crate::reward::RewardModel;
    use crate::solver::{policy_evaluation, value_iteration, DEFAULT_TOLERANCE};

    #[test]
    fn default_run_drains() {
        let report = run(&PlayedOutParams::default(), 0).unwrap();
        assert!(report.passed, "{:?}", report.column("u_after"));
        assert_eq!(report.rows.len(), 60);
        let u = report.column("u").unwrap();
        assert!((u[0] - 0.9f64.powi(4) / 0.1).abs() < 1e-9);
    }

    #[test]
    fn no_learning_keeps_u() {
        let p = PlayedOutParams {
            epochs: 1,
            steps_per_epoch: 0,
            ..PlayedOutParams::default()
        };
        let report = run(&p, 0).unwrap();
        assert_eq!(report.column("u").unwrap(), report.column("u_after").unwrap());
        assert!(!report.passed);
    }

    #[test]
    fn value_agent_loiters_where_epe_agent_is_indifferent() {
        // after mastery V̂ = V*, so every policy's U at the goal is V^π − V*
        let mdp = fixtures::corridor(5, 0.9).unwrap();
        let reward = RewardModel::goal_indicator(5, 4).unwrap();
        let v_star = value_iteration(&mdp, &reward, DEFAULT_TOLERANCE).unwrap().values;
        let est = ValueEstimate::frozen(v_star.values().to_vec()).unwrap();
        let stay = Policy::deterministic(&[fixtures::STAY; 5], 3).unwrap();
        let leave = Policy::deterministic(&[fixtures::LEFT; 5], 3).unwrap();

        let value = MixedObjectiveConfig::new(1.0).unwrap();
        let v_stay = policy_evaluation(&mdp, &stay, &reward).unwrap();
        let v_leave = policy_evaluation(&mdp, &leave, &reward).unwrap();
        let stay_score = mixed_objective(&v_stay, &est, value).unwrap()[4];
        let leave_score = mixed_objective(&v_leave, &est, value).unwrap()[4];
        assert!(stay_score > leave_score);
        assert!((stay_score - 10.0).abs() < 1e-8);

        let u_stay = epe_telescoped(&mdp, &stay, &reward, &est).unwrap().values()[4];
        assert!(u_stay.abs() < 1e-8);
    }

    #[test]
    fn config_keys() {
        let sec_text = "[scenario]\nid = played_out\nseed = 1\ngoal = 9\n";
        let err = crate::scenarios::ScenarioConfig::parse(sec_text).unwrap_err();
        assert!(matches!(err, Error::Config { line: 4, .. }), "{err:?}");
        let ok = crate::scenarios::ScenarioConfig::parse("[scenario]\nid = played_out\nseed = 1\nepochs = 3\n").unwrap();
        match ok.params {
            crate::scenarios::ScenarioParams::PlayedOut(p) => assert_eq!(p.epochs, 3),
            _ => panic!(),
        }
        let bad = "[scenario]\nid = played_out\nseed = 1\nlearning_rate = 0.5\n";
        assert!(matches!(
            crate::scenarios::ScenarioConfig::parse(bad),
            Err(Error::Config { .. })
        ));
    }
}
