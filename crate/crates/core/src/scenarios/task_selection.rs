use crate::config::{MdpDocument, Section};
use crate::epe::{MixedObjectiveConfig, ValueEstimate};
use crate::error::{check_index, Error, Result};
use crate::goal_loop::{select_goal_with_rule, EstimateBank, GoalSet, SelectionRule, SurrogateRule, TdConfig};
use crate::solver::{policy_evaluation, value_iteration, DEFAULT_TOLERANCE};

use super::{range_error, ScenarioId, ScenarioReport, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalStatus {
    /// `V̂ = V*`.
    Mastered,
    /// `V̂ = 0`.
    Fresh,
    /// `V̂ = V* + optimism_bias`.
    Overestimated,
}

impl GoalStatus {
    pub fn code(&self) -> f64 {
        match self {
            GoalStatus::Mastered => 0.0,
            GoalStatus::Fresh => 1.0,
            GoalStatus::Overestimated => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSelectionParams {
    pub world: World,
    pub start: usize,
    pub goals: Vec<usize>,
    pub mastered: Vec<usize>,
    pub overestimated: Vec<usize>,
    pub optimism_bias: f64,
    /// Mixed-objective weight; `None` ranks by EPE alone.
    pub alpha: Option<f64>,
}

impl Default for TaskSelectionParams {
    fn default() -> Self {
        Self {
            world: World::Corridor {
                length: 7,
                discount: 0.9,
            },
            start: 0,
            goals: vec![1, 2, 3, 4, 5, 6],
            mastered: vec![1, 2],
            overestimated: vec![5, 6],
            optimism_bias: 0.5,
            alpha: None,
        }
    }
}

impl TaskSelectionParams {
    pub const KEYS: &'static [&'static str] = &[
        "corridor_length",
        "discount",
        "start",
        "goals",
        "mastered",
        "overestimated",
        "optimism_bias",
        "alpha",
    ];

    pub(crate) fn from_section(sec: &Section, mdp: Option<MdpDocument>) -> Result<Self> {
        let d = Self::default();
        let custom = mdp.is_some();
        let world = World::from_section(sec, mdp, d.world)?;
        let goals = match sec.parse_list("goals")? {
            Some(g) => g,
            None if custom => (0..world.n_states()).collect(),
            None => d.goals,
        };
        let p = Self {
            world,
            start: sec.parse_or("start", d.start)?,
            goals,
            mastered: sec.parse_list("mastered")?.unwrap_or(if custom { Vec::new() } else { d.mastered }),
            overestimated: sec
                .parse_list("overestimated")?
                .unwrap_or(if custom { Vec::new() } else { d.overestimated }),
            optimism_bias: sec.parse_or("optimism_bias", d.optimism_bias)?,
            alpha: sec.parse("alpha")?,
        };
        p.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => range_error(sec, name, &reason),
            Error::IndexOutOfRange { what, .. } => range_error(sec, what, "is outside the state space"),
            Error::DuplicateGoal(g) => range_error(sec, "goals", &format!("lists goal {g} twice")),
            Error::EmptyGoalSet => range_error(sec, "goals", "must not be empty"),
            other => Error::config(sec.line, other.to_string()),
        })?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.world.n_states();
        check_index("start", self.start, n)?;
        GoalSet::new(self.goals.clone(), n)?;
        for (key, list) in [("mastered", &self.mastered), ("overestimated", &self.overestimated)] {
            if let Some(g) = list.iter().find(|g| !self.goals.contains(g)) {
                return Err(Error::invalid(key, format!("goal {g} is not in the goal set")));
            }
        }
        if let Some(g) = self.mastered.iter().find(|g| self.overestimated.contains(g)) {
            return Err(Error::invalid("overestimated", format!("goal {g} is also listed as mastered")));
        }
        if !(self.optimism_bias.is_finite() && self.optimism_bias > 0.0) {
            return Err(Error::invalid("optimism_bias", "must be positive"));
        }
        if let Some(a) = self.alpha {
            MixedObjectiveConfig::new(a).map_err(|_| Error::invalid("alpha", "must lie in [0, 1]"))?;
        }
        Ok(())
    }

    pub fn status(&self, goal: usize) -> GoalStatus {
        if self.mastered.contains(&goal) {
            GoalStatus::Mastered
        } else if self.overestimated.contains(&goal) {
            GoalStatus::Overestimated
        } else {
            GoalStatus::Fresh
        }
    }
}

pub(super) fn run(p: &TaskSelectionParams) -> Result<ScenarioReport> {
    p.validate()?;
    let mdp = p.world.build()?;
    let set = GoalSet::new(p.goals.clone(), mdp.n_states())?;
    let estimates = (0..set.len())
        .map(|i| {
            let goal = set.goals()[i];
            // evaluated along the same path as the selection step, so mastery gives U = 0 exactly
            let v_star = || {
                let reward = set.reward(i);
                let vi = value_iteration(&mdp, &reward, DEFAULT_TOLERANCE)?;
                policy_evaluation(&mdp, &vi.policy, &reward)
            };
            match p.status(goal) {
                GoalStatus::Fresh => Ok(ValueEstimate::zeros(mdp.n_states())),
                GoalStatus::Mastered => ValueEstimate::frozen(v_star()?.into_vec()),
                GoalStatus::Overestimated => ValueEstimate::biased(&v_star()?, p.optimism_bias),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = EstimateBank::from_estimates(&set, estimates, TdConfig::default())?;
    let rule = match p.alpha {
        Some(a) => SelectionRule::Mixed(MixedObjectiveConfig::new(a)?),
        None => SelectionRule::MaxEpe,
    };
    let pick = select_goal_with_rule(&mdp, &set, &bank, p.start, SurrogateRule::OraclePolicy, rule, None)?;

    let rows = set
        .goals()
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            vec![
                g as f64,
                p.status(g).code(),
                pick.u_values[i],
                pick.scores[i],
                if i == pick.index { 1.0 } else { 0.0 },
                if pick.no_positive_surprise { 1.0 } else { 0.0 },
            ]
        })
        .collect();

    let any_fresh = p.goals.iter().any(|&g| p.status(g) == GoalStatus::Fresh);
    let passed = if any_fresh {
        p.status(pick.goal) == GoalStatus::Fresh
    } else {
        pick.index == 0 && pick.no_positive_surprise
    };
    Ok(ScenarioReport::new(
        ScenarioId::TaskSelection,
        &["goal", "status", "u", "score", "selected", "no_positive_surprise"],
        rows,
        "exact U(s0) per goal from dense policy evaluation of each goal's optimal policy",
    )?
    .expect(
        "a fresh goal is selected when one exists; otherwise the first goal with no positive surprise",
        passed,
    ))
}
