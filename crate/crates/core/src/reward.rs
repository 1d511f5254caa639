use crate::error::{check_index, Error, Result};

/// State-only reward function.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    /// `R(s) = 1` at the goal state and 0 elsewhere.
    GoalIndicator { goal: usize },
    /// Arbitrary finite per-state rewards.
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    n_states: usize,
    kind: RewardKind,
}

impl RewardModel {
    pub fn goal_indicator(n_states: usize, goal: usize) -> Result<Self> {
        check_index("goal", goal, n_states)?;
        Ok(Self {
            n_states,
            kind: RewardKind::GoalIndicator { goal },
        })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("reward table", "must cover at least one state"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward table"));
        }
        Ok(Self {
            n_states: values.len(),
            kind: RewardKind::Table(values),
        })
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn goal(&self) -> Option<usize> {
        match self.kind {
            RewardKind::GoalIndicator { goal } => Some(goal),
            RewardKind::Table(_) => None,
        }
    }

    pub fn reward_at(&self, s: usize) -> Result<f64> {
        check_index("state", s, self.n_states)?;
        Ok(self.get(s))
    }

    /// Unchecked lookup for hot loops; callers validate dimensions up front.
    pub(crate) fn get(&self, s: usize) -> f64 {
        match &self.kind {
            RewardKind::GoalIndicator { goal } => {
                if s == *goal {
                    1.0
                } else {
                    0.0
                }
            }
            RewardKind::Table(values) => values[s],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.n_states).map(|s| self.get(s)).collect()
    }

    /// `max_s |R(s)|`.
    pub fn max_abs(&self) -> f64 {
        match &self.kind {
            RewardKind::GoalIndicator { .. } => 1.0,
            RewardKind::Table(values) => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub(crate) fn check_states(&self, n_states: usize) -> Result<()> {
        crate::error::check_len("reward model", n_states, self.n_states)
    }
}
