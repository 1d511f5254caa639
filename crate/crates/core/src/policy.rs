use rand::Rng;

use crate::error::{check_index, check_len, Error, Result};
use crate::mdp::sample_categorical;

/// Policy rows must sum to one within this tolerance.
pub const POLICY_ROW_TOLERANCE: f64 = 1e-12;

/// Stationary stochastic policy `π(a|s)`, one probability row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds from a flattened `[s][a]` matrix.
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("policy shape", "state and action counts must be positive"));
        }
        check_len("policy matrix", n_states * n_actions, probs.len())?;
        for (state, row) in probs.chunks(n_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > POLICY_ROW_TOLERANCE {
                return Err(Error::NonStochasticPolicy { state, sum });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::invalid("policy rows", "ragged rows"));
        }
        Self::from_probs(rows.len(), n_actions, rows.concat())
    }

    /// One action per state with probability 1.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            check_index("action", a, n_actions)?;
            probs[s * n_actions + a] = 1.0;
        }
        Self::from_probs(actions.len(), n_actions, probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Result<Self> {
        let p = 1.0 / n_actions as f64;
        let mut probs = vec![p; n_states * n_actions];
        // keep each row summing to exactly one
        for row in probs.chunks_mut(n_actions.max(1)) {
            let rest: f64 = row[1..].iter().sum();
            row[0] = 1.0 - rest;
        }
        Self::from_probs(n_states, n_actions, probs)
    }

    /// Mixes `self` with the uniform policy: `(1-ε)π + ε/|A|`.
    pub fn epsilon_greedy(&self, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("{epsilon} outside [0, 1]")));
        }
        let floor = epsilon / self.n_actions as f64;
        let mut probs: Vec<f64> = self.probs.iter().map(|p| (1.0 - epsilon) * p + floor).collect();
        for row in probs.chunks_mut(self.n_actions) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::from_probs(self.n_states, self.n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    /// The action chosen in `s` if every row is a point mass.
    pub fn action(&self, s: usize) -> Option<usize> {
        let row = self.row(s);
        row.iter().position(|&p| p == 1.0)
    }

    /// Per-state actions when the policy is deterministic.
    pub fn actions(&self) -> Option<Vec<usize>> {
        (0..self.n_states).map(|s| self.action(s)).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.actions().is_some()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<usize> {
        check_index("state", s, self.n_states)?;
        Ok(sample_categorical(self.row(s), rng))
    }

    pub(crate) fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        check_len("policy states", n_states, self.n_states)?;
        check_len("policy actions", n_actions, self.n_actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_must_be_simplexes() {
        assert!(Policy::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(matches!(
            Policy::from_rows(&[vec![0.5, 0.4]]),
            Err(Error::NonStochasticPolicy { state: 0, .. })
        ));
        assert!(Policy::from_rows(&[vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn deterministic_round_trip() {
        let p = Policy::deterministic(&[1, 0, 2], 3).unwrap();
        assert_eq!(p.actions(), Some(vec![1, 0, 2]));
        assert!(Policy::uniform(3, 3).unwrap().actions().is_none());
    }

    #[test]
    fn epsilon_greedy_mixes_uniformly() {
        let p = Policy::deterministic(&[0, 1], 2).unwrap().epsilon_greedy(0.1).unwrap();
        assert!((p.prob(0, 0) - 0.95).abs() < 1e-15);
        assert!((p.prob(0, 1) - 0.05).abs() < 1e-15);
        assert!(Policy::uniform(1, 2).unwrap().epsilon_greedy(1.5).is_err());
    }

    #[test]
    fn uniform_rows_are_exact() {
        let p = Policy::uniform(4, 3).unwrap();
        for s in 0..4 {
            let sum: f64 = p.row(s).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-15);
        }
    }
}
