//! Tabular world model: states, actions, a transition tensor and a discount.
//!
//! States and actions are dense integer indices. Every `(s, a)` row of the
//! transition tensor is a probability simplex and the discount lies in
//! `[0, 1)`, so there are no absorbing "done" flags: episodes end only by
//! horizon truncation.

use rand::Rng;

use crate::error::{check_index, Error, Result};

/// Row sums further than this from 1 are rejected; closer ones are renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Flattened `[s][a][s']`.
    transitions: Vec<f64>,
    discount: f64,
}

/// One sparse row of a transition description: `T(. | state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub state: usize,
    pub action: usize,
    pub next: Vec<(usize, f64)>,
}

/// Structured, unvalidated description of an MDP.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub rows: Vec<TransitionRow>,
    /// Optional human-readable state labels; never used for identity.
    pub state_labels: Vec<String>,
}

impl MdpSpec {
    pub fn new(n_states: usize, n_actions: usize, discount: f64) -> Self {
        Self {
            n_states,
            n_actions,
            discount,
            rows: Vec::new(),
            state_labels: Vec::new(),
        }
    }

    /// Appends a row; chainable.
    pub fn row(mut self, state: usize, action: usize, next: &[(usize, f64)]) -> Self {
        self.rows.push(TransitionRow {
            state,
            action,
            next: next.to_vec(),
        });
        self
    }

    /// Appends a deterministic row `state --action--> next`.
    pub fn edge(self, state: usize, action: usize, next: usize) -> Self {
        self.row(state, action, &[(next, 1.0)])
    }

    pub fn build(&self) -> Result<TabularMdp> {
        build_mdp(self)
    }
}

/// Validates a structured description and produces a [`TabularMdp`].
pub fn build_mdp(spec: &MdpSpec) -> Result<TabularMdp> {
    let (ns, na) = (spec.n_states, spec.n_actions);
    if ns == 0 {
        return Err(Error::invalid("n_states", "must be positive"));
    }
    if na == 0 {
        return Err(Error::invalid("n_actions", "must be positive"));
    }
    check_discount(spec.discount)?;

    let mut transitions = vec![0.0; ns * na * ns];
    let mut seen = vec![false; ns * na];
    for row in &spec.rows {
        check_index("state", row.state, ns)?;
        check_index("action", row.action, na)?;
        let slot = row.state * na + row.action;
        if seen[slot] {
            return Err(Error::DuplicateRow {
                state: row.state,
                action: row.action,
            });
        }
        seen[slot] = true;
        let dst = &mut transitions[slot * ns..(slot + 1) * ns];
        for &(next, p) in &row.next {
            check_index("next state", next, ns)?;
            if !p.is_finite() || p < 0.0 {
                return Err(Error::BadProbability {
                    state: row.state,
                    action: row.action,
                    value: p,
                });
            }
            dst[next] += p;
        }
    }
    if let Some(slot) = seen.iter().position(|&s| !s) {
        return Err(Error::MissingRow {
            state: slot / na,
            action: slot % na,
        });
    }
    TabularMdp::from_dense(ns, na, spec.discount, transitions)
}

fn check_discount(discount: f64) -> Result<()> {
    if (0.0..1.0).contains(&discount) {
        Ok(())
    } else {
        Err(Error::BadDiscount(discount))
    }
}

impl TabularMdp {
    /// Builds from a dense `[s][a][s']` tensor, renormalizing rows within
    /// [`ROW_SUM_TOLERANCE`] of 1.
    pub fn from_dense(
        n_states: usize,
        n_actions: usize,
        discount: f64,
        mut transitions: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("shape", "state and action counts must be positive"));
        }
        check_discount(discount)?;
        crate::error::check_len("transition tensor", n_states * n_actions * n_states, transitions.len())?;
        for (slot, row) in transitions.chunks_mut(n_states).enumerate() {
            let (state, action) = (slot / n_actions, slot % n_actions);
            if let Some(&value) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::BadProbability {
                    state,
                    action,
                    value,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NonStochasticRow { state, action, sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            discount,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same dynamics under a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        check_discount(discount)?;
        Ok(Self {
            discount,
            ..self.clone()
        })
    }

    /// `T(. | s, a)` as a dense slice over next states.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    /// `Σ_{s'} T(s'|s,a) f(s')`.
    pub fn expect(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        self.row(s, a).iter().zip(f).map(|(p, v)| p * v).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.transitions.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Draws `s' ~ T(. | s, a)`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        check_index("state", s, self.n_states)?;
        check_index("action", a, self.n_actions)?;
        Ok(sample_categorical(self.row(s, a), rng))
    }
}

/// Inverse-CDF draw from a probability vector.
///
/// Point masses consume no randomness, so deterministic rows leave the
/// generator untouched.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut last = 0;
    let mut support = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
            support += 1;
        }
    }
    if support == 1 {
        return last;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated mass
    last
}
