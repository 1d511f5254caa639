//! Ground-truth dynamic programming: exact policy evaluation, value
//! iteration, Q-values, advantages and brute-force policy enumeration.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::reward::RewardModel;

/// Above this many states policy evaluation switches from a dense LU solve
/// to fixed-point iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

/// Default sup-norm Bellman residual for value iteration.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Largest number of deterministic policies the enumerator will produce.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

const FIXED_POINT_TOLERANCE: f64 = 1e-12;
const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("value table"));
        }
        Ok(Self { values })
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

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Per-`(s, a)` table, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl ActionTable {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_a π(a|s) x(s, a)` for every state.
    pub fn policy_weighted(&self, policy: &Policy) -> Result<Vec<f64>> {
        policy.check_shape(self.n_states, self.n_actions)?;
        Ok((0..self.n_states)
            .map(|s| self.row(s).iter().zip(policy.row(s)).map(|(x, p)| p * x).sum())
            .collect())
    }

    /// `max_a x(s, a)` for every state.
    pub fn row_max(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// `Q(s, a) = R(s) + γ Σ_{s'} T(s'|s,a) V(s')`.
pub type QTable = ActionTable;

/// `A(s, a) = Q(s, a) − V(s)`.
pub type AdvantageTable = ActionTable;

/// Row-major `P_π[s][s'] = Σ_a π(a|s) T(s'|s,a)`.
pub fn policy_transition_matrix(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    policy.check_shape(ns, mdp.n_actions())?;
    let mut p = vec![0.0; ns * ns];
    for s in 0..ns {
        let out = &mut p[s * ns..(s + 1) * ns];
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (dst, &t) in out.iter_mut().zip(mdp.row(s, a)) {
                *dst += pa * t;
            }
        }
    }
    Ok(p)
}

/// Sup-norm residual of `x = rhs + γ P_π x`.
pub fn discounted_residual(mdp: &TabularMdp, policy: &Policy, rhs: &[f64], x: &[f64]) -> Result<f64> {
    let ns = mdp.n_states();
    check_len("right-hand side", ns, rhs.len())?;
    check_len("solution", ns, x.len())?;
    let p = policy_transition_matrix(mdp, policy)?;
    Ok(residual_dense(&p, mdp.discount(), rhs, x))
}

fn residual_dense(p: &[f64], gamma: f64, rhs: &[f64], x: &[f64]) -> f64 {
    let ns = rhs.len();
    (0..ns)
        .map(|s| {
            let px: f64 = p[s * ns..(s + 1) * ns].iter().zip(x).map(|(a, b)| a * b).sum();
            (rhs[s] + gamma * px - x[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves `x = rhs + γ P_π x`, the discounted sum of `rhs` along `π`.
///
/// Both value evaluation (`rhs = R`) and the expected-TD-error series
/// (`rhs = E_π[δ|s]`) go through here.
pub fn solve_discounted(mdp: &TabularMdp, policy: &Policy, rhs: &[f64]) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    check_len("right-hand side", ns, rhs.len())?;
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    if ns <= DIRECT_SOLVE_LIMIT {
        solve_direct(mdp, policy, rhs)
    } else {
        solve_fixed_point(mdp, policy, rhs)
    }
}

/// Dense LU solve of `(I − γ P_π) x = rhs` with iterative refinement.
pub fn solve_direct(mdp: &TabularMdp, policy: &Policy, rhs: &[f64]) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    check_len("right-hand side", ns, rhs.len())?;
    let p = policy_transition_matrix(mdp, policy)?;
    let gamma = mdp.discount();
    let a = DMatrix::from_fn(ns, ns, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - gamma * p[i * ns + j]
    });
    let lu = a.clone().lu();
    let b = DVector::from_column_slice(rhs);
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::SingularSystem("I - γP is singular".into()))?;
    for _ in 0..MAX_REFINEMENTS {
        let r = &b - &a * &x;
        if r.amax() <= f64::EPSILON * (1.0 + x.amax()) {
            break;
        }
        match lu.solve(&r) {
            Some(d) => x += d,
            None => break,
        }
    }
    let x: Vec<f64> = x.iter().copied().collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok(x)
}

/// Fixed-point iteration `x ← rhs + γ P_π x` over a sparse transition
/// matrix, stopped at a sup-norm residual of 1e-12.
pub fn solve_fixed_point(mdp: &TabularMdp, policy: &Policy, rhs: &[f64]) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    check_len("right-hand side", ns, rhs.len())?;
    policy.check_shape(ns, mdp.n_actions())?;
    let gamma = mdp.discount();
    let mut sparse: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ns];
    for (s, row) in sparse.iter_mut().enumerate() {
        let mut dense = vec![0.0; ns];
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa > 0.0 {
                for (d, &t) in dense.iter_mut().zip(mdp.row(s, a)) {
                    *d += pa * t;
                }
            }
        }
        row.extend(dense.into_iter().enumerate().filter(|(_, p)| *p != 0.0));
    }
    let scale = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_sweeps = if gamma == 0.0 {
        2
    } else {
        ((FIXED_POINT_TOLERANCE / scale.max(FIXED_POINT_TOLERANCE)).ln() / gamma.ln()).ceil() as usize + 64
    };
    let mut x = rhs.to_vec();
    let mut next = vec![0.0; ns];
    for _ in 0..max_sweeps {
        let mut residual = 0.0_f64;
        for s in 0..ns {
            let px: f64 = sparse[s].iter().map(|&(j, p)| p * x[j]).sum();
            next[s] = rhs[s] + gamma * px;
            residual = residual.max((next[s] - x[s]).abs());
        }
        std::mem::swap(&mut x, &mut next);
        if residual <= FIXED_POINT_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::SingularSystem("fixed-point iteration did not converge".into()))
}

/// Exact `V^π` solving `V = R + γ P_π V`.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &Policy, reward: &RewardModel) -> Result<ValueTable> {
    reward.check_states(mdp.n_states())?;
    ValueTable::new(solve_discounted(mdp, policy, &reward.to_vec())?)
}

/// Sup-norm residual of the Bellman expectation equation for `v` under `π`.
pub fn bellman_residual(mdp: &TabularMdp, policy: &Policy, reward: &RewardModel, v: &[f64]) -> Result<f64> {
    reward.check_states(mdp.n_states())?;
    discounted_residual(mdp, policy, &reward.to_vec(), v)
}

pub fn q_from_v(mdp: &TabularMdp, reward: &RewardModel, v: &ValueTable) -> Result<QTable> {
    q_from_slice(mdp, reward, v.values())
}

pub(crate) fn q_from_slice(mdp: &TabularMdp, reward: &RewardModel, v: &[f64]) -> Result<QTable> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    reward.check_states(ns)?;
    check_len("value table", ns, v.len())?;
    let gamma = mdp.discount();
    let mut values = Vec::with_capacity(ns * na);
    for s in 0..ns {
        let r = reward.get(s);
        for a in 0..na {
            values.push(r + gamma * mdp.expect(s, a, v));
        }
    }
    Ok(ActionTable {
        n_states: ns,
        n_actions: na,
        values,
    })
}

pub fn advantage(q: &QTable, v: &ValueTable) -> Result<AdvantageTable> {
    check_len("value table", q.n_states, v.len())?;
    let values = (0..q.n_states)
        .flat_map(|s| q.row(s).iter().map(move |x| x - v.get(s)))
        .collect();
    Ok(ActionTable {
        n_states: q.n_states,
        n_actions: q.n_actions,
        values,
    })
}

/// `A^π` for a policy, via exact evaluation.
pub fn policy_advantage(mdp: &TabularMdp, policy: &Policy, reward: &RewardModel) -> Result<AdvantageTable> {
    let v = policy_evaluation(mdp, policy, reward)?;
    advantage(&q_from_v(mdp, reward, &v)?, &v)
}

/// Deterministic greedy policy; among near-equal actions the lowest index wins.
pub fn greedy_policy(q: &QTable) -> Policy {
    let actions: Vec<usize> = (0..q.n_states)
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for (a, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] + 1e-12 * row[best].abs().max(1.0) {
                    best = a;
                }
            }
            best
        })
        .collect();
    Policy::deterministic(&actions, q.n_actions).expect("greedy actions are in range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub values: ValueTable,
    pub policy: Policy,
    /// Number of Bellman optimality backups applied.
    pub iterations: usize,
    /// `‖T* V − V‖∞` of the returned values.
    pub residual: f64,
    /// Successive sup-norm differences `‖V_{k+1} − V_k‖∞`.
    pub deltas: Vec<f64>,
}

/// Upper bound on the number of backups [`value_iteration`] needs.
pub fn value_iteration_bound(discount: f64, r_max: f64, tol: f64) -> f64 {
    if r_max == 0.0 || discount == 0.0 {
        return 1.0;
    }
    (tol * (1.0 - discount) / r_max).ln() / discount.ln() + 1.0
}

/// Optimal values and a greedy deterministic policy, starting from `V ≡ 0`.
pub fn value_iteration(mdp: &TabularMdp, reward: &RewardModel, tol: f64) -> Result<ValueIteration> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol", format!("{tol} must be positive")));
    }
    reward.check_states(mdp.n_states())?;
    let gamma = mdp.discount();
    let mut v = vec![0.0; mdp.n_states()];
    let mut deltas = Vec::new();
    loop {
        let next = q_from_slice(mdp, reward, &v)?.row_max();
        let diff = sup_diff(&next, &v);
        deltas.push(diff);
        v = next;
        // ‖T V_{k+1} − V_{k+1}‖ ≤ γ ‖V_{k+1} − V_k‖
        if gamma * diff <= tol {
            break;
        }
    }
    let q = q_from_slice(mdp, reward, &v)?;
    let residual = sup_diff(&q.row_max(), &v);
    Ok(ValueIteration {
        policy: greedy_policy(&q),
        iterations: deltas.len(),
        values: ValueTable::new(v)?,
        residual,
        deltas,
    })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Lazily yields every deterministic policy of an MDP exactly once, in
/// mixed-radix order with state 0 as the fastest digit.
#[derive(Debug, Clone)]
pub struct DeterministicPolicies {
    n_actions: usize,
    digits: Vec<usize>,
    remaining: u64,
}

impl Iterator for DeterministicPolicies {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let policy = Policy::deterministic(&self.digits, self.n_actions).expect("digits are in range");
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.n_actions {
                break;
            }
            *d = 0;
        }
        Some(policy)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for DeterministicPolicies {}

/// Number of deterministic policies, `|A|^|S|`, failing past [`ENUMERATION_LIMIT`].
pub fn deterministic_policy_count(mdp: &TabularMdp) -> Result<u64> {
    let count = (mdp.n_actions() as u128).checked_pow(mdp.n_states() as u32);
    match count {
        Some(c) if c <= ENUMERATION_LIMIT as u128 => Ok(c as u64),
        other => Err(Error::TooLargeToEnumerate {
            count: other.unwrap_or(u128::MAX),
            limit: ENUMERATION_LIMIT,
        }),
    }
}

pub fn enumerate_deterministic_policies(mdp: &TabularMdp) -> Result<DeterministicPolicies> {
    let remaining = deterministic_policy_count(mdp)?;
    Ok(DeterministicPolicies {
        n_actions: mdp.n_actions(),
        digits: vec![0; mdp.n_states()],
        remaining,
    })
}
