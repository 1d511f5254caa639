//! Generalized advantage estimation and a tabular softmax policy gradient.

use std::io;

use rand::Rng;

use crate::epe::{RunningStats, ValueEstimate};
use crate::error::{check_index, check_len, Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::reward::RewardModel;
use crate::rollout::{horizon_for, rollout, Trajectory};
use crate::solver::{policy_advantage, AdvantageTable, DIRECT_SOLVE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeConfig {
    lambda: f64,
    gamma: f64,
}

impl GaeConfig {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid("lambda", format!("{lambda} outside [0, 1]")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::BadDiscount(gamma));
        }
        Ok(Self { lambda, gamma })
    }

    /// Uses the trajectory's own discount.
    pub fn for_trajectory(traj: &Trajectory, lambda: f64) -> Result<Self> {
        Self::new(lambda, traj.discount)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `Â_t = Σ_{k=0}^{T−t−1} (γλ)^k δ_{t+k}`, truncated at the end of the
/// trajectory without a bootstrap tail.
pub fn gae_estimate(traj: &Trajectory, config: GaeConfig) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let decay = config.gamma * config.lambda;
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for (t, rec) in traj.steps.iter().enumerate().rev() {
        acc = if decay == 0.0 { rec.td_error } else { rec.td_error + decay * acc };
        out[t] = acc;
    }
    Ok(out)
}

/// Discounted reward-to-go `Σ_{k≥t} γ^{k−t} r_k` for every step.
pub fn rewards_to_go(traj: &Trajectory) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for (t, rec) in traj.steps.iter().enumerate().rev() {
        acc = rec.reward + traj.discount * acc;
        out[t] = acc;
    }
    out
}

/// Softmax policy with one logit per (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicyParams {
    n_states: usize,
    n_actions: usize,
    logits: Vec<f64>,
}

impl SoftmaxPolicyParams {
    pub fn new(n_states: usize, n_actions: usize, logits: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("policy shape", "needs at least one state and one action"));
        }
        check_len("logits", n_states * n_actions, logits.len())?;
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(Self {
            n_states,
            n_actions,
            logits,
        })
    }

    /// All-zero logits, the uniform policy.
    pub fn zeros(n_states: usize, n_actions: usize) -> Result<Self> {
        Self::new(n_states, n_actions, vec![0.0; n_states * n_actions])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logit(&self, s: usize, a: usize) -> f64 {
        self.logits[s * self.n_actions + a]
    }

    pub fn probs(&self, s: usize) -> Vec<f64> {
        let row = &self.logits[s * self.n_actions..(s + 1) * self.n_actions];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.iter().map(|e| e / sum).collect()
    }

    pub fn policy(&self) -> Policy {
        let probs = (0..self.n_states).flat_map(|s| self.probs(s)).collect();
        Policy::from_probs(self.n_states, self.n_actions, probs).expect("softmax rows are simplexes")
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        let row = &self.logits[s * self.n_actions..(s + 1) * self.n_actions];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row[a] - lse
    }

    /// `∂ log π(a|s) / ∂θ(s, b) = 1[b = a] − π(b|s)`; logits of other states
    /// have zero gradient.
    pub fn log_prob_gradient(&self, s: usize, a: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs(s).iter().map(|p| -p).collect();
        g[a] += 1.0;
        g
    }

    /// FNV-1a hash of the shape and logit bits.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0100_0000_01b3;
        let words = [self.n_states as u64, self.n_actions as u64]
            .into_iter()
            .chain(self.logits.iter().map(|x| x.to_bits()));
        let mut h = OFFSET;
        for w in words {
            for byte in w.to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(PRIME);
            }
        }
        h
    }
}

/// Source of the per-step weight `Ψ_t` in the policy gradient.
#[derive(Debug, Clone, Copy)]
pub enum PsiChoice<'a> {
    /// `A^π(s_t, a_t)` from an exact table.
    ExactAdvantage(&'a AdvantageTable),
    /// GAE with the given `λ` over the trajectory's recorded TD errors.
    Gae { lambda: f64 },
    /// Discounted reward-to-go.
    MonteCarloReturn,
}

impl PsiChoice<'_> {
    fn weights(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        match *self {
            PsiChoice::ExactAdvantage(table) => traj
                .steps
                .iter()
                .map(|r| {
                    check_index("state", r.state, table.n_states())?;
                    check_index("action", r.action, table.n_actions())?;
                    Ok(table.get(r.state, r.action))
                })
                .collect(),
            PsiChoice::Gae { lambda } => gae_estimate(traj, GaeConfig::for_trajectory(traj, lambda)?),
            PsiChoice::MonteCarloReturn => Ok(rewards_to_go(traj)),
        }
    }
}

/// Rolls out `n` trajectories under `params`, each stamped with its fingerprint.
#[allow(clippy::too_many_arguments)]
pub fn sample_trajectories<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    params: &SoftmaxPolicyParams,
    reward: &RewardModel,
    estimate: &ValueEstimate,
    s0: usize,
    horizon: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let policy = params.policy();
    let fp = params.fingerprint();
    (0..n)
        .map(|_| Ok(rollout(mdp, &policy, reward, estimate, s0, horizon, rng)?.with_fingerprint(fp)))
        .collect()
}

/// `θ ← θ + step_size · (1/N) Σ_traj Σ_t Ψ_t ∇_θ log π_θ(a_t|s_t)`.
pub fn policy_gradient_step(
    params: &SoftmaxPolicyParams,
    trajs: &[Trajectory],
    psi: PsiChoice<'_>,
    step_size: f64,
) -> Result<SoftmaxPolicyParams> {
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::invalid("step_size", format!("{step_size} must be positive")));
    }
    if trajs.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let fp = params.fingerprint();
    let na = params.n_actions;
    let mut grad = vec![0.0; params.logits.len()];
    for traj in trajs {
        if traj.policy_fingerprint != Some(fp) {
            return Err(Error::MismatchedPolicy);
        }
        let weights = psi.weights(traj)?;
        for (rec, w) in traj.steps.iter().zip(weights) {
            check_index("state", rec.state, params.n_states)?;
            check_index("action", rec.action, na)?;
            if w == 0.0 {
                continue;
            }
            let g = params.log_prob_gradient(rec.state, rec.action);
            for (b, gb) in g.iter().enumerate() {
                grad[rec.state * na + b] += w * gb;
            }
        }
    }
    let scale = step_size / trajs.len() as f64;
    let logits = params.logits.iter().zip(&grad).map(|(t, g)| t + scale * g).collect();
    SoftmaxPolicyParams::new(params.n_states, na, logits)
}

/// One row of the bias/variance probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeProbeRow {
    pub lambda: f64,
    pub action: usize,
    /// `mean(Â₀ | a₀) − mean(Â₀) − A^π(s0, a0)`.
    pub bias: f64,
    /// `mean(Â₀ | a₀) − A^π(s0, a0)`, which also carries `V^π(s0) − V̂(s0)`.
    pub raw_bias: f64,
    /// Sample variance of `Â₀` given `a₀`.
    pub variance: f64,
    /// Standard error of `bias`.
    pub stderr: f64,
    pub count: usize,
}

/// Compares first-step GAE estimates with the exact advantage at `s0`.
///
/// Every `λ` is scored on the same rollouts. The reported `bias` centers
/// `Â₀` by its on-policy mean, which removes the constant `V^π(s0) − V̂(s0)`
/// that any state baseline other than `V^π` adds to every action alike.
/// Actions sampled fewer than twice are omitted.
#[allow(clippy::too_many_arguments)]
pub fn gae_bias_variance_probe<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    reward: &RewardModel,
    estimate: &ValueEstimate,
    s0: usize,
    lambdas: &[f64],
    n_rollouts: usize,
    rng: &mut R,
) -> Result<Vec<GaeProbeRow>> {
    if mdp.n_states() > DIRECT_SOLVE_LIMIT {
        return Err(Error::TooLargeToEnumerate {
            count: mdp.n_states() as u128,
            limit: DIRECT_SOLVE_LIMIT as u64,
        });
    }
    if n_rollouts == 0 {
        return Err(Error::invalid("n_rollouts", "must be at least 1"));
    }
    let configs = lambdas
        .iter()
        .map(|&l| GaeConfig::new(l, mdp.discount()))
        .collect::<Result<Vec<_>>>()?;
    let exact = policy_advantage(mdp, policy, reward)?;
    let horizon = horizon_for(mdp, reward, estimate);
    let na = mdp.n_actions();

    // stats[λ][a]
    let mut stats = vec![vec![RunningStats::default(); na]; configs.len()];
    for _ in 0..n_rollouts {
        let traj = rollout(mdp, policy, reward, estimate, s0, horizon, rng)?;
        let a0 = traj.steps[0].action;
        for (i, cfg) in configs.iter().enumerate() {
            stats[i][a0].push(gae_estimate(&traj, *cfg)?[0]);
        }
    }

    let n = n_rollouts as f64;
    let mut rows = Vec::new();
    for (cfg, per_action) in configs.iter().zip(&stats) {
        let overall: f64 = per_action.iter().map(|st| st.count() as f64 * st.mean()).sum::<f64>() / n;
        for (a, st) in per_action.iter().enumerate() {
            if st.count() < 2 {
                continue;
            }
            let p_a = st.count() as f64 / n;
            let mut var = (1.0 - p_a).powi(2) * st.variance() / st.count() as f64;
            for (b, other) in per_action.iter().enumerate() {
                if b != a && other.count() > 1 {
                    let p_b = other.count() as f64 / n;
                    var += p_b * p_b * other.variance() / other.count() as f64;
                }
            }
            let advantage = exact.get(s0, a);
            rows.push(GaeProbeRow {
                lambda: cfg.lambda,
                action: a,
                bias: st.mean() - overall - advantage,
                raw_bias: st.mean() - advantage,
                variance: st.variance(),
                stderr: var.sqrt(),
                count: st.count(),
            });
        }
    }
    Ok(rows)
}

/// CSV with columns `lambda, action, bias, variance, stderr`.
pub fn write_probe_csv<W: io::Write>(rows: &[GaeProbeRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["lambda", "action", "bias", "variance", "stderr"]).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.action.to_string(),
            r.bias.to_string(),
            r.variance.to_string(),
            r.stderr.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}
