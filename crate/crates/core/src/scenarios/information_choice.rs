use crate::config::Section;
use crate::epe::{epe_telescoped, expected_td_error, ValueEstimate};
use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, TabularMdp};
use crate::policy::Policy;
use crate::reward::RewardModel;
use crate::solver::{value_iteration, DEFAULT_TOLERANCE};

use super::{parse_choice, range_error, ScenarioId, ScenarioReport, SIGN_TOLERANCE};

/// Where the estimate bias is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasPattern {
    /// `V̂ = V + b` everywhere.
    Uniform,
    /// `V̂ = V + b` only where the outcome is still uncertain.
    Unresolved,
}

impl BiasPattern {
    pub fn code(&self) -> f64 {
        match self {
            BiasPattern::Uniform => 0.0,
            BiasPattern::Unresolved => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoChoiceParams {
    pub discount: f64,
    /// Signed bias; the report also evaluates its negation.
    pub bias: f64,
    pub bias_pattern: BiasPattern,
    /// Reward of the sure arm; the random arms pay it half the time.
    pub reward: f64,
}

impl Default for InfoChoiceParams {
    fn default() -> Self {
        Self {
            discount: 0.9,
            bias: -0.2,
            bias_pattern: BiasPattern::Uniform,
            reward: 1.0,
        }
    }
}

impl InfoChoiceParams {
    pub const KEYS: &'static [&'static str] = &["discount", "bias", "bias_pattern", "reward"];

    pub(crate) fn from_section(sec: &Section) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            discount: sec.parse_or("discount", d.discount)?,
            bias: sec.parse_or("bias", d.bias)?,
            bias_pattern: parse_choice(
                sec,
                "bias_pattern",
                d.bias_pattern,
                &[("uniform", BiasPattern::Uniform), ("unresolved", BiasPattern::Unresolved)],
            )?,
            reward: sec.parse_or("reward", d.reward)?,
        };
        p.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => range_error(sec, name, &reason),
            other => Error::config(sec.line, other.to_string()),
        })?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::invalid("discount", "must lie in [0, 1)"));
        }
        if !self.bias.is_finite() || self.bias == 0.0 {
            return Err(Error::invalid("bias", "must be finite and nonzero"));
        }
        if !(self.reward.is_finite() && self.reward > 0.0) {
            return Err(Error::invalid("reward", "must be positive"));
        }
        Ok(())
    }
}

/// Choice state with three arms of equal length.
///
/// - sure: entry, cue, reward.
/// - informative: entry, then a 50/50 cue that predicts the outcome.
/// - uninformative: entry, then a 50/50 cue unrelated to the 50/50 outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationFixture {
    pub mdp: TabularMdp,
    pub reward: RewardModel,
    pub choice: usize,
    /// Entry states of the sure, informative and uninformative arms.
    pub entries: [usize; 3],
    /// States at which the eventual reward is still uncertain.
    pub unresolved: Vec<usize>,
}

pub const SURE: usize = 0;
pub const INFORMATIVE: usize = 1;
pub const UNINFORMATIVE: usize = 2;

pub fn information_fixture(discount: f64, payoff: f64) -> Result<InformationFixture> {
    const T: usize = 14;
    let rows: &[(usize, &[(usize, f64)])] = &[
        // sure arm
        (1, &[(2, 1.0)]),
        (2, &[(3, 1.0)]),
        (3, &[(T, 1.0)]),
        // informative arm: green 5 leads to reward 7, red 6 to nothing 8
        (4, &[(5, 0.5), (6, 0.5)]),
        (5, &[(7, 1.0)]),
        (6, &[(8, 1.0)]),
        (7, &[(T, 1.0)]),
        (8, &[(T, 1.0)]),
        // uninformative arm: cues 10 and 11 each lead to reward 12 or nothing 13
        (9, &[(10, 0.5), (11, 0.5)]),
        (10, &[(12, 0.5), (13, 0.5)]),
        (11, &[(12, 0.5), (13, 0.5)]),
        (12, &[(T, 1.0)]),
        (13, &[(T, 1.0)]),
        (T, &[(T, 1.0)]),
    ];
    let entries = [1, 4, 9];
    let mut spec = MdpSpec::new(T + 1, 3, discount);
    for (a, &entry) in entries.iter().enumerate() {
        spec = spec.edge(0, a, entry);
    }
    for &(s, next) in rows {
        for a in 0..3 {
            spec = spec.row(s, a, next);
        }
    }
    let mut r = vec![0.0; T + 1];
    r[3] = payoff;
    r[7] = payoff;
    r[12] = payoff;
    Ok(InformationFixture {
        mdp: spec.build()?,
        reward: RewardModel::table(r)?,
        choice: 0,
        entries,
        unresolved: vec![4, 9, 10, 11],
    })
}

impl InformationFixture {
    pub fn arm_policy(&self, arm: usize) -> Policy {
        Policy::deterministic(&vec![arm; self.mdp.n_states()], 3).expect("arm is a valid action")
    }

    /// `V* + b` on the states selected by `pattern`.
    pub fn biased_estimate(&self, bias: f64, pattern: BiasPattern) -> Result<ValueEstimate> {
        let v = value_iteration(&self.mdp, &self.reward, DEFAULT_TOLERANCE * 1e-2)?.values;
        let values = v
            .values()
            .iter()
            .enumerate()
            .map(|(s, x)| match pattern {
                BiasPattern::Uniform => x + bias,
                BiasPattern::Unresolved if self.unresolved.contains(&s) => x + bias,
                BiasPattern::Unresolved => *x,
            })
            .collect();
        ValueEstimate::frozen(values)
    }
}

/// Per-arm `U` at the choice state and expected TD error on entering the arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ArmMetrics {
    pub u: [f64; 3],
    pub cue_pe: [f64; 3],
}

pub(crate) fn arm_metrics(fx: &InformationFixture, est: &ValueEstimate) -> Result<ArmMetrics> {
    let mut u = [0.0; 3];
    let mut cue_pe = [0.0; 3];
    for arm in 0..3 {
        let policy = fx.arm_policy(arm);
        u[arm] = epe_telescoped(&fx.mdp, &policy, &fx.reward, est)?.values()[fx.choice];
        cue_pe[arm] = expected_td_error(&fx.mdp, &policy, &fx.reward, est)?[fx.entries[arm]];
    }
    Ok(ArmMetrics { u, cue_pe })
}

pub(super) fn run(p: &InfoChoiceParams) -> Result<ScenarioReport> {
    p.validate()?;
    let fx = information_fixture(p.discount, p.reward)?;
    let mut rows = Vec::new();
    let mut gaps = (0.0, 0.0);
    for pattern in [BiasPattern::Uniform, BiasPattern::Unresolved] {
        for bias in [p.bias, -p.bias] {
            let m = arm_metrics(&fx, &fx.biased_estimate(bias, pattern)?)?;
            let u_gap = m.u[INFORMATIVE] - m.u[UNINFORMATIVE];
            let cue_gap = m.cue_pe[INFORMATIVE] - m.cue_pe[UNINFORMATIVE];
            rows.push(vec![
                pattern.code(),
                bias,
                m.u[SURE],
                m.u[INFORMATIVE],
                m.u[UNINFORMATIVE],
                u_gap,
                m.cue_pe[SURE],
                m.cue_pe[INFORMATIVE],
                m.cue_pe[UNINFORMATIVE],
                cue_gap,
            ]);
            if pattern == p.bias_pattern {
                if bias < 0.0 {
                    gaps.0 = u_gap;
                } else {
                    gaps.1 = u_gap;
                }
            }
        }
    }
    let (pessimistic, optimistic) = gaps;
    let passed = pessimistic > SIGN_TOLERANCE && (pessimistic + optimistic).abs() <= SIGN_TOLERANCE;
    Ok(ScenarioReport::new(
        ScenarioId::InformationChoice,
        &[
            "bias_pattern",
            "bias",
            "u_sure",
            "u_informative",
            "u_uninformative",
            "u_gap",
            "cue_pe_sure",
            "cue_pe_informative",
            "cue_pe_uninformative",
            "cue_pe_gap",
        ],
        rows,
        "exact U at the choice state from dense policy evaluation; V from value iteration",
    )?
    .expect(
        "pessimistic U(informative) > U(uninformative), and negating the bias negates the gap",
        passed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> InformationFixture {
        information_fixture(0.9, 1.0).unwrap()
    }

    #[test]
    fn random_arms_pay_half() {
        let fx = fixture();
        let v: Vec<f64> = (0..3)
            .map(|arm| {
                crate::solver::policy_evaluation(&fx.mdp, &fx.arm_policy(arm), &fx.reward)
                    .unwrap()
                    .get(fx.choice)
            })
            .collect();
        assert!((v[SURE] - 0.9f64.powi(3)).abs() < 1e-12);
        assert!((v[INFORMATIVE] - 0.5 * v[SURE]).abs() < 1e-12);
        assert!((v[UNINFORMATIVE] - 0.5 * v[SURE]).abs() < 1e-12);
    }

    #[test]
    fn perfect_estimate_zero_for_optimal_arm() {
        let fx = fixture();
        let m = arm_metrics(&fx, &fx.biased_estimate(0.0, BiasPattern::Uniform).unwrap()).unwrap();
        assert!(m.u[SURE].abs() < 1e-12);
        assert!((m.u[INFORMATIVE] - m.u[UNINFORMATIVE]).abs() < 1e-12);
    }

    #[test]
    fn uniform_bias_cannot_separate_the_random_arms() {
        let fx = fixture();
        for b in [-0.2, 0.2] {
            let m = arm_metrics(&fx, &fx.biased_estimate(b, BiasPattern::Uniform).unwrap()).unwrap();
            assert!((m.u[INFORMATIVE] - m.u[UNINFORMATIVE]).abs() <= SIGN_TOLERANCE);
        }
    }

    #[test]
    fn unresolved_bias_separates_the_cue_errors() {
        // informative −b against uninformative −b(1 − γ)
        let fx = fixture();
        let b = -0.2;
        let m = arm_metrics(&fx, &fx.biased_estimate(b, BiasPattern::Unresolved).unwrap()).unwrap();
        assert!((m.cue_pe[INFORMATIVE] + b).abs() < 1e-12);
        assert!((m.cue_pe[UNINFORMATIVE] + b * 0.1).abs() < 1e-12);
        let gap = m.cue_pe[INFORMATIVE] - m.cue_pe[UNINFORMATIVE];
        assert!((gap + 0.9 * b).abs() < 1e-12);
        let flipped = arm_metrics(&fx, &fx.biased_estimate(-b, BiasPattern::Unresolved).unwrap()).unwrap();
        let flipped_gap = flipped.cue_pe[INFORMATIVE] - flipped.cue_pe[UNINFORMATIVE];
        assert!((flipped_gap + gap).abs() < 1e-12);
    }

    #[test]
    fn default_expectation_fails_on_zero_gap() {
        let report = run(&InfoChoiceParams::default()).unwrap();
        assert!(!report.passed);
        assert_eq!(report.rows.len(), 4);
    }
}
