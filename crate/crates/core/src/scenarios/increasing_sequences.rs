use crate::config::Section;
use crate::epe::{epe_telescoped, expected_td_error, ValueEstimate};
use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, TabularMdp};
use crate::policy::Policy;
use crate::reward::RewardModel;

use super::{parse_choice, range_error, ScenarioId, ScenarioReport, SIGN_TOLERANCE};

/// Common estimate shared by both branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateVariant {
    /// Constant at the mean per-step reward of the sequence.
    Mean,
    Zero,
    /// `V̂(s) = R(s) / (1 − γ)`, the value of repeating the current reward.
    Adaptive,
}

impl EstimateVariant {
    pub const ALL: [EstimateVariant; 3] = [EstimateVariant::Mean, EstimateVariant::Zero, EstimateVariant::Adaptive];

    /// Numeric code used in report rows.
    pub fn code(&self) -> f64 {
        match self {
            EstimateVariant::Mean => 0.0,
            EstimateVariant::Zero => 1.0,
            EstimateVariant::Adaptive => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceParams {
    /// Discounts to sweep; the expectation reads the first.
    pub discounts: Vec<f64>,
    pub increasing: Vec<f64>,
    pub decreasing: Vec<f64>,
    pub estimate: EstimateVariant,
}

impl Default for SequenceParams {
    fn default() -> Self {
        Self {
            discounts: vec![0.9, 0.01],
            increasing: vec![0.0, 0.0, 1.0],
            decreasing: vec![1.0, 0.0, 0.0],
            estimate: EstimateVariant::Mean,
        }
    }
}

impl SequenceParams {
    pub const KEYS: &'static [&'static str] = &["discounts", "increasing", "decreasing", "estimate"];

    pub(crate) fn from_section(sec: &Section) -> Result<Self> {
        let d = Self::default();
        let increasing = sec.parse_list("increasing")?.unwrap_or(d.increasing);
        let decreasing = match sec.parse_list("decreasing")? {
            Some(v) => v,
            None => increasing.iter().rev().copied().collect(),
        };
        let p = Self {
            discounts: sec.parse_list("discounts")?.unwrap_or(d.discounts),
            increasing,
            decreasing,
            estimate: parse_choice(
                sec,
                "estimate",
                d.estimate,
                &[
                    ("mean", EstimateVariant::Mean),
                    ("zero", EstimateVariant::Zero),
                    ("adaptive", EstimateVariant::Adaptive),
                ],
            )?,
        };
        p.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => range_error(sec, name, &reason),
            other => Error::config(sec.line, other.to_string()),
        })?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.discounts.is_empty() || self.discounts.iter().any(|g| !(0.0..1.0).contains(g)) {
            return Err(Error::invalid("discounts", "needs at least one value in [0, 1)"));
        }
        if self.increasing.is_empty() || self.increasing.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("increasing", "needs at least one finite reward"));
        }
        let mut a = self.increasing.clone();
        let mut b = self.decreasing.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        if a != b {
            return Err(Error::invalid("decreasing", "must reorder the increasing sequence"));
        }
        Ok(())
    }
}

/// State layout of the two-branch world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceLayout {
    pub start: usize,
    pub entry_a: usize,
    pub entry_b: usize,
    pub terminal: usize,
}

/// A zero-reward start whose action 0 enters branch A and action 1 branch B.
/// Each branch emits its rewards one per step, then both end in a shared
/// absorbing zero-reward state.
pub fn sequence_fixture(
    branch_a: &[f64],
    branch_b: &[f64],
    discount: f64,
) -> Result<(TabularMdp, RewardModel, SequenceLayout)> {
    if branch_a.is_empty() || branch_b.is_empty() {
        return Err(Error::invalid("branch", "needs at least one reward"));
    }
    let entry_a = 1;
    let entry_b = entry_a + branch_a.len();
    let terminal = entry_b + branch_b.len();
    let n = terminal + 1;
    let mut spec = MdpSpec::new(n, 2, discount).edge(0, 0, entry_a).edge(0, 1, entry_b);
    for (entry, len) in [(entry_a, branch_a.len()), (entry_b, branch_b.len())] {
        for k in 0..len {
            let next = if k + 1 < len { entry + k + 1 } else { terminal };
            spec = spec.edge(entry + k, 0, next).edge(entry + k, 1, next);
        }
    }
    spec = spec.edge(terminal, 0, terminal).edge(terminal, 1, terminal);
    let mut rewards = vec![0.0; n];
    rewards[entry_a..entry_b].copy_from_slice(branch_a);
    rewards[entry_b..terminal].copy_from_slice(branch_b);
    Ok((
        spec.build()?,
        RewardModel::table(rewards)?,
        SequenceLayout {
            start: 0,
            entry_a,
            entry_b,
            terminal,
        },
    ))
}

fn estimate_for(variant: EstimateVariant, reward: &RewardModel, discount: f64, mean: f64) -> Result<ValueEstimate> {
    let n = reward.n_states();
    match variant {
        EstimateVariant::Mean => Ok(ValueEstimate::constant(n, mean)),
        EstimateVariant::Zero => Ok(ValueEstimate::zeros(n)),
        EstimateVariant::Adaptive => {
            ValueEstimate::frozen(reward.to_vec().iter().map(|r| r / (1.0 - discount)).collect())
        }
    }
}

/// Metrics for one (discount, estimate) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BranchComparison {
    pub u_a_start: f64,
    pub u_b_start: f64,
    pub u_a_entry: f64,
    pub u_b_entry: f64,
    pub first_step_td_gap: f64,
}

pub(crate) fn compare(a: &[f64], b: &[f64], discount: f64, variant: EstimateVariant, mean: f64) -> Result<BranchComparison> {
    let (mdp, reward, layout) = sequence_fixture(a, b, discount)?;
    let est = estimate_for(variant, &reward, discount, mean)?;
    let n = mdp.n_states();
    let take_a = Policy::deterministic(&vec![0; n], 2)?;
    let take_b = Policy::deterministic(&vec![1; n], 2)?;
    let u_a = epe_telescoped(&mdp, &take_a, &reward, &est)?;
    let u_b = epe_telescoped(&mdp, &take_b, &reward, &est)?;
    let d = expected_td_error(&mdp, &take_a, &reward, &est)?;
    Ok(BranchComparison {
        u_a_start: u_a.values()[layout.start],
        u_b_start: u_b.values()[layout.start],
        u_a_entry: u_a.values()[layout.entry_a],
        u_b_entry: u_b.values()[layout.entry_b],
        first_step_td_gap: d[layout.entry_a] - d[layout.entry_b],
    })
}

pub(super) fn run(p: &SequenceParams) -> Result<ScenarioReport> {
    p.validate()?;
    let mean = p.increasing.iter().sum::<f64>() / p.increasing.len() as f64;
    let mut rows = Vec::new();
    let mut verdict = None;
    for (i, &gamma) in p.discounts.iter().enumerate() {
        for variant in EstimateVariant::ALL {
            let c = compare(&p.increasing, &p.decreasing, gamma, variant, mean)?;
            let same = compare(&p.increasing, &p.increasing, gamma, variant, mean)?;
            let gap_start = c.u_a_start - c.u_b_start;
            let identical_gap = same.u_a_start - same.u_b_start;
            rows.push(vec![
                gamma,
                variant.code(),
                c.u_a_start,
                c.u_b_start,
                gap_start,
                c.u_a_entry,
                c.u_b_entry,
                c.u_a_entry - c.u_b_entry,
                c.first_step_td_gap,
                identical_gap,
            ]);
            if i == 0 && variant == p.estimate {
                verdict = Some(gap_start > SIGN_TOLERANCE && identical_gap.abs() <= SIGN_TOLERANCE);
            }
        }
    }
    Ok(ScenarioReport::new(
        ScenarioId::IncreasingSequences,
        &[
            "discount",
            "estimate_variant",
            "u_increasing_start",
            "u_decreasing_start",
            "gap_start",
            "u_increasing_entry",
            "u_decreasing_entry",
            "gap_entry",
            "first_step_td_gap",
            "identical_gap",
        ],
        rows,
        "exact U from dense policy evaluation of each branch under a shared estimate",
    )?
    .expect(
        "U(increasing) - U(decreasing) > 0 at the common start, and 0 for identical branches",
        verdict.expect("configured variant is swept"),
    ))
}
