//! Tabular reinforcement-learning engine built around expected prediction
//! error (EPE): the discounted sum of signed TD errors an agent expects to
//! experience under its own frozen value estimate.
//!
//! The crate covers
//! - the world model ([`mdp`], [`reward`], [`policy`], [`rollout`]),
//! - exact dynamic programming used as ground truth ([`solver`]),
//! - EPE in series, telescoped and Monte Carlo form ([`epe`]),
//! - goal selection and the open-ended learning loop ([`goal_loop`]),
//! - advantage estimation and a tabular softmax policy gradient ([`gae`]),
//! - executable behavioral scenarios with config and CSV I/O ([`scenarios`]).

pub mod error;
pub mod mdp;
pub mod reward;
pub mod policy;
pub mod rollout;
pub mod solver;
pub mod epe;
pub mod fixtures;
pub mod goal_loop;
pub mod gae;
pub mod config;
pub mod batteries;
pub mod scenarios;

pub use error::{Error, Result};
pub use epe::{EpeMethod, EpeResult, MixedObjectiveConfig, ValueEstimate};
pub use gae::{GaeConfig, PsiChoice, SoftmaxPolicyParams};
pub use scenarios::{run_scenario, ScenarioConfig, ScenarioId, ScenarioReport};
pub use goal_loop::{GoalSet, LoopConfig, LoopLog, SelectionRule, SurrogateRule, TdConfig};
pub use mdp::{build_mdp, MdpSpec, TabularMdp};
pub use policy::Policy;
pub use reward::{RewardKind, RewardModel};
pub use rollout::{Trajectory, TransitionRecord};
pub use solver::{AdvantageTable, QTable, ValueTable};
