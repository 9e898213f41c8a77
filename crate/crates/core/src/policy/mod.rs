//! Step-driven bandit policies.
//!
//! Every policy answers [`Policy::select_arm`] without mutating itself and
//! advances only through [`Policy::observe`]. Memory is reported in 64-bit
//! words by [`Policy::state_words`], measured from the struct layout plus any
//! heap buffers the policy owns.

mod const_space;
mod doubling;
mod ucb1;

pub use const_space::{ConstSpaceUcb, Phase};
pub use doubling::{DoublingAnytime, INITIAL_SUB_HORIZON};
pub use ucb1::Ucb1;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Confidence, ScheduleKind};

/// Bytes in one machine word of the word-RAM accounting.
pub const WORD_BYTES: usize = 8;

/// Zero-based arm index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub usize);

impl std::fmt::Display for ArmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Whether the policy is told the horizon up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    Known(u64),
    Unknown,
}

/// How an arm's scan ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmOutcome {
    /// Pulled for the full round budget.
    Completed,
    /// Stopped early: its upper confidence value fell below the previous
    /// round's lower reference.
    RuledOut,
}

/// Running estimate of the arm just pulled, for the harness's confidence checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Pulls of this arm in the current round, including this one.
    pub pulls: u64,
    pub mean: f64,
    pub delta: f64,
}

/// Registers of a round at the moment it ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    /// Restart index of the doubling wrapper; 0 for known-horizon runs.
    pub level: u64,
    pub round: u64,
    pub precision: f64,
    pub prev_precision: f64,
    pub budget: u64,
    pub delta: f64,
    pub best: ArmId,
    pub best_mean: f64,
    pub second: ArmId,
    pub second_mean: f64,
    /// Best arm and mean of the previous round; `None` in round 1.
    pub prev_best: Option<ArmId>,
    pub prev_mean: Option<f64>,
    /// Arms not ruled out during the round.
    pub survivors: u64,
    /// Stopping criterion `mean_a - g/2 > mean_b + g/2` held.
    pub separated: bool,
    /// The horizon was reached by the end of the round.
    pub horizon_reached: bool,
}

/// Everything that happened during one `observe` call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub arm: ArmId,
    pub estimate: Option<Estimate>,
    pub arm_outcome: Option<ArmOutcome>,
    pub round: Option<RoundSummary>,
    pub committed: Option<ArmId>,
    /// The horizon ran out mid-scan and the policy stopped exploring.
    pub frozen: bool,
    /// A doubling restart began after this step, at the given level.
    pub level_started: Option<u64>,
}

/// Coarse classification of a [`StepReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Continue,
    RuledOut,
    ArmDone,
    RoundDone,
    Committed,
}

impl StepReport {
    pub(crate) fn pulled(arm: ArmId) -> Self {
        Self {
            arm,
            estimate: None,
            arm_outcome: None,
            round: None,
            committed: None,
            frozen: false,
            level_started: None,
        }
    }

    /// The most significant event of the step.
    pub fn transition(&self) -> Transition {
        if self.committed.is_some() {
            Transition::Committed
        } else if self.round.is_some() {
            Transition::RoundDone
        } else {
            match self.arm_outcome {
                Some(ArmOutcome::RuledOut) => Transition::RuledOut,
                Some(ArmOutcome::Completed) => Transition::ArmDone,
                None => Transition::Continue,
            }
        }
    }
}

pub trait Policy {
    fn k(&self) -> usize;

    fn select_arm(&self) -> ArmId;

    /// Feeds the reward of the arm returned by `select_arm`.
    fn observe(&mut self, reward: f64) -> Result<StepReport>;

    /// Machine words retained between steps.
    fn state_words(&self) -> usize;

    /// Steps consumed so far.
    fn steps(&self) -> u64;

    /// Arm being exploited, once the policy has committed.
    fn committed_arm(&self) -> Option<ArmId> {
        None
    }
}

pub(crate) fn check_reward(reward: f64) -> Result<()> {
    if (0.0..=1.0).contains(&reward) {
        Ok(())
    } else {
        Err(Error::RewardOutOfRange(reward))
    }
}

pub(crate) fn words_of<T>() -> usize {
    std::mem::size_of::<T>().div_ceil(WORD_BYTES)
}

/// Policy choice and tuning, independent of K and T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// Round-based constant-space UCB with a known horizon. `delta`
    /// overrides the default `1/T^3`.
    ConstSpace {
        schedule: ScheduleKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    /// Constant-space UCB restarted on horizons `10, 10^2, 10^4, ...`.
    Doubling { schedule: ScheduleKind },
    /// Index policy with per-arm statistics.
    Ucb1,
}

impl PolicyConfig {
    pub fn const_space(schedule: ScheduleKind) -> Self {
        Self::ConstSpace {
            schedule,
            delta: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ConstSpace { .. } => "const_space",
            Self::Doubling { .. } => "doubling",
            Self::Ucb1 => "ucb1",
        }
    }

    pub fn schedule(&self) -> Option<ScheduleKind> {
        match *self {
            Self::ConstSpace { schedule, .. } | Self::Doubling { schedule } => Some(schedule),
            Self::Ucb1 => None,
        }
    }

    pub fn schedule_label(&self) -> String {
        self.schedule()
            .map_or_else(|| "none".to_string(), ScheduleKind::label)
    }

    /// Fresh policy for `k` arms run for `horizon` steps. Doubling and UCB1
    /// ignore the horizon.
    pub fn build(&self, k: usize, horizon: u64) -> Result<AnyPolicy> {
        match *self {
            Self::ConstSpace { schedule, delta } => {
                let delta = match delta {
                    Some(d) => Confidence::new(d)?,
                    None => Confidence::for_horizon(horizon),
                };
                ConstSpaceUcb::new(k, horizon, delta, schedule).map(AnyPolicy::ConstSpace)
            }
            Self::Doubling { schedule } => {
                DoublingAnytime::new(k, schedule).map(AnyPolicy::Doubling)
            }
            Self::Ucb1 => Ucb1::new(k).map(AnyPolicy::Ucb1),
        }
    }
}

/// Fresh policy state. An unknown horizon wraps the constant-space policy
/// in the doubling restart scheme.
pub fn policy_reset(k: usize, horizon: Horizon, config: &PolicyConfig) -> Result<AnyPolicy> {
    match (horizon, config) {
        (Horizon::Known(t), cfg) => cfg.build(k, t),
        (Horizon::Unknown, PolicyConfig::ConstSpace { schedule, .. })
        | (Horizon::Unknown, PolicyConfig::Doubling { schedule }) => {
            DoublingAnytime::new(k, *schedule).map(AnyPolicy::Doubling)
        }
        (Horizon::Unknown, PolicyConfig::Ucb1) => Ucb1::new(k).map(AnyPolicy::Ucb1),
    }
}

/// Static dispatch over the policies in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyPolicy {
    ConstSpace(ConstSpaceUcb),
    Doubling(DoublingAnytime),
    Ucb1(Ucb1),
}

impl AnyPolicy {
    /// The constant-space state currently scanning, if the policy has one.
    pub fn const_space_state(&self) -> Option<&ConstSpaceUcb> {
        match self {
            Self::ConstSpace(p) => Some(p),
            Self::Doubling(p) => Some(p.inner()),
            Self::Ucb1(_) => None,
        }
    }

    /// Current restart level and its horizon, for the doubling wrapper.
    pub fn level(&self) -> Option<(u64, u64)> {
        match self {
            Self::Doubling(p) => Some((p.level(), p.sub_horizon())),
            _ => None,
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            AnyPolicy::ConstSpace($p) => $e,
            AnyPolicy::Doubling($p) => $e,
            AnyPolicy::Ucb1($p) => $e,
        }
    };
}

impl Policy for AnyPolicy {
    fn k(&self) -> usize {
        dispatch!(self, p => p.k())
    }

    fn select_arm(&self) -> ArmId {
        dispatch!(self, p => p.select_arm())
    }

    fn observe(&mut self, reward: f64) -> Result<StepReport> {
        dispatch!(self, p => p.observe(reward))
    }

    fn state_words(&self) -> usize {
        dispatch!(self, p => p.state_words())
    }

    fn steps(&self) -> u64 {
        dispatch!(self, p => p.steps())
    }

    fn committed_arm(&self) -> Option<ArmId> {
        dispatch!(self, p => p.committed_arm())
    }
}
