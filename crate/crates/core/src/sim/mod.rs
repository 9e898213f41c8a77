//! Episode runner, regret accounting, lemma checks and suite aggregation.
//!
//! The harness owns everything the policies must not: true means, per-arm
//! tallies, the round log and the clean-event flag.

mod audit;
mod lemmas;
mod suite;

pub use audit::{memory_audit, AuditRow, MemoryAudit, AUDIT_STEPS};
pub use lemmas::{
    check_lemma_assertions, check_schedule_grid, grid_targets, LemmaOutcome, LemmaReport,
    LemmaTally, ScheduleCheck, GRID_EPSILONS, GRID_STARTS,
};
pub use suite::{
    run_suite, run_verification, CellFailure, InstanceEntry, RegretReport, SuiteOutcome, SuiteSpec,
    VerifyCell,
};

use serde::{Deserialize, Serialize};

use crate::env::{BanditInstance, RewardStreams};
use crate::error::{Error, Result};
use crate::math::{self, Confidence};
use crate::policy::{ArmId, ArmOutcome, Policy, PolicyConfig, RoundSummary};

/// Horizons above this do not keep a per-step action log unless asked.
pub const ACTION_LOG_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    /// Force the action log on or off; `None` keeps it for `T <= 1e5`.
    pub action_log: Option<bool>,
}

/// What one round of a constant-space policy did, reconstructed from the
/// step reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub level: u64,
    pub round: u64,
    pub precision: f64,
    pub prev_precision: f64,
    pub budget: u64,
    pub delta: f64,
    /// Pulls of each arm in this round.
    pub arm_pulls: Vec<u64>,
    pub ruled_out: Vec<bool>,
    /// Registers at round end; `None` when the horizon cut the scan short.
    pub summary: Option<RoundSummary>,
}

/// One restart of the doubling wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: u64,
    pub sub_horizon: u64,
    pub first_step: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: u64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub horizon: u64,
    pub seed: u64,
    pub steps: u64,
    pub pull_counts: Vec<u64>,
    pub action_log: Option<Vec<ArmId>>,
    /// `None` for policies without rounds.
    pub round_log: Option<Vec<RoundRecord>>,
    pub levels: Option<Vec<LevelRecord>>,
    /// Every running mean the policy formed stayed within its confidence
    /// radius of the true mean.
    pub clean_event: bool,
    /// First step (1-based) at which the clean event failed.
    pub first_violation: Option<u64>,
    /// Largest round index entered, over all levels.
    pub r_max_observed: Option<u64>,
    pub committed: Option<ArmId>,
    /// The horizon ran out in the middle of a scan.
    pub frozen: bool,
    /// Regret at `t = 1, 2, 4, ...` and at the final step.
    pub trajectory: Vec<RegretPoint>,
    pub state_words_reset: usize,
    pub state_words_peak: usize,
}

impl EpisodeTrace {
    pub fn k(&self) -> usize {
        self.pull_counts.len()
    }
}

/// Runs `horizon` steps of the configured policy on `instance`.
pub fn run_episode(
    config: &PolicyConfig,
    instance: &BanditInstance,
    horizon: u64,
    seed: u64,
    options: EpisodeOptions,
) -> Result<EpisodeTrace> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let k = instance.k();
    let means = instance.means();
    let gaps = instance.gaps().gaps().to_vec();
    let mut policy = config.build(k, horizon)?;
    let mut streams = RewardStreams::new(seed, k);

    let keep_actions = options.action_log.unwrap_or(horizon <= ACTION_LOG_LIMIT);
    let mut action_log = keep_actions.then(|| Vec::with_capacity(horizon as usize));
    let has_rounds = policy.const_space_state().is_some();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut levels = policy.level().map(|(level, sub_horizon)| {
        vec![LevelRecord {
            level,
            sub_horizon,
            first_step: 1,
            steps: 0,
        }]
    });

    let mut pull_counts = vec![0u64; k];
    let mut trajectory = Vec::new();
    let mut next_checkpoint = 1u64;
    let mut clean_event = true;
    let mut first_violation = None;
    let mut committed = None;
    let mut frozen = false;
    let state_words_reset = policy.state_words();
    let mut state_words_peak = state_words_reset;
    let mut level = 0u64;

    for t in 1..=horizon {
        let arm = policy.select_arm();
        if arm.0 >= k {
            return Err(Error::ArmOutOfRange { arm: arm.0, k });
        }
        if let Some(cs) = policy.const_space_state() {
            if cs.committed_arm().is_none() {
                let open = rounds.last().is_some_and(|r| {
                    r.summary.is_none() && r.level == level && r.round == cs.round()
                });
                if !open {
                    rounds.push(RoundRecord {
                        level,
                        round: cs.round(),
                        precision: cs.precision().value(),
                        prev_precision: cs.prev_precision().value(),
                        budget: cs.budget(),
                        delta: cs.delta().value(),
                        arm_pulls: vec![0; k],
                        ruled_out: vec![false; k],
                        summary: None,
                    });
                }
            }
        }

        let reward = instance.sample_reward(arm, &mut streams)?;
        let report = policy.observe(reward)?;
        pull_counts[arm.0] += 1;
        if let Some(log) = action_log.as_mut() {
            log.push(arm);
        }

        if let Some(est) = report.estimate {
            let radius = math::hoeffding_radius(est.pulls, Confidence::new(est.delta)?)?;
            if clean_event && (est.mean - means[arm.0]).abs() > radius {
                clean_event = false;
                first_violation = Some(t);
            }
            if let Some(record) = rounds.last_mut() {
                record.arm_pulls[arm.0] += 1;
                if report.arm_outcome == Some(ArmOutcome::RuledOut) {
                    record.ruled_out[arm.0] = true;
                }
            }
        }
        if let Some(summary) = report.round {
            if let Some(record) = rounds.last_mut() {
                record.summary = Some(summary);
            }
        }
        if report.committed.is_some() {
            committed = report.committed;
        }
        frozen |= report.frozen;
        if let Some(levels) = levels.as_mut() {
            if let Some(last) = levels.last_mut() {
                last.steps += 1;
            }
            if let Some(new_level) = report.level_started {
                level = new_level;
                committed = None;
                frozen = false;
                let (_, sub_horizon) = policy.level().unwrap_or((new_level, 0));
                levels.push(LevelRecord {
                    level,
                    sub_horizon,
                    first_step: t + 1,
                    steps: 0,
                });
            }
        }
        state_words_peak = state_words_peak.max(policy.state_words());

        if t == next_checkpoint || t == horizon {
            trajectory.push(RegretPoint {
                t,
                regret: weighted_sum(&pull_counts, &gaps),
            });
            if t == next_checkpoint {
                next_checkpoint = next_checkpoint.saturating_mul(2);
            }
        }
    }

    // A level opened by the very last step never ran.
    if let Some(levels) = levels.as_mut() {
        if levels.len() > 1 && levels.last().is_some_and(|l| l.steps == 0) {
            levels.pop();
        }
    }
    let committed = committed.or_else(|| policy.committed_arm());
    let r_max_observed = has_rounds.then(|| rounds.iter().map(|r| r.round).max().unwrap_or(0));

    Ok(EpisodeTrace {
        horizon,
        seed,
        steps: horizon,
        pull_counts,
        action_log,
        round_log: has_rounds.then_some(rounds),
        levels,
        clean_event,
        first_violation,
        r_max_observed,
        committed,
        frozen,
        trajectory,
        state_words_reset,
        state_words_peak,
    })
}

/// Realized pseudo-regret `sum_j N_j * gap_j`.
pub fn pseudo_regret(trace: &EpisodeTrace, instance: &BanditInstance) -> Result<f64> {
    if trace.k() != instance.k() {
        return Err(Error::ArmCountMismatch {
            trace: trace.k(),
            instance: instance.k(),
        });
    }
    Ok(weighted_sum(&trace.pull_counts, instance.gaps().gaps()))
}

/// `sum_j n_j * w_j` carried in twice the working precision, so the result
/// is within an ulp of the exact value for non-negative terms.
pub fn weighted_sum(counts: &[u64], weights: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (&n, &w) in counts.iter().zip(weights) {
        let x = n as f64;
        let p = x * w;
        let p_err = x.mul_add(w, -p);
        let (sum, sum_err) = math::two_sum(s, p);
        s = sum;
        c += sum_err + p_err;
    }
    s + c
}
