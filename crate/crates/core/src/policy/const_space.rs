use crate::error::{Error, Result};
use crate::math::{self, Confidence, Precision, RunningMean, ScheduleKind};

use super::{
    check_reward, words_of, ArmId, ArmOutcome, Estimate, Policy, RoundSummary, StepReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Exploration,
    Exploitation,
    /// Horizon reached in the middle of a scan.
    Frozen,
}

/// Round-based UCB that keeps only the best and second-best arm of the
/// current and previous round.
///
/// Round `r` scans arms `0..K` in order, pulling each up to
/// `N = ceil(2 ln(1/delta) / g_r^2)` times. From round 2 on, an arm is
/// dropped early once `mean + sqrt(ln(1/delta) / 2n) < prev_mean - g_{r-1}/2`.
/// At the end of a round the policy commits to the best arm if
/// `best_mean - g_r/2 > second_mean + g_r/2`, otherwise it shrinks `g`
/// according to the schedule and starts another round.
///
/// The struct has no per-arm storage, so its size does not depend on K.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstSpaceUcb {
    k: usize,
    horizon: u64,
    delta: Confidence,
    schedule: ScheduleKind,
    phase: Phase,
    round: u64,
    precision: Precision,
    prev_precision: Precision,
    budget: u64,
    scan_arm: usize,
    pulls: u64,
    mean: RunningMean,
    best: usize,
    best_mean: f64,
    second: usize,
    second_mean: f64,
    prev_best: usize,
    prev_mean: f64,
    t: u64,
    survivors: u64,
}

impl ConstSpaceUcb {
    pub fn new(k: usize, horizon: u64, delta: Confidence, schedule: ScheduleKind) -> Result<Self> {
        if k == 0 {
            return Err(Error::NoArms);
        }
        let schedule = schedule.validate()?;
        let precision = Precision::INITIAL;
        let mut state = Self {
            k,
            horizon,
            delta,
            schedule,
            phase: Phase::Exploration,
            round: 1,
            precision,
            prev_precision: precision,
            budget: budget_for(precision, delta),
            scan_arm: 0,
            pulls: 0,
            mean: RunningMean::new(),
            best: 0,
            best_mean: 0.0,
            second: 0,
            second_mean: 0.0,
            prev_best: 0,
            prev_mean: 0.0,
            t: 0,
            survivors: 0,
        };
        if k == 1 {
            // Nothing to compare against.
            state.phase = Phase::Exploitation;
        }
        Ok(state)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn prev_precision(&self) -> Precision {
        self.prev_precision
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn delta(&self) -> Confidence {
        self.delta
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn schedule(&self) -> ScheduleKind {
        self.schedule
    }

    pub fn scan_arm(&self) -> ArmId {
        ArmId(self.scan_arm)
    }

    /// Pulls of the scanned arm in this round and its running mean.
    pub fn scan_estimate(&self) -> (u64, f64) {
        (self.pulls, self.mean.value())
    }

    pub fn round_best(&self) -> (ArmId, f64) {
        (ArmId(self.best), self.best_mean)
    }

    pub fn round_second(&self) -> (ArmId, f64) {
        (ArmId(self.second), self.second_mean)
    }

    fn exploit_arm(&self) -> usize {
        match self.phase {
            Phase::Exploration => self.scan_arm,
            Phase::Exploitation => self.best,
            // Best arm of the last completed round, then whatever this
            // round has ranked so far, then the arm under scan.
            Phase::Frozen => {
                if self.round > 1 {
                    self.prev_best
                } else if self.scan_arm > 0 {
                    self.best
                } else {
                    self.scan_arm
                }
            }
        }
    }

    fn finish_arm(&mut self, outcome: ArmOutcome) {
        let arm = self.scan_arm;
        let mean = self.mean.value();
        if mean > self.best_mean {
            self.second = self.best;
            self.second_mean = self.best_mean;
            self.best = arm;
            self.best_mean = mean;
        } else if mean > self.second_mean {
            self.second = arm;
            self.second_mean = mean;
        }
        if outcome == ArmOutcome::Completed {
            self.survivors += 1;
        }
        self.scan_arm += 1;
        self.pulls = 0;
        self.mean = RunningMean::new();
    }

    fn finish_round(&mut self, report: &mut StepReport) -> Result<()> {
        let half = self.precision.value() / 2.0;
        let separated = self.best_mean - half > self.second_mean + half;
        let horizon_reached = self.t >= self.horizon;
        report.round = Some(RoundSummary {
            level: 0,
            round: self.round,
            precision: self.precision.value(),
            prev_precision: self.prev_precision.value(),
            budget: self.budget,
            delta: self.delta.value(),
            best: ArmId(self.best),
            best_mean: self.best_mean,
            second: ArmId(self.second),
            second_mean: self.second_mean,
            prev_best: (self.round > 1).then_some(ArmId(self.prev_best)),
            prev_mean: (self.round > 1).then_some(self.prev_mean),
            survivors: self.survivors,
            separated,
            horizon_reached,
        });
        if separated || horizon_reached {
            self.phase = Phase::Exploitation;
            report.committed = Some(ArmId(self.best));
            return Ok(());
        }
        let survivor_fraction = self.survivors.max(1) as f64 / self.k as f64;
        let next = math::next_precision(self.precision, self.schedule, Some(survivor_fraction))?;
        self.prev_best = self.best;
        self.prev_mean = self.best_mean;
        self.prev_precision = self.precision;
        self.precision = next;
        self.budget = budget_for(next, self.delta);
        self.round += 1;
        self.scan_arm = 0;
        self.best = 0;
        self.best_mean = 0.0;
        self.second = 0;
        self.second_mean = 0.0;
        self.survivors = 0;
        Ok(())
    }
}

/// A budget too large for `u64` can never be spent within a `u64` horizon,
/// so saturating is equivalent.
fn budget_for(g: Precision, delta: Confidence) -> u64 {
    match math::round_budget(g, delta) {
        Ok(n) => n.max(1),
        Err(Error::BudgetOverflow { .. }) => u64::MAX,
        // delta == 1 gives ln(1/delta) = 0: one pull per arm is all the
        // confidence test can use.
        Err(_) => 1,
    }
}

impl Policy for ConstSpaceUcb {
    fn k(&self) -> usize {
        self.k
    }

    fn select_arm(&self) -> ArmId {
        ArmId(self.exploit_arm())
    }

    fn observe(&mut self, reward: f64) -> Result<StepReport> {
        check_reward(reward)?;
        if self.t >= self.horizon || self.phase == Phase::Frozen {
            return Err(Error::HorizonExhausted(self.horizon));
        }
        let arm = ArmId(self.exploit_arm());
        self.t += 1;
        let mut report = StepReport::pulled(arm);
        if self.phase == Phase::Exploitation {
            return Ok(report);
        }

        self.pulls += 1;
        self.mean.update(self.pulls, reward);
        let mean = self.mean.value();
        let radius = math::hoeffding_radius(self.pulls, self.delta)?;
        report.estimate = Some(Estimate {
            pulls: self.pulls,
            mean,
            delta: self.delta.value(),
        });

        let outcome = if self.round > 1
            && mean + radius < self.prev_mean - self.prev_precision.value() / 2.0
        {
            Some(ArmOutcome::RuledOut)
        } else if self.pulls >= self.budget {
            Some(ArmOutcome::Completed)
        } else {
            None
        };

        if let Some(outcome) = outcome {
            report.arm_outcome = Some(outcome);
            self.finish_arm(outcome);
            if self.scan_arm == self.k {
                self.finish_round(&mut report)?;
                return Ok(report);
            }
        }
        if self.t >= self.horizon {
            self.phase = Phase::Frozen;
            report.frozen = true;
        }
        Ok(report)
    }

    fn state_words(&self) -> usize {
        words_of::<Self>()
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn committed_arm(&self) -> Option<ArmId> {
        (self.phase == Phase::Exploitation).then_some(ArmId(self.best))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Transition;
    use approx::assert_relative_eq;

    fn geometric(k: usize, horizon: u64) -> ConstSpaceUcb {
        ConstSpaceUcb::new(
            k,
            horizon,
            Confidence::for_horizon(horizon),
            ScheduleKind::Geometric,
        )
        .unwrap()
    }

    /// Drives the policy with fixed per-arm rewards.
    fn drive(policy: &mut ConstSpaceUcb, rewards: &[f64], steps: u64) -> Vec<StepReport> {
        (0..steps)
            .map(|_| {
                let arm = policy.select_arm();
                policy.observe(rewards[arm.0]).unwrap()
            })
            .collect()
    }

    #[test]
    fn reset_state() {
        let p = geometric(10, 1000);
        assert_eq!(p.precision().value(), 0.5);
        assert_eq!(p.round(), 1);
        assert_eq!(p.scan_arm(), ArmId(0));
        assert_eq!(p.phase(), Phase::Exploration);
        // ceil(2 ln(1e9) / 0.25)
        assert_eq!(p.budget(), 166);
        assert_eq!(p.scan_estimate(), (0, 0.0));
    }

    #[test]
    fn single_arm_commits_at_reset() {
        let p = geometric(1, 100);
        assert_eq!(p.phase(), Phase::Exploitation);
        assert_eq!(p.select_arm(), ArmId(0));
        assert_eq!(p.committed_arm(), Some(ArmId(0)));
    }

    #[test]
    fn zero_arms_rejected() {
        let err = ConstSpaceUcb::new(0, 10, Confidence::for_horizon(10), ScheduleKind::Geometric);
        assert_eq!(err, Err(Error::NoArms));
    }

    #[test]
    fn select_is_pure_and_follows_scan() {
        let mut p = geometric(3, 10_000);
        assert_eq!(p.select_arm(), ArmId(0));
        assert_eq!(p.select_arm(), ArmId(0));
        let budget = p.budget();
        drive(&mut p, &[0.5, 0.5, 0.5], budget + 3);
        assert_eq!(p.select_arm(), ArmId(1));
        assert_eq!(p.scan_estimate().0, 3);
    }

    #[test]
    fn incremental_mean() {
        let mut p = geometric(2, 10_000);
        p.observe(1.0).unwrap();
        assert_eq!(p.scan_estimate(), (1, 1.0));
        p.observe(0.0).unwrap();
        assert_eq!(p.scan_estimate(), (2, 0.5));
    }

    #[test]
    fn rejects_bad_rewards_and_overrun() {
        let mut p = geometric(2, 3);
        assert_eq!(p.observe(1.5), Err(Error::RewardOutOfRange(1.5)));
        assert!(p.observe(f64::NAN).is_err());
        assert!(p.observe(-0.1).is_err());
        for _ in 0..3 {
            p.observe(0.5).unwrap();
        }
        assert_eq!(p.observe(0.5), Err(Error::HorizonExhausted(3)));
    }

    #[test]
    fn exploitation_picks_best() {
        // Round 1: separation 0.8 > g = 0.5 commits to arm 2.
        let mut p = geometric(3, 100_000);
        let n = p.budget();
        let reports = drive(&mut p, &[0.1, 0.05, 0.9], 3 * n);
        let last = reports.last().unwrap();
        assert_eq!(last.transition(), Transition::Committed);
        assert_eq!(last.committed, Some(ArmId(2)));
        assert_eq!(p.select_arm(), ArmId(2));
        let r = p.observe(0.9).unwrap();
        assert_eq!(r.arm, ArmId(2));
        assert!(r.estimate.is_none());
    }

    #[test]
    fn strict_comparison_keeps_earlier_arm() {
        // Equal means: arm 0 stays best, arm 1 only takes the second slot,
        // and the round never separates.
        let mut p = geometric(2, 100_000);
        let n = p.budget();
        let reports = drive(&mut p, &[0.5, 0.5], 2 * n);
        let summary = reports.last().unwrap().round.unwrap();
        assert_eq!(summary.best, ArmId(0));
        assert_eq!(summary.second, ArmId(1));
        assert!(!summary.separated);
        assert_eq!(p.round(), 2);
        assert_eq!(p.prev_precision().value(), 0.5);
        assert_eq!(p.precision().value(), 0.25);
    }

    #[test]
    fn rule_out_disabled_in_round_one() {
        let mut p = geometric(3, 1_000_000);
        let n = p.budget();
        let reports = drive(&mut p, &[0.9, 0.6, 0.0], 3 * n);
        assert!(reports
            .iter()
            .all(|r| r.arm_outcome != Some(ArmOutcome::RuledOut)));
        assert_eq!(
            reports.iter().filter(|r| r.arm_outcome.is_some()).count(),
            3
        );
        assert_eq!(p.round(), 2);
    }

    #[test]
    fn rule_out_fires_at_first_qualifying_pull() {
        // Point masses {0.9, 0.6, 0.1}: round 1 gap 0.3 < 0.5 does not
        // separate. In round 2 arm 2 is dropped at the first n with
        // 0.1 + sqrt(L / 2n) < 0.9 - 0.25.
        let horizon = 10_000;
        let mut p = geometric(3, horizon);
        let delta = p.delta();
        let l = delta.log_inv();
        let n1 = p.budget();
        let n2 = math::round_budget(Precision::new(0.25).unwrap(), delta).unwrap();
        let expected_drop = (1..)
            .find(|&n: &u64| 0.1 + (l / (2.0 * n as f64)).sqrt() < 0.9 - 0.25)
            .unwrap();
        assert!(expected_drop < n2);

        let rewards = [0.9, 0.6, 0.1];
        drive(&mut p, &rewards, 3 * n1);
        assert_eq!(p.round(), 2);
        drive(&mut p, &rewards, 2 * n2);
        let tail = drive(&mut p, &rewards, expected_drop);
        let last = tail.last().unwrap();
        assert_eq!(last.arm, ArmId(2));
        assert_eq!(last.arm_outcome, Some(ArmOutcome::RuledOut));
        assert!(tail[..tail.len() - 1]
            .iter()
            .all(|r| r.arm_outcome.is_none()));
        // 0.9 - 0.6 = 0.3 > g_2 = 0.25 separates.
        let summary = last.round.unwrap();
        assert!(summary.separated);
        assert_eq!(summary.survivors, 2);
        assert_eq!(last.committed, Some(ArmId(0)));
        assert_eq!(p.steps(), 3 * n1 + 2 * n2 + expected_drop);
    }

    #[test]
    fn horizon_mid_scan_freezes() {
        let mut p = geometric(3, 50);
        let reports = drive(&mut p, &[0.2, 0.8, 0.5], 50);
        assert!(reports.last().unwrap().frozen);
        assert_eq!(p.phase(), Phase::Frozen);
        // Nothing ranked yet in round 1: the arm under scan.
        assert_eq!(p.select_arm(), ArmId(0));
        assert!(p.observe(0.5).is_err());
    }

    #[test]
    fn horizon_at_round_end_commits() {
        // Horizon equal to exactly one round.
        let probe = geometric(2, 1000);
        let n = probe.budget();
        let mut p = ConstSpaceUcb::new(2, 2 * n, probe.delta(), ScheduleKind::Geometric).unwrap();
        let reports = drive(&mut p, &[0.5, 0.6], 2 * n);
        let summary = reports.last().unwrap().round.unwrap();
        assert!(summary.horizon_reached);
        assert!(!summary.separated);
        assert_eq!(reports.last().unwrap().committed, Some(ArmId(1)));
    }

    #[test]
    fn adaptive_schedule_uses_survivors() {
        // Round 1 never rules out, so s = 1 and g halves.
        let mut p = ConstSpaceUcb::new(
            4,
            1_000_000,
            Confidence::for_horizon(1_000_000),
            ScheduleKind::AdaptiveRatio,
        )
        .unwrap();
        let n = p.budget();
        drive(&mut p, &[0.5, 0.5, 0.5, 0.5], 4 * n);
        assert_eq!(p.precision().value(), 0.25);
    }

    #[test]
    fn polylog_schedule_progression() {
        let kind = ScheduleKind::polylog(1.0).unwrap();
        let mut p = ConstSpaceUcb::new(2, u64::MAX, Confidence::new(0.5).unwrap(), kind).unwrap();
        let mut expected = Precision::INITIAL;
        for _ in 0..4 {
            let n = p.budget();
            drive(&mut p, &[0.5, 0.5], 2 * n);
            expected = math::next_precision(expected, kind, None).unwrap();
            assert_relative_eq!(p.precision().value(), expected.value());
        }
    }

    #[test]
    fn word_count_independent_of_k() {
        let words: Vec<usize> = [2, 10, 1_000, 100_000]
            .iter()
            .map(|&k| geometric(k, 1000).state_words())
            .collect();
        assert!(words.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(words[0], GOLDEN_LAYOUT_WORDS);
    }

    /// Measured layout of the struct on a 64-bit target.
    const GOLDEN_LAYOUT_WORDS: usize = 22;

    #[test]
    fn incremental_mean_is_exact_for_dyadic_rewards() {
        // Rewards on a 1/1024 grid: the batch mean is exact, and the
        // incremental update must stay within 8 ulp of it over 1e6 samples.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut p = ConstSpaceUcb::new(
            2,
            u64::MAX,
            Confidence::new(0.5).unwrap(),
            ScheduleKind::Geometric,
        )
        .unwrap();
        // Keep the first arm scanning for the whole run.
        p.budget = u64::MAX;
        let mut sum = 0.0f64;
        for i in 1..=1_000_000u64 {
            let v = rng.random_range(0..=1024u32) as f64 / 1024.0;
            sum += v;
            p.observe(v).unwrap();
            if i % 100_000 == 0 {
                let batch = sum / i as f64;
                let ulps = (p.mean.value().to_bits() as i64 - batch.to_bits() as i64).abs();
                assert!(ulps <= 8, "after {i} samples: {ulps} ulp");
            }
        }
    }
}
