use crate::error::Result;
use crate::math::{Confidence, ScheduleKind};

use super::{words_of, ArmId, ConstSpaceUcb, Policy, StepReport};

/// Horizon of the first restart.
pub const INITIAL_SUB_HORIZON: u64 = 10;

/// Anytime wrapper: runs [`ConstSpaceUcb`] on horizons `T_0 = 10` and
/// `T_l = T_{l-1}^2`, restarting with `delta = 1/T_l^3` whenever a level's
/// horizon is used up.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingAnytime {
    level: u64,
    sub_horizon: u64,
    consumed: u64,
    inner: ConstSpaceUcb,
}

impl DoublingAnytime {
    pub fn new(k: usize, schedule: ScheduleKind) -> Result<Self> {
        let inner = ConstSpaceUcb::new(
            k,
            INITIAL_SUB_HORIZON,
            Confidence::for_horizon(INITIAL_SUB_HORIZON),
            schedule,
        )?;
        Ok(Self {
            level: 0,
            sub_horizon: INITIAL_SUB_HORIZON,
            consumed: 0,
            inner,
        })
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    /// Horizon `T_l` of the current level.
    pub fn sub_horizon(&self) -> u64 {
        self.sub_horizon
    }

    pub fn inner(&self) -> &ConstSpaceUcb {
        &self.inner
    }
}

impl Policy for DoublingAnytime {
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn select_arm(&self) -> ArmId {
        self.inner.select_arm()
    }

    fn observe(&mut self, reward: f64) -> Result<StepReport> {
        let mut report = self.inner.observe(reward)?;
        self.consumed += 1;
        if let Some(round) = report.round.as_mut() {
            round.level = self.level;
        }
        if self.inner.steps() >= self.sub_horizon {
            self.level += 1;
            // Saturates once T_l no longer fits in 64 bits.
            self.sub_horizon = self.sub_horizon.saturating_mul(self.sub_horizon);
            self.inner = ConstSpaceUcb::new(
                self.inner.k(),
                self.sub_horizon,
                Confidence::for_horizon(self.sub_horizon),
                self.inner.schedule(),
            )?;
            report.level_started = Some(self.level);
        }
        Ok(report)
    }

    fn state_words(&self) -> usize {
        words_of::<Self>()
    }

    fn steps(&self) -> u64 {
        self.consumed
    }

    fn committed_arm(&self) -> Option<ArmId> {
        self.inner.committed_arm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p: &mut DoublingAnytime, steps: u64) -> Vec<(u64, u64)> {
        let mut starts = Vec::new();
        for _ in 0..steps {
            let arm = p.select_arm();
            let reward = if arm.0 == 0 { 0.9 } else { 0.3 };
            if let Some(level) = p.observe(reward).unwrap().level_started {
                starts.push((level, p.sub_horizon()));
            }
        }
        starts
    }

    #[test]
    fn starts_at_ten() {
        let p = DoublingAnytime::new(5, ScheduleKind::Geometric).unwrap();
        assert_eq!(p.level(), 0);
        assert_eq!(p.sub_horizon(), 10);
        assert_eq!(p.inner().horizon(), 10);
        assert_eq!(p.inner().delta(), Confidence::for_horizon(10));
    }

    #[test]
    fn squares_the_horizon() {
        let mut p = DoublingAnytime::new(3, ScheduleKind::Geometric).unwrap();
        assert_eq!(run(&mut p, 10), vec![(1, 100)]);
        assert_eq!(run(&mut p, 100), vec![(2, 10_000)]);
        assert_eq!(p.steps(), 110);
        assert_eq!(p.inner().steps(), 0);
        assert_eq!(p.inner().delta(), Confidence::for_horizon(10_000));
    }

    #[test]
    fn level_count_for_ten_thousand_steps() {
        // Brute-force the schedule: smallest L with sum_{l<=L} T_l >= T.
        let total = 10_000u64;
        let (mut sum, mut t_l, mut levels) = (0u64, 10u64, 0u64);
        loop {
            sum += t_l;
            if sum >= total {
                break;
            }
            t_l *= t_l;
            levels += 1;
        }
        assert_eq!(levels, 2);
        assert!(levels as f64 <= (total as f64).log10().log2() + 1.0);

        let mut p = DoublingAnytime::new(4, ScheduleKind::Geometric).unwrap();
        run(&mut p, total);
        assert_eq!(p.level(), levels);
        assert_eq!(p.steps(), total);
    }

    #[test]
    fn three_words_over_inner() {
        let p = DoublingAnytime::new(7, ScheduleKind::Geometric).unwrap();
        assert_eq!(p.state_words(), p.inner().state_words() + 3);
        let q = DoublingAnytime::new(70_000, ScheduleKind::polylog(0.5).unwrap()).unwrap();
        assert_eq!(p.state_words(), q.state_words());
    }
}
