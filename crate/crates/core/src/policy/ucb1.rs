use crate::error::{Error, Result};

use super::{check_reward, words_of, ArmId, Policy, StepReport};

/// UCB1 baseline: pull every arm once, then the arm maximizing
/// `mean_i + sqrt(2 ln t / n_i)`, ties going to the lowest index.
///
/// Keeps a count and a mean per arm, so its state grows with K.
#[derive(Debug, Clone, PartialEq)]
pub struct Ucb1 {
    counts: Vec<u64>,
    means: Vec<f64>,
    t: u64,
}

impl Ucb1 {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::NoArms);
        }
        Ok(Self {
            counts: vec![0; k],
            means: vec![0.0; k],
            t: 0,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// UCB index of `arm`; infinite before its first pull.
    pub fn index(&self, arm: ArmId) -> f64 {
        let n = self.counts[arm.0];
        if n == 0 {
            return f64::INFINITY;
        }
        self.means[arm.0] + (2.0 * (self.t as f64).ln() / n as f64).sqrt()
    }
}

impl Policy for Ucb1 {
    fn k(&self) -> usize {
        self.counts.len()
    }

    fn select_arm(&self) -> ArmId {
        let k = self.counts.len();
        if (self.t as usize) < k {
            return ArmId(self.t as usize);
        }
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for arm in 0..k {
            let index = self.index(ArmId(arm));
            if index > best_index {
                best = arm;
                best_index = index;
            }
        }
        ArmId(best)
    }

    fn observe(&mut self, reward: f64) -> Result<StepReport> {
        check_reward(reward)?;
        let arm = self.select_arm();
        let i = arm.0;
        self.counts[i] += 1;
        let n = self.counts[i] as f64;
        self.means[i] = (self.means[i] * (n - 1.0) + reward) / n;
        self.t += 1;
        Ok(StepReport::pulled(arm))
    }

    fn state_words(&self) -> usize {
        words_of::<Self>() + self.counts.capacity() + self.means.capacity()
    }

    fn steps(&self) -> u64 {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_sweep() {
        let mut p = Ucb1::new(4).unwrap();
        for t in 0..4 {
            assert_eq!(p.select_arm(), ArmId(t));
            p.observe(0.0).unwrap();
        }
    }

    #[test]
    fn ties_go_to_lowest_arm() {
        let mut p = Ucb1::new(2).unwrap();
        p.observe(0.5).unwrap();
        p.observe(0.5).unwrap();
        assert_eq!(p.select_arm(), ArmId(0));
    }

    #[test]
    fn prefers_higher_mean_after_balanced_pulls() {
        let mut p = Ucb1::new(2).unwrap();
        p.counts = vec![50, 50];
        p.means = vec![0.9, 0.1];
        p.t = 100;
        // Both bonuses equal sqrt(2 ln 100 / 50) ~= 0.429.
        let bonus = (2.0 * 100f64.ln() / 50.0).sqrt();
        assert!((p.index(ArmId(0)) - (0.9 + bonus)).abs() < 1e-15);
        assert!(p.index(ArmId(0)) > p.index(ArmId(1)));
        assert_eq!(p.select_arm(), ArmId(0));
    }

    #[test]
    fn words_grow_two_per_arm() {
        let base = words_of::<Ucb1>();
        assert_eq!(base, GOLDEN_BASE_WORDS);
        for k in [1, 100, 10_000] {
            assert_eq!(Ucb1::new(k).unwrap().state_words(), 2 * k + base);
        }
    }

    /// Two `Vec` headers (3 words each) and the step counter.
    const GOLDEN_BASE_WORDS: usize = 7;

    #[test]
    fn rejects_zero_arms_and_bad_rewards() {
        assert_eq!(Ucb1::new(0), Err(Error::NoArms));
        let mut p = Ucb1::new(2).unwrap();
        assert!(p.observe(2.0).is_err());
        assert_eq!(p.steps(), 0);
    }
}
