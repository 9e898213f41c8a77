use serde::{Deserialize, Serialize};

use crate::env::{make_custom, make_linear_gaps, ArmFamily, BanditInstance, RewardStreams};
use crate::error::{Error, Result};
use crate::policy::{Policy, PolicyConfig};

/// Length of the episode sampled for peak memory.
pub const AUDIT_STEPS: u64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub k: usize,
    pub reset_words: usize,
    pub peak_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryAudit {
    pub policy: String,
    pub schedule: String,
    pub rows: Vec<AuditRow>,
    /// Every row has the same reset and peak count.
    pub constant: bool,
    /// Least-squares growth of peak words per arm; `None` for one K.
    pub slope: Option<f64>,
}

/// State words at reset and at peak over a short episode, for each K.
pub fn memory_audit(config: &PolicyConfig, k_grid: &[usize]) -> Result<MemoryAudit> {
    if k_grid.is_empty() {
        return Err(Error::EmptyGrid("K"));
    }
    let rows = k_grid
        .iter()
        .map(|&k| audit_one(config, k))
        .collect::<Result<Vec<_>>>()?;
    let first = rows[0];
    let constant = rows
        .iter()
        .all(|r| r.reset_words == first.reset_words && r.peak_words == first.reset_words);
    Ok(MemoryAudit {
        policy: config.name().to_string(),
        schedule: config.schedule_label(),
        slope: slope(&rows),
        rows,
        constant,
    })
}

fn audit_instance(k: usize) -> Result<BanditInstance> {
    if k < 2 {
        make_custom(&vec![0.5; k])
    } else {
        make_linear_gaps(k, 1.0, ArmFamily::Bernoulli)
    }
}

fn audit_one(config: &PolicyConfig, k: usize) -> Result<AuditRow> {
    let instance = audit_instance(k)?;
    let mut policy = config.build(k, AUDIT_STEPS)?;
    let mut streams = RewardStreams::new(0, k);
    let reset_words = policy.state_words();
    let mut peak_words = reset_words;
    for _ in 0..AUDIT_STEPS {
        let reward = instance.sample_reward(policy.select_arm(), &mut streams)?;
        policy.observe(reward)?;
        peak_words = peak_words.max(policy.state_words());
    }
    Ok(AuditRow {
        k,
        reset_words,
        peak_words,
    })
}

fn slope(rows: &[AuditRow]) -> Option<f64> {
    let n = rows.len() as f64;
    let mx = rows.iter().map(|r| r.k as f64).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.peak_words as f64).sum::<f64>() / n;
    let sxx: f64 = rows.iter().map(|r| (r.k as f64 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = rows
        .iter()
        .map(|r| (r.k as f64 - mx) * (r.peak_words as f64 - my))
        .sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ScheduleKind;

    #[test]
    fn const_space_rows_are_equal() {
        for cfg in [
            PolicyConfig::const_space(ScheduleKind::Geometric),
            PolicyConfig::Doubling {
                schedule: ScheduleKind::AdaptiveRatio,
            },
        ] {
            let audit = memory_audit(&cfg, &[10, 100, 1000]).unwrap();
            assert!(audit.constant);
            assert_eq!(audit.slope, Some(0.0));
        }
    }

    #[test]
    fn ucb1_grows_two_words_per_arm() {
        let audit = memory_audit(&PolicyConfig::Ucb1, &[10, 100, 1000]).unwrap();
        assert!(!audit.constant);
        assert!((audit.slope.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn single_k_is_constant() {
        let audit = memory_audit(&PolicyConfig::Ucb1, &[50]).unwrap();
        assert!(audit.constant);
        assert_eq!(audit.slope, None);
        assert_eq!(
            memory_audit(&PolicyConfig::Ucb1, &[]),
            Err(Error::EmptyGrid("K"))
        );
    }
}
