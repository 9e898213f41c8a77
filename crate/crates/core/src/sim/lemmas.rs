use serde::{Deserialize, Serialize};

use crate::env::BanditInstance;
use crate::error::{Error, Result};
use crate::math::{self, Precision, ScheduleKind};
use crate::policy::PolicyConfig;

use super::EpisodeTrace;

/// Relative slack for comparing recorded floats against the bounds.
const SLACK: f64 = 1e-12;

/// Result of one conditional assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LemmaOutcome {
    Pass,
    Fail {
        level: u64,
        round: u64,
        detail: String,
    },
    /// The clean event failed (or the bound is undefined), so the
    /// assertion says nothing about this run.
    Vacuous,
}

impl LemmaOutcome {
    pub fn is_fail(&self) -> bool {
        matches!(self, Self::Fail { .. })
    }
}

/// The assertions that hold on the clean event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub clean_event: bool,
    /// No optimal arm is ruled out in any round.
    pub best_arm_kept: LemmaOutcome,
    /// `|round-end best mean - mu*| <= g_r / 2` in every completed round.
    pub mean_accuracy: LemmaOutcome,
    /// Rounds entered stay within the schedule's round bound.
    pub round_count: LemmaOutcome,
    /// Per-round pulls of arm `i` are at most the budget and, when
    /// `gap_i > g_{r-1}`, at most `2 ln(1/delta) / (gap_i - g_{r-1})^2 + 1`.
    pub pull_count: LemmaOutcome,
}

impl LemmaReport {
    pub const NAMES: [&'static str; 4] = [
        "best_arm_kept",
        "mean_accuracy",
        "round_count",
        "pull_count",
    ];

    pub fn outcomes(&self) -> [(&'static str, &LemmaOutcome); 4] {
        [
            (Self::NAMES[0], &self.best_arm_kept),
            (Self::NAMES[1], &self.mean_accuracy),
            (Self::NAMES[2], &self.round_count),
            (Self::NAMES[3], &self.pull_count),
        ]
    }

    pub fn passed(&self) -> bool {
        self.outcomes().iter().all(|(_, o)| !o.is_fail())
    }
}

/// Pass/fail/vacuous counts per assertion over many runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaTally {
    pub runs: u64,
    pub clean_runs: u64,
    pub pass: [u64; 4],
    pub fail: [u64; 4],
    pub vacuous: [u64; 4],
    /// First failure seen for each assertion.
    pub first_failure: [Option<LemmaOutcome>; 4],
}

impl LemmaTally {
    pub fn add(&mut self, report: &LemmaReport) {
        self.runs += 1;
        self.clean_runs += u64::from(report.clean_event);
        for (i, (_, outcome)) in report.outcomes().into_iter().enumerate() {
            match outcome {
                LemmaOutcome::Pass => self.pass[i] += 1,
                LemmaOutcome::Vacuous => self.vacuous[i] += 1,
                LemmaOutcome::Fail { .. } => {
                    self.fail[i] += 1;
                    if self.first_failure[i].is_none() {
                        self.first_failure[i] = Some(outcome.clone());
                    }
                }
            }
        }
    }

    pub fn merge(&mut self, other: &LemmaTally) {
        self.runs += other.runs;
        self.clean_runs += other.clean_runs;
        for i in 0..4 {
            self.pass[i] += other.pass[i];
            self.fail[i] += other.fail[i];
            self.vacuous[i] += other.vacuous[i];
            if self.first_failure[i].is_none() {
                self.first_failure[i] = other.first_failure[i].clone();
            }
        }
    }

    pub fn any_failure(&self) -> bool {
        self.fail.iter().any(|&f| f > 0)
    }
}

/// Checks the clean-event assertions on a recorded trace.
pub fn check_lemma_assertions(
    trace: &EpisodeTrace,
    instance: &BanditInstance,
    config: &PolicyConfig,
) -> Result<LemmaReport> {
    let rounds = trace.round_log.as_ref().ok_or(Error::MissingRoundLog)?;
    if trace.k() != instance.k() {
        return Err(Error::ArmCountMismatch {
            trace: trace.k(),
            instance: instance.k(),
        });
    }
    if !trace.clean_event {
        return Ok(LemmaReport {
            clean_event: false,
            best_arm_kept: LemmaOutcome::Vacuous,
            mean_accuracy: LemmaOutcome::Vacuous,
            round_count: LemmaOutcome::Vacuous,
            pull_count: LemmaOutcome::Vacuous,
        });
    }

    let gaps = instance.gaps().gaps();
    let best_mean = instance.best_mean();
    let fail = |level, round, detail: String| LemmaOutcome::Fail {
        level,
        round,
        detail,
    };

    let mut best_arm_kept = LemmaOutcome::Pass;
    let mut mean_accuracy = LemmaOutcome::Pass;
    let mut pull_count = LemmaOutcome::Pass;
    for r in rounds {
        if !best_arm_kept.is_fail() {
            if let Some(arm) = (0..gaps.len()).find(|&i| gaps[i] == 0.0 && r.ruled_out[i]) {
                best_arm_kept = fail(r.level, r.round, format!("optimal arm {arm} ruled out"));
            }
        }
        if let (false, Some(s)) = (mean_accuracy.is_fail(), r.summary) {
            let err = (s.best_mean - best_mean).abs();
            let half = s.precision / 2.0;
            if err > half * (1.0 + SLACK) {
                mean_accuracy = fail(
                    r.level,
                    r.round,
                    format!(
                        "round-end mean {} is {err} from the best mean, above g/2 = {half}",
                        s.best_mean
                    ),
                );
            }
        }
        if !pull_count.is_fail() {
            let log_inv = -r.delta.ln();
            for (i, &n) in r.arm_pulls.iter().enumerate() {
                if n > r.budget {
                    pull_count = fail(
                        r.level,
                        r.round,
                        format!("arm {i} pulled {n} times, budget {}", r.budget),
                    );
                    break;
                }
                let margin = gaps[i] - r.prev_precision;
                if margin > 0.0 {
                    let bound = 2.0 * log_inv / (margin * margin) + 1.0;
                    if n as f64 > bound * (1.0 + SLACK) {
                        pull_count = fail(
                            r.level,
                            r.round,
                            format!("arm {i} pulled {n} times, bound {bound}"),
                        );
                        break;
                    }
                }
            }
        }
    }

    let round_count = match (instance.gaps().delta_min(), config.schedule()) {
        (Some(delta_min), Some(kind)) => {
            let bound = math::rmax_bound(delta_min, kind)?;
            match rounds.iter().find(|r| r.round > bound) {
                Some(r) => fail(
                    r.level,
                    r.round,
                    format!("round {} exceeds the bound {bound}", r.round),
                ),
                None => LemmaOutcome::Pass,
            }
        }
        _ => LemmaOutcome::Vacuous,
    };

    Ok(LemmaReport {
        clean_event: true,
        best_arm_kept,
        mean_accuracy,
        round_count,
        pull_count,
    })
}

/// Starting precisions of the offline schedule grid.
pub const GRID_STARTS: [f64; 2] = [0.5, 1.0];
/// Poly-log exponents of the offline schedule grid.
pub const GRID_EPSILONS: [f64; 3] = [0.25, 0.5, 1.0];

/// Targets `2^-4, ..., 2^-24`.
pub fn grid_targets() -> Vec<f64> {
    (4..=24).map(|j| 2f64.powi(-j)).collect()
}

/// One cell of the offline schedule check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheck {
    pub start: f64,
    pub target: f64,
    pub kind: ScheduleKind,
    pub rounds: u64,
    /// Exact count for the geometric schedule, upper bound for poly-log.
    pub bound: f64,
    pub pass: bool,
}

/// Iterates each schedule from every start to every target. Geometric
/// halving must take exactly `ceil(log2(start/target))` steps; the poly-log
/// schedule must stay within `(2/eps + 1) r0 + 2`.
pub fn check_schedule_grid(
    starts: &[f64],
    targets: &[f64],
    epsilons: &[f64],
) -> Result<Vec<ScheduleCheck>> {
    if starts.is_empty() || targets.is_empty() {
        return Err(Error::EmptyGrid("schedule grid"));
    }
    let mut out = Vec::new();
    for &start in starts {
        for &target in targets {
            let (g0, d) = (Precision::new(start)?, Precision::new(target)?);
            let rounds = math::rounds_to_precision(g0, d, ScheduleKind::Geometric)?;
            let exact = (start / target).log2().ceil();
            out.push(ScheduleCheck {
                start,
                target,
                kind: ScheduleKind::Geometric,
                rounds,
                bound: exact,
                pass: rounds as f64 == exact,
            });
            for &eps in epsilons {
                let kind = ScheduleKind::polylog(eps)?;
                let rounds = math::rounds_to_precision(g0, d, kind)?;
                let bound = math::polylog_round_bound(start, target, eps);
                out.push(ScheduleCheck {
                    start,
                    target,
                    kind,
                    rounds,
                    bound,
                    pass: rounds as f64 <= bound,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_custom, ArmDistribution};
    use crate::sim::{run_episode, EpisodeOptions};

    fn geometric() -> PolicyConfig {
        PolicyConfig::const_space(ScheduleKind::Geometric)
    }

    fn point_masses(values: &[f64]) -> BanditInstance {
        let arms = values
            .iter()
            .map(|&v| ArmDistribution::point_mass(v).unwrap())
            .collect();
        BanditInstance::new(arms).unwrap()
    }

    #[test]
    fn point_mass_runs_pass_everything() {
        let inst = point_masses(&[0.9, 0.8, 0.5, 0.3]);
        for cfg in [
            geometric(),
            PolicyConfig::const_space(ScheduleKind::polylog(0.5).unwrap()),
            PolicyConfig::const_space(ScheduleKind::AdaptiveRatio),
            PolicyConfig::Doubling {
                schedule: ScheduleKind::Geometric,
            },
        ] {
            let trace = run_episode(&cfg, &inst, 100_000, 1, EpisodeOptions::default()).unwrap();
            let report = check_lemma_assertions(&trace, &inst, &cfg).unwrap();
            assert!(report.clean_event);
            for (name, outcome) in report.outcomes() {
                assert_eq!(*outcome, LemmaOutcome::Pass, "{name} for {cfg:?}");
            }
        }
    }

    #[test]
    fn missing_round_log_is_an_error() {
        let inst = make_custom(&[0.9, 0.5]).unwrap();
        let trace = run_episode(
            &PolicyConfig::Ucb1,
            &inst,
            100,
            1,
            EpisodeOptions::default(),
        )
        .unwrap();
        assert_eq!(
            check_lemma_assertions(&trace, &inst, &PolicyConfig::Ucb1),
            Err(Error::MissingRoundLog)
        );
    }

    #[test]
    fn injected_pull_excess_fails_with_round() {
        let inst = point_masses(&[0.9, 0.6, 0.1]);
        let mut trace =
            run_episode(&geometric(), &inst, 100_000, 1, EpisodeOptions::default()).unwrap();
        let round2 = &mut trace.round_log.as_mut().unwrap()[1];
        // Gap 0.8 against g_1 = 1/2: the bound is 2L / 0.09 + 1, well under
        // the round budget of 32L.
        let bound = 2.0 * -round2.delta.ln() / 0.09 + 1.0;
        round2.arm_pulls[2] = bound.ceil() as u64 + 1;
        let report = check_lemma_assertions(&trace, &inst, &geometric()).unwrap();
        match report.pull_count {
            LemmaOutcome::Fail {
                level: 0, round: 2, ..
            } => {}
            other => panic!("expected a round-2 failure, got {other:?}"),
        }
        assert!(!report.passed());
    }

    #[test]
    fn unclean_runs_are_vacuous() {
        let inst = point_masses(&[0.9, 0.6, 0.1]);
        let mut trace =
            run_episode(&geometric(), &inst, 10_000, 1, EpisodeOptions::default()).unwrap();
        trace.clean_event = false;
        trace.round_log.as_mut().unwrap()[0].ruled_out[0] = true;
        let report = check_lemma_assertions(&trace, &inst, &geometric()).unwrap();
        assert!(report
            .outcomes()
            .iter()
            .all(|(_, o)| **o == LemmaOutcome::Vacuous));
        assert!(report.passed());
    }

    #[test]
    fn injected_best_rule_out_and_round_excess_fail() {
        let inst = point_masses(&[0.9, 0.6, 0.1]);
        let mut trace =
            run_episode(&geometric(), &inst, 100_000, 1, EpisodeOptions::default()).unwrap();
        let rounds = trace.round_log.as_mut().unwrap();
        rounds[1].ruled_out[0] = true;
        // Gap 0.3 allows ceil(log2(2/0.3)) = 3 rounds.
        rounds[1].round = 4;
        let report = check_lemma_assertions(&trace, &inst, &geometric()).unwrap();
        assert!(report.best_arm_kept.is_fail());
        assert!(report.round_count.is_fail());
    }

    #[test]
    fn schedule_grid_passes() {
        let checks = check_schedule_grid(&GRID_STARTS, &grid_targets(), &GRID_EPSILONS).unwrap();
        assert_eq!(checks.len(), 2 * 21 * 4);
        assert!(
            checks.iter().all(|c| c.pass),
            "{:?}",
            checks.iter().find(|c| !c.pass)
        );
        let g = checks
            .iter()
            .find(|c| c.start == 1.0 && c.target == 2f64.powi(-24))
            .unwrap();
        assert_eq!((g.rounds, g.bound), (24, 24.0));
    }

    #[test]
    fn bernoulli_runs_are_clean() {
        // The clean event fails with probability at most 2T^2 delta = 2/T.
        let inst = make_custom(&[0.9, 0.8, 0.5, 0.3]).unwrap();
        let mut tally = LemmaTally::default();
        for seed in 0..10 {
            let trace =
                run_episode(&geometric(), &inst, 20_000, seed, EpisodeOptions::default()).unwrap();
            tally.add(&check_lemma_assertions(&trace, &inst, &geometric()).unwrap());
        }
        assert_eq!(tally.runs, 10);
        assert_eq!(tally.clean_runs, 10);
        assert!(!tally.any_failure(), "{tally:?}");
    }
}
