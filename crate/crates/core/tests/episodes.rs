//! Whole-episode behaviour through the public API.

use constbandit::env::{make_from_means, ArmFamily, BanditInstance};
use constbandit::math::ScheduleKind;
use constbandit::policy::{policy_reset, ArmId, Horizon, Policy, PolicyConfig};
use constbandit::sim::{
    check_lemma_assertions, pseudo_regret, run_episode, EpisodeOptions, EpisodeTrace,
};
use proptest::prelude::*;

fn logged() -> EpisodeOptions {
    EpisodeOptions {
        action_log: Some(true),
    }
}

fn schedules() -> impl Strategy<Value = ScheduleKind> {
    prop_oneof![
        Just(ScheduleKind::Geometric),
        (0.25f64..=1.0).prop_map(|e| ScheduleKind::PolyLog { epsilon: e }),
        Just(ScheduleKind::AdaptiveRatio),
    ]
}

fn configs() -> impl Strategy<Value = PolicyConfig> {
    prop_oneof![
        schedules().prop_map(PolicyConfig::const_space),
        schedules().prop_map(|schedule| PolicyConfig::Doubling { schedule }),
        Just(PolicyConfig::Ucb1),
    ]
}

fn families() -> impl Strategy<Value = ArmFamily> {
    prop_oneof![
        Just(ArmFamily::Bernoulli),
        Just(ArmFamily::PointMass),
        (1.0f64..20.0).prop_map(|c| ArmFamily::Beta { concentration: c }),
    ]
}

fn instances() -> impl Strategy<Value = BanditInstance> {
    (prop::collection::vec(0.02f64..0.98, 1..7), families())
        .prop_map(|(means, family)| make_from_means(&means, family).unwrap())
}

fn committed_tail_is_constant(trace: &EpisodeTrace) -> bool {
    let Some(arm) = trace.committed else {
        return true;
    };
    let log = trace.action_log.as_ref().unwrap();
    // Exploitation runs to the horizon, so the final pull is the committed arm.
    log.last() == Some(&arm)
}

#[test]
fn single_arm_is_free() {
    let inst = make_from_means(&[0.2], ArmFamily::Bernoulli).unwrap();
    for config in [
        PolicyConfig::const_space(ScheduleKind::Geometric),
        PolicyConfig::Ucb1,
    ] {
        let trace = run_episode(&config, &inst, 50, 1, logged()).unwrap();
        assert_eq!(trace.pull_counts, [50]);
        assert_eq!(pseudo_regret(&trace, &inst).unwrap(), 0.0);
    }
}

#[test]
fn doubling_starts_at_ten_and_squares() {
    let mut p = policy_reset(
        5,
        Horizon::Unknown,
        &PolicyConfig::const_space(ScheduleKind::Geometric),
    )
    .unwrap();
    assert_eq!(p.level(), Some((0, 10)));
    let mut seen = vec![p.level().unwrap()];
    for _ in 0..10_000 {
        p.observe(0.5).unwrap();
        let lv = p.level().unwrap();
        if *seen.last().unwrap() != lv {
            seen.push(lv);
        }
    }
    assert_eq!(seen, [(0, 10), (1, 100), (2, 10_000)]);
    assert_eq!(p.steps(), 10_000);
}

#[test]
fn known_horizon_state_at_reset() {
    let p = policy_reset(
        10,
        Horizon::Known(1_000),
        &PolicyConfig::const_space(ScheduleKind::Geometric),
    )
    .unwrap();
    let s = p.const_space_state().unwrap();
    assert_eq!(s.precision().value(), 0.5);
    assert_eq!(s.budget(), 166);
    assert_eq!(s.scan_arm(), ArmId(0));
    assert_eq!(p.state_words(), 22);
}

#[test]
fn exploitation_pulls_only_the_committed_arm() {
    let inst = make_from_means(&[0.1, 0.3, 0.95], ArmFamily::PointMass).unwrap();
    let trace = run_episode(
        &PolicyConfig::const_space(ScheduleKind::Geometric),
        &inst,
        20_000,
        0,
        logged(),
    )
    .unwrap();
    assert_eq!(trace.committed, Some(ArmId(2)));
    let log = trace.action_log.unwrap();
    let first = log
        .iter()
        .rposition(|&a| a != ArmId(2))
        .map_or(0, |i| i + 1);
    assert!(first < 5_000, "exploration ran to step {first}");
    assert!(log[first..].iter().all(|&a| a == ArmId(2)));
}

#[test]
fn traces_survive_json() {
    let inst = make_from_means(&[0.9, 0.8, 0.5, 0.3], ArmFamily::Bernoulli).unwrap();
    let config = PolicyConfig::Doubling {
        schedule: ScheduleKind::polylog(0.5).unwrap(),
    };
    let trace = run_episode(&config, &inst, 30_000, 9, logged()).unwrap();
    let back: EpisodeTrace = serde_json::from_str(&serde_json::to_string(&trace).unwrap()).unwrap();
    assert_eq!(back, trace);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episode_invariants(config in configs(), inst in instances(), horizon in 1u64..4_000, seed in any::<u64>()) {
        let trace = run_episode(&config, &inst, horizon, seed, logged()).unwrap();
        prop_assert_eq!(trace.steps, horizon);
        prop_assert_eq!(trace.pull_counts.iter().sum::<u64>(), horizon);
        prop_assert_eq!(trace.action_log.as_ref().unwrap().len() as u64, horizon);
        prop_assert!(committed_tail_is_constant(&trace));

        let regret = pseudo_regret(&trace, &inst).unwrap();
        prop_assert_eq!(trace.trajectory.last().map(|p| (p.t, p.regret)), Some((horizon, regret)));

        match config {
            PolicyConfig::Ucb1 => {
                prop_assert_eq!(trace.state_words_peak, 2 * inst.k() + 7);
            }
            PolicyConfig::ConstSpace { .. } => {
                prop_assert_eq!((trace.state_words_reset, trace.state_words_peak), (22, 22));
            }
            PolicyConfig::Doubling { .. } => {
                prop_assert_eq!((trace.state_words_reset, trace.state_words_peak), (25, 25));
                let levels = trace.levels.as_ref().unwrap();
                prop_assert_eq!(levels.iter().map(|l| l.steps).sum::<u64>(), horizon);
                for (l, lv) in levels.iter().enumerate() {
                    prop_assert_eq!(lv.sub_horizon, 10u64.pow(1 << l));
                }
            }
        }

        let again = run_episode(&config, &inst, horizon, seed, logged()).unwrap();
        prop_assert_eq!(again, trace);
    }

    /// The round-level guarantees hold on every run whose estimates stayed
    /// inside their confidence radii.
    #[test]
    fn clean_runs_satisfy_the_lemmas(
        schedule in schedules(),
        doubling in any::<bool>(),
        inst in instances(),
        horizon in 100u64..30_000,
        seed in any::<u64>(),
    ) {
        let config = if doubling {
            PolicyConfig::Doubling { schedule }
        } else {
            PolicyConfig::const_space(schedule)
        };
        let trace = run_episode(&config, &inst, horizon, seed, EpisodeOptions { action_log: Some(false) }).unwrap();
        let report = check_lemma_assertions(&trace, &inst, &config).unwrap();
        prop_assert_eq!(report.clean_event, trace.clean_event);
        prop_assert!(report.passed(), "{:?}", report);
    }
}
