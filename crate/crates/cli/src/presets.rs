//! Built-in experiment suites, selectable with `--preset`.

use crate::config::{
    Algorithm, ExperimentConfig, HorizonSection, InstanceSpec, PolicySpec, Preset, ScheduleName,
    SeedSection,
};
use crate::CliError;

pub const PRESET_NAMES: [&str; 5] = [
    "theorem3_scaling",
    "lemma_suite",
    "competitive_ratio",
    "doubling_overhead",
    "two_group_regimes",
];

fn policy(
    algorithm: Algorithm,
    schedule: Option<ScheduleName>,
    epsilon: Option<f64>,
) -> PolicySpec {
    PolicySpec {
        schedule,
        epsilon,
        ..PolicySpec::new(algorithm)
    }
}

fn geometric() -> PolicySpec {
    policy(Algorithm::ConstSpace, Some(ScheduleName::Geometric), None)
}

fn polylog_half() -> PolicySpec {
    policy(
        Algorithm::ConstSpace,
        Some(ScheduleName::Polylog),
        Some(0.5),
    )
}

fn suite(
    policies: Vec<PolicySpec>,
    instances: Vec<InstanceSpec>,
    horizons: &[u64],
    seeds: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        policies,
        instances,
        horizon: HorizonSection {
            values: horizons.to_vec(),
        },
        seeds: SeedSection {
            count: seeds,
            base: 0,
        },
        ..Default::default()
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let cfg = match name {
        // Regret against T on a two-arm instance.
        "theorem3_scaling" => suite(
            vec![geometric()],
            vec![InstanceSpec::custom(&[0.9, 0.6])],
            &[1_000, 10_000, 100_000, 1_000_000],
            50,
        ),
        "lemma_suite" => suite(
            vec![geometric()],
            vec![InstanceSpec::custom(&[0.9, 0.8, 0.5, 0.3])],
            &[100_000],
            100,
        ),
        "competitive_ratio" => suite(
            vec![
                geometric(),
                polylog_half(),
                PolicySpec::new(Algorithm::Ucb1),
            ],
            vec![InstanceSpec::linear(16)],
            &[100_000],
            50,
        ),
        "doubling_overhead" => suite(
            vec![
                geometric(),
                policy(Algorithm::Doubling, Some(ScheduleName::Geometric), None),
            ],
            vec![InstanceSpec::custom(&[0.9, 0.6])],
            &[10_000],
            50,
        ),
        "two_group_regimes" => suite(
            vec![
                geometric(),
                polylog_half(),
                policy(
                    Algorithm::ConstSpace,
                    Some(ScheduleName::AdaptiveRatio),
                    None,
                ),
            ],
            vec![
                InstanceSpec::new(Preset::TwoGroupEx1),
                InstanceSpec::new(Preset::TwoGroupEx2),
            ],
            &[100_000],
            20,
        ),
        _ => {
            return Err(CliError::Config(format!(
                "--preset: unknown preset `{name}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}
