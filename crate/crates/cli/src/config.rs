//! Experiment configuration: a TOML file with one section per grid axis.
//!
//! ```toml
//! [[policy]]
//! algorithm = "const_space"
//! schedule = "polylog"
//! epsilon = 0.5
//!
//! [[instance]]
//! preset = "custom"
//! means = [0.9, 0.6]
//!
//! [horizon]
//! values = [1000, 10000]
//!
//! [seeds]
//! count = 50
//! base = 0
//!
//! [output]
//! format = "both"
//! dir = "results"
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use constbandit::env::{self, ArmFamily, BanditInstance, TwoGroupRegime};
use constbandit::math::ScheduleKind;
use constbandit::policy::PolicyConfig;
use constbandit::sim::InstanceEntry;

use crate::CliError;

pub const DEFAULT_BEST_MEAN: f64 = 0.9;
pub const DEFAULT_SEED_COUNT: u64 = 10;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, rename = "policy")]
    pub policies: Vec<PolicySpec>,
    #[serde(default, rename = "instance")]
    pub instances: Vec<InstanceSpec>,
    #[serde(default)]
    pub horizon: HorizonSection,
    #[serde(default)]
    pub seeds: SeedSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    #[serde(default)]
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    #[serde(default = "default_seed_count")]
    pub count: u64,
    #[serde(default)]
    pub base: u64,
}

fn default_seed_count() -> u64 {
    DEFAULT_SEED_COUNT
}

impl Default for SeedSection {
    fn default() -> Self {
        Self {
            count: DEFAULT_SEED_COUNT,
            base: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: OutputFormat::default(),
            dir: default_dir(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ConstSpace,
    Doubling,
    Ucb1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Geometric,
    Polylog,
    AdaptiveRatio,
}

/// One `[[policy]]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub algorithm: Algorithm,
    /// Defaults to geometric for the constant-space policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleName>,
    /// Exponent of the poly-log schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Alternative to `epsilon`: the regret-bound exponent `2 * epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Confidence override for `const_space`; default `1/T^3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl PolicySpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            schedule: None,
            epsilon: None,
            gamma: None,
            delta: None,
        }
    }

    pub fn to_config(&self, field: &str) -> Result<PolicyConfig, CliError> {
        let bad = |key: &str, msg: String| CliError::Config(format!("{field}.{key}: {msg}"));
        let schedule = match (self.schedule, self.epsilon, self.gamma) {
            (_, Some(_), Some(_)) => {
                return Err(bad("gamma", "give epsilon or gamma, not both".into()))
            }
            (Some(ScheduleName::Polylog), eps, gamma) => {
                let eps = eps.or(gamma.map(|g| g / 2.0)).unwrap_or(0.5);
                ScheduleKind::polylog(eps).map_err(|e| bad("epsilon", e.to_string()))?
            }
            (_, Some(_), _) | (_, _, Some(_)) => {
                return Err(bad(
                    "epsilon",
                    "only the polylog schedule takes an exponent".into(),
                ))
            }
            (Some(ScheduleName::AdaptiveRatio), ..) => ScheduleKind::AdaptiveRatio,
            (Some(ScheduleName::Geometric) | None, ..) => ScheduleKind::Geometric,
        };
        match self.algorithm {
            Algorithm::ConstSpace => {
                if let Some(d) = self.delta {
                    if !(d > 0.0 && d <= 1.0) {
                        return Err(bad("delta", format!("{d} outside (0, 1]")));
                    }
                }
                Ok(PolicyConfig::ConstSpace {
                    schedule,
                    delta: self.delta,
                })
            }
            Algorithm::Doubling => {
                if self.delta.is_some() {
                    return Err(bad(
                        "delta",
                        "the doubling wrapper sets delta per level".into(),
                    ));
                }
                Ok(PolicyConfig::Doubling { schedule })
            }
            Algorithm::Ucb1 => {
                if self.schedule.is_some() {
                    return Err(bad("schedule", "not used by ucb1".into()));
                }
                if self.delta.is_some() {
                    return Err(bad("delta", "not used by ucb1".into()));
                }
                Ok(PolicyConfig::Ucb1)
            }
        }
    }
}

/// `algorithm[:key=value,...]`, e.g. `const_space:schedule=polylog,epsilon=0.5`.
impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, params) = split_spec(s);
        let algorithm = parse_enum::<Algorithm>(name, "algorithm")?;
        let mut spec = Self::new(algorithm);
        for (key, value) in params? {
            match key {
                "schedule" => spec.schedule = Some(parse_enum(value, "schedule")?),
                "epsilon" => spec.epsilon = Some(parse_num(key, value)?),
                "gamma" => spec.gamma = Some(parse_num(key, value)?),
                "delta" => spec.delta = Some(parse_num(key, value)?),
                _ => return Err(format!("unknown policy key `{key}`")),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Custom,
    TwoGroup,
    TwoGroupEx1,
    TwoGroupEx2,
    Linear,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Custom => "custom",
            Self::TwoGroup => "two_group",
            Self::TwoGroupEx1 => "two_group_ex1",
            Self::TwoGroupEx2 => "two_group_ex2",
            Self::Linear => "linear",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Bernoulli,
    Beta,
    PointMass,
}

impl FamilyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bernoulli => "bernoulli",
            Self::Beta => "beta",
            Self::PointMass => "point_mass",
        }
    }

    fn family(self, concentration: Option<f64>) -> ArmFamily {
        match self {
            Self::Bernoulli => ArmFamily::Bernoulli,
            Self::Beta => ArmFamily::Beta {
                concentration: concentration.unwrap_or(2.0),
            },
            Self::PointMass => ArmFamily::PointMass,
        }
    }
}

/// One `[[instance]]` table. Which keys are required depends on `preset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub preset: Preset,
    /// Label used in reports; derived from the parameters when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Fraction of arms in the near-optimal group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<f64>,
}

/// Two-group defaults: (K, s, eps, E).
const EX1_DEFAULTS: (usize, f64, f64, f64) = (20, 0.75, 0.05, 0.5);
const EX2_DEFAULTS: (usize, f64, f64, f64) = (100, 0.05, 0.1, 0.8);

impl InstanceSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            name: None,
            means: None,
            k: None,
            s: None,
            low_gap: None,
            high_gap: None,
            best_mean: None,
            family: None,
            concentration: None,
        }
    }

    pub fn custom(means: &[f64]) -> Self {
        Self {
            means: Some(means.to_vec()),
            ..Self::new(Preset::Custom)
        }
    }

    pub fn linear(k: usize) -> Self {
        Self {
            k: Some(k),
            ..Self::new(Preset::Linear)
        }
    }

    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let mut parts = Vec::new();
        if let Some(means) = &self.means {
            let m: Vec<String> = means.iter().map(f64::to_string).collect();
            parts.push(m.join(" "));
        }
        if let Some(k) = self.k {
            parts.push(format!("K={k}"));
        }
        if let Some(f) = self.family {
            parts.push(f.as_str().to_string());
        }
        for (key, v) in [
            ("s", self.s),
            ("eps", self.low_gap),
            ("E", self.high_gap),
            ("best", self.best_mean),
        ] {
            if let Some(v) = v {
                parts.push(format!("{key}={v}"));
            }
        }
        if parts.is_empty() {
            self.preset.to_string()
        } else {
            format!("{}[{}]", self.preset, parts.join(" "))
        }
    }

    pub fn build(&self, field: &str) -> Result<BanditInstance, CliError> {
        let missing = |key: &str| {
            CliError::Config(format!(
                "{field}.{key}: required for preset {}",
                self.preset
            ))
        };
        let unused = |key: &str, present: bool| {
            if present {
                Err(CliError::Config(format!(
                    "{field}.{key}: not used by preset {}",
                    self.preset
                )))
            } else {
                Ok(())
            }
        };
        let invalid = |e: constbandit::Error| CliError::Config(format!("{field}: {e}"));
        let best_mean = self.best_mean.unwrap_or(DEFAULT_BEST_MEAN);
        match self.preset {
            Preset::Custom => {
                unused("k", self.k.is_some())?;
                unused("s", self.s.is_some())?;
                unused("best_mean", self.best_mean.is_some())?;
                let family = self.family.unwrap_or(FamilyName::Bernoulli);
                unused(
                    "concentration",
                    self.concentration.is_some() && family != FamilyName::Beta,
                )?;
                let means = self.means.as_ref().ok_or_else(|| missing("means"))?;
                env::make_from_means(means, family.family(self.concentration)).map_err(invalid)
            }
            Preset::TwoGroup | Preset::TwoGroupEx1 | Preset::TwoGroupEx2 => {
                unused("means", self.means.is_some())?;
                unused("family", self.family.is_some())?;
                let (regime, defaults) = match self.preset {
                    Preset::TwoGroupEx1 => (TwoGroupRegime::ManyNearOptimal, Some(EX1_DEFAULTS)),
                    Preset::TwoGroupEx2 => (TwoGroupRegime::FewNearOptimal, Some(EX2_DEFAULTS)),
                    _ => (TwoGroupRegime::Any, None),
                };
                let pick = |v: Option<usize>, d: Option<usize>, key: &str| {
                    v.or(d).ok_or_else(|| missing(key))
                };
                let pickf =
                    |v: Option<f64>, d: Option<f64>, key: &str| v.or(d).ok_or_else(|| missing(key));
                let k = pick(self.k, defaults.map(|d| d.0), "k")?;
                let s = pickf(self.s, defaults.map(|d| d.1), "s")?;
                let low = pickf(self.low_gap, defaults.map(|d| d.2), "low_gap")?;
                let high = pickf(self.high_gap, defaults.map(|d| d.3), "high_gap")?;
                env::make_two_group(k, s, low, high, best_mean, regime).map_err(invalid)
            }
            Preset::Linear => {
                unused("means", self.means.is_some())?;
                unused("s", self.s.is_some())?;
                let k = self.k.ok_or_else(|| missing("k"))?;
                let family = self.family.unwrap_or(FamilyName::Bernoulli);
                unused(
                    "concentration",
                    self.concentration.is_some() && family != FamilyName::Beta,
                )?;
                env::make_linear_gaps(
                    k,
                    self.best_mean.unwrap_or(1.0),
                    family.family(self.concentration),
                )
                .map_err(invalid)
            }
        }
    }

    pub fn entry(&self, field: &str) -> Result<InstanceEntry, CliError> {
        Ok(InstanceEntry {
            name: self.label(),
            instance: self.build(field)?,
        })
    }
}

/// `preset[:key=value,...]`; list values use `/`, e.g.
/// `custom:means=0.9/0.6` or `linear:k=16`.
impl FromStr for InstanceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, params) = split_spec(s);
        let mut spec = Self::new(parse_enum::<Preset>(name, "preset")?);
        for (key, value) in params? {
            match key {
                "name" => spec.name = Some(value.to_string()),
                "means" => {
                    spec.means = Some(
                        value
                            .split('/')
                            .map(|v| parse_num(key, v))
                            .collect::<Result<_, _>>()?,
                    )
                }
                "k" => spec.k = Some(parse_num(key, value)?),
                "s" => spec.s = Some(parse_num(key, value)?),
                "low_gap" => spec.low_gap = Some(parse_num(key, value)?),
                "high_gap" => spec.high_gap = Some(parse_num(key, value)?),
                "best_mean" => spec.best_mean = Some(parse_num(key, value)?),
                "family" => spec.family = Some(parse_enum(value, "family")?),
                "concentration" => spec.concentration = Some(parse_num(key, value)?),
                _ => return Err(format!("unknown instance key `{key}`")),
            }
        }
        Ok(spec)
    }
}

type Params<'a> = Result<Vec<(&'a str, &'a str)>, String>;

fn split_spec(s: &str) -> (&str, Params<'_>) {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let params = rest
        .split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{p}`"))
        })
        .collect();
    (name.trim(), params)
}

fn parse_enum<T: serde::de::DeserializeOwned>(value: &str, what: &str) -> Result<T, String> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(value))
        .map_err(|_| format!("unknown {what} `{value}`"))
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("bad value `{value}` for `{key}`"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn policy_configs(&self) -> Result<Vec<PolicyConfig>, CliError> {
        self.policies
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_config(&format!("policy[{i}]")))
            .collect()
    }

    pub fn instance_entries(&self) -> Result<Vec<InstanceEntry>, CliError> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, spec)| spec.entry(&format!("instance[{i}]")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_parses() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [[policy]]
            algorithm = "const_space"
            schedule = "polylog"
            epsilon = 0.25

            [[policy]]
            algorithm = "ucb1"

            [[instance]]
            preset = "custom"
            means = [0.9, 0.6]

            [[instance]]
            preset = "linear"
            k = 16

            [horizon]
            values = [1000, 10000]

            [seeds]
            count = 3
            base = 11

            [output]
            format = "csv"
            dir = "out"
            "#,
        )
        .unwrap();
        let policies = cfg.policy_configs().unwrap();
        assert_eq!(
            policies[0],
            PolicyConfig::ConstSpace {
                schedule: ScheduleKind::PolyLog { epsilon: 0.25 },
                delta: None
            }
        );
        assert_eq!(policies[1], PolicyConfig::Ucb1);
        let instances = cfg.instance_entries().unwrap();
        assert_eq!(instances[1].instance.k(), 16);
        assert_eq!(instances[0].name, "custom[0.9 0.6]");
        assert_eq!(cfg.seeds, SeedSection { count: 3, base: 11 });
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn missing_preset_names_the_field() {
        let err = ExperimentConfig::from_toml("[[instance]]\nmeans = [0.5]\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("preset"), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig {
            policies: vec![PolicySpec {
                delta: Some(1e-7),
                ..PolicySpec::new(Algorithm::ConstSpace)
            }],
            instances: vec![
                InstanceSpec::custom(&[0.9, 0.1 + 0.2]),
                InstanceSpec::linear(8),
            ],
            ..Default::default()
        };
        cfg.horizon.values = vec![10, 1 << 40];
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn flag_specs() {
        let p: PolicySpec = "doubling:schedule=polylog,gamma=1".parse().unwrap();
        assert_eq!(
            p.to_config("policy").unwrap(),
            PolicyConfig::Doubling {
                schedule: ScheduleKind::PolyLog { epsilon: 0.5 }
            }
        );
        let i: InstanceSpec = "custom:means=0.9/0.6".parse().unwrap();
        assert_eq!(i, InstanceSpec::custom(&[0.9, 0.6]));
        assert!("bogus".parse::<PolicySpec>().is_err());
        assert!("linear:k".parse::<InstanceSpec>().is_err());
    }

    #[test]
    fn preset_field_errors() {
        let err = InstanceSpec::new(Preset::Custom)
            .build("instance[0]")
            .unwrap_err();
        assert_eq!(
            err.to_string(),
            "instance[0].means: required for preset custom"
        );
        let err = "ucb1:schedule=geometric"
            .parse::<PolicySpec>()
            .unwrap()
            .to_config("policy[1]")
            .unwrap_err();
        assert_eq!(err.to_string(), "policy[1].schedule: not used by ucb1");
    }

    #[test]
    fn example_presets_use_defaults() {
        let ex1 = InstanceSpec::new(Preset::TwoGroupEx1).build("i").unwrap();
        assert_eq!(ex1.k(), 20);
        let ex2 = InstanceSpec::new(Preset::TwoGroupEx2).build("i").unwrap();
        assert_eq!(ex2.k(), 100);
        let bad = InstanceSpec {
            s: Some(0.4),
            ..InstanceSpec::new(Preset::TwoGroupEx1)
        };
        assert!(bad.build("i").is_err());
    }
}
