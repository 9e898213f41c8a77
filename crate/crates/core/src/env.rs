//! Stochastic bandit instances and their seeded reward streams.
//!
//! Rewards come from `ChaCha8Rng` seeded with the episode seed, one ChaCha
//! stream per arm (`set_stream(arm)`). The n-th pull of an arm therefore sees
//! the same reward no matter how pulls of other arms are interleaved, which
//! keeps different policies run on the same seed directly comparable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::GapProfile;
use crate::policy::ArmId;

/// Reward distribution of one arm. Support is always within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmDistribution {
    Bernoulli {
        p: f64,
    },
    /// `scale * X` with `X ~ Beta(alpha, beta)`.
    ScaledBeta {
        alpha: f64,
        beta: f64,
        scale: f64,
    },
    PointMass {
        value: f64,
    },
}

impl ArmDistribution {
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::Bernoulli { p }.validate()
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::PointMass { value }.validate()
    }

    pub fn scaled_beta(alpha: f64, beta: f64, scale: f64) -> Result<Self> {
        Self::ScaledBeta { alpha, beta, scale }.validate()
    }

    /// Beta arm with the given mean and `alpha + beta = concentration`.
    /// Means of exactly 0 or 1 become point masses.
    pub fn beta_with_mean(mean: f64, concentration: f64) -> Result<Self> {
        check_unit(mean)?;
        if mean == 0.0 || mean == 1.0 {
            return Self::point_mass(mean);
        }
        Self::scaled_beta(mean * concentration, (1.0 - mean) * concentration, 1.0)
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            Self::Bernoulli { p } => check_unit(p).map_err(|_| {
                Error::InvalidDistribution(format!("bernoulli p = {p} outside [0, 1]"))
            })?,
            Self::PointMass { value } => check_unit(value).map_err(|_| {
                Error::InvalidDistribution(format!("point mass {value} outside [0, 1]"))
            })?,
            Self::ScaledBeta { alpha, beta, scale } => {
                let shape_ok = alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite();
                if !shape_ok || !(scale > 0.0 && scale <= 1.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "scaled beta needs alpha, beta > 0 and scale in (0, 1]; got ({alpha}, {beta}, {scale})"
                    )));
                }
            }
        }
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Bernoulli { p } => p,
            Self::ScaledBeta { alpha, beta, scale } => scale * alpha / (alpha + beta),
            Self::PointMass { value } => value,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Bernoulli { p } => {
                if rng.random_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ScaledBeta { alpha, beta, scale } => {
                // Parameters were validated on construction.
                let x: f64 = Beta::new(alpha, beta)
                    .expect("validated beta parameters")
                    .sample(rng);
                (scale * x).clamp(0.0, 1.0)
            }
            Self::PointMass { value } => value,
        }
    }
}

fn check_unit(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::MeanOutOfRange(v))
    }
}

/// Parameter regime a two-group instance must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoGroupRegime {
    #[default]
    Any,
    /// Many near-optimal arms: `s > 1/2`.
    ManyNearOptimal,
    /// Few near-optimal arms: `s < 1/2` and `s/(1-s) < eps/E`.
    FewNearOptimal,
}

/// A fixed set of arms and the ground truth derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    arms: Vec<ArmDistribution>,
    best: usize,
    gaps: GapProfile,
}

impl BanditInstance {
    pub fn new(arms: Vec<ArmDistribution>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::NoArms);
        }
        let arms = arms
            .into_iter()
            .map(ArmDistribution::validate)
            .collect::<Result<Vec<_>>>()?;
        let means: Vec<f64> = arms.iter().map(ArmDistribution::mean).collect();
        // First arm attaining the maximum.
        let best = means
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m > means[best] { i } else { best });
        let gaps = GapProfile::from_means(&means)?;
        Ok(Self { arms, best, gaps })
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    pub fn best(&self) -> ArmId {
        ArmId(self.best)
    }

    pub fn best_mean(&self) -> f64 {
        self.arms[self.best].mean()
    }

    pub fn mean(&self, arm: ArmId) -> f64 {
        self.arms[arm.0].mean()
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(ArmDistribution::mean).collect()
    }

    pub fn gaps(&self) -> &GapProfile {
        &self.gaps
    }

    pub fn is_degenerate(&self) -> bool {
        self.gaps.is_degenerate()
    }

    /// One draw from `arm`'s distribution, advancing that arm's stream.
    pub fn sample_reward(&self, arm: ArmId, streams: &mut RewardStreams) -> Result<f64> {
        let dist = self.arms.get(arm.0).ok_or(Error::ArmOutOfRange {
            arm: arm.0,
            k: self.k(),
        })?;
        Ok(dist.sample(streams.stream(arm.0)))
    }
}

/// Bernoulli instance with the given means.
pub fn make_custom(means: &[f64]) -> Result<BanditInstance> {
    let arms = means
        .iter()
        .map(|&m| ArmDistribution::bernoulli(m).map_err(|_| Error::MeanOutOfRange(m)))
        .collect::<Result<Vec<_>>>()?;
    BanditInstance::new(arms)
}

/// Two-group instance: the first `floor(sK)` arms form the near-optimal
/// group (the best arm at gap 0, the others at gap `low_gap`); the rest sit
/// at gap `high_gap`. Bernoulli arms with mean `best_mean - gap`.
pub fn make_two_group(
    k: usize,
    s: f64,
    low_gap: f64,
    high_gap: f64,
    best_mean: f64,
    regime: TwoGroupRegime,
) -> Result<BanditInstance> {
    let bad = |msg: String| Err(Error::InvalidInstance(msg));
    if k < 3 {
        return bad(format!("two-group instance needs K >= 3, got {k}"));
    }
    if !(s > 0.0 && s < 1.0) {
        return bad(format!("fraction s = {s} outside (0, 1)"));
    }
    if !(low_gap > 0.0 && low_gap < high_gap && high_gap < 1.0) {
        return bad(format!(
            "need 0 < eps < E < 1, got eps = {low_gap}, E = {high_gap}"
        ));
    }
    check_unit(best_mean)?;
    if best_mean - high_gap < 0.0 {
        return Err(Error::MeanOutOfRange(best_mean - high_gap));
    }
    match regime {
        TwoGroupRegime::Any => {}
        TwoGroupRegime::ManyNearOptimal => {
            if s <= 0.5 {
                return bad(format!("many-near-optimal regime needs s > 1/2, got {s}"));
            }
        }
        TwoGroupRegime::FewNearOptimal => {
            if !(s < 0.5 && s / (1.0 - s) < low_gap / high_gap) {
                return bad(format!(
                    "few-near-optimal regime needs s < 1/2 and s/(1-s) < eps/E, got s = {s}, eps/E = {}",
                    low_gap / high_gap
                ));
            }
        }
    }
    let group = (s * k as f64).floor() as usize;
    if group == 0 {
        return bad(format!(
            "floor(sK) = 0 leaves no room for the best arm (s = {s}, K = {k})"
        ));
    }
    let means: Vec<f64> = (0..k)
        .map(|i| match i {
            0 => best_mean,
            i if i < group => best_mean - low_gap,
            _ => best_mean - high_gap,
        })
        .collect();
    make_custom(&means)
}

/// Arm family used by generators that only fix the means.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmFamily {
    #[default]
    Bernoulli,
    /// Beta arms with `alpha + beta = concentration`.
    Beta { concentration: f64 },
    /// Deterministic rewards equal to the mean.
    PointMass,
}

impl ArmFamily {
    pub fn arm(self, mean: f64) -> Result<ArmDistribution> {
        match self {
            Self::Bernoulli => ArmDistribution::bernoulli(mean),
            Self::Beta { concentration } => ArmDistribution::beta_with_mean(mean, concentration),
            Self::PointMass => ArmDistribution::point_mass(mean),
        }
    }
}

/// Instance with the given means, one arm of `family` per mean.
pub fn make_from_means(means: &[f64], family: ArmFamily) -> Result<BanditInstance> {
    let arms = means
        .iter()
        .map(|&m| family.arm(m))
        .collect::<Result<Vec<_>>>()?;
    BanditInstance::new(arms)
}

/// Linear gap ladder `D_i = i/K`, `i = 0..K-1`.
pub fn make_linear_gaps(k: usize, best_mean: f64, family: ArmFamily) -> Result<BanditInstance> {
    if k < 2 {
        return Err(Error::InvalidInstance(format!(
            "linear ladder needs K >= 2, got {k}"
        )));
    }
    check_unit(best_mean)?;
    let kf = k as f64;
    if best_mean < (kf - 1.0) / kf {
        return Err(Error::InvalidInstance(format!(
            "best mean {best_mean} below (K-1)/K = {}",
            (kf - 1.0) / kf
        )));
    }
    let arms = (0..k)
        .map(|i| family.arm((best_mean - i as f64 / kf).max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    BanditInstance::new(arms)
}

/// Per-episode reward randomness: one ChaCha8 stream per arm, created on
/// first use.
#[derive(Debug, Clone)]
pub struct RewardStreams {
    seed: u64,
    streams: Vec<Option<ChaCha8Rng>>,
}

impl RewardStreams {
    pub fn new(seed: u64, k: usize) -> Self {
        Self {
            seed,
            streams: vec![None; k],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream(&mut self, arm: usize) -> &mut ChaCha8Rng {
        let seed = self.seed;
        self.streams[arm].get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(arm as u64);
            rng
        })
    }
}
