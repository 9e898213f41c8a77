//! Closed-form quantities shared by the policies and the harness.
//!
//! Confidence terms `ln(1/delta)` use the natural logarithm, which is the
//! base the Hoeffding tail `2 exp(-2 n eps^2)` is written in. Precision
//! schedules and the round-count bounds work in base 2, matching
//! `g_r = 2^-r` for the geometric schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard stop for [`rounds_to_precision`].
pub const ROUND_ITERATION_CAP: u64 = 1_000_000;

/// Per-deviation failure probability `delta`, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Confidence(f64);

impl Confidence {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta <= 1.0 {
            Ok(Self(delta))
        } else {
            Err(Error::InvalidConfidence(delta))
        }
    }

    /// `delta = 1 / T^3`. Horizons below 2 clamp to `delta = 1/8` so that
    /// `ln(1/delta)` stays positive.
    pub fn for_horizon(horizon: u64) -> Self {
        if horizon < 2 {
            return Self(0.125);
        }
        let t = horizon as f64;
        Self(1.0 / (t * t * t))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `ln(1/delta)`.
    pub fn log_inv(self) -> f64 {
        -self.0.ln()
    }
}

impl TryFrom<f64> for Confidence {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Confidence> for f64 {
    fn from(c: Confidence) -> f64 {
        c.0
    }
}

/// Target half-width `g` of a round's mean estimates, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Precision(f64);

impl Precision {
    /// Precision of the first round.
    pub const INITIAL: Precision = Precision(0.5);

    pub fn new(g: f64) -> Result<Self> {
        if g > 0.0 && g <= 1.0 {
            Ok(Self(g))
        } else {
            Err(Error::InvalidPrecision(g))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Precision {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Precision> for f64 {
    fn from(p: Precision) -> f64 {
        p.0
    }
}

/// Rule mapping the precision of one round to the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `g' = g / 2`.
    Geometric,
    /// `g' = g / (2 max{1, log2(1/g)}^epsilon)`.
    PolyLog { epsilon: f64 },
    /// `g' = g / (2 max{1, (1 - s)/s})`, `s` the fraction of arms that
    /// survived the finished round.
    AdaptiveRatio,
}

impl ScheduleKind {
    pub fn polylog(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self::PolyLog { epsilon })
        } else {
            Err(Error::InvalidExponent(epsilon))
        }
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            Self::PolyLog { epsilon } => Self::polylog(epsilon),
            other => Ok(other),
        }
    }

    pub fn label(self) -> String {
        match self {
            Self::Geometric => "geometric".to_string(),
            Self::PolyLog { epsilon } => format!("polylog({epsilon})"),
            Self::AdaptiveRatio => "adaptive_ratio".to_string(),
        }
    }
}

/// Gaps `mu* - mu_i` of every arm, with the smallest positive gap cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    gaps: Vec<f64>,
    delta_min: Option<f64>,
}

impl GapProfile {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::NoArms);
        }
        if let Some(&bad) = gaps.iter().find(|g| !(**g >= 0.0 && **g <= 1.0)) {
            return Err(Error::InvalidGap(bad));
        }
        if !gaps.contains(&0.0) {
            return Err(Error::InvalidInstance("no arm has gap 0".to_string()));
        }
        let delta_min = gaps
            .iter()
            .copied()
            .filter(|&g| g > 0.0)
            .min_by(f64::total_cmp);
        Ok(Self { gaps, delta_min })
    }

    pub fn from_means(means: &[f64]) -> Result<Self> {
        if let Some(&bad) = means.iter().find(|m| !(**m >= 0.0 && **m <= 1.0)) {
            return Err(Error::MeanOutOfRange(bad));
        }
        let best = means
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .ok_or(Error::NoArms)?;
        Self::new(means.iter().map(|&m| best - m).collect())
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Smallest positive gap, `None` when every arm is optimal.
    pub fn delta_min(&self) -> Option<f64> {
        self.delta_min
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta_min.is_none()
    }
}

/// Hoeffding half-width `sqrt(ln(1/delta) / 2n)`.
pub fn hoeffding_radius(n: u64, delta: Confidence) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroPulls);
    }
    Ok((delta.log_inv() / (2.0 * n as f64)).sqrt())
}

/// Pulls per arm in a round: `ceil(2 ln(1/delta) / g^2)`.
pub fn round_budget(g: Precision, delta: Confidence) -> Result<u64> {
    if delta.value() >= 1.0 {
        return Err(Error::InvalidConfidence(delta.value()));
    }
    let raw = (2.0 * delta.log_inv() / (g.value() * g.value())).ceil();
    // 2^64 is exactly representable; anything at or above it cannot fit.
    if !raw.is_finite() || raw >= 18_446_744_073_709_551_616.0 {
        return Err(Error::BudgetOverflow {
            precision: g.value(),
            delta: delta.value(),
        });
    }
    Ok(raw as u64)
}

/// Precision of the next round under `kind`.
///
/// `survivor_fraction` is only read by [`ScheduleKind::AdaptiveRatio`].
/// Every variant returns at most `g / 2`.
pub fn next_precision(
    g: Precision,
    kind: ScheduleKind,
    survivor_fraction: Option<f64>,
) -> Result<Precision> {
    let g = g.value();
    let divisor = match kind {
        ScheduleKind::Geometric => 2.0,
        ScheduleKind::PolyLog { epsilon } => {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidExponent(epsilon));
            }
            2.0 * (1.0 / g).log2().max(1.0).powf(epsilon)
        }
        ScheduleKind::AdaptiveRatio => {
            let s = match survivor_fraction {
                Some(s) if s > 0.0 && s <= 1.0 => s,
                other => return Err(Error::InvalidSurvivorFraction(other)),
            };
            2.0 * ((1.0 - s) / s).max(1.0)
        }
    };
    let next = g / divisor;
    if next > 0.0 {
        Ok(Precision(next))
    } else {
        Err(Error::InvalidPrecision(next))
    }
}

/// Number of schedule steps needed to move from `start` to at most `target`.
pub fn rounds_to_precision(start: Precision, target: Precision, kind: ScheduleKind) -> Result<u64> {
    if let ScheduleKind::AdaptiveRatio = kind {
        return Err(Error::ScheduleNeedsRuntimeData("adaptive_ratio"));
    }
    if target.value() > start.value() {
        return Err(Error::TargetNotBelowStart {
            start: start.value(),
            target: target.value(),
        });
    }
    let mut g = start;
    let mut steps = 0;
    while g.value() > target.value() {
        if steps == ROUND_ITERATION_CAP {
            return Err(Error::IterationCap(ROUND_ITERATION_CAP));
        }
        g = next_precision(g, kind, None)?;
        steps += 1;
    }
    Ok(steps)
}

/// Upper bound `(2/eps + 1) r0 + 2` on the polylog schedule's step count
/// from `start` to `target`, where `r0 = log2(start/target) / log2 log2(start/target)`.
///
/// Infinite when `start/target <= 2`, where `r0` has no finite value.
pub fn polylog_round_bound(start: f64, target: f64, epsilon: f64) -> f64 {
    let l = (start / target).log2();
    let ll = l.log2();
    if ll <= 0.0 {
        return f64::INFINITY;
    }
    (2.0 / epsilon + 1.0) * (l / ll) + 2.0
}

/// Bound on the number of exploration rounds given the smallest gap.
///
/// Geometric: `ceil(log2(2/D))`. PolyLog: `ceil((2/eps + 1) L / max{1, log2 L} + 2)`
/// with `L = log2(2/D)`. The adaptive schedule shrinks at least as fast as
/// the geometric one, so it shares the geometric bound.
pub fn rmax_bound(delta_min: f64, kind: ScheduleKind) -> Result<u64> {
    if !(delta_min > 0.0 && delta_min <= 1.0) {
        return Err(if delta_min == 0.0 {
            Error::DegenerateGaps
        } else {
            Error::InvalidGap(delta_min)
        });
    }
    let l = (2.0 / delta_min).log2();
    let bound = match kind {
        ScheduleKind::Geometric | ScheduleKind::AdaptiveRatio => l.ceil(),
        ScheduleKind::PolyLog { epsilon } => {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidExponent(epsilon));
            }
            ((2.0 / epsilon + 1.0) * l / l.log2().max(1.0) + 2.0).ceil()
        }
    };
    Ok(bound as u64)
}

/// Shape of the regret guarantee with unit constants, in natural logs:
///
/// * Geometric / adaptive: `sum_i (1/D_i) max{1, ln(D_i/D)} ln T`
/// * PolyLog(eps), `gamma = 2 eps`:
///   `sum_i (1/D_i) (max{1, ln(1/D_i)}^gamma + max{1, ln(D_i/D)} / (gamma max{1, ln ln(D_i/D)})) ln T`
///
/// Only the scaling is meaningful; it is not a ceiling on measured regret.
pub fn regret_bound(profile: &GapProfile, horizon: u64, kind: ScheduleKind) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let delta = profile.delta_min().ok_or(Error::DegenerateGaps)?;
    let log_t = (horizon as f64).ln();
    let sum: f64 = profile
        .gaps()
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&gap| {
            let spread = (gap / delta).ln().max(1.0);
            let factor = match kind {
                ScheduleKind::Geometric | ScheduleKind::AdaptiveRatio => spread,
                ScheduleKind::PolyLog { epsilon } => {
                    let gamma = 2.0 * epsilon;
                    (1.0 / gap).ln().max(1.0).powf(gamma)
                        + spread / (gamma * (gap / delta).ln().ln().max(1.0))
                }
            };
            factor / gap
        })
        .sum();
    Ok(sum * log_t)
}

/// Running mean updated by `mean <- (mean * (n - 1) + v) / n`.
///
/// The update is evaluated in double-double arithmetic (value plus an
/// error term) so rounding does not accumulate over long scans; `value()`
/// stays within an ulp of the exact mean of the samples seen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningMean {
    hi: f64,
    lo: f64,
}

impl RunningMean {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in the `n`-th sample `v` (`n >= 1`).
    pub fn update(&mut self, n: u64, v: f64) {
        let m = (n - 1) as f64;
        let nf = n as f64;
        // (hi + lo) * m + v as a double-double.
        let p = self.hi * m;
        let p_err = self.hi.mul_add(m, -p);
        let (s, s_err) = two_sum(p, v);
        let (num_hi, num_lo) = two_sum(s, s_err + p_err + self.lo * m);
        // Divide by n with one correction step.
        let q = num_hi / nf;
        let rem = (-q).mul_add(nf, num_hi) + num_lo;
        let (hi, lo) = two_sum(q, rem / nf);
        self.hi = hi;
        self.lo = lo;
    }

    pub fn value(&self) -> f64 {
        self.hi
    }
}

/// Error-free sum: `a + b == s + e` exactly.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}
