use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pull count must be at least 1")]
    ZeroPulls,
    #[error("confidence {0} outside (0, 1]")]
    InvalidConfidence(f64),
    #[error("precision {0} outside the accepted range")]
    InvalidPrecision(f64),
    #[error("polylog exponent {0} must be positive and finite")]
    InvalidExponent(f64),
    #[error("survivor fraction {0:?} missing or outside (0, 1]")]
    InvalidSurvivorFraction(Option<f64>),
    #[error("round budget overflows a 64-bit pull count (g = {precision}, delta = {delta})")]
    BudgetOverflow { precision: f64, delta: f64 },
    #[error("target precision {target} is not below the starting precision {start}")]
    TargetNotBelowStart { start: f64, target: f64 },
    #[error("schedule {0} depends on runtime data and cannot be iterated offline")]
    ScheduleNeedsRuntimeData(&'static str),
    #[error("precision schedule did not reach the target within {0} iterations")]
    IterationCap(u64),
    #[error("gap {0} outside (0, 1]")]
    InvalidGap(f64),
    #[error("all gaps zero: the minimum positive gap is undefined")]
    DegenerateGaps,
    #[error("horizon {0} too small")]
    InvalidHorizon(u64),

    #[error("arm count must be at least 1")]
    NoArms,
    #[error("arm {arm} out of range for {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },
    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("horizon of {0} steps already consumed")]
    HorizonExhausted(u64),

    #[error("mean {0} outside [0, 1]")]
    MeanOutOfRange(f64),
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),
    #[error("invalid instance parameters: {0}")]
    InvalidInstance(String),

    #[error("trace covers {trace} arms but the instance has {instance}")]
    ArmCountMismatch { trace: usize, instance: usize },
    #[error("trace has no round log")]
    MissingRoundLog,
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("{0}")]
    Runtime(String),
}
