//! Constant-space stochastic multi-armed bandits.
//!
//! * [`math`]: confidence radii, round budgets, precision schedules and
//!   the round-count and regret bound calculators.
//! * [`policy`]: the round-based constant-space UCB policy, its doubling
//!   anytime wrapper and a UCB1 baseline, all step driven.
//! * [`env`]: Bernoulli / Beta / point-mass instances and generators.
//! * [`sim`]: episodes, pseudo-regret, lemma checks, suites and memory audits.

pub mod env;
pub mod error;
pub mod math;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
