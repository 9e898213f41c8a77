use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::BanditInstance;
use crate::error::{Error, Result};
use crate::math;
use crate::policy::{ArmId, PolicyConfig};

use super::{
    check_lemma_assertions, pseudo_regret, run_episode, EpisodeOptions, LemmaTally, RegretPoint,
};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEntry {
    pub name: String,
    pub instance: BanditInstance,
}

/// Cross product of policies, instances and horizons, each run on
/// `seed_count` seeds `base_seed, base_seed + 1, ...`. The same seeds are
/// used for every cell so policies face identical reward streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub policies: Vec<PolicyConfig>,
    pub instances: Vec<InstanceEntry>,
    pub horizons: Vec<u64>,
    pub seed_count: u64,
    pub base_seed: u64,
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,
    pub options: EpisodeOptions,
}

impl SuiteSpec {
    fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::EmptyGrid("policies"));
        }
        if self.instances.is_empty() {
            return Err(Error::EmptyGrid("instances"));
        }
        if self.horizons.is_empty() {
            return Err(Error::EmptyGrid("horizons"));
        }
        if self.seed_count == 0 {
            return Err(Error::EmptyGrid("seeds"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.seed_count)
            .map(|i| self.base_seed.wrapping_add(i))
            .collect()
    }

    fn cells(&self) -> Vec<(usize, usize, u64)> {
        let mut cells = Vec::new();
        for p in 0..self.policies.len() {
            for i in 0..self.instances.len() {
                for &t in &self.horizons {
                    cells.push((p, i, t));
                }
            }
        }
        cells
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Runtime(e.to_string()))
    }
}

/// Aggregate of one (policy, instance, horizon) cell over its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub policy: String,
    pub schedule: String,
    pub config: PolicyConfig,
    pub instance: String,
    pub k: usize,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Final pseudo-regret of each seed, in seed order.
    pub regrets: Vec<f64>,
    pub mean_regret: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub stddev_regret: f64,
    pub bound_value: Option<f64>,
    pub state_words: usize,
    pub r_max_mean: Option<f64>,
    pub clean_event_rate: f64,
    /// Fraction of runs whose final commitment is an optimal arm.
    pub best_commit_rate: Option<f64>,
    /// Mean regret over seeds at the checkpoints.
    pub trajectory: Vec<RegretPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub policy: String,
    pub schedule: String,
    pub instance: String,
    pub horizon: u64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub reports: Vec<RegretReport>,
    pub failures: Vec<CellFailure>,
}

struct EpisodeStats {
    regret: f64,
    r_max: Option<u64>,
    clean: bool,
    committed: Option<ArmId>,
    trajectory: Vec<RegretPoint>,
}

/// Runs every cell of the suite. Episodes run in parallel but are reduced
/// in a fixed order, so the result does not depend on `jobs`.
pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteOutcome> {
    spec.validate()?;
    let cells = spec.cells();
    let seeds = spec.seeds();
    let units: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();

    let results: Vec<Result<EpisodeStats>> = spec.pool()?.install(|| {
        units
            .par_iter()
            .map(|&(c, seed)| {
                let (p, i, horizon) = cells[c];
                let instance = &spec.instances[i].instance;
                let trace = run_episode(&spec.policies[p], instance, horizon, seed, spec.options)?;
                Ok(EpisodeStats {
                    regret: pseudo_regret(&trace, instance)?,
                    r_max: trace.r_max_observed,
                    clean: trace.clean_event,
                    committed: trace.committed,
                    trajectory: trace.trajectory,
                })
            })
            .collect()
    });

    let mut outcome = SuiteOutcome::default();
    let per_cell = seeds.len();
    for (c, chunk) in results.chunks(per_cell).enumerate() {
        let (p, i, horizon) = cells[c];
        let config = &spec.policies[p];
        let entry = &spec.instances[i];
        if let Some((seed, err)) = chunk
            .iter()
            .zip(&seeds)
            .find_map(|(r, &s)| r.as_ref().err().map(|e| (s, e)))
        {
            outcome.failures.push(CellFailure {
                policy: config.name().to_string(),
                schedule: config.schedule_label(),
                instance: entry.name.clone(),
                horizon,
                seed,
                error: err.to_string(),
            });
            continue;
        }
        let stats: Vec<&EpisodeStats> = chunk.iter().filter_map(|r| r.as_ref().ok()).collect();
        outcome
            .reports
            .push(aggregate(config, entry, horizon, &seeds, &stats)?);
    }
    Ok(outcome)
}

fn aggregate(
    config: &PolicyConfig,
    entry: &InstanceEntry,
    horizon: u64,
    seeds: &[u64],
    stats: &[&EpisodeStats],
) -> Result<RegretReport> {
    let n = stats.len() as f64;
    let regrets: Vec<f64> = stats.iter().map(|s| s.regret).collect();
    let mean_regret = regrets.iter().sum::<f64>() / n;
    let stddev_regret = if stats.len() > 1 {
        let ss: f64 = regrets.iter().map(|r| (r - mean_regret).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let instance = &entry.instance;
    // Undefined for degenerate instances and T < 2.
    let bound_value = config
        .schedule()
        .and_then(|kind| math::regret_bound(instance.gaps(), horizon, kind).ok());
    let state_words = {
        use crate::policy::Policy;
        config.build(instance.k(), horizon)?.state_words()
    };
    let r_max_mean = config.schedule().map(|_| {
        stats
            .iter()
            .map(|s| s.r_max.unwrap_or(0) as f64)
            .sum::<f64>()
            / n
    });
    let clean_event_rate = stats.iter().filter(|s| s.clean).count() as f64 / n;
    let gaps = instance.gaps().gaps();
    let best_commit_rate = config.schedule().map(|_| {
        stats
            .iter()
            .filter(|s| s.committed.is_some_and(|a| gaps[a.0] == 0.0))
            .count() as f64
            / n
    });
    let trajectory = stats[0]
        .trajectory
        .iter()
        .enumerate()
        .map(|(j, point)| RegretPoint {
            t: point.t,
            regret: stats.iter().map(|s| s.trajectory[j].regret).sum::<f64>() / n,
        })
        .collect();

    Ok(RegretReport {
        policy: config.name().to_string(),
        schedule: config.schedule_label(),
        config: *config,
        instance: entry.name.clone(),
        k: instance.k(),
        horizon,
        seeds: seeds.to_vec(),
        regrets,
        mean_regret,
        stddev_regret,
        bound_value,
        state_words,
        r_max_mean,
        clean_event_rate,
        best_commit_rate,
        trajectory,
    })
}

/// Clean-event assertion counts for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCell {
    pub policy: String,
    pub schedule: String,
    pub instance: String,
    pub horizon: u64,
    pub tally: LemmaTally,
    /// Runs whose final commitment is an optimal arm.
    pub best_commits: u64,
}

/// Runs the suite and checks the clean-event assertions on every trace.
/// Policies without rounds have nothing to check and are skipped.
pub fn run_verification(spec: &SuiteSpec) -> Result<Vec<VerifyCell>> {
    spec.validate()?;
    let cells: Vec<(usize, usize, u64)> = spec
        .cells()
        .into_iter()
        .filter(|&(p, _, _)| spec.policies[p].schedule().is_some())
        .collect();
    let seeds = spec.seeds();
    let units: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();

    let results: Vec<Result<(LemmaTally, bool)>> = spec.pool()?.install(|| {
        units
            .par_iter()
            .map(|&(c, seed)| {
                let (p, i, horizon) = cells[c];
                let config = &spec.policies[p];
                let instance = &spec.instances[i].instance;
                let options = EpisodeOptions {
                    action_log: Some(false),
                };
                let trace = run_episode(config, instance, horizon, seed, options)?;
                let mut tally = LemmaTally::default();
                tally.add(&check_lemma_assertions(&trace, instance, config)?);
                let gaps = instance.gaps().gaps();
                let best = trace.committed.is_some_and(|a| gaps[a.0] == 0.0);
                Ok((tally, best))
            })
            .collect()
    });

    let mut out = Vec::with_capacity(cells.len());
    for (c, chunk) in results.chunks(seeds.len().max(1)).enumerate() {
        let (p, i, horizon) = cells[c];
        let config = &spec.policies[p];
        let mut tally = LemmaTally::default();
        let mut best_commits = 0;
        for r in chunk {
            let (t, best) = r.as_ref().map_err(Clone::clone)?;
            tally.merge(t);
            best_commits += u64::from(*best);
        }
        out.push(VerifyCell {
            policy: config.name().to_string(),
            schedule: config.schedule_label(),
            instance: spec.instances[i].name.clone(),
            horizon,
            tally,
            best_commits,
        });
    }
    Ok(out)
}
