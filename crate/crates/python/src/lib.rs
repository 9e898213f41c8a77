//! Python bindings: instances, policy configurations, single episodes,
//! seeded suites, memory audits and the closed-form bounds.

use std::collections::BTreeMap;

use constbandit::env::{self, ArmFamily, BanditInstance, TwoGroupRegime};
use constbandit::math::{self, Confidence, GapProfile, Precision, ScheduleKind};
use constbandit::policy::PolicyConfig;
use constbandit::sim::{
    self, EpisodeOptions, EpisodeTrace, InstanceEntry, RegretReport, SuiteSpec,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(name: &str, concentration: Option<f64>) -> PyResult<ArmFamily> {
    match (name, concentration) {
        ("bernoulli", None) => Ok(ArmFamily::Bernoulli),
        ("point_mass", None) => Ok(ArmFamily::PointMass),
        ("beta", c) => Ok(ArmFamily::Beta {
            concentration: c.unwrap_or(2.0),
        }),
        (_, Some(_)) => Err(err("concentration applies to the beta family only")),
        (other, None) => Err(err(format!(
            "unknown family `{other}` (bernoulli, beta, point_mass)"
        ))),
    }
}

fn schedule(name: &str, epsilon: f64) -> PyResult<ScheduleKind> {
    match name {
        "geometric" => Ok(ScheduleKind::Geometric),
        "polylog" => ScheduleKind::polylog(epsilon).map_err(err),
        "adaptive_ratio" => Ok(ScheduleKind::AdaptiveRatio),
        other => Err(err(format!(
            "unknown schedule `{other}` (geometric, polylog, adaptive_ratio)"
        ))),
    }
}

/// A fixed set of arms.
#[pyclass(name = "Instance", module = "pyconstbandit", skip_from_py_object)]
#[derive(Clone)]
struct PyInstance {
    name: String,
    inner: BanditInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    #[pyo3(signature = (means, family="bernoulli", concentration=None))]
    fn custom(means: Vec<f64>, family: &str, concentration: Option<f64>) -> PyResult<Self> {
        let fam = self::family(family, concentration)?;
        let inner = env::make_from_means(&means, fam).map_err(err)?;
        let label: Vec<String> = means.iter().map(f64::to_string).collect();
        Ok(Self {
            name: format!("custom[{}]", label.join(" ")),
            inner,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (k, best_mean=1.0, family="bernoulli", concentration=None))]
    fn linear(
        k: usize,
        best_mean: f64,
        family: &str,
        concentration: Option<f64>,
    ) -> PyResult<Self> {
        let fam = self::family(family, concentration)?;
        let inner = env::make_linear_gaps(k, best_mean, fam).map_err(err)?;
        Ok(Self {
            name: format!("linear[K={k}]"),
            inner,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (k, s, low_gap, high_gap, best_mean=0.9))]
    fn two_group(k: usize, s: f64, low_gap: f64, high_gap: f64, best_mean: f64) -> PyResult<Self> {
        let inner = env::make_two_group(k, s, low_gap, high_gap, best_mean, TwoGroupRegime::Any)
            .map_err(err)?;
        Ok(Self {
            name: format!("two_group[K={k} s={s}]"),
            inner,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means()
    }

    #[getter]
    fn gaps(&self) -> Vec<f64> {
        self.inner.gaps().gaps().to_vec()
    }

    #[getter]
    fn best(&self) -> usize {
        self.inner.best().0
    }

    #[getter]
    fn delta_min(&self) -> Option<f64> {
        self.inner.gaps().delta_min()
    }

    fn __repr__(&self) -> String {
        format!("Instance({})", self.name)
    }
}

/// Policy choice and tuning.
#[pyclass(name = "Policy", module = "pyconstbandit", skip_from_py_object)]
#[derive(Clone)]
struct PyPolicy {
    inner: PolicyConfig,
}

#[pymethods]
impl PyPolicy {
    /// `algorithm` is `const_space`, `doubling` or `ucb1`.
    #[new]
    #[pyo3(signature = (algorithm="const_space", schedule="geometric", epsilon=0.5, delta=None))]
    fn new(algorithm: &str, schedule: &str, epsilon: f64, delta: Option<f64>) -> PyResult<Self> {
        let inner = match algorithm {
            "const_space" => {
                if let Some(d) = delta {
                    Confidence::new(d).map_err(err)?;
                }
                PolicyConfig::ConstSpace {
                    schedule: self::schedule(schedule, epsilon)?,
                    delta,
                }
            }
            "doubling" if delta.is_none() => PolicyConfig::Doubling {
                schedule: self::schedule(schedule, epsilon)?,
            },
            "ucb1" if delta.is_none() => PolicyConfig::Ucb1,
            "doubling" | "ucb1" => return Err(err(format!("delta is not used by {algorithm}"))),
            other => {
                return Err(err(format!(
                    "unknown algorithm `{other}` (const_space, doubling, ucb1)"
                )))
            }
        };
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn schedule(&self) -> String {
        self.inner.schedule_label()
    }

    fn __repr__(&self) -> String {
        format!(
            "Policy({}, {})",
            self.inner.name(),
            self.inner.schedule_label()
        )
    }
}

/// Record of one episode.
#[pyclass(name = "Trace", module = "pyconstbandit")]
struct PyTrace {
    inner: EpisodeTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn pull_counts(&self) -> Vec<u64> {
        self.inner.pull_counts.clone()
    }

    #[getter]
    fn committed(&self) -> Option<usize> {
        self.inner.committed.map(|a| a.0)
    }

    #[getter]
    fn clean_event(&self) -> bool {
        self.inner.clean_event
    }

    #[getter]
    fn r_max(&self) -> Option<u64> {
        self.inner.r_max_observed
    }

    #[getter]
    fn state_words(&self) -> usize {
        self.inner.state_words_peak
    }

    /// `(t, regret)` at powers of two and at the horizon.
    #[getter]
    fn trajectory(&self) -> Vec<(u64, f64)> {
        self.inner
            .trajectory
            .iter()
            .map(|p| (p.t, p.regret))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }
}

/// Aggregate of one (policy, instance, horizon) cell.
#[pyclass(name = "Report", module = "pyconstbandit", get_all)]
struct PyReport {
    policy: String,
    schedule: String,
    instance: String,
    k: usize,
    horizon: u64,
    regrets: Vec<f64>,
    mean_regret: f64,
    stddev_regret: f64,
    bound_value: Option<f64>,
    state_words: usize,
    clean_event_rate: f64,
    json: String,
}

impl PyReport {
    fn new(r: RegretReport) -> PyResult<Self> {
        Ok(Self {
            json: serde_json::to_string(&r).map_err(err)?,
            policy: r.policy,
            schedule: r.schedule,
            instance: r.instance,
            k: r.k,
            horizon: r.horizon,
            regrets: r.regrets,
            mean_regret: r.mean_regret,
            stddev_regret: r.stddev_regret,
            bound_value: r.bound_value,
            state_words: r.state_words,
            clean_event_rate: r.clean_event_rate,
        })
    }
}

#[pymethods]
impl PyReport {
    fn to_json(&self) -> String {
        self.json.clone()
    }
}

#[pyfunction]
#[pyo3(signature = (policy, instance, horizon, seed=0, action_log=false))]
fn run_episode(
    policy: &PyPolicy,
    instance: &PyInstance,
    horizon: u64,
    seed: u64,
    action_log: bool,
) -> PyResult<PyTrace> {
    let options = EpisodeOptions {
        action_log: Some(action_log),
    };
    let inner =
        sim::run_episode(&policy.inner, &instance.inner, horizon, seed, options).map_err(err)?;
    Ok(PyTrace { inner })
}

#[pyfunction]
fn pseudo_regret(trace: &PyTrace, instance: &PyInstance) -> PyResult<f64> {
    sim::pseudo_regret(&trace.inner, &instance.inner).map_err(err)
}

/// Outcome of each clean-event assertion: `pass`, `fail: ...` or `vacuous`.
#[pyfunction]
fn check_lemmas(
    trace: &PyTrace,
    instance: &PyInstance,
    policy: &PyPolicy,
) -> PyResult<BTreeMap<String, String>> {
    let report =
        sim::check_lemma_assertions(&trace.inner, &instance.inner, &policy.inner).map_err(err)?;
    let mut out = BTreeMap::new();
    out.insert("clean_event".to_string(), report.clean_event.to_string());
    for (name, outcome) in report.outcomes() {
        let text = match outcome {
            sim::LemmaOutcome::Pass => "pass".to_string(),
            sim::LemmaOutcome::Vacuous => "vacuous".to_string(),
            sim::LemmaOutcome::Fail {
                level,
                round,
                detail,
            } => {
                format!("fail: level {level}, round {round}: {detail}")
            }
        };
        out.insert(name.to_string(), text);
    }
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (policies, instances, horizons, seeds=10, base_seed=0, jobs=0))]
fn run_suite(
    py: Python<'_>,
    policies: Vec<PyRef<'_, PyPolicy>>,
    instances: Vec<PyRef<'_, PyInstance>>,
    horizons: Vec<u64>,
    seeds: u64,
    base_seed: u64,
    jobs: usize,
) -> PyResult<Vec<PyReport>> {
    let spec = SuiteSpec {
        policies: policies.iter().map(|p| p.inner).collect(),
        instances: instances
            .iter()
            .map(|i| InstanceEntry {
                name: i.name.clone(),
                instance: i.inner.clone(),
            })
            .collect(),
        horizons,
        seed_count: seeds,
        base_seed,
        jobs,
        options: EpisodeOptions {
            action_log: Some(false),
        },
    };
    let outcome = py.detach(|| sim::run_suite(&spec)).map_err(err)?;
    if let Some(f) = outcome.failures.first() {
        return Err(err(format!(
            "{} on {} at T={}, seed {}: {}",
            f.policy, f.instance, f.horizon, f.seed, f.error
        )));
    }
    outcome.reports.into_iter().map(PyReport::new).collect()
}

/// `(K, reset_words, peak_words)` for each arm count.
#[pyfunction]
fn memory_audit(policy: &PyPolicy, ks: Vec<usize>) -> PyResult<Vec<(usize, usize, usize)>> {
    let audit = sim::memory_audit(&policy.inner, &ks).map_err(err)?;
    Ok(audit
        .rows
        .iter()
        .map(|r| (r.k, r.reset_words, r.peak_words))
        .collect())
}

#[pyfunction]
fn hoeffding_radius(n: u64, delta: f64) -> PyResult<f64> {
    math::hoeffding_radius(n, Confidence::new(delta).map_err(err)?).map_err(err)
}

#[pyfunction]
fn round_budget(g: f64, delta: f64) -> PyResult<u64> {
    math::round_budget(
        Precision::new(g).map_err(err)?,
        Confidence::new(delta).map_err(err)?,
    )
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (delta_min, schedule="geometric", epsilon=0.5))]
fn rmax_bound(delta_min: f64, schedule: &str, epsilon: f64) -> PyResult<u64> {
    math::rmax_bound(delta_min, self::schedule(schedule, epsilon)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (means, horizon, schedule="geometric", epsilon=0.5))]
fn regret_bound(means: Vec<f64>, horizon: u64, schedule: &str, epsilon: f64) -> PyResult<f64> {
    let profile = GapProfile::from_means(&means).map_err(err)?;
    math::regret_bound(&profile, horizon, self::schedule(schedule, epsilon)?).map_err(err)
}

#[pymodule]
pub fn pyconstbandit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(pseudo_regret, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemmas, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(memory_audit, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_radius, m)?)?;
    m.add_function(wrap_pyfunction!(round_budget, m)?)?;
    m.add_function(wrap_pyfunction!(rmax_bound, m)?)?;
    m.add_function(wrap_pyfunction!(regret_bound, m)?)?;
    Ok(())
}
