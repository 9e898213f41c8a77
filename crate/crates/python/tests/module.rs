use std::sync::Once;

use pyconstbandit::pyconstbandit;
use pyo3::ffi::c_str;
use pyo3::prelude::*;

fn with_module<R>(f: impl FnOnce(Python<'_>) -> PyResult<R>) -> R {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(pyconstbandit);
        Python::initialize();
    });
    Python::attach(|py| f(py).unwrap())
}

#[test]
fn episode_and_bounds_from_python() {
    with_module(|py| {
        py.run(
            c_str!(
                r#"
import pyconstbandit as cb
inst = cb.Instance.custom([0.9, 0.6, 0.1], family="point_mass")
assert inst.k == 3 and inst.best == 0
pol = cb.Policy("const_space", "geometric")
tr = cb.run_episode(pol, inst, 10_000, seed=3)
assert tr.committed == 0 and sum(tr.pull_counts) == 10_000
assert cb.pseudo_regret(tr, inst) == tr.trajectory[-1][1]
assert all(v in ("pass", "true") for v in cb.check_lemmas(tr, inst, pol).values())
assert cb.rmax_bound(0.1) == 5
assert cb.round_budget(0.5, 1e-3) == 56
rows = cb.memory_audit(pol, [2, 100])
assert rows[0][1:] == rows[1][1:] == (22, 22)
try:
    cb.Policy("ucb1", delta=0.1)
    raise AssertionError("accepted delta for ucb1")
except ValueError as e:
    assert "delta" in str(e)
"#
            ),
            None,
            None,
        )
    })
}

#[test]
fn suite_is_repeatable() {
    let regrets: Vec<f64> = with_module(|py| {
        let m = py.import("pyconstbandit")?;
        let inst = m
            .getattr("Instance")?
            .call_method1("custom", (vec![0.9, 0.6],))?;
        let pol = m.getattr("Policy")?.call0()?;
        let run = || -> PyResult<Vec<f64>> {
            let reports =
                m.getattr("run_suite")?
                    .call1((vec![&pol], vec![&inst], vec![2_000u64], 4u64))?;
            reports.get_item(0)?.getattr("regrets")?.extract()
        };
        let (a, b) = (run()?, run()?);
        assert_eq!(a, b);
        Ok(a)
    });
    assert_eq!(regrets.len(), 4);
}
