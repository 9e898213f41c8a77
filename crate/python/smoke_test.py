"""Smoke test for the pyconstbandit extension.

Build and install it first, e.g. `maturin develop -m crates/python/Cargo.toml`
or `pip install ./crates/python`.
"""

import json
import math

import pyconstbandit as cb


def main():
    inst = cb.Instance.custom([0.9, 0.8, 0.5, 0.3])
    print(inst, "gaps", inst.gaps)

    pol = cb.Policy("const_space", "geometric")
    trace = cb.run_episode(pol, inst, 100_000, seed=0)
    regret = cb.pseudo_regret(trace, inst)
    print(f"committed arm {trace.committed}, r_max {trace.r_max}, regret {regret:.2f}")
    assert trace.committed == 0
    assert sum(trace.pull_counts) == 100_000
    assert trace.r_max <= cb.rmax_bound(inst.delta_min)
    lemmas = cb.check_lemmas(trace, inst, pol)
    print("lemmas", lemmas)
    assert json.loads(trace.to_json())["horizon"] == 100_000

    for k, reset, peak in cb.memory_audit(pol, [2, 1000, 100_000]):
        print(f"K={k}: {reset} words at reset, {peak} at peak")
        assert reset == peak == 22

    policies = [pol, cb.Policy("const_space", "polylog", epsilon=0.5), cb.Policy("ucb1")]
    reports = cb.run_suite(policies, [cb.Instance.linear(16)], [10_000], seeds=5)
    for r in reports:
        print(f"{r.policy:12} {r.schedule:14} mean regret {r.mean_regret:9.2f} +- {r.stddev_regret:.2f}")
        assert len(r.regrets) == 5 and math.isfinite(r.mean_regret)

    try:
        cb.Instance.custom([0.5, 1.5])
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("mean above 1 accepted")
    print("ok")


if __name__ == "__main__":
    main()
