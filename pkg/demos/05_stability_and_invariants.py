"""Empirical stability of the control-to-state map, plus the invariant suite.

The stability theory bounds the ratio of state differences to control
differences by a constant whose value is not known; sampling random
admissible control pairs shows the ratios cluster tightly.  The invariant
suite then re-checks the hard runtime guarantees on a fresh solve and
confirms that data violating the standing assumptions is rejected before
any solve starts.
"""

import json

import numpy as np

from chcontrol.problems import make_tracking_problem
from chcontrol.verify import run_invariant_suite, run_stability_probe

problem, _ = make_tracking_problem()

report = run_stability_probe(problem, pairs=20, seed=0)
ratios = np.asarray(report.ratios)
print("lipschitz ratios over 20 random admissible control pairs:")
print(f"  min {ratios.min():.3f}   median {report.median:.3f}   max {ratios.max():.3f}")
print(f"  spread vs median: x{ratios.max() / report.median:.2f}")

suite = run_invariant_suite(problem, seed=0)
print("\ninvariant suite:")
for entry in suite.entries:
    flag = "ok " if entry["passed"] else "BAD"
    print(f"  [{flag}] {entry['name']}: {entry['detail']}")

print("\nmachine-readable verdict:")
print(json.dumps({"stability": report.passed, "invariants": suite.passed}))
