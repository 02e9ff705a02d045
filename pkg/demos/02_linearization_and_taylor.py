"""The linearized solver is the derivative of the forward map.

Two demonstrations back that claim numerically.  First, forward
differences of the state map converge to the linearized solution at first
order in the step.  Second, the Taylor remainder of the first-order
expansion decays quadratically: the log-log plot of remainder norm
against perturbation scale has slope two.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chcontrol.problems import make_tracking_problem, random_admissible_control, smooth_in_time
from chcontrol.sensitivity import solve_linearized, taylor_remainder

problem, _ = make_tracking_problem()
rng = np.random.default_rng(1)
base = random_admissible_control(problem, rng, amplitude=0.3)
state = problem.solve(base)

direction = smooth_in_time(rng.standard_normal(base.values.shape))
lin = solve_linearized(state, base.copy_with(direction), problem.ps, problem.ops)

print("forward-difference consistency (should shrink linearly in eps):")
for eps in (0.2, 0.1, 0.05):
    perturbed = problem.solve(base.copy_with(base.values + eps * direction))
    gap = np.abs((perturbed.rho - state.rho) / eps - lin.zeta).max()
    print(f"  eps = {eps:5.3f}:  max |dS/eps - DS h| = {gap:.3e}")

scales = (0.4, 0.2, 0.1, 0.05, 0.025)
report = taylor_remainder(
    problem.init, base, direction, scales, problem.ps, problem.ops
)
print(f"taylor remainder slope: {report.slope:.3f} (quadratic means 2)")

fig, ax = plt.subplots(figsize=(4.6, 3.6))
ax.loglog(report.scales, report.remainders, "o-", label="remainder")
ref = report.remainders[0] * (report.scales / report.scales[0]) ** 2
ax.loglog(report.scales, ref, "k--", label="slope 2 reference")
ax.set_xlabel("perturbation scale")
ax.set_ylabel("remainder norm")
ax.set_title(f"fitted slope {report.slope:.3f}")
ax.legend()
fig.tight_layout()
fig.savefig("demos_taylor.png", dpi=130)
print("wrote demos_taylor.png")
