"""Recovering a tracking target by projected gradient descent.

The targets are manufactured from a known admissible reference control,
so the tracking terms can in principle be driven to zero.  With a small
control penalty the optimizer trades a little tracking error for a
smaller control and ends below the reference cost.  The history shows
monotone descent; at termination the control satisfies the first-order
condition in its projection form: the control is the pointwise clamp of
the scaled boundary adjoint.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chcontrol.geometry import space_time_inner_boundary
from chcontrol.optimizer import OptimizerOptions, optimize
from chcontrol.problems import make_tracking_problem

problem, reference = make_tracking_problem(
    steps=160, weights=(0.0, 0.3, 0.3, 0.0, 0.0, 0.05)
)
reference_cost, _, _ = problem.cost_of(reference)

result = optimize(
    problem.zero_control(), problem,
    OptimizerOptions(max_iters=40, step0=20.0, tol_grad=1e-12, tol_vi=1e-9),
)

print(f"status      : {result.status} after {result.iterations} iterations")
print(f"cost        : {result.cost:.6e} (reference control costs {reference_cost:.6e})")
print(f"vi residual : {result.vi_residual:.2e}")
diff = result.control.values - result.projection_point
fp = np.sqrt(space_time_inner_boundary(diff, diff, problem.ops, problem.times))
print(f"projection-form residual ||u - clamp(-q/beta6)||: {fp:.2e}")

fig, axes = plt.subplots(1, 2, figsize=(9.5, 3.6))
costs = [row["cost"] for row in result.history]
axes[0].semilogy(costs, "o-")
axes[0].set_title("cost per iteration")
axes[0].set_xlabel("iteration")
axes[1].plot(problem.times, reference.values[:, 0], label="reference control")
axes[1].plot(problem.times, result.control.values[:, 0], label="optimized control")
axes[1].set_title("boundary control at the left endpoint")
axes[1].set_xlabel("t")
axes[1].legend()
fig.tight_layout()
fig.savefig("demos_optimize.png", dpi=130)
print("wrote demos_optimize.png")
