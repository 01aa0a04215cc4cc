"""
Step-size caps, bounds and cost scalings
========================================

The theory module turns the convergence theorems into calculators.  The
table lists, for each sampler, the largest admissible step, the W2 bound at
that step for several iteration counts, and the iteration and cost scalings
at accuracy eps.
"""

from rcdlmc.harness.experiment import bounds_table
from rcdlmc.theory import BoundParams, iteration_cost_estimate

params = BoundParams(mu=1.0, lip_grad=1.0, lip_hess=1.0, d=1000, tau=1000, W0=0.5 * 1000**0.5)
print(bounds_table(params, eps=0.1))

# %% How the cost of reaching eps grows with dimension.
for alg in ("OLMC", "ULMC", "RCD_U", "RCAD_U"):
    print(alg, [f"{iteration_cost_estimate(alg, d, 0.1)[1]:.2g}" for d in (10, 100, 1000)])
