"""
The exact underdamped step
==========================

Within one step the gradient is frozen and the velocity follows an
Ornstein-Uhlenbeck process with damping 2.  Position and velocity then move
as a correlated Gaussian pair.  This script prints the step coefficients
and checks them against a Monte Carlo draw.
"""

import numpy as np

from rcdlmc import underdamped_coeffs, underdamped_step
from rcdlmc.rng import ChainStreams

# %% Coefficients for a few step sizes.  For small h the covariances scale
# like h^3, h^2 and h, with leading constants 4/3, 2 and 4.
for h in (1e-4, 1e-3, 1e-2, 0.1, 1.0):
    c = underdamped_coeffs(h, gamma=1.0)
    print(f"h={h:<7g} s_xx/h^3={c.s_xx / h**3:8.4f}  s_xv/h^2={c.s_xv / h**2:7.4f}  "
          f"s_vv/h={c.s_vv / h:7.4f}  det={c.det:.3e}")

# %% One step from a fixed state for 200k chains.
n, h = 200_000, 0.1
c = underdamped_coeffs(h, 1.0)
s = ChainStreams(0, np.arange(n))
x, v, F = np.full((n, 1), 0.3), np.full((n, 1), -0.7), np.full((n, 1), 1.5)
xn, vn = underdamped_step(x, v, F, c, (s.normals(0, 1), s.normals(0, 1, 4)))
print("mean x'", xn.mean(), "expected", 0.3 + c.a_xv * -0.7 + c.a_xF * 1.5)
print("mean v'", vn.mean(), "expected", c.a_vv * -0.7 + c.a_vF * 1.5)
print("cov", np.cov(xn[:, 0], vn[:, 0]).round(6).tolist())
print("expected", [[c.s_xx, c.s_xv], [c.s_xv, c.s_vv]])
