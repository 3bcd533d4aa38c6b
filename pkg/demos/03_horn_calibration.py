"""Calibrate the two horn-exponent estimators on model horns.

The beta-horn x^2 + y^2 = z^(2 beta) has area growth beta + 1 and
pairwise meridian contact beta.  Both estimators should reproduce that.
"""

# %%
import numpy as np

from horngauge.arcs import horn_exponent_from_family
from horngauge.homotopy import area_in_ball, default_rho_grid, growth_exponent, horn_arcs, horn_surface_sample

print(" beta   growth   contact")
for beta in (1, 1.5, 2, 2.5):
    grid = horn_surface_sample(beta)
    g = growth_exponent(grid).exponent
    b = horn_exponent_from_family(horn_arcs(beta))
    print(f"{beta:5.2f}  {g:7.4f}  {b:8.4f}")

# %% The straight cone: area inside the ball of radius rho is pi rho^2 / sqrt(2)
cone = horn_surface_sample(1)
rho = default_rho_grid(cone)[::6]
print(np.c_[rho, area_in_ball(cone, rho) / (np.pi * rho**2 / np.sqrt(2))])
