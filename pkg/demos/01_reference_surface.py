"""Walk through the reference surface x^2 + y^3 + z^5 + z^6.

Run with ``python demos/01_reference_surface.py``.  Each cell prints the
quantity it computes; nothing is plotted.
"""

# %% Split the polynomial into its weighted homogeneous part and the rest
import numpy as np

from horngauge import reference_polynomial
from horngauge.verdict import conicality_verdict

swh = reference_polynomial()
w = swh.weights
print("h     =", swh.h)
print("theta =", swh.theta)
print(f"weights {w.weights}, d = {w.d}, alphas {w.alphas}, k = {w.k}")

# %% The verdict needs the weights only
v = conicality_verdict(w)
print("verdict:", v.status.value, "bound", v.bound.bound)

# %% Push points of h = 0 into f = 0 with the flow map
from horngauge.fpflow import FamilyPolynomial, phi_batch
from horngauge.wpoly import sample_on_variety

fam = FamilyPolynomial(swh)
X0 = sample_on_variety(swh.h, w, 8, (0.01, 0.5), seed=0)
X1 = phi_batch(X0, fam).points
print("|h(X0)| max", np.abs(swh.h(X0)).max())
print("|f(Phi(X0))| max", np.abs(swh.f(X1)).max())

# %% Trace the link loop on the slice z = 1
from horngauge.homotopy import trace_link_loop

loop = trace_link_loop(swh.h, w)
print(f"loop closes after {loop.turns} turn(s), closure {loop.closure_residual:.1e}")

# %% Area growth of the fast-loop surface
from horngauge.homotopy import growth_exponent, surface_grid_from_h

grid = surface_grid_from_h(loop, fam)
est = growth_exponent(grid)
print(f"growth exponent {est.exponent:.4f} (1 + w2/w3 = {1 + w.w2 / w.w3:.4f}), r^2 {est.fit.r_squared:.6f}")

# %% Pairwise contact of constant-theta arcs
from horngauge.arcs import contact_table
from horngauge.homotopy import h_arc_family

arcs, thetas = h_arc_family(loop, fam, n_arcs=8)
table = contact_table(arcs)
lam = min(f.exponent for f in table.values() if f.valid)
print(f"minimum contact order {lam:.4f} (w2/w3 = {w.w2 / w.w3:.4f})")
