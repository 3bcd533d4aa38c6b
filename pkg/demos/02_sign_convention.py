"""Why the flow field carries a minus sign.

Along a flow of V the family F(X, u) = h(X) + u theta(X) changes at rate
theta + <grad F, V>.  With the field as displayed in the construction the
pairing is +theta, so F drifts at rate 2 theta; flipping the sign makes it
stationary.  This script measures both.
"""

# %%
import numpy as np

from horngauge import reference_polynomial
from horngauge.fpflow import FamilyPolynomial, FlowConfig, Sign, phi, phi_batch, phi_literal, v_field
from horngauge.wpoly import sample_on_variety

swh = reference_polynomial()
fam = FamilyPolynomial(swh)
X0 = sample_on_variety(swh.h, swh.weights, 20, (0.01, 0.5), seed=3)

# %% The pairing identity at u = 1/2
for sign in Sign:
    V = v_field(X0, 0.5, fam, FlowConfig(sign))
    pairing = np.sum(fam.gradient(X0, 0.5) * V, axis=-1)
    ratio = pairing / fam.theta(X0)
    print(f"{sign.value:9s} <grad F, V> / theta = {ratio.real.mean():+.12f}")

# %% End-point residuals |f(Phi(X0))|
for sign in Sign:
    pts = phi_batch(X0, fam, FlowConfig(sign)).points
    print(f"{sign.value:9s} median residual {np.median(np.abs(swh.f(pts))):.2e}")

# %% One trajectory, sampled at the integrator's accepted steps
_, traj = phi(X0[0], fam)
for u, _, r in traj.samples[:: max(1, len(traj.samples) // 6)]:
    print(f"u = {u:.4f}  |F(X(u), u)| = {r:.2e}")

# %% Freezing X inside the integral instead of following the flow
diff = np.linalg.norm(phi_literal(X0, fam) - phi_batch(X0, fam).points, axis=1)
print("fixed-X quadrature vs flow map, |difference| / |X0|:")
print(np.array2string(diff / np.linalg.norm(X0, axis=1), precision=2))
