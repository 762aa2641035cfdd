# %% [markdown]
# # Pressure curves and Bowen parameters
#
# Three linear systems on [0, 1] with the target sequence beta_k = 2 log 3
# (or log q_k + 1 for the alternating system). For each one we print the
# finite-horizon pressure (1/n) log sum exp(-t S_n beta) on a few t values,
# then the root of the pressure found by bisection.

# %%
import math

import numpy as np

from bowenlab.ifs import LinearSystem, base_q_level
from bowenlab.pressure import ContractionBeta, closed_form_pressure_linear, default_bowen, pressure_curve

base3 = LinearSystem.constant(base_q_level(3), name="base3")
cantor = LinearSystem.constant(base_q_level(3, (0, 2)), name="cantor")
alternating = LinearSystem(period=(base_q_level(2), base_q_level(3)), name="alternating23")
beta = ContractionBeta(2.0)
beta_alt = ContractionBeta(1.0, 1.0)

# %% [markdown]
# ## The curves
#
# For base-3 the curve is flat in n, equal to (1 - 2t) log 3. The
# alternating system oscillates between even and odd n; the window columns
# show the trailing-half max and min, which bracket the limit.

# %%
ts = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
for sys_, b in ((base3, beta), (cantor, beta), (alternating, beta_alt)):
    print(f"\n{sys_.name}")
    print("   t    over_n(n=16)   window_hi   window_lo")
    for t in ts:
        c = pressure_curve(sys_, b, float(t), 1, 16)
        print(f"{t:5.2f}  {c.over_n[-1]:12.6f}  {c.upper:10.6f}  {c.lower:10.6f}")

# %% [markdown]
# ## Closed form check
#
# On base-q systems with constant beta_k = log q_k + a_k the pressure is a
# finite sum of logs; the enumerated and closed-form values agree to
# round-off.

# %%
Q = [2, 3] * 6
a = [1.0] * 12
c = pressure_curve(alternating, beta_alt, 0.4, 1, 12)
print("max |enumerated - closed form| =", np.max(np.abs(c.over_n - closed_form_pressure_linear(Q, a, 0.4))))

# %% [markdown]
# ## Bowen parameters
#
# Expected: 1/2 for base-3, log 2 / (2 log 3) for Cantor and
# L / (1 + L) with L = log 6 / 2 for the alternating system.

# %%
L = math.log(6) / 2
for sys_, b, horizon, expected in (
    (base3, beta, 12, 0.5),
    (cantor, beta, 12, math.log(2) / (2 * math.log(3))),
    (alternating, beta_alt, 24, L / (1 + L)),
):
    res = default_bowen(sys_, b, horizon, tol=1e-9)
    print(f"{sys_.name:14s} b = {res.b:.9f}  expected {expected:.9f}  status {res.status}")
