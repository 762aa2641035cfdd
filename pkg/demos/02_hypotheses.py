# %% [markdown]
# # Checking the hypotheses at a finite horizon
#
# `verify` runs every condition the dimension formula needs and groups
# them into two routes: "bounded" (distortion ratio bounded) and
# "subexponential" (ratio grows slower than any exponential). A failing
# condition always carries a witness.

# %%
import math

from bowenlab.conditions import ahlfors_suite, verify, verify_contraction
from bowenlab.ifs import LevelFamily, LinearMap, LinearSystem, base_q_level
from bowenlab.pressure import ConstantBeta, ContractionBeta

cantor = LinearSystem.constant(base_q_level(3, (0, 2)), name="cantor")
base3 = LinearSystem.constant(base_q_level(3), name="base3")

# %% [markdown]
# ## A system that passes

# %%
rep = verify(cantor, ContractionBeta(2.0), 12, "bounded")
for name, v in sorted(rep.verdicts.items()):
    print(f"{name:20s} {v.status}")
print("bounded route passes:", rep.route_passes("bounded"))

# %% [markdown]
# ## A boundary target sequence
#
# With beta = log 3 on base-3 the target balls never shrink relative to
# the cylinders, so the exponential shrinking condition fails at level 1.

# %%
rep = verify(base3, ConstantBeta((math.log(3),)), 12, "bounded")
print("failures:", rep.route_failures("bounded"))
print("witness:", rep.verdicts["ESC"].witness)

# %% [markdown]
# ## Mixed contraction ratios
#
# Ratios {1/2, 1/3} at every level: the max/min derivative ratio over
# words of length n is (3/2)^n, so neither route applies.

# %%
mixed = LinearSystem.constant(LevelFamily((0, 1), (LinearMap(0.5, (0.0,)), LinearMap(1 / 3, (2 / 3,)))), name="mixed")
r = verify_contraction(mixed, 10)
print({k: v.status for k, v in r.verdicts.items()})

# %% [markdown]
# ## The Ahlfors suite
#
# For the Cantor set with h = log 2 / log 3 the partition sums Z_n(h) are
# exactly 1, and sampled balls satisfy mu(B(x, r)) ~ r^h up to a constant.

# %%
h = math.log(2) / math.log(3)
a = ahlfors_suite(cantor, h, 14)
print("Z_n(h):", [round(z, 12) for z in a.z[:5]], "...")
print(f"mu(B)/r^h in [{a.ratio_min:.3f}, {a.ratio_max:.3f}], C = {a.C:.4f}")
