# %% [markdown]
# # Moran construction and an independent dimension estimate
#
# The lower bound in the dimension formula comes from a nested family of
# target balls with a mass distribution. Here we build it for the Cantor
# system, check its combinatorial guarantees, and compare a box-counting
# estimate of the resulting set with the Bowen parameter.

# %%
import math
from fractions import Fraction

from bowenlab.conditions import ahlfors_suite, verify_contraction, verify_targets
from bowenlab.ifs import LinearSystem, base_q_level
from bowenlab.oracle import cross_check
from bowenlab.pressure import ContractionBeta
from bowenlab.targets import (
    GrowthChecked,
    MoranConstants,
    build_moran_tree,
    dichotomy_check,
    frostman_scaling,
    lower_bound_R_check,
    moran_schedule,
)

cantor = LinearSystem.constant(base_q_level(3, (0, 2)), name="cantor")
beta = ContractionBeta(2.0)
h = math.log(2) / math.log(3)
b = math.log(2) / (2 * math.log(3))

# %% [markdown]
# ## Schedule
#
# Levels n_1 < n_2 < ... must grow fast enough that each parent ball holds
# many child balls. The constants come from the condition checks and the
# Ahlfors constant C.

# %%
theta = verify_contraction(cantor, 8).data["theta"]
tg = verify_targets(cantor, beta, 8).data
C = ahlfors_suite(cantor, h, 14).C
consts = MoranConstants(theta=theta, alpha_high=tg["alpha_high"], alpha_low=tg["alpha_low"], h=h, C=C)
sched = moran_schedule(consts, GrowthChecked(n1=1), 3)
print("schedule:", sched.ns, "valid:", sched.valid)

# %% [markdown]
# ## Tree
#
# Masses are exact fractions; each level sums to 1.

# %%
tree = build_moran_tree(cantor, beta, sched, per_parent_cap=None)
for l, lev in enumerate(tree.levels):
    print(f"level {l}: {len(lev.parent):5d} balls, mass sum {tree.level_mass_sum(l)}")
print("lower bound on child counts:", lower_bound_R_check(tree, C, h))
print("dichotomy counterexamples / pairs:", dichotomy_check(tree, 1))
assert tree.level_mass_sum(tree.depth - 1) == Fraction(1)

# %% [markdown]
# ## Box counting
#
# Box counting on points sampled from a deeper tree. Truncated
# constructions resolve only a few generations, so the estimate sits a
# little below b.

# %%
deep = build_moran_tree(cantor, beta, [1, 8, 17])
cc = cross_check(deep, b)
print(f"box-count slope {cc.slope:.3f}, b = {b:.4f}, gap {cc.gap:.3f}")

# %% [markdown]
# ## Mass scaling
#
# The exponent of max m(B(x, r)) against r. On a two-level tree it lands
# near b. Deeper truncated trees report the weakest level, because the last
# level holds only a handful of children per parent.

# %%
print(f"two-level [1, 5]: {frostman_scaling(build_moran_tree(cantor, beta, [1, 5])):.3f}")
print(f"three-level [1, 8, 17]: {frostman_scaling(deep):.3f}")
