# %% [markdown]
# # Non-linear perturbations of a linear system
#
# Each map phi_i(x) = r_i x + c_i is replaced by a map whose derivative is
# r_i (1 + gamma_k(x)) with |gamma_k| small. The pressure only sees the
# linear contractions, so the Bowen parameter is unchanged. What the
# perturbation affects is which hypotheses survive.

# %%
import numpy as np

from bowenlab.gamma import ConstantAmplitude, GammaFamily, GeometricAmplitude, PowerAmplitude, Sinusoidal
from bowenlab.ifs import LinearSystem, PerturbedSystem, Word, base_q_level, deriv_word
from bowenlab.perturb import check_separation, perturbation_diagnostics
from bowenlab.pressure import ContractionBeta, default_bowen

cantor = LinearSystem.constant(base_q_level(3, (0, 2)), name="cantor")
beta = ContractionBeta(2.0)

# %% [markdown]
# ## Amplitude schedules
#
# A summable amplitude keeps the distortion ratio bounded. A harmonic one
# only keeps it subexponential. A constant one breaks both routes.

# %%
for name, amp in (("geometric 4^-k", GeometricAmplitude(1.0, 0.25)),
                  ("harmonic 0.3/k", PowerAmplitude(0.3, 1)),
                  ("constant 0.1", ConstantAmplitude(0.1))):
    d = perturbation_diagnostics(GammaFamily((Sinusoidal(),), amp), 20)
    print(f"{name:16s} bounded {d.routes['bounded'].status:18s} subexponential {d.routes['subexponential'].status}")

# %% [markdown]
# ## Derivative envelope
#
# For any word of length n the derivative lies between
# 3^-n prod(1 - g_k) and 3^-n prod(1 + g_k).

# %%
fam = GammaFamily((Sinusoidal(),), GeometricAmplitude(1.0, 0.25))
pert = PerturbedSystem(cantor, fam)
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    n = int(rng.integers(1, 9))
    w = Word(tuple(int(s) for s in rng.choice([0, 2], n)))
    g = 0.25 ** np.arange(1, n + 1)
    d = deriv_word(pert, w, float(rng.random())) * 3.0**n
    worst = max(worst, d / np.prod(1 + g), np.prod(1 - g) / d)
print("largest envelope ratio (must be <= 1):", worst)

# %% [markdown]
# ## Separation
#
# The Cantor gaps are 1/3, so the perturbed cylinders stay apart while the
# amplitude is below 1/2.

# %%
for eps in (0.1, 0.45, 0.6):
    rep = check_separation(cantor, GammaFamily((Sinusoidal(),), ConstantAmplitude(eps)))
    print(f"eps {eps}: {rep.routes['strong_separation'].status}")

# %% [markdown]
# ## Bowen parameter is unchanged

# %%
print(default_bowen(cantor, beta, 12).b, default_bowen(pert, beta, 12).b)
