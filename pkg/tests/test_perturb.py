import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowenlab.conditions import FAILS, HOLDS, NA, ROUTES, verify
from bowenlab.errors import DomainError, PreconditionError
from bowenlab.gamma import (
    Affine,
    ConstantAmplitude,
    GammaFamily,
    GeometricAmplitude,
    PowerAmplitude,
    Sinusoidal,
)
from bowenlab.ifs import (
    LevelFamily,
    LinearMap,
    LinearSystem,
    Word,
    cylinder,
    cylinders,
    deriv_word,
    enumerate_words,
    eval_word,
)
from bowenlab.perturb import build_perturbed, check_separation, perturbation_diagnostics
from bowenlab.pressure import default_bowen, pressure_curve


# --- construction --------------------------------------------------------------------------


def test_identity_perturbation(cantor):
    p = build_perturbed(cantor, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.0)))
    for x in np.linspace(0, 1, 7):
        assert eval_word(p, Word.of(2, 0), x) == pytest.approx(eval_word(cantor, Word.of(2, 0), x), abs=1e-15)


def test_affine_example(base3):
    p = build_perturbed(base3, GammaFamily((Affine(),), ConstantAmplitude(0.1)))
    assert eval_word(p, Word.of(0), 1.0) == pytest.approx(1 / 3, abs=1e-14)
    x = 0.3
    assert deriv_word(p, Word.of(2), x) == pytest.approx((1 / 3) * (1 + 0.1 * (2 * x - 1)), rel=1e-15)


def test_displacement_bound(cantor):
    fam = GammaFamily((Sinusoidal(1.0, 0.7),), ConstantAmplitude(0.3))
    p = build_perturbed(cantor, fam)
    xs = np.linspace(0, 1, 101)
    for s in (0, 2):
        lin = np.array([eval_word(cantor, Word.of(s), x) for x in xs])
        per = np.array([eval_word(p, Word.of(s), x) for x in xs])
        assert np.max(np.abs(per - lin)) <= 0.3 / 3 + 1e-12


def test_build_rejections(cantor, pert_cantor):
    with pytest.raises(DomainError):
        build_perturbed(cantor, GammaFamily((Sinusoidal(),), ConstantAmplitude(1.0)))
    with pytest.raises(PreconditionError):
        build_perturbed(pert_cantor, GammaFamily())
    sq = LinearSystem.constant(LevelFamily(tuple(range(4)), tuple(
        LinearMap(0.5, (a, b)) for a in (0.0, 0.5) for b in (0.0, 0.5))))
    with pytest.raises(PreconditionError):
        build_perturbed(sq, GammaFamily())
    # amplitude larger than the declared eps
    with pytest.raises(DomainError):
        build_perturbed(cantor, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.3), eps=ConstantAmplitude(0.2)))


# --- diagnostics ------------------------------------------------------------------------------


def test_diagnostics_geometric():
    d = perturbation_diagnostics(GammaFamily((Sinusoidal(),), GeometricAmplitude(1.0, 0.25)), 30)
    assert d.partial_sums[-1] + d.tail_bound == pytest.approx(1 / 3, rel=1e-12)
    assert d.routes["bounded"].status == HOLDS and d.routes["subexponential"].status == HOLDS
    k = np.arange(1, 31)
    assert np.allclose(d.product_upper, np.cumprod(1 + 0.25**k))
    assert np.allclose(d.product_lower, np.cumprod(1 - 0.25**k))


def test_diagnostics_harmonic():
    d = perturbation_diagnostics(GammaFamily((Sinusoidal(),), PowerAmplitude(0.9, 1.0)), 1000)
    assert d.routes["bounded"].status == FAILS
    assert d.routes["subexponential"].status == HOLDS
    assert d.cesaro[-1] < d.cesaro[99] < d.cesaro[9]


def test_diagnostics_constant():
    d = perturbation_diagnostics(GammaFamily((Sinusoidal(),), ConstantAmplitude(0.1)), 20)
    assert d.routes["bounded"].status == FAILS and d.routes["subexponential"].status == FAILS
    assert np.allclose(d.cesaro, 0.1)
    assert d.log_ratio_bound[-1] == pytest.approx(20 * math.log(1.1 / 0.9))
    with pytest.raises(ValueError):
        perturbation_diagnostics(GammaFamily(), 0)


# --- separation --------------------------------------------------------------------------------


def test_separation_threshold(cantor):
    ok = check_separation(cantor, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.1)), horizon=3)
    assert ok.routes["strong_separation"].status == HOLDS and ok.ok
    assert all(r["threshold"] == pytest.approx(0.5) for r in ok.levels)
    bad = check_separation(cantor, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.6)), horizon=3)
    v = bad.routes["strong_separation"]
    assert v.status == FAILS and v.witness["level"] == 1 and v.witness["failed_levels"] == [1, 2, 3]
    assert v.witness["threshold"] == pytest.approx(0.5)


def test_separation_base3_not_applicable(base3):
    r = check_separation(base3, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.1)))
    assert r.routes["strong_separation"].status == NA
    assert r.routes["containment"].status == HOLDS and r.ok


def test_containment_fails_for_affine_anchor(base3):
    # a positive constant gamma stretches every image past phi(1)
    r = check_separation(base3, GammaFamily((Affine(1.0, 0.0),), ConstantAmplitude(0.3)))
    assert r.routes["containment"].status == FAILS
    assert r.routes["containment"].witness["excess"] > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.49), st.integers(1, 4), st.floats(0, 2 * math.pi))
def test_separation_preserved(eps, freq, phase):
    # integer frequencies integrate to zero, so the perturbed maps still send X into X
    base = LinearSystem.constant(LevelFamily((0, 1), (LinearMap(1 / 3, (0.0,)), LinearMap(1 / 3, (2 / 3,)))))
    fam = GammaFamily((Sinusoidal(freq, phase),), ConstantAmplitude(eps))
    assert check_separation(base, fam).routes["strong_separation"].status == HOLDS
    p = build_perturbed(base, fam)
    for n in (1, 2, 3):
        lo, hi = cylinders(p, enumerate_words(p, n))
        order = np.argsort(lo[:, 0])
        assert np.min(lo[order[1:], 0] - hi[order[:-1], 0]) > 0


# --- envelope and invariance ---------------------------------------------------------------------


def test_derivative_envelope_random_pairs(pert_cantor):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        w = Word(tuple(int(s) for s in rng.choice([0, 2], n)))
        x = float(rng.random())
        g = np.array([0.25**k for k in range(1, n + 1)])
        d = deriv_word(pert_cantor, w, x)
        assert 3.0**-n * np.prod(1 - g) * (1 - 1e-12) <= d <= 3.0**-n * np.prod(1 + g) * (1 + 1e-12)


def test_pressure_invariance(cantor, pert_cantor, beta2):
    a = default_bowen(cantor, beta2, 12, tol=1e-10)
    b = default_bowen(pert_cantor, beta2, 12, tol=1e-10)
    assert a.to_dict() == b.to_dict()
    ca = pressure_curve(cantor, beta2, 0.3, 1, 10)
    cb = pressure_curve(pert_cantor, beta2, 0.3, 1, 10)
    assert np.array_equal(ca.log_sums, cb.log_sums)


@pytest.mark.parametrize("amp,route", [
    (GeometricAmplitude(1.0, 0.25), "bounded"),
    (PowerAmplitude(0.3, 1.0), "subexponential"),
])
def test_route_composition(cantor, beta2, amp, route):
    fam = GammaFamily((Sinusoidal(),), amp)
    assert verify(cantor, beta2, 6, route).route_passes(route)
    assert perturbation_diagnostics(fam, 6).routes[route].status == HOLDS
    assert check_separation(cantor, fam).ok
    p = build_perturbed(cantor, fam)
    assert verify(p, beta2, 6, route).route_passes(route)


def test_route_composition_negative(cantor, beta2):
    fam = GammaFamily((Sinusoidal(),), PowerAmplitude(0.3, 1.0))
    p = build_perturbed(cantor, fam)
    assert perturbation_diagnostics(fam, 6).routes["bounded"].status == FAILS
    assert not verify(p, beta2, 6, "bounded").route_passes("bounded")
    assert set(ROUTES) == {"bounded", "subexponential"}


def test_level_one_images_inside_linear(cantor, pert_cantor):
    # zero-mean gamma keeps the endpoints; deeper cylinders may shift since inner images move
    for s in (0, 2):
        assert cylinder(cantor, Word.of(s)).contains_box(cylinder(pert_cantor, Word.of(s)), slack=1e-12)
