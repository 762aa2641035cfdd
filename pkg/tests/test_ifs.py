import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowenlab.errors import CapacityError, DomainError, InvalidWordError, PreconditionError
from bowenlab.gamma import ConstantAmplitude, GammaFamily, Sinusoidal
from bowenlab.ifs import (
    Box,
    LevelFamily,
    LinearMap,
    LinearSystem,
    PerturbedSystem,
    Tail,
    Word,
    base_q_level,
    cylinder,
    deriv_word,
    enumerate_words,
    eval_word,
    kappa_bounds,
    project_tail,
    truncation_depth,
)
from bowenlab.quadrature import adaptive_simpson, simpson


def _exact_phi(word, x, q=3):
    """Independent rational evaluation of base-q words (outermost first)."""
    x = Fraction(x)
    for s in reversed(word):
        x = (x + s) / q
    return x


# --- quadrature -----------------------------------------------------------------------


def test_simpson_exact_on_cubics():
    assert simpson(lambda x: x**3 - x, 0.0, 2.0, 2) == pytest.approx(2.0, abs=1e-14)


def test_adaptive_simpson_smooth():
    v, err = adaptive_simpson(np.sin, 0.0, math.pi)
    assert v == pytest.approx(2.0, abs=1e-12)
    assert err <= 1e-12


def test_adaptive_simpson_reversed_interval():
    v, _ = adaptive_simpson(np.exp, 1.0, 0.0)
    assert v == pytest.approx(-(math.e - 1), abs=1e-12)


# --- eval / deriv / cylinder examples ---------------------------------------------------


def test_eval_word_examples(base3):
    assert eval_word(base3, Word.of(1), 0.0) == pytest.approx(1 / 3, abs=1e-15)
    assert eval_word(base3, Word.of(0, 2), 0.0) == pytest.approx(2 / 9, abs=1e-15)
    assert eval_word(base3, Word(), 0.7) == 0.7


def test_eval_word_errors(base3):
    with pytest.raises(InvalidWordError):
        eval_word(base3, Word.of(5), 0.0)
    with pytest.raises(DomainError):
        eval_word(base3, Word.of(1), 1.5)


def test_deriv_word_examples(base3, pert_base3_affine):
    for n in range(0, 6):
        assert deriv_word(base3, Word((1,) * n), 0.4) == pytest.approx(3.0**-n, rel=1e-14)
    rng = np.random.default_rng(1)
    for n in range(1, 6):
        for _ in range(20):
            w = Word(tuple(rng.integers(0, 3, n)))
            d = deriv_word(pert_base3_affine, w, float(rng.random()))
            assert 3.0**-n * 0.9**n * (1 - 1e-12) <= d <= 3.0**-n * 1.1**n * (1 + 1e-12)


def test_cylinder_examples(base3, cantor):
    c = cylinder(base3, Word.of(2))
    assert c.lo[0] == pytest.approx(2 / 3) and c.hi[0] == pytest.approx(1.0)
    c = cylinder(cantor, Word.of(0, 2))
    assert c.lo[0] == pytest.approx(2 / 9, abs=1e-15) and c.hi[0] == pytest.approx(1 / 3, abs=1e-15)


def test_perturbed_cylinder_displacement(cantor):
    fam = GammaFamily((Sinusoidal(frequency=1.0, phase=0.3),), ConstantAmplitude(0.2))
    p = PerturbedSystem(cantor, fam)
    for s in (0, 2):
        lin = cylinder(cantor, Word.of(s))
        pc = cylinder(p, Word.of(s))
        # displacement bound eps_1 * kappa_bar_(1)
        bound = 0.2 * (1 / 3)
        assert abs(pc.lo[0] - lin.lo[0]) <= bound + 1e-12
        assert abs(pc.hi[0] - lin.hi[0]) <= bound + 1e-12


def test_identity_perturbation_is_exact(base3):
    p = PerturbedSystem(base3, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.0)))
    xs = np.linspace(0, 1, 11)
    for w in (Word.of(0), Word.of(2, 1), Word.of(1, 1, 2)):
        for x in xs:
            assert eval_word(p, w, x) == pytest.approx(eval_word(base3, w, x), abs=1e-15)


def test_perturbed_value_at_one(pert_base3_affine):
    # the linear part of gamma integrates to zero over [0, 1]
    assert eval_word(pert_base3_affine, Word.of(0), 1.0) == pytest.approx(1 / 3, abs=1e-13)


def test_perturbed_derivative_exact(pert_base3_affine):
    x = 0.8
    expected = (1 / 3) * (1 + 0.1 * (2 * x - 1))
    assert deriv_word(pert_base3_affine, Word.of(1), x) == pytest.approx(expected, rel=1e-15)


# --- kappa bounds --------------------------------------------------------------------------


def test_kappa_base3(base3):
    kb = kappa_bounds(base3, 4)
    for arr in (kb.lower, kb.upper):
        assert arr[-1] == pytest.approx(3.0**-4, rel=1e-14)
    assert kb.exact.all() and kb.chain_holds()


def test_kappa_alternating(alternating):
    kb = kappa_bounds(alternating, 2)
    assert kb.lower[1] == pytest.approx(1 / 6, rel=1e-14)
    assert kb.upper[1] == pytest.approx(1 / 6, rel=1e-14)


def test_kappa_perturbed_envelope(pert_base3_affine):
    kb = kappa_bounds(pert_base3_affine, 2)
    assert kb.upper[1] <= (1.1 / 3) ** 2 * (1 + 1e-12)
    assert kb.lower[1] >= (0.9 / 3) ** 2 * (1 - 1e-12)


def test_kappa_capacity():
    sys_ = LinearSystem.constant(base_q_level(3), word_cap=100)
    with pytest.raises(CapacityError):
        kappa_bounds(sys_, 6, allow_fallback=False)
    kb = kappa_bounds(sys_, 6)
    assert not kb.exact[-1] and kb.chain_holds()


def test_enumerate_words_cap():
    sys_ = LinearSystem.constant(base_q_level(3), word_cap=100)
    with pytest.raises(CapacityError):
        enumerate_words(sys_, 5)


# --- tail projection ------------------------------------------------------------------------


def test_project_tail_examples(base3, cantor):
    tol = 1e-12
    assert abs(project_tail(base3, 1, Tail((1,)), tol) - 0.5) <= tol
    assert abs(project_tail(cantor, 1, Tail((0, 2)), tol) - 0.25) <= tol
    assert abs(project_tail(base3, 1, Tail((0,)), tol)) <= tol


def test_project_tail_truncation_error(cantor):
    theta = cantor.theta()
    for k in (3, 6, 10):
        a = project_tail(cantor, 1, Tail((0, 2)), depth=k)
        b = project_tail(cantor, 1, Tail((0, 2)), depth=k + 5)
        assert abs(a - b) <= math.exp(-theta * k) * cantor.domain.diam + 1e-15


def test_project_tail_requires_ucc():
    base = LinearSystem.constant(LevelFamily((0, 1), (LinearMap(0.6, (0.0,)), LinearMap(0.4, (0.6,)))))
    sys_ = PerturbedSystem(base, GammaFamily((Sinusoidal(),), ConstantAmplitude(0.9)))
    assert sys_.theta() < 0
    with pytest.raises(PreconditionError):
        project_tail(sys_, 1, Tail((0,)))


def test_truncation_depth_bound(base3):
    k = truncation_depth(base3, 1e-9)
    assert math.exp(-base3.theta() * k) * base3.domain.diam < 1e-9


# --- system validation -----------------------------------------------------------------------


def test_map_must_stay_in_domain():
    with pytest.raises(ValueError):
        LinearSystem.constant(LevelFamily((0, 1), (LinearMap(0.5, (0.0,)), LinearMap(0.5, (0.8,)))))


def test_alphabet_size_bounds():
    with pytest.raises(ValueError):
        LinearSystem.constant(LevelFamily((0,), (LinearMap(0.5, (0.0,)),)))


def test_two_dimensional_similarity():
    maps = tuple(LinearMap(0.5, (a, b)) for a in (0.0, 0.5) for b in (0.0, 0.5))
    sys_ = LinearSystem.constant(LevelFamily(tuple(range(4)), maps))
    c = cylinder(sys_, Word.of(3, 0))
    assert np.allclose(c.lower, (0.5, 0.5)) and np.allclose(c.upper, (0.75, 0.75))
    assert np.allclose(eval_word(sys_, Word.of(1), np.array([1.0, 1.0])), (0.5, 1.0))


def test_box_helpers():
    b = Box((0.0, 0.0), (1.0, 2.0))
    assert b.diam == pytest.approx(math.sqrt(5))
    assert b.contains_box(Box((0.2, 0.2), (0.5, 1.0)))


# --- properties --------------------------------------------------------------------------------

words3 = st.lists(st.integers(0, 2), min_size=0, max_size=6)


@settings(max_examples=60, deadline=None)
@given(words3, words3, st.floats(0, 1))
def test_composition_consistency(w, t, x):
    sys_ = LinearSystem.constant(base_q_level(3))
    ww = Word(tuple(w))
    tt = Word(tuple(t), start=len(w) + 1)
    full = eval_word(sys_, ww + tt, x)
    inner = eval_word(sys_, tt, x)
    assert full == pytest.approx(eval_word(sys_, ww, inner), abs=1e-12)
    assert full == pytest.approx(float(_exact_phi(w + t, x)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=4), st.lists(st.integers(0, 2), min_size=1, max_size=3),
       st.floats(0, 1))
def test_chain_rule_perturbed(w, t, x):
    base = LinearSystem.constant(base_q_level(3))
    p = PerturbedSystem(base, GammaFamily((Sinusoidal(2.0, 0.4),), ConstantAmplitude(0.3)))
    ww, tt = Word(tuple(w)), Word(tuple(t), start=len(w) + 1)
    lhs = deriv_word(p, ww + tt, x)
    rhs = deriv_word(p, ww, eval_word(p, tt, x)) * deriv_word(p, tt, x)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_cylinder_nesting(alternating):
    for n in range(1, 5):
        for w in product(*(alternating.level(k).symbols for k in range(1, n + 1))):
            word = Word(w)
            c = cylinder(alternating, word)
            for s in alternating.level(n + 1).symbols:
                child = cylinder(alternating, word + Word((s,), n + 1))
                assert c.contains_box(child, slack=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)]), min_size=2, max_size=3),
       st.integers(1, 6))
def test_kappa_product_chain(ratios, n):
    maps, off = [], Fraction(0)
    for r in ratios:
        maps.append(LinearMap(float(r), (float(off),)))
        off += r
    if off > 1:
        return
    sys_ = LinearSystem(period=(LevelFamily(tuple(range(len(maps))), tuple(maps)), base_q_level(2)))
    kb = kappa_bounds(sys_, n)
    assert kb.chain_holds()
    assert kb.lower[-1] == pytest.approx(min(ratios) ** ((n + 1) // 2) * 0.5 ** (n // 2), rel=1e-12)
