import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowenlab.conditions import ahlfors_suite
from bowenlab.errors import ConstructionError, PreconditionError
from bowenlab.ifs import Word
from bowenlab.pressure import ConstantBeta, target_sum
from bowenlab.targets import (
    ARatio,
    GrowthChecked,
    MoranConstants,
    build_moran_tree,
    cover_tail_sum,
    dichotomy_check,
    frostman_scaling,
    lower_bound_R_check,
    moran_schedule,
    sample_target_points,
    target_ball,
    target_setup,
)

from conftest import B_CANTOR, LOG2, LOG3


def _brute_children(parent_digits, n_child, anchor=Fraction(1, 4)):
    """Exact rational count of level-``n_child`` Cantor words whose target ball sits in the parent's."""

    def phi(digits, x):
        for d in reversed(digits):
            x = (x + d) / 3
        return x

    pc = phi(parent_digits, anchor)
    pr = Fraction(1, 9 ** len(parent_digits))
    cr = Fraction(1, 9**n_child)
    return sum(abs(phi(w, anchor) - pc) + cr <= pr for w in product((0, 2), repeat=n_child))


@pytest.fixture(scope="module")
def cantor_tree(cantor, beta2):
    return build_moran_tree(cantor, beta2, [1, 5])


@pytest.fixture(scope="module")
def cantor_tree3(cantor, beta2):
    return build_moran_tree(cantor, beta2, [1, 5, 12])


# --- target balls -------------------------------------------------------------------------


def test_target_ball_examples(base3, cantor, beta2):
    b = target_ball(target_setup(base3, beta2), Word.of(1, 1))
    assert b.center == pytest.approx(0.5, abs=1e-12) and b.radius == pytest.approx(1 / 81, rel=1e-14)
    s = target_setup(cantor, beta2)
    b = target_ball(s, Word.of(0))
    assert b.center == pytest.approx(1 / 12, abs=1e-12) and b.radius == pytest.approx(1 / 9, rel=1e-14)


def test_containment_flag(cantor, beta2):
    s = target_setup(cantor, beta2)
    # K = 1, eps = 1/4, alpha_low = log 3
    assert s.containment_threshold == pytest.approx(4 / LOG3)
    assert not target_ball(s, Word.of(0, 2, 0)).contained
    assert target_ball(s, Word.of(0, 2, 0, 2)).contained


def test_target_ball_validation(cantor, beta2):
    with pytest.raises(ValueError):
        target_ball(target_setup(cantor, beta2), Word((0,), start=2))


def test_ball_radius_esc_bound(cantor, beta2):
    s = target_setup(cantor, beta2)
    for n in range(1, 6):
        for w in product((0, 2), repeat=n):
            b = target_ball(s, Word(w))
            assert b.radius <= 3.0**-n * math.exp(-n * s.alpha_low) * (1 + 1e-12)


# --- cover sums ---------------------------------------------------------------------------


def test_cover_sum_convergent(base3, beta2):
    t = 0.75
    cs = cover_tail_sum(base3, beta2, t, 1, 12)
    expected = [t * LOG2 + n * (1 - 2 * t) * LOG3 for n in range(1, 13)]
    assert np.allclose(cs.log_terms, expected, atol=1e-12)
    assert cs.ratio == pytest.approx(3**-0.5, abs=1e-10)
    assert cs.converges and not cs.diverges


def test_cover_sum_at_b(base3, beta2):
    cs = cover_tail_sum(base3, beta2, 0.5, 1, 10)
    assert np.allclose(cs.terms, 2**0.5, rtol=1e-12)
    assert not cs.converges and not cs.diverges
    assert cs.value == pytest.approx(10 * 2**0.5, rel=1e-12)


def test_cover_sum_divergent(base3, beta2):
    cs = cover_tail_sum(base3, beta2, 0.25, 1, 10)
    assert cs.ratio == pytest.approx(3**0.5, abs=1e-10)
    assert cs.diverges and cs.proof_tail_bound == math.inf


def test_cover_sum_matches_pressure(alternating, beta_alt):
    t = 0.9
    cs = cover_tail_sum(alternating, beta_alt, t, 2, 9)
    for n, lt in zip(cs.ns, cs.log_terms):
        assert lt == pytest.approx(t * LOG2 + target_sum(alternating, beta_alt, t, int(n)).log_sum, abs=1e-10)


def test_cover_sum_validation(base3, beta2):
    with pytest.raises(ValueError):
        cover_tail_sum(base3, beta2, 0.0, 1, 4)
    with pytest.raises(ValueError):
        cover_tail_sum(base3, beta2, 0.5, 5, 4)


# --- schedules ----------------------------------------------------------------------------


def test_schedule_claim_examples():
    c = MoranConstants(theta=LOG3, alpha_high=LOG3, alpha_low=LOG3)
    s = moran_schedule(c, GrowthChecked(n1=2, inequalities=("claim",)), 2)
    assert s.ns == [2, 5] and s.valid
    c = MoranConstants(theta=1.0, alpha_high=1.0, alpha_low=1.0)
    assert moran_schedule(c, GrowthChecked(n1=1, inequalities=("claim",)), 2).ns == [1, 3]


def test_schedule_is_least():
    c = MoranConstants(theta=LOG3, alpha_high=LOG3, alpha_low=LOG3, h=0.63, C=1.5, P=0.2)
    v = GrowthChecked(n1=1, inequalities=("claim", "nonempty", "incsubseq1"))
    s = moran_schedule(c, v, 4)
    assert s.valid
    for cert in s.certificates[1:]:
        n = cert["n"]
        assert any(n - 1 < ch["bound"] - 1e-9 for ch in cert["checks"])


def test_schedule_supplied_certified():
    c = MoranConstants(theta=LOG3, alpha_high=LOG3, alpha_low=LOG3)
    good = moran_schedule(c, GrowthChecked(supplied=(1, 8, 17)), 3)
    assert good.ns == [1, 8, 17] and good.valid
    bad = moran_schedule(c, GrowthChecked(supplied=(1, 2, 3)), 3)
    assert not bad.valid


def test_schedule_errors():
    with pytest.raises(PreconditionError):
        moran_schedule(MoranConstants(0.0, 1.0, 1.0), GrowthChecked(), 3)
    with pytest.raises(PreconditionError):
        moran_schedule(MoranConstants(1.0, 1.0, 1.0, P=-0.1), GrowthChecked(inequalities=("incsubseq1",)), 3)
    with pytest.raises(PreconditionError):
        moran_schedule(MoranConstants(1.0, 1.0, 1.0, h=0.5, C=2.0, P=0.1), ARatio(A=10.0), 3)
    with pytest.raises(ValueError):
        moran_schedule(MoranConstants(1.0, 1.0, 1.0), GrowthChecked(inequalities=("nope",)), 3)


def test_aratio_example():
    s = moran_schedule(None, ARatio(A=LOG3 / 2, alpha_low=LOG3), 10)
    ratios = [b / a for a, b in zip(s.ns, s.ns[1:])]
    assert all(2 <= r <= 4 for r in ratios)
    assert s.valid


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.floats(1.0, 4.0), st.floats(0.01, 2.0),
       st.floats(0.1, 1.0), st.floats(1e-3, 1.0), st.integers(1, 6))
def test_aratio_bounded_consecutive(alpha_low, extra, C, P, h, frac, n1):
    # A drawn inside the admissible range (0, (P / 6h) alpha_low / (log C + alpha_high)]
    alpha_high = alpha_low + extra
    c = MoranConstants(theta=1.0, alpha_high=alpha_high, alpha_low=alpha_low, h=h, C=C, P=P)
    A = frac * P / (6 * h) * alpha_low / (math.log(C) + alpha_high)
    s = moran_schedule(c, ARatio(A=A, n1=n1), 13)
    q = Fraction(alpha_low) / Fraction(A)
    for a, b in zip(s.ns, s.ns[1:]):
        r = Fraction(b, a)
        assert q <= r <= q + 2
    # strict increase is not part of the claim and fails when alpha_low / A < 1
    assert all(ch["ok"] for cert in s.certificates for ch in cert["checks"] if ch["inequality"] != "increasing")


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.integers(1, 5))
def test_growth_schedule_satisfies_certificates(theta, alpha_high, n1):
    c = MoranConstants(theta=theta, alpha_high=alpha_high, alpha_low=0.1, h=0.5, C=2.0, P=0.3)
    v = GrowthChecked(n1=n1, inequalities=("claim", "nonempty", "incsubseq1", "incsubseq3", "gg"))
    s = moran_schedule(c, v, 5)
    assert s.valid and all(b > a for a, b in zip(s.ns, s.ns[1:]))


# --- Moran tree ---------------------------------------------------------------------------------


def test_tree_cantor_counts_frozen(cantor_tree):
    # exact brute force over all 32 level-5 words: 8 children per parent
    assert _brute_children((0,), 5) == 8 and _brute_children((2,), 5) == 8
    assert cantor_tree.levels[1].true_counts == [8, 8]
    assert len(cantor_tree.levels[0]) == 2
    assert cantor_tree.levels[0].masses == [Fraction(1, 2)] * 2
    assert set(cantor_tree.levels[1].masses) == {Fraction(1, 16)}


def test_tree_counts_match_brute_force(cantor, beta2):
    tree = build_moran_tree(cantor, beta2, [2, 6])
    expected = [_brute_children(tuple(2 * p for p in w), 6) for w in tree.levels[0].words.tolist()]
    assert tree.levels[1].true_counts == expected


def test_tree_mass_and_nesting(cantor_tree3):
    tree = cantor_tree3
    for l in range(tree.depth):
        assert tree.level_mass_sum(l) == 1
    for l in range(1, tree.depth):
        cur, prev = tree.levels[l], tree.levels[l - 1]
        d = np.abs(cur.centers[:, 0] - prev.centers[cur.parent, 0])
        assert np.all(d + np.exp(cur.log_radius) <= np.exp(prev.log_radius[cur.parent]) * (1 + 1e-12))
        # equal sibling masses
        for p in range(len(prev)):
            assert len({cur.masses[i] for i in np.flatnonzero(cur.parent == p)}) == 1


def test_tree_cap_keeps_true_mass(cantor, beta2):
    full = build_moran_tree(cantor, beta2, [1, 8], per_parent_cap=None)
    capped = build_moran_tree(cantor, beta2, [1, 8], per_parent_cap=5, seed=3)
    assert capped.capped and len(capped.levels[1]) == 10
    assert capped.levels[1].true_counts == full.levels[1].true_counts
    assert capped.level_mass_sum(1) == 1
    assert capped.deepest_resolved() == 0 and full.deepest_resolved() == 1


def test_tree_cap_deterministic(cantor, beta2):
    a = build_moran_tree(cantor, beta2, [1, 8], per_parent_cap=5, seed=3)
    b = build_moran_tree(cantor, beta2, [1, 8], per_parent_cap=5, seed=3)
    assert np.array_equal(a.levels[1].words, b.levels[1].words)


def test_tree_empty_children(cantor):
    # a tiny level-1 ball cannot hold any level-2 centre, which sits at least 1/18 away
    with pytest.raises(ConstructionError, match="empty child set"):
        build_moran_tree(cantor, ConstantBeta((0.05,), prefix=(20.0,)), [1, 2])


def test_tree_schedule_validation(cantor, beta2):
    with pytest.raises(ValueError):
        build_moran_tree(cantor, beta2, [3, 3])


def test_dichotomy_and_lower_bound(cantor, beta2):
    c = MoranConstants(theta=LOG3, alpha_high=LOG3, alpha_low=LOG3, h=LOG2 / LOG3,
                       C=ahlfors_suite(cantor, LOG2 / LOG3, 10).C)
    s = moran_schedule(c, GrowthChecked(n1=1), 3)
    assert s.valid
    tree = build_moran_tree(cantor, beta2, s)
    assert all(len(tree.levels[l]) > 0 for l in range(tree.depth))
    bad, pairs = dichotomy_check(tree, 1)
    assert bad == 0 and pairs == 2 * 2 ** s.ns[1]
    ok, slack = lower_bound_R_check(tree, c.C, c.h)
    assert ok and slack >= 0


def test_ell_helper(cantor_tree3):
    r = float(np.exp(cantor_tree3.levels[1].log_radius.max()))
    assert cantor_tree3.ell(r) == 1
    assert cantor_tree3.ell(1e-300) is None


# --- sampling ------------------------------------------------------------------------------------


def test_sample_exact_leaves(cantor_tree):
    pts, picks, masses = sample_target_points(cantor_tree, 16)
    assert np.array_equal(pts, cantor_tree.leaves.centers)
    assert np.allclose(masses, 1 / 16)


def test_sample_in_cantor_first_level(cantor_tree3):
    pts, _, _ = sample_target_points(cantor_tree3, 2000, seed=1)
    x = pts[:, 0]
    assert np.all((x <= 1 / 3) | (x >= 2 / 3))
    level1 = cantor_tree3.levels[0]
    d = np.min(np.abs(x[:, None] - level1.centers[None, :, 0]), axis=1)
    assert np.all(d <= np.exp(level1.log_radius.max()))


def test_sample_needs_depth(cantor, beta2):
    tree = build_moran_tree(cantor, beta2, [2])
    with pytest.raises(ValueError):
        sample_target_points(tree, 10)


# --- Frostman scaling -------------------------------------------------------------------------------


def test_frostman_dyadic():
    k = 10
    centres = (2 * np.arange(2**k) + 1) / 2 ** (k + 1)
    radii = 2.0 ** -np.arange(1, k)
    e = frostman_scaling(centres, radii, ball_radii=2.0 ** -(k + 1))
    assert e == pytest.approx(1.0, abs=0.02)


def test_frostman_single_leaf():
    assert frostman_scaling(np.array([0.3]), np.geomspace(1e-3, 1, 8)) == pytest.approx(0.0, abs=1e-12)


def test_frostman_cantor(cantor_tree):
    e = frostman_scaling(cantor_tree)
    assert 0.25 <= e <= B_CANTOR + 0.05


@pytest.mark.parametrize("schedule", [[1, 5, 12], [1, 5, 13]])
def test_frostman_tracks_tree_mass_ratios(cantor, beta2, schedule):
    # the fitted exponent follows the weakest level ratio log m_l / log r_l
    tree = build_moran_tree(cantor, beta2, schedule)
    worst = min(math.log(lv.masses[0]) / lv.log_radius[0] for lv in tree.levels)
    assert abs(frostman_scaling(tree) - worst) < 0.03


def test_frostman_errors(cantor_tree3):
    with pytest.raises(ValueError):
        frostman_scaling(cantor_tree3, radii=[0.1, 0.1])
    with pytest.raises(ValueError):
        frostman_scaling(np.array([0.1, 0.2]))
