import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowenlab.ifs import eval_words
from bowenlab.oracle import box_count_dimension, cross_check, default_scales, tree_scales
from bowenlab.targets import build_moran_tree

from conftest import B_CANTOR, LOG2, LOG3


def _cantor_points(cantor, count=10_000, depth=12, seed=0):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 2, size=(count, depth))
    return eval_words(cantor, idx, np.array([0.0]))[:, 0]


def test_uniform_interval():
    pts = np.random.default_rng(0).random(10_000)
    assert box_count_dimension(pts).slope == pytest.approx(1.0, abs=0.05)


def test_lattice_square():
    # a lattice has no occupancy loss; scales kept well inside its extent and spacing
    g = (np.arange(200) + 0.5) / 200
    pts = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    assert box_count_dimension(pts, np.geomspace(0.1, 0.01, 8)).slope == pytest.approx(2.0, abs=0.1)


def test_single_point(caplog):
    with caplog.at_level(logging.WARNING):
        fit = box_count_dimension(np.full(50, 0.3))
    assert fit.slope == 0.0 and fit.degenerate
    assert "degenerate" in caplog.text


def test_few_points_warn(caplog):
    with caplog.at_level(logging.WARNING):
        box_count_dimension(np.linspace(0, 1, 200))
    assert "at least 1000" in caplog.text


def test_cantor_random_words(cantor):
    fit = box_count_dimension(_cantor_points(cantor))
    assert fit.slope == pytest.approx(LOG2 / LOG3, abs=0.05)
    assert 0 <= fit.slope <= 1


def test_counts_monotone(cantor):
    fit = box_count_dimension(_cantor_points(cantor, 3000))
    # scales are stored coarse to fine
    assert np.all(np.diff(fit.scales) < 0)
    assert np.all(np.diff(fit.counts) >= 0)
    assert fit.fit_mask[0] == fit.fit_mask[-1] == False  # noqa: E712
    assert fit.fit_mask[1:-1].all()


def test_default_scales_shape():
    sc = default_scales(np.random.default_rng(2).random(5000))
    assert len(sc) == 16 and np.all(np.diff(sc) < 0)
    assert sc[0] / sc[-1] >= 10


def test_invalid_scales():
    with pytest.raises(ValueError):
        box_count_dimension(np.random.default_rng(0).random(100), scales=[0.1, 0.0, -1])
    with pytest.raises(ValueError):
        box_count_dimension(np.array([]))


def test_duplication_invariance(cantor):
    pts = _cantor_points(cantor, 4000)
    a = box_count_dimension(pts)
    b = box_count_dimension(np.concatenate([pts, pts, pts]), scales=a.scales)
    assert a.slope == b.slope


@pytest.mark.parametrize("shift", [-0.01, 0.01])
def test_origin_shift_invariance(cantor, shift):
    pts = _cantor_points(cantor)
    a = box_count_dimension(pts)
    b = box_count_dimension(pts, scales=a.scales, origin=pts.min() + shift)
    assert abs(a.slope - b.slope) <= 0.01
    uni = np.random.default_rng(3).random(10_000)
    a = box_count_dimension(uni)
    b = box_count_dimension(uni, scales=a.scales, origin=shift)
    assert abs(a.slope - b.slope) <= 0.01


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.25, 0.5, 2.0, 4.0]), st.sampled_from([-3.0, 0.0, 1.0]))
def test_affine_invariance(seed, scale, offset):
    # similarity images have the same slope on the rescaled grid (scales exact in binary)
    pts = np.random.default_rng(seed).random(1000)
    a = box_count_dimension(pts)
    b = box_count_dimension(pts * scale + offset, scales=a.scales * scale)
    assert a.slope == pytest.approx(b.slope, abs=1e-9)


# --- cross check ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def cantor_tree(cantor, beta2):
    return build_moran_tree(cantor, beta2, [1, 8, 17])


@pytest.fixture(scope="module")
def base3_tree(base3, beta2):
    return build_moran_tree(base3, beta2, [1, 4, 9])


def test_cross_check_cantor(cantor_tree):
    cc = cross_check(cantor_tree, B_CANTOR)
    assert cc.gap < 0.1 and not cc.insufficient_depth
    assert cc.points == 10_000 and cc.expected_bias == "underestimate"


def test_cross_check_base3(base3_tree):
    cc = cross_check(base3_tree, 0.5)
    assert cc.gap < 0.1


def test_cross_check_accepts_result(cantor_tree):
    class R:
        b = B_CANTOR

    assert cross_check(cantor_tree, R(), count=2000).b == B_CANTOR


def test_cross_check_shallow(cantor, beta2):
    cc = cross_check(build_moran_tree(cantor, beta2, [3]), B_CANTOR)
    assert cc.insufficient_depth and cc.fit is None
    with pytest.raises(ValueError):
        tree_scales(build_moran_tree(cantor, beta2, [3]))


def test_cross_check_deterministic(cantor_tree):
    a = cross_check(cantor_tree, B_CANTOR, count=3000, seed=4).to_dict()
    b = cross_check(cantor_tree, B_CANTOR, count=3000, seed=4).to_dict()
    assert a == b


def test_tree_scales_range(cantor_tree):
    sc = tree_scales(cantor_tree)
    assert sc[0] == 1.0
    assert sc[-1] == pytest.approx(float(np.exp(cantor_tree.levels[1].log_radius.min())))
