"""Box-counting dimension estimates used as an independent check on ``b``."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .targets import MoranTree, sample_target_points

__all__ = ["BoxCountFit", "box_count_dimension", "default_scales", "tree_scales", "CrossCheck", "cross_check"]

log = logging.getLogger(__name__)

# a scale is saturated once the occupied boxes exceed this share of the distinct points
SATURATION = 0.1
# default grids start where at least this many boxes are occupied
COARSE_FLOOR = 10
# counts are averaged (geometrically) over this many grid phases
PHASES = 8


@dataclass
class BoxCountFit:
    scales: np.ndarray
    counts: np.ndarray
    fit_mask: np.ndarray
    slope: float
    intercept: float
    residual: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "scales": self.scales.tolist(),
            "counts": self.counts.tolist(),
            "fit_mask": self.fit_mask.tolist(),
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "degenerate": self.degenerate,
        }


def _count(pts, origin, delta):
    cells = np.floor((pts - origin) / delta).astype(np.int64)
    if cells.shape[1] == 1:
        return len(np.unique(cells[:, 0]))
    return len(np.unique(cells, axis=0))


def _phase_count(pts, origin, delta, phases=PHASES):
    """Geometric mean of the occupied-box count over grids shifted by ``j delta / phases``.

    A single grid gains or loses a box whenever a cluster straddles a cell
    edge, which at coarse scales moves the slope by several hundredths;
    averaging over phases removes most of that dependence on the origin.
    """
    logs = [math.log(_count(pts, origin - j * delta / phases, delta)) for j in range(phases)]
    return math.exp(math.fsum(logs) / phases)


def default_scales(points, n_scales=16, min_ratio=1e-6):
    """Log-spaced scales between the two saturated ends of the count curve.

    The grid starts at the first scale occupying ``COARSE_FLOOR`` boxes
    (coarser scales count a handful of boxes and are dominated by edge
    effects) and stops once the count passes ``SATURATION`` times the
    number of distinct points. At least six candidate scales are kept when
    the extent allows.
    """
    pts = _as_points(points)
    uniq = np.unique(pts, axis=0)
    span = float(np.max(np.ptp(uniq, axis=0))) if len(uniq) > 1 else 0.0
    if span == 0:
        return np.array([1.0])
    fine = np.geomspace(span / 2, span * min_ratio, 4 * n_scales)
    origin = uniq.min(axis=0)
    limit = max(SATURATION * len(uniq), 8)
    counts = []
    for d in fine:
        counts.append(_count(uniq, origin, d))
        if counts[-1] > limit:
            break
    stop = max(len(counts) - 1 if counts[-1] > limit else len(counts), 6)
    start = next((i for i, c in enumerate(counts) if c >= COARSE_FLOOR), 0)
    start = min(start, max(stop - 6, 0))
    return np.geomspace(fine[start], fine[stop - 1], n_scales)


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def box_count_dimension(points, scales=None, origin=None):
    """Least-squares slope of ``log N(delta)`` against ``log(1/delta)``.

    ``N(delta)`` counts grid cells of side ``delta`` holding a point,
    averaged geometrically over ``PHASES`` grids offset from ``origin``
    (default the coordinatewise minimum). One scale is trimmed at each end
    before fitting.
    """
    pts = _as_points(points)
    if len(pts) == 0:
        raise ValueError("no points")
    if len(np.unique(pts, axis=0)) == 1:
        log.warning("degenerate point set: all points coincide; slope set to 0")
        sc = np.atleast_1d(np.asarray(scales if scales is not None else [1.0], dtype=float))
        return BoxCountFit(sc, np.ones(len(sc)), np.zeros(len(sc), bool), 0.0, 0.0, 0.0, True)
    if len(pts) < 1000:
        log.warning("box counting on %d points; at least 1000 are advised", len(pts))
    sc = default_scales(pts) if scales is None else np.asarray(scales, dtype=float)
    sc = np.sort(sc)[::-1]
    if np.any(sc <= 0):
        raise ValueError("scales must be positive")
    o = pts.min(axis=0) if origin is None else np.broadcast_to(np.asarray(origin, dtype=float), pts.shape[1:])
    counts = np.array([_phase_count(pts, o, d) for d in sc])
    mask = np.zeros(len(sc), dtype=bool)
    mask[1:-1] = True
    if mask.sum() < 2:
        mask[:] = True
    x, y = np.log(1 / sc[mask]), np.log(counts[mask])
    if len(x) < 2 or np.ptp(x) == 0:
        return BoxCountFit(sc, counts, mask, 0.0, float(y.mean()), 0.0, True)
    (slope, icept), res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    return BoxCountFit(sc, counts, mask, float(slope), float(icept), rms)


@dataclass
class CrossCheck:
    b: float
    slope: float
    gap: float
    depth: int
    insufficient_depth: bool
    observed_bias: str
    fit: BoxCountFit | None
    points: int
    # truncated constructions resolve few generations and lose mass at each
    expected_bias: str = "underestimate"

    def to_dict(self):
        return {
            "b": self.b,
            "slope": self.slope,
            "gap": self.gap,
            "depth": self.depth,
            "insufficient_depth": self.insufficient_depth,
            "expected_bias": self.expected_bias,
            "observed_bias": self.observed_bias,
            "points": self.points,
            "fit": None if self.fit is None else self.fit.to_dict(),
        }


def tree_scales(tree: MoranTree, n_scales=16):
    """Log-spaced scales from the diameter of X down to a resolved radius.

    The end radius is the smallest ball radius of the deepest level that is
    complete (no per-parent cap has thinned it) and has a child level. Above
    that radius the sampled leaves occupy the same boxes as the limiting
    Moran set; below it the finite tree stops branching.
    """
    if tree.depth < 2:
        raise ValueError("scales need a tree with at least two levels")
    k = min(max(tree.deepest_resolved(), 0), tree.depth - 2)
    r = float(np.exp(tree.levels[k].log_radius.min()))
    return np.geomspace(tree.system.domain.diam, r, n_scales)


def cross_check(tree: MoranTree, b, count=10_000, seed=0, scales=None):
    """Box-count points sampled from ``tree`` and compare with ``b``.

    ``b`` may be a float or anything with a ``b`` attribute. Trees with
    fewer than two levels are flagged and not fitted. Scales default to
    ``tree_scales``.
    """
    b = float(getattr(b, "b", b))
    if tree.depth < 2:
        return CrossCheck(b, math.nan, math.nan, tree.depth, True, "not assessed", None, 0)
    pts, _, _ = sample_target_points(tree, count, seed)
    fit = box_count_dimension(pts, tree_scales(tree) if scales is None else scales)
    gap = abs(fit.slope - b)
    observed = "underestimate" if fit.slope < b else "overestimate"
    return CrossCheck(b, fit.slope, gap, tree.depth, False, observed, fit, len(pts))
