"""Nonlinear perturbations of 1-D linear systems and their sufficient conditions.

A perturbed map keeps the linear map's value at an anchor ``u`` and
replaces its constant slope ``s`` by ``s * (1 + gamma(x))``. Two routes
certify the perturbed system: summable sup-norms (bounded ratio) or
Cesaro-null sup-norms (subexponential ratio). Geometry is preserved either
by the gap threshold ``eps_n < g_n / (2 kappa_n)`` or by containment of
every perturbed image in its linear image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import FAILS, HOLDS, NA, Verdict, _osc_gap_1d
from .errors import DomainError, PreconditionError
from .gamma import GammaFamily, gamma_sup_sequence
from .ifs import Box, LinearSystem, PerturbedMap, PerturbedSystem

__all__ = [
    "build_perturbed",
    "PerturbationDiagnostics",
    "perturbation_diagnostics",
    "SeparationReport",
    "check_separation",
]

_CONTAIN_TOL = 1e-12


def build_perturbed(linear, gammas: GammaFamily, anchors=0.0, quad_tol=1e-12, horizon=None):
    """Perturb every map of ``linear`` by the matching member of ``gammas``.

    Sup-norms are checked over ``horizon`` levels (default: the base
    period); amplitudes are non-increasing, so one period settles it.
    """
    if not isinstance(linear, LinearSystem):
        raise PreconditionError("only linear systems can be perturbed")
    if linear.dim != 1 or linear.domain != Box.unit(1):
        raise PreconditionError("perturbations need a 1-D system on [0, 1]")
    horizon = horizon or linear.structural_span
    for n in range(1, horizon + 1):
        if gammas.sup(n) >= 1:
            raise DomainError(f"level {n}: perturbation sup-norm {gammas.sup(n)} is not below 1")
    try:
        return PerturbedSystem(linear, gammas, anchors, quad_tol, name=f"{linear.name}~" if linear.name else "")
    except ValueError as exc:
        raise DomainError(str(exc)) from exc


@dataclass
class PerturbationDiagnostics:
    sups: np.ndarray
    partial_sums: np.ndarray
    tail_bound: float
    cesaro: np.ndarray
    product_lower: np.ndarray
    product_upper: np.ndarray
    routes: dict

    @property
    def horizon(self):
        return len(self.sups)

    @property
    def log_ratio_bound(self):
        """Upper bound on ``log`` of the cumulative max/min derivative ratio spread."""
        with np.errstate(divide="ignore"):
            return np.log(self.product_upper) - np.log(self.product_lower)

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "sups": self.sups.tolist(),
            "partial_sums": self.partial_sums.tolist(),
            "tail_bound": self.tail_bound,
            "cesaro": self.cesaro.tolist(),
            "product_lower": self.product_lower.tolist(),
            "product_upper": self.product_upper.tolist(),
            "routes": {k: v.to_dict() for k, v in self.routes.items()},
        }


def perturbation_diagnostics(gammas: GammaFamily, horizon):
    """Series data for the sup-norm sequence and verdicts for both routes.

    Route verdicts come from the amplitude family's closed form
    (summability, Cesaro limit); the finite partial sums are witnesses.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    sups = gamma_sup_sequence(gammas, horizon)
    sums = np.cumsum(sups)
    ks = np.arange(1, horizon + 1)
    amp = gammas.amplitude
    tail = float(amp.tail_bound(horizon))
    lower = np.cumprod(np.clip(1 - sups, 0, None))
    upper = np.cumprod(1 + sups)
    bounded = Verdict(
        HOLDS if amp.summable else FAILS,
        {"partial_sum": float(sums[-1]), "tail_bound": tail, "limit_bound": float(sums[-1]) + tail},
        structural=True,
    )
    subexp = Verdict(
        HOLDS if amp.cesaro_zero else FAILS,
        {"cesaro_last": float(sums[-1] / horizon)},
        structural=True,
    )
    return PerturbationDiagnostics(sups, sums, tail, sums / ks, lower, upper, {"bounded": bounded, "subexponential": subexp})


@dataclass
class SeparationReport:
    levels: list
    routes: dict

    @property
    def ok(self):
        return any(v.status == HOLDS for v in self.routes.values())

    def to_dict(self):
        return {"ok": self.ok, "levels": self.levels, "routes": {k: v.to_dict() for k, v in self.routes.items()}}


def _perturbed_image(base_map, gamma, anchor, quad_tol):
    m = PerturbedMap(base_map, anchor, gamma, quad_tol)
    ends = m.apply(np.array([[0.0], [1.0]]))[:, 0]
    return float(ends.min()), float(ends.max())


def check_separation(linear, gammas: GammaFamily, horizon=None, anchors=0.0, quad_tol=1e-12):
    """Both geometric routes, level by level.

    ``strong_separation`` compares ``eps_n`` with ``g_n / (2 kappa_n)``
    where ``g_n`` is the least gap between sibling images at level ``n``
    and ``kappa_n`` the largest level contraction ratio; it is NA when some
    ``g_n`` is zero. ``containment`` checks that each perturbed image sits
    inside the linear image, endpoints computed by quadrature. With
    non-increasing ``eps`` and a periodic base, one period decides both.
    """
    if not isinstance(linear, LinearSystem) or linear.dim != 1:
        raise PreconditionError("separation is checked for 1-D linear systems")
    span = linear.structural_span
    horizon = max(horizon or span, 1)
    eps_mono = all(gammas.eps_at(k + 1) <= gammas.eps_at(k) for k in range(1, horizon + span))
    levels = []
    sep_fail = cont_fail = None
    applicable = True
    for n in range(1, horizon + 1):
        lv = linear.level(n)
        g, pair = _osc_gap_1d(linear, n) if len(lv.maps) > 1 else (math.inf, None)
        kap = lv.kappa_upper
        eps = gammas.eps_at(n)
        thr = g / (2 * kap) if g > 0 else 0.0
        sep_ok = g > 0 and eps < thr
        applicable &= g > 0
        worst = 0.0
        for i, m in enumerate(lv.maps):
            u = anchors[i % len(anchors)] if isinstance(anchors, (list, tuple)) else anchors
            lo, hi = _perturbed_image(m, gammas.function(n, i), float(u), quad_tol)
            blo, bhi = m.image(Box.unit(1)).lo[0], m.image(Box.unit(1)).hi[0]
            excess = max(blo - lo, hi - bhi, 0.0)
            if excess > worst:
                worst = excess
                if excess > _CONTAIN_TOL and cont_fail is None:
                    cont_fail = {"level": n, "symbol": lv.symbols[i], "excess": excess}
        row = {"level": n, "eps": eps, "gap": g, "kappa_upper": kap, "threshold": thr,
               "separated": bool(sep_ok), "containment_excess": worst}
        levels.append(row)
        if g > 0 and not sep_ok and sep_fail is None:
            sep_fail = {"level": n, "eps": eps, "threshold": thr, "pair": pair}
    if not applicable:
        sep = Verdict(NA, {"reason": "some level has zero sibling gap"})
    elif sep_fail:
        sep_fail["failed_levels"] = [r["level"] for r in levels if not r["separated"]]
        sep = Verdict(FAILS, sep_fail, structural=eps_mono)
    else:
        sep = Verdict(HOLDS, {"min_margin": min(r["threshold"] - r["eps"] for r in levels)}, structural=eps_mono)
    if cont_fail:
        cont = Verdict(FAILS, cont_fail, structural=True)
    else:
        # endpoint displacement is linear in the amplitude and vanishes at 0,
        # so containment at one positive amplitude holds at all smaller ones
        cont = Verdict(HOLDS, {"max_excess": max(r["containment_excess"] for r in levels)}, structural=eps_mono)
    return SeparationReport(levels, {"strong_separation": sep, "containment": cont})
