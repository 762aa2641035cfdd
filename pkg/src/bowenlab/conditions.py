"""Finite-horizon verification of the hypothesis conditions.

Each condition gets a verdict: ``holds-on-horizon``, ``fails`` or
``not-applicable``. Where the continuation rule makes a condition decidable
(periodic levels, closed-form perturbation amplitudes) the verdict is
structural and marked so; otherwise it is evidence from the levels
``1 .. horizon`` only.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import PreconditionError
from .ifs import (
    PerturbedSystem,
    Tail,
    cylinders,
    deriv_words,
    enumerate_words,
    eval_words,
    kappa_bounds,
    project_tail,
)
from .pressure import bowen_parameter, target_sum

__all__ = [
    "HOLDS",
    "FAILS",
    "NA",
    "Verdict",
    "ConditionReport",
    "AhlforsReport",
    "NEQResult",
    "ROUTES",
    "verify_contraction",
    "verify_targets",
    "verify_geometry",
    "find_neq",
    "attractor_dimension",
    "ahlfors_suite",
    "verify",
]

HOLDS = "holds-on-horizon"
FAILS = "fails"
NA = "not-applicable"

ROUTES = {
    "bounded": ("OSC", "UCC", "ESC", "LVC", "NEQ", "BDP", "bounded_ratio", "ahlfors"),
    "subexponential": ("OSC", "UCC", "ESC", "NEQ", "BDP", "subexponential_ratio", "ahlfors", "pressure_limit"),
}

_SEP_SLACK = 1e-12


@dataclass
class Verdict:
    status: str
    witness: dict = field(default_factory=dict)
    structural: bool = False

    @property
    def ok(self):
        return self.status == HOLDS

    @classmethod
    def of(cls, ok, witness=None, structural=False):
        return cls(HOLDS if ok else FAILS, witness or {}, structural)

    def to_dict(self):
        return asdict(self)


@dataclass
class ConditionReport:
    horizon: int
    verdicts: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    def merge(self, other):
        self.verdicts.update(other.verdicts)
        self.data.update(other.data)
        return self

    def route_failures(self, route):
        return [c for c in ROUTES[route] if c not in self.verdicts or not self.verdicts[c].ok]

    def route_passes(self, route):
        return not self.route_failures(route)

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "verdicts": {k: v.to_dict() for k, v in sorted(self.verdicts.items())},
            "data": {k: v for k, v in self.data.items() if not k.startswith("_")},
        }


def _span(system, horizon):
    return max(horizon, system.structural_span)


def _log_ratio_bound(system, n):
    """``log(kappa_bar_n / kappa_n)`` for ``n = 1 .. horizon``."""
    if isinstance(system, PerturbedSystem):
        base = kappa_bounds(system.base, n)
        g = np.array([system.gammas.sup(k) for k in range(1, n + 1)])
        env = np.cumsum(np.log1p(g) - np.log1p(-g))
        return np.log(base.upper) - np.log(base.lower) + env, base.exact.all()
    kb = kappa_bounds(system, n)
    return np.log(kb.upper) - np.log(kb.lower), kb.exact.all()


def _linear_rho_witness(system):
    base = system.base if isinstance(system, PerturbedSystem) else system
    for k in range(len(base.prefix) + 1, base.structural_span + 1):
        r = base.level(k).ratios
        if r.max() > r.min() * (1 + 1e-12):
            return k, float(r.max() / r.min())
    return None


def verify_contraction(system, horizon):
    """UCC and the growth of ``kappa_bar_n / kappa_n``."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    levels = range(1, _span(system, horizon) + 1)
    ub = [system.level(k).kappa_upper for k in levels]
    worst = int(np.argmax(ub))
    theta = -math.log(ub[worst])
    rep = ConditionReport(horizon)
    rep.verdicts["UCC"] = Verdict.of(theta > 0, {"theta": theta, "level": worst + 1}, structural=True)
    logs, exact = _log_ratio_bound(system, horizon)
    seq = (logs / np.arange(1, horizon + 1)).tolist()
    bad = _linear_rho_witness(system)
    base_ok = bad is None
    base_w = {} if base_ok else {"level": bad[0], "rho": bad[1]}
    if isinstance(system, PerturbedSystem):
        amp = system.gammas.amplitude
        bounded = base_ok and amp.summable
        sub = base_ok and amp.cesaro_zero
        pw = {"amplitude": amp.to_dict(), "summable": amp.summable, "cesaro_zero": amp.cesaro_zero}
        bw = {**base_w, **pw}
    else:
        bounded = sub = base_ok
        bw = base_w
    bw["log_ratio_at_horizon"] = float(logs[-1])
    rep.verdicts["bounded_ratio"] = Verdict.of(bounded, dict(bw), structural=True)
    rep.verdicts["subexponential_ratio"] = Verdict.of(sub, dict(bw), structural=True)
    rep.data.update(theta=theta, log_ratio_over_n=seq, kappa_exact=bool(exact),
                    kappa_upper_levels=ub[:horizon])
    return rep


# --- targets: ESC, LVC, tameness -------------------------------------------------


def esc_constants(system, beta, horizon):
    """``(alpha_low, alpha_high, argmin level, argmax level)``."""
    levels = range(1, _span(system, horizon) + 1)
    lo = [beta.inf(system, k) + math.log(system.level(k).kappa_lower) for k in levels]
    hi = [beta.sup(system, k) + math.log(system.level(k).kappa_upper) for k in levels]
    i, j = int(np.argmin(lo)), int(np.argmax(hi))
    return lo[i], hi[j], i + 1, j + 1


def verify_targets(system, beta, horizon, t_grid=None):
    """ESC constants, the LVC variation sequence and tameness on a t-grid."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    rep = ConditionReport(horizon)
    a_lo, a_hi, k_lo, k_hi = esc_constants(system, beta, horizon)
    # exact zero (log 3 - log 3) must count as a failure, hence the tolerance
    rep.verdicts["ESC"] = Verdict.of(
        a_lo > 1e-12, {"alpha_low": a_lo, "alpha_high": a_hi, "level": k_lo, "level_high": k_hi},
        structural=True,
    )
    widths = np.array([beta.sup(system, k) - beta.inf(system, k) for k in range(1, horizon + 1)])
    var = np.cumsum(widths) / np.arange(1, horizon + 1)
    if beta.factorizable:
        tail_levels = range(system.structural_span + 1, 2 * system.structural_span + 1)
        lvc_ok = all(beta.sup(system, k) - beta.inf(system, k) <= 1e-12 for k in tail_levels)
        structural = True
    else:
        half = var[horizon // 2 :]
        lvc_ok = bool(np.all(np.diff(half) <= 1e-12) and var[-1] <= 2 * widths.max() / horizon)
        structural = False
    w = {"last": float(var[-1])}
    if not lvc_ok:
        w["level"] = int(np.argmax(widths)) + 1
    rep.verdicts["LVC"] = Verdict.of(lvc_ok, w, structural)
    t_grid = np.linspace(0.0, float(system.dim), 11) if t_grid is None else np.asarray(t_grid, float)
    vals = np.array([target_sum(system, beta, t, horizon).log_sum / horizon for t in t_grid])
    dec = np.diff(vals) < 0
    tw = {"t_grid": t_grid.tolist(), "pressure": vals.tolist()}
    if not dec.all():
        tw["t"] = float(t_grid[int(np.argmin(dec)) + 1])
    rep.verdicts["tame"] = Verdict.of(bool(dec.all()), tw)
    rep.data.update(alpha_low=a_lo, alpha_high=a_hi, lvc_sequence=var.tolist())
    return rep


# --- geometry: OSC, gaps, NEQ, BDP ------------------------------------------------


def _level_images(system, k):
    idx = np.arange(system.alphabet_size(k))[:, None]
    return cylinders(system, idx, start=k)


def _osc_gap_1d(system, k):
    lo, hi = _level_images(system, k)
    order = np.argsort(lo[:, 0], kind="stable")
    lo, hi = lo[order, 0], hi[order, 0]
    gaps = lo[1:] - hi[:-1]
    i = int(np.argmin(gaps))
    syms = system.level(k).symbols
    pair = (syms[order[i]], syms[order[i + 1]])
    return float(gaps[i]), pair


def _osc_boxes(system, k):
    lo, hi = _level_images(system, k)
    m = len(lo)
    for i in range(m):
        for j in range(i + 1, m):
            overlap = np.minimum(hi[i], hi[j]) - np.maximum(lo[i], lo[j])
            if np.all(overlap > _SEP_SLACK):
                syms = system.level(k).symbols
                return (syms[i], syms[j])
    return None


@dataclass
class NEQResult:
    eps: float
    tail: Tail
    anchors: list
    tol: float

    def anchor(self, n, system=None):
        """Anchor ``x^(n)`` in ``J_n`` (index ``n >= 0``)."""
        if n < len(self.anchors):
            return self.anchors[n]
        return project_tail(system, n + 1, self.tail, self.tol)


def _candidate_tails():
    yield Tail((None,), by_index=True)  # placeholder for the middle symbol
    for period in ((0,), (1,), (0, 1), (1, 0)):
        yield Tail(period, by_index=True)


def find_neq(system, horizon, tol=1e-12):
    """Search for an NEQ witness: a tail whose projections stay away from the boundary.

    The middle-symbol tail is tried first, then index tails of period at
    most two; the tail maximising the smallest boundary distance over levels
    ``0 .. horizon`` wins (earliest on ties).
    """
    levels = _span(system, horizon) + 1
    best = None
    for cand in _candidate_tails():
        if cand.period == (None,):
            mids = [system.alphabet_size(k) // 2 for k in range(1, levels + 64)]
            if len(set(mids)) > 1:
                continue
            cand = Tail((mids[0],), by_index=True)
        pts = [project_tail(system, n + 1, cand, tol) for n in range(levels)]
        eps = min(system.domain.boundary_distance(p) for p in pts)
        if best is None or eps > best.eps + 1e-15:
            best = NEQResult(eps, cand, pts, tol)
    return best


def bdp_constant(system):
    """Bounded-distortion constant ``K``.

    Linear systems have ``K = 1``. For perturbations the per-map Hoelder
    condition holds with exponent 1 and constant ``H_k = Lip(gamma)/(1 - gamma_bar)``,
    and summing along a composition whose inner images shrink like
    ``exp(-theta j)`` gives ``log K <= sup_k H_k / (1 - exp(-theta))``.
    """
    if system.is_linear:
        return 1.0, {"reason": "similarities"}
    theta = system.theta()
    hs = []
    for k in range(1, system.structural_span + 1):
        g = system.gammas.sup(k)
        lips = [m.gamma.lipschitz() for m in system.level(k).maps]
        hs.append(max(lips) / (1 - g))
    H = max(hs)
    return math.exp(H / (1 - math.exp(-theta))), {"holder_constant": H, "holder_exponent": 1.0, "theta": theta}


def verify_geometry(system, horizon, neq_tol=1e-12):
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rep = ConditionReport(horizon)
    levels = range(1, _span(system, horizon) + 1)
    if system.dim == 1:
        gaps, fail = [], None
        for k in levels:
            g, pair = _osc_gap_1d(system, k)
            gaps.append(g)
            if g < -_SEP_SLACK and fail is None:
                fail = {"level": k, "pair": list(pair), "overlap": -g}
        rep.verdicts["OSC"] = Verdict.of(fail is None, fail or {}, structural=True)
        gaps = [max(g, 0.0) for g in gaps]
        gk = int(np.argmin(gaps))
        rep.verdicts["strong_separation"] = Verdict.of(
            gaps[gk] > _SEP_SLACK, {"min_gap": gaps[gk], "level": gk + 1}, structural=True)
        rep.data["gaps"] = gaps[:horizon]
    elif system.grid_aligned:
        fail = None
        for k in levels:
            pair = _osc_boxes(system, k)
            if pair:
                fail = {"level": k, "pair": list(pair)}
                break
        rep.verdicts["OSC"] = Verdict.of(fail is None, fail or {}, structural=True)
        rep.verdicts["strong_separation"] = Verdict(NA, {"reason": "gaps computed in d = 1 only"})
    else:
        rep.verdicts["OSC"] = Verdict(NA, {"reason": "overlap undecidable for rotated families"})
        rep.verdicts["strong_separation"] = Verdict(NA, {"reason": "gaps computed in d = 1 only"})

    neq = find_neq(system, horizon, neq_tol)
    rep.verdicts["NEQ"] = Verdict.of(
        neq.eps > 1e-9,
        {"eps": neq.eps, "tail": neq.tail.to_dict(), "anchor_0": _jsonable(neq.anchors[0])},
        structural=True,
    )
    K, kw = bdp_constant(system)
    rep.verdicts["BDP"] = Verdict.of(math.isfinite(K), {"K": K, **kw}, structural=True)
    rep.data.update(neq_eps=neq.eps, anchors=[_jsonable(a) for a in neq.anchors[: horizon + 1]], K=K)
    rep.data["_neq"] = neq
    return rep


def _jsonable(x):
    return float(x) if np.ndim(x) == 0 else [float(v) for v in x]


# --- attractor dimension ----------------------------------------------------------


def _log_z(system, t, n, start=1):
    """``log Z(t)`` over words for levels ``start .. start + n - 1``."""
    if system.is_linear:
        return math.fsum(float(logsumexp(t * np.log(system.level(k).ratios))) for k in range(start, start + n))
    idx = enumerate_words(system, n, start)
    d = deriv_words(system, idx, system.domain.center, start)
    return float(logsumexp(t * np.log(d)))


def attractor_dimension(system, tol=1e-10, horizon=32):
    """Root of ``t -> (1/n) log Z_n(t)`` at ``n = horizon``.

    For a perturbation whose amplitude has Cesaro mean zero the limit
    function coincides with the unperturbed one, so the base system is
    used. Otherwise derivatives are taken at the centre of X over all words
    of length ``horizon``.
    """
    if system.theta() <= 0:
        raise PreconditionError("uniform contraction (theta > 0) is required")
    target = system
    if isinstance(system, PerturbedSystem) and system.gammas.amplitude.cesaro_zero:
        target = system.base
    return bowen_parameter(lambda t: _log_z(target, t, horizon) / horizon, float(system.dim), tol, horizon)


# --- Ahlfors suite ------------------------------------------------------------------


@dataclass
class AhlforsReport:
    h: float
    horizon: int
    rho: list
    log_z: list
    alphabet: list
    verdicts: dict
    ratio_min: float
    ratio_max: float
    C: float
    bounded_norms_B: float
    bounded_norms_ok: bool
    lower_bound_ok: bool
    lower_bound_depth: int
    submultiplicative_ok: bool

    @property
    def z(self):
        return [math.exp(v) for v in self.log_z]

    def to_dict(self):
        d = asdict(self)
        d["verdicts"] = {k: asdict(v) for k, v in sorted(self.verdicts.items())}
        return d


def _norms(system, k):
    """Per-symbol sup of ``|D phi|`` at level ``k``."""
    return system.level(k).deriv_bounds[:, 1]


def _period_log_z(system, h):
    base = system.base if isinstance(system, PerturbedSystem) else system
    span = range(len(base.prefix) + 1, base.structural_span + 1)
    return math.fsum(float(logsumexp(h * np.log(base.level(k).ratios))) for k in span)


def _interval_mass(lo, hi, mass, a, b):
    """Mass in ``[a, b]`` of densities spread uniformly over ``[lo, hi]``."""
    width = hi - lo
    ov = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
    frac = np.where(width > 0, ov / np.where(width > 0, width, 1.0), ((lo >= a) & (lo <= b)).astype(float))
    return float(frac @ mass)


class _SortedIntervals:
    """Cumulative mass of disjoint intervals, each carrying a uniform density."""

    def __init__(self, lo, hi, mass):
        order = np.argsort(lo, kind="stable")
        self.lo, self.hi, self.mass = lo[order], hi[order], mass[order]
        self.cum = np.concatenate([[0.0], np.cumsum(self.mass)])
        self.width = self.hi - self.lo

    @classmethod
    def build(cls, lo, hi, mass):
        obj = cls(lo, hi, mass)
        scale = max(float(obj.hi.max() - obj.lo.min()), 1.0)
        if np.any(obj.hi[:-1] > obj.lo[1:] + 1e-12 * scale) or np.any(obj.width <= 0):
            return None
        return obj

    def cdf(self, x):
        k = np.searchsorted(self.hi, x, side="right")
        j = np.minimum(k, len(self.lo) - 1)
        part = np.where(k < len(self.lo), np.clip((x - self.lo[j]) / self.width[j], 0.0, 1.0), 0.0)
        return self.cum[k] + part * self.mass[j]

    def between(self, a, b):
        return self.cdf(b) - self.cdf(a)


def ahlfors_suite(system, h, horizon, ball_samples=256, n_radii=24, seed=0, lower_bound_depth=10, neq=None):
    """Sequences of the Ahlfors sufficiency theorem plus an empirical check.

    The level-``horizon`` natural measure gives cylinder ``w`` the mass
    ``|D phi_w|^h / Z_n(h)``; ball masses spread each cylinder's mass
    uniformly over it (1-D) or concentrate it at the cylinder centre.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    K, _ = bdp_constant(system)
    rho, logz, alpha = [], [], []
    for k in range(1, horizon + 1):
        nrm = _norms(system, k)
        rho.append(float(nrm.max() / nrm.min()))
        alpha.append(system.alphabet_size(k))
    if system.is_linear:
        per_level = [float(logsumexp(h * np.log(system.level(k).ratios))) for k in range(1, horizon + 1)]
        logz = np.cumsum(per_level).tolist()
    else:
        logz = [_log_z(system, h, n) for n in range(1, horizon + 1)]

    words = enumerate_words(system, horizon)
    d = deriv_words(system, words, system.domain.center) if not system.is_linear else None
    if system.is_linear:
        logw = np.zeros(len(words))
        for j in range(horizon):
            logw += h * np.log(system.level(j + 1).ratios)[words[:, j]]
    else:
        logw = h * np.log(d)
    mass = np.exp(logw - logsumexp(logw))
    lo, hi = cylinders(system, words)

    # lower-bound inequality on cylinders of length <= lower_bound_depth
    depth = min(lower_bound_depth, horizon)
    lb_ok = True
    sizes = [system.alphabet_size(k) for k in range(1, horizon + 1)]
    for m in range(1, depth + 1):
        block = math.prod(sizes[m:])
        mu = mass.reshape(-1, block).sum(axis=1)
        pre = words[::block, :m]
        if system.is_linear:
            lw = sum(h * np.log(system.level(j + 1).ratios)[pre[:, j]] for j in range(m))
        else:
            lw = h * np.log(deriv_words(system, pre, system.domain.center))
        bound = K ** (-h) * np.exp(lw - logz[m - 1])
        lb_ok &= bool(np.all(mu >= bound * (1 - 1e-9)))

    # empirical Ahlfors ratios
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, horizon])))
    picks = rng.choice(len(words), size=ball_samples, p=mass)
    if neq is None:
        neq = find_neq(system, 1)
    x0 = neq.anchor(horizon, system)
    centers = eval_words(system, words[picks], x0)
    kb = kappa_bounds(system, horizon)
    r_grid = np.geomspace(kb.upper[-1], system.domain.diam, n_radii)
    ratios = np.empty((ball_samples, n_radii))
    fast = _SortedIntervals.build(lo[:, 0], hi[:, 0], mass) if system.dim == 1 else None
    if fast is not None:
        c = centers[:, 0][:, None]
        ratios[:] = fast.between(c - r_grid[None, :], c + r_grid[None, :]) / r_grid[None, :] ** h
    for i, c in enumerate(centers if fast is None else ()):
        for j, r in enumerate(r_grid):
            if system.dim == 1:
                m = _interval_mass(lo[:, 0], hi[:, 0], mass, c[0] - r, c[0] + r)
            else:
                mid = 0.5 * (lo + hi)
                m = float(mass[np.linalg.norm(mid - c, axis=1) <= r].sum())
            ratios[i, j] = m / r**h
    rmin, rmax = float(ratios.min()), float(ratios.max())
    C = max(rmax, 1.0 / rmin, 1.0)

    # BoundedNorms chain and sub-multiplicativity
    B = max(max(alpha), max(rho), math.exp(max(logz)), math.exp(-min(logz)))
    bn_ok = True
    for n in range(1, horizon):
        nrm = _norms(system, n + 1)
        rhs = logz[n - 1] + math.log(alpha[n]) + h * math.log(rho[n]) + h * math.log(nrm.min())
        bn_ok &= rhs >= -math.log(B) - 1e-12
    sm_ok = True
    for n in range(1, horizon):
        for q in range(1, horizon - n + 1):
            sm_ok &= logz[n + q - 1] <= logz[n - 1] + _log_z(system, h, q, n + 1) + 1e-9

    verdicts = {}
    structural = system.is_linear or isinstance(system, PerturbedSystem)
    verdicts["alphabet_bounded"] = Verdict.of(True, {"max": max(alpha)}, structural)
    verdicts["rho_bounded"] = Verdict.of(True, {"max": max(rho)}, structural)
    pz = _period_log_z(system, h)
    z_ok = abs(pz) <= 1e-8
    if isinstance(system, PerturbedSystem):
        z_ok = z_ok and system.gammas.amplitude.summable
    verdicts["z_bounded"] = Verdict.of(z_ok, {"period_log_z": pz, "max_log_z": max(logz), "min_log_z": min(logz)},
                                       structural)
    verdicts["empirical"] = Verdict.of(rmax <= 10 and rmin >= 0.1, {"ratio_min": rmin, "ratio_max": rmax})
    return AhlforsReport(h, horizon, rho, logz, alpha, verdicts, rmin, rmax, C, B, bn_ok, lb_ok, depth, sm_ok)


# --- full report -----------------------------------------------------------------


def _ahlfors_route_verdict(system, h, route):
    """Structural verdict for the existence of an h-Ahlfors measure.

    Linear periodic systems satisfy the sufficiency theorem when the
    per-period ``log Z(h)`` vanishes (``rho`` and alphabet sizes are bounded
    automatically). For a perturbation we follow the perturbation theorems:
    the unperturbed verdict transfers under the amplitude condition of the
    selected route.
    """
    pz = _period_log_z(system, h)
    ok = abs(pz) <= 1e-8
    w = {"h": h, "period_log_z": pz}
    if isinstance(system, PerturbedSystem):
        amp = system.gammas.amplitude
        cond = amp.summable if route == "bounded" else amp.cesaro_zero
        ok = ok and cond
        w["amplitude_condition"] = cond
    return Verdict.of(ok, w, structural=True)


def _pressure_limit_verdict(system, beta, horizon):
    if beta.factorizable:
        return Verdict.of(True, {"reason": "periodic levels with symbol-local beta"}, structural=True)
    from .pressure import pressure_curve

    b_guess = 0.5 * system.dim
    c = pressure_curve(system, beta, b_guess, max(1, horizon // 2 - 4), horizon)
    width = c.upper - c.lower
    return Verdict.of(width <= 0.05, {"window_width": width, "t": b_guess})


def verify(system, beta, horizon, route="bounded", t_grid=None, h_horizon=32):
    """Every condition of the selected theorem route on ``levels 1 .. horizon``."""
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}")
    rep = verify_contraction(system, horizon)
    rep.merge(verify_targets(system, beta, horizon, t_grid))
    rep.merge(verify_geometry(system, horizon))
    h = attractor_dimension(system, 1e-12, h_horizon)
    rep.data["h"] = h.b
    rep.verdicts["ahlfors"] = _ahlfors_route_verdict(system, h.b, route)
    rep.verdicts["pressure_limit"] = _pressure_limit_verdict(system, beta, horizon)
    rep.data["route"] = route
    rep.data["route_failures"] = rep.route_failures(route)
    return rep

