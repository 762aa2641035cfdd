"""Finite-horizon pressure sums and the Bowen parameter.

The level-``n`` sum is ``Z = sum_w exp(-t S_n beta(w xi))`` over all words of
length ``n``; pressure estimates are ``(1/n) log Z``. Everything is kept in
the log domain since individual summands underflow long before ``n = 100``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InconsistencyError, PreconditionError
from .ifs import Tail, Word, _positions, enumerate_words

__all__ = [
    "ConstantBeta",
    "ContractionBeta",
    "SymbolBeta",
    "TailBeta",
    "MonteCarlo",
    "TargetSum",
    "PressureCurve",
    "BowenResult",
    "birkhoff_beta",
    "target_sum",
    "pressure_curve",
    "closed_form_pressure_linear",
    "bowen_parameter",
    "pressure_evaluator",
    "default_bowen",
]

ROOT_TOL = 1e-12
_CHUNK = 1 << 18


def _periodic(prefix, period, k):
    if k <= len(prefix):
        return prefix[k - 1]
    return period[(k - len(prefix) - 1) % len(period)]


# --- beta schedules -----------------------------------------------------------
#
# Every schedule exposes:
#   symbol_values(system, k)  per-symbol values when beta_k depends only on the
#                             k-th symbol (None otherwise)
#   birkhoff(system, idx, tail, start)  batched S_n beta for an (N, n) array
#   sup(system, k), inf(system, k)


class _BetaBase:
    reference_tail: Tail = Tail((0,), by_index=True)

    factorizable = True

    def sup(self, system, k):
        return float(np.max(self.symbol_values(system, k)))

    def inf(self, system, k):
        return float(np.min(self.symbol_values(system, k)))

    def birkhoff(self, system, idx, tail=None, start=1):
        idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
        total = np.zeros(idx.shape[0])
        for j in range(idx.shape[1]):
            total += self.symbol_values(system, start + j)[idx[:, j]]
        return total


@dataclass(frozen=True)
class ConstantBeta(_BetaBase):
    """``beta_k`` independent of the word: ``prefix`` then ``period`` repeated."""

    period: tuple
    prefix: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "period", tuple(float(v) for v in np.atleast_1d(self.period)))
        object.__setattr__(self, "prefix", tuple(float(v) for v in self.prefix))
        if not self.period or min(self.period + self.prefix) <= 0:
            raise ValueError("beta values must be positive")

    def value(self, k):
        return _periodic(self.prefix, self.period, k)

    def symbol_values(self, system, k):
        return np.full(system.alphabet_size(k), self.value(k))

    def sup(self, system, k):
        return self.value(k)

    inf = sup

    def birkhoff(self, system, idx, tail=None, start=1):
        idx = np.atleast_2d(idx)
        s = math.fsum(self.value(k) for k in range(start, start + idx.shape[1]))
        return np.full(idx.shape[0], s)

    def to_dict(self):
        return {"kind": "constant", "period": list(self.period), "prefix": list(self.prefix)}


@dataclass(frozen=True)
class ContractionBeta(_BetaBase):
    """``beta_k(w) = factor * (-log r(w_k)) + shift`` with ``r`` the linear ratio.

    ``factor=2, shift=0`` on base-3 gives ``2 log 3``; ``factor=1, shift=1``
    gives ``log q_k + 1``. Perturbations do not change the values, which
    depend only on the underlying linear ratios.
    """

    factor: float = 1.0
    shift: float = 0.0

    def symbol_values(self, system, k):
        v = self.factor * -np.log(system.level(k).ratios) + self.shift
        if np.any(v <= 0):
            raise ValueError(f"beta at level {k} is not positive")
        return v

    def to_dict(self):
        return {"kind": "contraction", "factor": self.factor, "shift": self.shift}


@dataclass(frozen=True)
class SymbolBeta(_BetaBase):
    """``beta_k(w) = base_k + weights[position of w_k]`` (weights cycled)."""

    base: ConstantBeta
    weights: tuple

    def symbol_values(self, system, k):
        w = np.asarray(self.weights, dtype=float)
        m = system.alphabet_size(k)
        v = self.base.value(k) + w[np.arange(m) % len(w)]
        if np.any(v <= 0):
            raise ValueError(f"beta at level {k} is not positive")
        return v

    def to_dict(self):
        return {"kind": "symbol", "base": self.base.to_dict(), "weights": list(self.weights)}


@dataclass(frozen=True)
class TailBeta(_BetaBase):
    """Genuinely tail-dependent ``beta_k``.

    ``fn(k, window)`` receives an ``(N, lookahead)`` array of alphabet
    positions starting at level ``k`` (filled from the reference tail past
    the end of the word) and returns ``N`` positive values. ``sup_fn`` and
    ``inf_fn`` give the declared per-level bounds.
    """

    fn: Callable
    lookahead: int
    sup_fn: Callable | None = None
    inf_fn: Callable | None = None
    reference_tail: Tail = Tail((0,), by_index=True)

    factorizable = False

    def symbol_values(self, system, k):
        return None

    def _declared(self, f, k):
        if f is None:
            raise PreconditionError("tail-dependent beta needs declared per-level sup and inf")
        return float(f(k))

    def sup(self, system, k):
        return self._declared(self.sup_fn, k)

    def inf(self, system, k):
        return self._declared(self.inf_fn, k)

    def birkhoff(self, system, idx, tail=None, start=1):
        idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
        N, n = idx.shape
        tail = tail or self.reference_tail
        ext = tail.positions(system, start + n, self.lookahead)
        full = np.concatenate([idx, np.broadcast_to(ext, (N, self.lookahead))], axis=1)
        total = np.zeros(N)
        for j in range(n):
            v = np.asarray(self.fn(start + j, full[:, j : j + self.lookahead]), dtype=float)
            if np.any(v <= 0):
                raise ValueError(f"beta at level {start + j} is not positive")
            total += v
        return total


def birkhoff_beta(system, beta, word: Word, tail: Tail | None = None):
    """``S_n beta(w xi)`` for a word starting at level 1."""
    if word.start != 1:
        raise ValueError("Birkhoff sums are taken over words starting at level 1")
    if len(word) == 0:
        return 0.0
    pos = _positions(system, word)
    return float(beta.birkhoff(system, pos[None, :], tail)[0])


# --- target sums ----------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarlo:
    """Uniform word sampling with exact reweighting by the word count."""

    samples: int = 100_000
    seed: int = 0


class TargetSum(NamedTuple):
    log_sum: float
    stderr: float = 0.0


def _sample_positions(system, n, samples, seed):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, n])))
    cols = [rng.integers(0, system.alphabet_size(k), size=samples) for k in range(1, n + 1)]
    return np.stack(cols, axis=1) if cols else np.zeros((samples, 0), dtype=np.int64)


def target_sum(system, beta, t, n, mode="exact", method="auto", tail=None):
    """``log sum_{|w| = n} exp(-t S_n beta(w xi))``.

    ``method="factorized"`` uses the product structure of schedules whose
    level-``k`` value depends only on the ``k``-th symbol:
    ``log Z = sum_k logsumexp_a(-t beta_k(a))``. This is exact and makes long
    horizons on large alphabets cheap. ``"auto"`` picks it when available.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return TargetSum(0.0)
    if isinstance(mode, MonteCarlo):
        pos = _sample_positions(system, n, mode.samples, mode.seed)
        v = -t * beta.birkhoff(system, pos, tail)
        shift = v.max()
        w = np.exp(v - shift)
        mean = w.mean()
        se = w.std(ddof=1) / (mean * math.sqrt(len(w))) if len(w) > 1 else math.inf
        log_count = sum(math.log(system.alphabet_size(k)) for k in range(1, n + 1))
        return TargetSum(float(log_count + shift + math.log(mean)), float(se))
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    if method == "auto":
        method = "factorized" if beta.factorizable else "enumerate"
    if method == "factorized":
        if not beta.factorizable:
            raise ValueError("this beta schedule has no product structure")
        return TargetSum(math.fsum(float(logsumexp(-t * beta.symbol_values(system, k))) for k in range(1, n + 1)))
    words = enumerate_words(system, n)
    parts = [
        float(logsumexp(-t * beta.birkhoff(system, words[i : i + _CHUNK], tail)))
        for i in range(0, len(words), _CHUNK)
    ]
    return TargetSum(float(logsumexp(parts)))


# --- pressure curves ------------------------------------------------------------


@dataclass
class PressureCurve:
    """Pressure estimates ``(1/n) log Z_n`` for ``n`` in ``[n_min, n_max]``.

    The window is the trailing half ``n >= (n_min + n_max) / 2``. ``upper`` and
    ``lower`` are its max and min; ``slope`` is the least-squares slope of
    ``log Z_n`` against ``n`` over the window, with ``r2`` its fit quality.
    """

    t: float
    ns: np.ndarray
    log_sums: np.ndarray
    over_n: np.ndarray
    window: tuple
    upper: float
    lower: float
    last: float
    slope: float
    r2: float
    stderr: np.ndarray = field(default=None)

    def rows(self):
        for n, ls, on in zip(self.ns, self.log_sums, self.over_n):
            yield {"t": self.t, "n": int(n), "log_sum": float(ls), "over_n": float(on),
                   "window_hi": self.upper, "window_lo": self.lower}


def pressure_curve(system, beta, t, n_min, n_max, mode="exact", method="auto"):
    if n_min < 1 or n_max < n_min + 4:
        raise ValueError("need n_min >= 1 and n_max >= n_min + 4")
    ns = np.arange(n_min, n_max + 1)
    sums = [target_sum(system, beta, t, int(n), mode, method) for n in ns]
    log_sums = np.array([s.log_sum for s in sums])
    over_n = log_sums / ns
    cut = (n_min + n_max) / 2
    win = ns >= cut
    wn, wl = ns[win], log_sums[win]
    slope, intercept = np.polyfit(wn, wl, 1)
    resid = wl - (slope * wn + intercept)
    ss = float(np.sum((wl - wl.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return PressureCurve(
        t=float(t), ns=ns, log_sums=log_sums, over_n=over_n,
        window=(int(wn[0]), int(wn[-1])),
        upper=float(over_n[win].max()), lower=float(over_n[win].min()), last=float(over_n[-1]),
        slope=float(slope), r2=r2, stderr=np.array([s.stderr for s in sums]),
    )


def closed_form_pressure_linear(Q: Sequence[int], a: Sequence[float], t):
    """Per-``n`` values ``(1/n)[(1 - t) sum log q_k - t (a_1 + ... + a_n)]``."""
    q = np.asarray(Q, dtype=float)
    a = np.asarray(a, dtype=float)
    if q.shape != a.shape:
        raise ValueError("Q and a must have equal length")
    if np.any(q < 2) or np.any(a <= 0):
        raise ValueError("need q_k >= 2 and a_k > 0")
    n = np.arange(1, len(q) + 1)
    return ((1 - t) * np.cumsum(np.log(q)) - t * np.cumsum(a)) / n


# --- Bowen parameter --------------------------------------------------------------


@dataclass
class BowenResult:
    """Bracket ``[t_lo, t_hi]`` with ``p(t_lo) >= 0 >= p(t_hi)``."""

    b: float
    t_lo: float
    t_hi: float
    p_lo: float
    p_hi: float
    tol: float
    horizon: int | None
    status: str
    evaluations: int = 0

    def to_dict(self):
        return {
            "b": self.b, "bracket": [self.t_lo, self.t_hi],
            "witnesses": {"p_lo": self.p_lo, "p_hi": self.p_hi},
            "tol": self.tol, "horizon": self.horizon, "status": self.status,
            "evaluations": self.evaluations,
        }


def _check_monotone(seen):
    # any t1 < t2 with p(t1) < 0 < p(t2) means the evaluator is not monotone
    pts = sorted(seen.items())
    neg_seen = None
    for t, p in pts:
        if p < -ROOT_TOL:
            neg_seen = neg_seen if neg_seen is not None else t
        elif p > ROOT_TOL and neg_seen is not None:
            raise InconsistencyError(f"pressure sign pattern + - + detected: p({neg_seen}) < 0 < p({t})")


def bowen_parameter(evaluator, t_max, tol=1e-6, horizon=None, scan=4):
    """Bisect for the zero of a non-increasing pressure evaluator on ``[0, t_max]``.

    Values within ``1e-12`` of zero are taken as the root. If the pressure is
    non-negative on the whole bracket the result is ``t_max`` flagged
    ``"unbracketed above"``; if negative at 0, it is 0 flagged
    ``"unbracketed below"``. ``scan`` extra equally spaced evaluations are
    made up front to catch non-monotone evaluators.
    """
    if t_max <= 0 or tol <= 0:
        raise ValueError("t_max and tol must be positive")
    seen = {}

    def p(t):
        if t not in seen:
            seen[t] = float(evaluator(t))
        return seen[t]

    for t in np.linspace(0.0, t_max, scan + 2):
        p(float(t))
    _check_monotone(seen)

    def result(b, lo, hi, status):
        return BowenResult(b, lo, hi, p(lo), p(hi), tol, horizon, status, len(seen))

    for t in sorted(seen):
        if abs(seen[t]) <= ROOT_TOL:
            return result(t, t, t, "root")
    if p(t_max) > 0:
        return result(t_max, t_max, t_max, "unbracketed above")
    if p(0.0) < 0:
        return result(0.0, 0.0, 0.0, "unbracketed below")
    lo = max(t for t, v in seen.items() if v > 0)
    hi = min(t for t, v in seen.items() if v < 0)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = p(mid)
        if abs(v) <= ROOT_TOL:
            _check_monotone(seen)
            return result(mid, mid, mid, "root")
        if v > 0:
            lo = mid
        else:
            hi = mid
    _check_monotone(seen)
    return result(0.5 * (lo + hi), lo, hi, "bracketed")


def pressure_evaluator(system, beta, horizon, mode="exact", method="auto"):
    """``t -> (1/n) log Z_n(t)`` at the fixed horizon ``n``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return lambda t: target_sum(system, beta, t, horizon, mode, method).log_sum / horizon


def default_bowen(system, beta, horizon, tol=1e-6, t_max=None, mode="exact", method="auto"):
    t_max = float(system.dim) if t_max is None else t_max
    return bowen_parameter(pressure_evaluator(system, beta, horizon, mode, method), t_max, tol, horizon)
