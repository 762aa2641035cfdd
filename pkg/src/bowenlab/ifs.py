"""Non-autonomous conformal iterated function systems.

A system is an infinite schedule of level families, realised as an explicit
prefix followed by a periodic continuation. Words compose outermost-first:
for ``w = (w_1, ..., w_n)``

    phi_w = phi^(1)_{w_1} o phi^(2)_{w_2} o ... o phi^(n)_{w_n},

so the level-``n`` map is applied to the point first. Reversing this order
silently changes every cylinder, so all batched helpers here walk the word
from its last symbol to its first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, InvalidWordError, PreconditionError
from .gamma import GammaFamily
from .quadrature import adaptive_simpson

__all__ = [
    "Box",
    "LinearMap",
    "PerturbedMap",
    "LevelFamily",
    "SystemDescriptor",
    "LinearSystem",
    "PerturbedSystem",
    "Word",
    "Tail",
    "KappaBounds",
    "base_q_level",
    "eval_word",
    "eval_words",
    "deriv_word",
    "deriv_words",
    "cylinder",
    "cylinders",
    "enumerate_words",
    "word_count",
    "kappa_bounds",
    "project_tail",
]

DEFAULT_WORD_CAP = 10**7
DEFAULT_MAX_ALPHABET = 64
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower, upper]`` in R^d."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in np.atleast_1d(self.lower)))
        object.__setattr__(self, "upper", tuple(float(v) for v in np.atleast_1d(self.upper)))
        if len(self.lower) != len(self.upper) or any(a > b for a, b in zip(self.lower, self.upper)):
            raise ValueError(f"invalid box {self.lower} .. {self.upper}")

    @classmethod
    def unit(cls, d=1):
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def lo(self):
        return np.array(self.lower)

    @property
    def hi(self):
        return np.array(self.upper)

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def diam(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, x, slack=_DOMAIN_SLACK):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def contains_box(self, other, slack=_DOMAIN_SLACK):
        return bool(np.all(other.lo >= self.lo - slack) and np.all(other.hi <= self.hi + slack))

    def boundary_distance(self, x):
        """Distance from ``x`` (inside the box) to the complement."""
        x = np.asarray(x, dtype=float)
        return float(np.min(np.minimum(x - self.lo, self.hi - x)))


# --- maps -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Similarity ``x -> ratio * O x + offset`` with ``O`` orthogonal."""

    ratio: float
    offset: tuple
    orth: tuple | None = None

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError(f"contraction ratio must lie in (0, 1), got {self.ratio}")
        object.__setattr__(self, "offset", tuple(float(v) for v in np.atleast_1d(self.offset)))
        if self.orth is not None:
            o = np.atleast_2d(np.asarray(self.orth, dtype=float))
            if o.shape != (self.dim, self.dim) or not np.allclose(o @ o.T, np.eye(self.dim), atol=1e-12):
                raise ValueError("orth must be a d x d orthogonal matrix")
            object.__setattr__(self, "orth", tuple(map(tuple, o)))

    @property
    def dim(self):
        return len(self.offset)

    @cached_property
    def matrix(self):
        o = np.eye(self.dim) if self.orth is None else np.array(self.orth)
        return self.ratio * o

    @property
    def is_grid_aligned(self):
        if self.orth is None:
            return True
        o = np.abs(np.array(self.orth))
        return bool(np.all((o == 0) | (o == 1)))

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + np.array(self.offset)

    def deriv(self, x):
        return np.full(np.shape(x)[:-1], self.ratio)

    @property
    def slope(self):
        """Signed derivative, 1-D only."""
        return self.matrix[0, 0]

    def image(self, box: Box) -> Box:
        corners = np.array(np.meshgrid(*zip(box.lower, box.upper), indexing="ij")).reshape(box.dim, -1).T
        img = self.apply(corners)
        return Box(img.min(axis=0), img.max(axis=0))

    def to_dict(self):
        d = {"ratio": self.ratio, "offset": list(self.offset)}
        if self.orth is not None:
            d["orth"] = [list(r) for r in self.orth]
        return d


@dataclass(frozen=True, eq=False)
class PerturbedMap:
    """1-D map ``x -> phi(u) + phi' * int_u^x (1 + gamma(s)) ds`` on [0, 1].

    ``phi`` is the underlying linear map, ``u`` the anchor. Values come from
    adaptive composite Simpson quadrature; derivatives are exact.
    """

    base: LinearMap
    anchor: float
    gamma: object
    tol: float = 1e-12

    def __post_init__(self):
        if self.base.dim != 1:
            raise ValueError("perturbed maps are one-dimensional")
        if self.gamma.sup() >= 1:
            raise ValueError("perturbation sup-norm must be < 1")

    dim = 1

    @property
    def ratio(self):
        return self.base.ratio

    def _integral(self, x):
        return adaptive_simpson(lambda s: 1.0 + self.gamma(s), self.anchor, x, tol=self.tol)[0]

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        u = self.base.apply(np.array([self.anchor]))[0]
        out = u + self.base.slope * self._integral(x[..., 0])
        return np.asarray(out, dtype=float)[..., None]

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        return self.base.ratio * (1.0 + self.gamma(x[..., 0]))

    def deriv_bounds(self):
        lo, hi = self.gamma.bounds()
        return self.base.ratio * (1.0 + lo), self.base.ratio * (1.0 + hi)

    def image(self, box: Box) -> Box:
        ends = self.apply(np.array([[box.lower[0]], [box.upper[0]]]))[:, 0]
        return Box([ends.min()], [ends.max()])


# --- levels and systems -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelFamily:
    """Alphabet and maps for one level."""

    symbols: tuple
    maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "maps", tuple(self.maps))
        if len(self.symbols) != len(self.maps):
            raise ValueError("one map per symbol is required")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"duplicate symbols in {self.symbols}")

    def __len__(self):
        return len(self.symbols)

    @cached_property
    def position(self):
        return {s: i for i, s in enumerate(self.symbols)}

    @cached_property
    def is_linear(self):
        return all(isinstance(m, LinearMap) for m in self.maps)

    @cached_property
    def _stack(self):
        mats = np.stack([m.matrix for m in self.maps])
        offs = np.stack([np.array(m.offset) for m in self.maps])
        return mats, offs

    @cached_property
    def ratios(self):
        return np.array([m.ratio for m in self.maps])

    @cached_property
    def deriv_bounds(self):
        """Per-symbol (inf, sup) of ``|D phi|`` over X."""
        if self.is_linear:
            return np.stack([self.ratios, self.ratios], axis=1)
        return np.array([m.deriv_bounds() for m in self.maps])

    @property
    def kappa_lower(self):
        return float(self.deriv_bounds[:, 0].min())

    @property
    def kappa_upper(self):
        return float(self.deriv_bounds[:, 1].max())

    def apply(self, idx, x):
        """Apply the map at position ``idx[i]`` to point ``x[i]``."""
        x = np.asarray(x, dtype=float)
        if self.is_linear:
            mats, offs = self._stack
            return np.einsum("nij,nj->ni", mats[idx], x) + offs[idx]
        out = np.empty_like(x)
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.maps[j].apply(x[sel])
        return out

    def deriv(self, idx, x):
        x = np.asarray(x, dtype=float)
        if self.is_linear:
            return self.ratios[idx]
        out = np.empty(len(idx))
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.maps[j].deriv(x[sel])
        return out


def base_q_level(q, digits=None):
    """Level of 1-D maps ``x -> (x + a) / q`` for ``a`` in ``digits``."""
    digits = tuple(range(q)) if digits is None else tuple(digits)
    return LevelFamily(digits, tuple(LinearMap(1.0 / q, (a / q,)) for a in digits))


class SystemDescriptor:
    """Common interface of level schedules on a box domain."""

    dim: int
    domain: Box
    word_cap: int = DEFAULT_WORD_CAP
    max_alphabet: int = DEFAULT_MAX_ALPHABET
    grid_aligned: bool = True

    def level(self, n: int) -> LevelFamily:
        raise NotImplementedError

    @property
    def is_linear(self) -> bool:
        raise NotImplementedError

    @property
    def structural_span(self) -> int:
        """Number of leading levels whose values bound every later level."""
        raise NotImplementedError

    def alphabet_size(self, n):
        return len(self.level(n))

    def alphabet_bound(self):
        return max(self.alphabet_size(k) for k in range(1, self.structural_span + 1))

    def theta(self):
        """``-log sup_n kappa_upper(n)``; positive iff UCC holds."""
        worst = max(self.level(k).kappa_upper for k in range(1, self.structural_span + 1))
        return -math.log(worst)

    def _validate_level(self, n, fam):
        if not 2 <= len(fam) <= self.max_alphabet:
            raise ValueError(f"level {n}: alphabet size {len(fam)} outside [2, {self.max_alphabet}]")
        for s, m in zip(fam.symbols, fam.maps):
            if m.dim != self.dim:
                raise ValueError(f"level {n}, symbol {s!r}: map dimension {m.dim} != {self.dim}")
            if self.dim >= 2 and not isinstance(m, LinearMap):
                raise ValueError("maps in dimension >= 2 must be affine similarities")
            if not self.domain.contains_box(m.image(self.domain), slack=1e-9):
                raise ValueError(f"level {n}, symbol {s!r}: map does not send X into X")


@dataclass(eq=False)
class LinearSystem(SystemDescriptor):
    """Similarity system given as ``prefix`` levels followed by ``period`` repeated."""

    period: Sequence[LevelFamily]
    prefix: Sequence[LevelFamily] = ()
    domain: Box = None
    name: str = ""
    grid_aligned: bool = True
    word_cap: int = DEFAULT_WORD_CAP
    max_alphabet: int = DEFAULT_MAX_ALPHABET

    def __post_init__(self):
        self.prefix = tuple(self.prefix)
        self.period = tuple(self.period)
        if not self.period:
            raise ValueError("the continuation period needs at least one level")
        first = (self.prefix + self.period)[0]
        self.dim = first.maps[0].dim
        if self.domain is None:
            self.domain = Box.unit(self.dim)
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension does not match the maps")
        for n, fam in enumerate(self.prefix + self.period, start=1):
            if not fam.is_linear:
                raise ValueError("LinearSystem levels must hold LinearMap instances")
            self._validate_level(n, fam)
            if self.dim >= 2 and self.grid_aligned and not all(m.is_grid_aligned for m in fam.maps):
                raise ValueError("grid_aligned systems need signed-permutation orthogonal parts")

    @classmethod
    def constant(cls, level, **kw):
        return cls(period=(level,), **kw)

    def level(self, n):
        if n < 1:
            raise ValueError("levels start at 1")
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        return self.period[(n - len(self.prefix) - 1) % len(self.period)]

    is_linear = True

    @property
    def structural_span(self):
        return len(self.prefix) + len(self.period)

    def phase(self, n):
        """Position of level ``n`` in the continuation rule (``None`` in the prefix)."""
        if n <= len(self.prefix):
            return None
        return (n - len(self.prefix) - 1) % len(self.period)


@dataclass(eq=False)
class PerturbedSystem(SystemDescriptor):
    """Nonlinear perturbation of a 1-D linear system on [0, 1]."""

    base: LinearSystem
    gammas: GammaFamily
    anchors: float = 0.0
    quad_tol: float = 1e-12
    name: str = ""

    def __post_init__(self):
        if self.base.dim != 1 or self.base.domain != Box.unit(1):
            raise ValueError("perturbations need a 1-D base system on [0, 1]")
        amp = self.gammas.amplitude
        if not amp.non_increasing:
            raise ValueError("perturbation amplitudes must be non-increasing")
        self.dim = 1
        self.domain = self.base.domain
        self.word_cap = self.base.word_cap
        self.max_alphabet = self.base.max_alphabet
        self._cache = {}
        for n in range(1, self.structural_span + 1):
            if self.gammas.sup(n) >= 1:
                raise ValueError(f"level {n}: perturbation sup-norm {self.gammas.sup(n)} >= 1")
            if self.gammas.sup(n) > self.gammas.eps_at(n) * (1 + 1e-12):
                raise ValueError(f"level {n}: perturbation exceeds declared eps")
            self._validate_level(n, self.level(n))

    def anchor_for(self, position):
        a = self.anchors
        return float(a[position % len(a)]) if isinstance(a, (list, tuple)) else float(a)

    def level(self, n):
        fam = self._cache.get(n)
        if fam is None:
            lin = self.base.level(n)
            maps = tuple(
                PerturbedMap(m, self.anchor_for(i), self.gammas.function(n, i), self.quad_tol)
                for i, m in enumerate(lin.maps)
            )
            fam = self._cache.setdefault(n, LevelFamily(lin.symbols, maps))
        return fam

    is_linear = False

    @property
    def structural_span(self):
        # amplitudes are non-increasing, so each phase of the base period
        # attains its sup at its first occurrence
        return self.base.structural_span


# --- words ------------------------------------------------------------------


@dataclass(frozen=True)
class Word:
    """Symbols ``(w_m, ..., w_n)`` for levels ``m .. n``; empty means identity."""

    symbols: tuple = ()
    start: int = 1

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if self.start < 1:
            raise ValueError("words start at level >= 1")

    @classmethod
    def of(cls, *symbols, start=1):
        return cls(tuple(symbols), start)

    def __len__(self):
        return len(self.symbols)

    def __add__(self, other):
        if other.start != self.start + len(self):
            raise ValueError("concatenated word does not start where this one ends")
        return Word(self.symbols + other.symbols, self.start)

    @property
    def end(self):
        return self.start + len(self) - 1

    def prefix(self, k):
        return Word(self.symbols[:k], self.start)

    def shift(self, k):
        return Word(self.symbols[k:], self.start + k)


@dataclass(frozen=True)
class Tail:
    """Eventually periodic symbol stream ``prefix + period + period + ...``.

    With ``by_index`` the entries are alphabet positions taken modulo the
    level alphabet size, which makes one pattern valid on every level.
    """

    period: tuple = (0,)
    prefix: tuple = ()
    by_index: bool = False

    def __post_init__(self):
        object.__setattr__(self, "period", tuple(self.period))
        object.__setattr__(self, "prefix", tuple(self.prefix))
        if not self.period:
            raise ValueError("tail period must be non-empty")

    def entry(self, j):
        if j < len(self.prefix):
            return self.prefix[j]
        return self.period[(j - len(self.prefix)) % len(self.period)]

    def positions(self, system, start, k):
        """Alphabet positions for the first ``k`` tail symbols at levels ``start ..``."""
        out = np.empty(k, dtype=np.int64)
        for j in range(k):
            fam = system.level(start + j)
            e = self.entry(j)
            if self.by_index:
                out[j] = e % len(fam)
            else:
                try:
                    out[j] = fam.position[e]
                except KeyError:
                    raise InvalidWordError(f"tail symbol {e!r} not in level {start + j} alphabet") from None
        return out

    def word(self, system, start, k):
        pos = self.positions(system, start, k)
        return Word(tuple(system.level(start + j).symbols[p] for j, p in enumerate(pos)), start)

    def to_dict(self):
        return {"prefix": list(self.prefix), "period": list(self.period), "by_index": self.by_index}


def _positions(system, word):
    out = np.empty(len(word), dtype=np.int64)
    for j, s in enumerate(word.symbols):
        fam = system.level(word.start + j)
        try:
            out[j] = fam.position[s]
        except KeyError:
            raise InvalidWordError(
                f"symbol {s!r} not in the level-{word.start + j} alphabet {fam.symbols}"
            ) from None
    return out


def _as_points(system, x):
    scalar = np.ndim(x) == 0
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    if pts.shape[-1] != system.dim:
        pts = pts.reshape(-1, system.dim) if system.dim == 1 else pts
    return pts.reshape(1, system.dim) if pts.ndim == 1 else pts, scalar


def _check_domain(system, pts):
    lo, hi = system.domain.lo, system.domain.hi
    if np.any(pts < lo - _DOMAIN_SLACK) or np.any(pts > hi + _DOMAIN_SLACK):
        raise DomainError("point outside the domain X")


def eval_words(system, idx, x, start=1):
    """Batched ``phi_w(x)``: ``idx`` is an ``(N, n)`` array of alphabet positions.

    ``x`` is either one point (shape ``(d,)``) or one point per word
    (shape ``(N, d)``). Returns an ``(N, d)`` array.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :]
    N, n = idx.shape
    y = np.broadcast_to(np.asarray(x, dtype=float).reshape(-1, system.dim), (N, system.dim)).copy()
    for j in range(n - 1, -1, -1):
        y = system.level(start + j).apply(idx[:, j], y)
    return y


def deriv_words(system, idx, x, start=1):
    """Batched ``|D phi_w(x)|`` by the chain rule over the inner compositions."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :]
    N, n = idx.shape
    y = np.broadcast_to(np.asarray(x, dtype=float).reshape(-1, system.dim), (N, system.dim)).copy()
    d = np.ones(N)
    for j in range(n - 1, -1, -1):
        fam = system.level(start + j)
        d *= fam.deriv(idx[:, j], y)
        if j:
            y = fam.apply(idx[:, j], y)
    return d


def eval_word(system, word: Word, x):
    """``phi_w(x)``; the empty word is the identity."""
    pts, scalar = _as_points(system, x)
    _check_domain(system, pts)
    pos = _positions(system, word)
    y = eval_words(system, pos, pts[0], start=word.start)[0]
    return float(y[0]) if scalar and system.dim == 1 else y


def deriv_word(system, word: Word, x):
    """``|D phi_w(x)|`` (conformal norm); 1 for the empty word."""
    pts, _ = _as_points(system, x)
    _check_domain(system, pts)
    pos = _positions(system, word)
    return float(deriv_words(system, pos, pts[0], start=word.start)[0])


def cylinders(system, idx, start=1):
    """Batched cylinder boxes ``phi_w(X)``; returns ``(lower, upper)`` arrays."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :]
    dom = system.domain
    if system.dim == 1:
        ends = np.array([[dom.lower[0]], [dom.upper[0]]])
        a = eval_words(system, idx, ends[0], start)
        b = eval_words(system, idx, ends[1], start)
        return np.minimum(a, b), np.maximum(a, b)
    corners = np.array(np.meshgrid(*zip(dom.lower, dom.upper), indexing="ij")).reshape(dom.dim, -1).T
    imgs = np.stack([eval_words(system, idx, c, start) for c in corners])
    return imgs.min(axis=0), imgs.max(axis=0)


def cylinder(system, word: Word) -> Box:
    """The cylinder ``phi_w(X)`` (bounding box for non-grid-aligned rotations)."""
    if len(word) == 0:
        return system.domain
    lo, hi = cylinders(system, _positions(system, word), start=word.start)
    return Box(lo[0], hi[0])


def word_count(system, n, start=1):
    return math.prod(system.alphabet_size(k) for k in range(start, start + n))


def enumerate_words(system, n, start=1, cap=None):
    """All words of length ``n`` from level ``start`` as an ``(N, n)`` position array.

    Rows are in lexicographic order (first symbol slowest).
    """
    cap = system.word_cap if cap is None else cap
    count = word_count(system, n, start)
    if count > cap:
        raise CapacityError(f"{count} words of length {n} exceed the cap {cap}")
    sizes = [system.alphabet_size(k) for k in range(start, start + n)]
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(sizes, dtype=np.int64)
    return grids.reshape(n, -1).T.copy()


def word_from_positions(system, pos, start=1):
    return Word(tuple(system.level(start + j).symbols[p] for j, p in enumerate(pos)), start)


# --- contraction bounds -----------------------------------------------------


@dataclass
class KappaBounds:
    """Per-level and cumulative derivative bounds for levels ``1 .. n``.

    ``lower[k-1] <= |D phi_w| <= upper[k-1]`` over words of length ``k``;
    ``exact[k-1]`` marks cumulative values obtained by enumeration rather
    than as products of per-level bounds.
    """

    level_lower: np.ndarray
    level_upper: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    exact: np.ndarray = field(default=None)

    @property
    def n(self):
        return len(self.lower)

    def chain_holds(self, rtol=1e-12):
        pl = np.cumprod(self.level_lower)
        pu = np.cumprod(self.level_upper)
        return bool(
            np.all(pl <= self.lower * (1 + rtol))
            and np.all(self.lower <= self.upper * (1 + rtol))
            and np.all(self.upper <= pu * (1 + rtol))
        )


def kappa_bounds(system, n, exact_up_to=None, allow_fallback=True):
    """Contraction bounds up to level ``n``.

    Cumulative values are exact (by enumerating every word) for horizons
    ``<= exact_up_to`` when the system is linear and the word count fits the
    cap; otherwise they are the per-level product bounds.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    exact_up_to = n if exact_up_to is None else exact_up_to
    lv_lo = np.array([system.level(k).kappa_lower for k in range(1, n + 1)])
    lv_hi = np.array([system.level(k).kappa_upper for k in range(1, n + 1)])
    lo = np.cumprod(lv_lo)
    hi = np.cumprod(lv_hi)
    exact = np.zeros(n, dtype=bool)
    if system.is_linear:
        logs = np.zeros(1)
        for k in range(1, min(n, exact_up_to) + 1):
            if logs.size * system.alphabet_size(k) > system.word_cap:
                if not allow_fallback:
                    raise CapacityError(f"exact kappa at level {k} exceeds the word cap")
                break
            logs = (logs[:, None] + np.log(system.level(k).ratios)[None, :]).ravel()
            lo[k - 1], hi[k - 1] = math.exp(logs.min()), math.exp(logs.max())
            exact[k - 1] = True
    elif exact_up_to and not allow_fallback:
        raise CapacityError("exact cumulative bounds need enumeration over x; only product bounds exist")
    return KappaBounds(lv_lo, lv_hi, lo, hi, exact)


# --- tail projection --------------------------------------------------------


def truncation_depth(system, tol):
    theta = system.theta()
    if theta <= 0:
        raise PreconditionError("uniform contraction (theta > 0) is required")
    diam = system.domain.diam
    return max(1, math.floor(math.log(diam / tol) / theta) + 1)


def project_tail(system, start, tail: Tail, tol=1e-12, depth=None):
    """Approximate the point coded by ``tail`` read from level ``start`` on.

    The truncated composition is evaluated at the centre of X with depth
    ``k`` chosen so that ``exp(-theta k) diam(X) < tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = truncation_depth(system, tol) if depth is None else depth
    pos = tail.positions(system, start, k)
    y = eval_words(system, pos, system.domain.center, start=start)[0]
    return float(y[0]) if system.dim == 1 else y
