"""Shrinking-target balls, cover sums and the Moran construction.

The target attached to a word ``w`` of length ``n`` is the closed ball
``B_w`` centred at ``phi_w(x^(n))`` with radius ``exp(-S_n beta(w xi))``,
where ``x^(n)`` is the NEQ anchor in ``J_n``.

The Moran tree takes a schedule ``n_1 < n_2 < ...`` and sets ``R_1 = I^{n_1}``
and ``R_{l+1}(w) = {t in I^{n_{l+1}} : B_t inside B_w}``; masses split
equally among the children of each parent.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .conditions import bdp_constant, esc_constants, find_neq
from .errors import ConstructionError, PreconditionError
from .ifs import Word, _positions, cylinders, enumerate_words, eval_words, kappa_bounds, word_from_positions
from .pressure import target_sum

__all__ = [
    "TargetSetup",
    "TargetBall",
    "target_setup",
    "target_ball",
    "cover_tail_sum",
    "MoranConstants",
    "GrowthChecked",
    "ARatio",
    "MoranSchedule",
    "moran_schedule",
    "MoranTree",
    "build_moran_tree",
    "sample_target_points",
    "frostman_scaling",
    "dichotomy_check",
    "lower_bound_R_check",
]

_REL_SLACK = 1e-12
DEFAULT_CAP = 4096


# --- target balls ------------------------------------------------------------------


@dataclass
class TargetSetup:
    """Everything needed to place target balls for one system and beta."""

    system: object
    beta: object
    neq: object
    K: float
    alpha_low: float

    @property
    def eps(self):
        return self.neq.eps

    @cached_property
    def containment_threshold(self):
        if self.eps <= 0 or self.alpha_low <= 0:
            return math.inf
        return self.K / (self.eps * self.alpha_low)

    def anchor(self, n):
        return self.neq.anchor(n, self.system)

    def _anchor_array(self, n):
        return np.atleast_1d(np.asarray(self.anchor(n), dtype=float))

    def balls(self, idx):
        """Centres ``(N, d)`` and log-radii ``(N,)`` for an ``(N, n)`` position array."""
        idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
        n = idx.shape[1]
        centres = eval_words(self.system, idx, self._anchor_array(n))
        log_r = -self.beta.birkhoff(self.system, idx)
        return centres, log_r


def target_setup(system, beta, horizon=8, neq=None):
    if neq is None:
        neq = find_neq(system, horizon)
    if neq.eps <= 0:
        raise PreconditionError("NEQ unresolved: no anchor away from the boundary")
    K, _ = bdp_constant(system)
    a_lo, _, _, _ = esc_constants(system, beta, horizon)
    return TargetSetup(system, beta, neq, K, a_lo)


@dataclass
class TargetBall:
    word: Word
    center: object
    radius: float
    log_radius: float
    contained: bool


def target_ball(setup: TargetSetup, word: Word):
    """``B_w`` with the containment flag ``n >= K / (eps alpha_low)``."""
    if word.start != 1:
        raise ValueError("target words start at level 1")
    pos = _positions(setup.system, word)
    c, lr = setup.balls(pos[None, :])
    centre = float(c[0, 0]) if setup.system.dim == 1 else c[0]
    n = len(word)
    return TargetBall(word, centre, math.exp(lr[0]), float(lr[0]), n >= setup.containment_threshold)


# --- cover sums -----------------------------------------------------------------------


@dataclass
class CoverSum:
    value: float
    log_value: float
    log_terms: np.ndarray
    ns: np.ndarray
    ratio: float
    pressure: float
    converges: bool
    diverges: bool
    proof_tail_bound: float
    geometric_tail: float

    @property
    def terms(self):
        return np.exp(self.log_terms)


def cover_tail_sum(system, beta, t, N, horizon):
    """``sum_{n=N}^{horizon} 2^t sum_w exp(-t S_n beta)``, the cover sum by target diameters.

    The per-step ratio is fitted on the log terms; ``pressure`` is the
    finite-horizon value at ``horizon``. When it is negative the proof's
    tail bound ``2^t exp(N P / 2) / (1 - exp(P / 2))`` is reported too.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if horizon < N or N < 1:
        raise ValueError("need 1 <= N <= horizon")
    ns = np.arange(N, horizon + 1)
    log_terms = np.array([t * math.log(2) + target_sum(system, beta, t, int(n)).log_sum for n in ns])
    if len(ns) > 1:
        slope = float(np.polyfit(ns, log_terms, 1)[0])
    else:
        slope = math.nan
    P = target_sum(system, beta, t, horizon).log_sum / horizon
    ratio = math.exp(slope)
    converges = P < -1e-12
    diverges = P > 1e-12
    proof = 2**t * math.exp(N * P / 2) / (1 - math.exp(P / 2)) if converges else math.inf
    geo = 2**t * ratio**N / (1 - ratio) if ratio < 1 else math.inf
    lv = float(logsumexp(log_terms))
    return CoverSum(math.exp(lv), lv, log_terms, ns, ratio, P, converges, diverges, proof, geo)


# --- schedules -----------------------------------------------------------------------


@dataclass(frozen=True)
class MoranConstants:
    """Constants feeding the schedule inequalities.

    ``P`` is the pressure at the chosen ``t < b``; ``const`` is the additive
    constant of the ``4h/P`` growth condition.
    """

    theta: float
    alpha_high: float
    alpha_low: float
    h: float = 1.0
    C: float = 1.0
    P: float | None = None
    const: float = 1.0


@dataclass(frozen=True)
class GrowthChecked:
    """Least-integer schedule under a selectable set of inequalities.

    Available: ``claim`` (cylinder dichotomy), ``nonempty`` (non-empty child
    sets), ``incsubseq1`` (``4h/P`` growth), ``incsubseq3`` (``6h/P`` growth)
    and ``gg`` (``C^l <= exp(n_l P / 4h)``). Strict increase is always
    enforced. A ``supplied`` schedule is certified instead of generated.
    """

    n1: int = 1
    inequalities: tuple = ("claim", "nonempty")
    supplied: tuple | None = None


@dataclass(frozen=True)
class ARatio:
    """``n_{l+1} = min{n : n A >= alpha_low (n_1 + ... + n_l)}``."""

    A: float
    n1: int = 2
    alpha_low: float | None = None


@dataclass
class MoranSchedule:
    ns: list
    variant: object
    constants: MoranConstants | None
    certificates: list

    @property
    def valid(self):
        return all(c["ok"] for cert in self.certificates for c in cert["checks"])

    def to_dict(self):
        v = self.variant
        return {
            "ns": list(self.ns),
            "variant": type(v).__name__,
            "parameters": {k: (list(x) if isinstance(x, tuple) else x) for k, x in v.__dict__.items()},
            "constants": None if self.constants is None else dict(self.constants.__dict__),
            "certificates": self.certificates,
            "valid": self.valid,
        }


def _bounds(name, c: MoranConstants, l, ns):
    """Lower bound on ``n_{l+1}`` from inequality ``name`` given ``n_1 .. n_l``."""
    nl, tot = ns[-1], sum(ns)
    if name == "claim":
        return (math.log(2) + nl * (c.alpha_high + c.theta)) / c.theta
    if name == "nonempty":
        return (math.log(c.C) / c.h + nl * (c.theta + c.alpha_high)) / c.theta
    if name == "incsubseq1":
        return 4 * c.h / c.P * (c.const + c.alpha_high * tot)
    if name == "incsubseq3":
        return 6 * c.h / c.P * ((l + 1) * math.log(c.C) + c.alpha_high * tot)
    if name == "gg":
        return 4 * c.h * (l + 1) * math.log(c.C) / c.P
    raise ValueError(f"unknown inequality {name!r}")


def _least_int(x):
    return max(1, math.ceil(x - 1e-9))


def moran_schedule(constants, variant, l_max):
    """Generate (or certify) ``n_1 .. n_{l_max}`` with per-level certificates."""
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    if isinstance(variant, ARatio):
        return _aratio(constants, variant, l_max)
    c = constants
    if c.theta <= 0 or c.alpha_high <= 0 or c.alpha_low <= 0:
        raise PreconditionError("theta, alpha_high and alpha_low must be positive")
    needs_p = {"incsubseq1", "incsubseq3", "gg"} & set(variant.inequalities)
    if needs_p and (c.P is None or c.P <= 0):
        raise PreconditionError("growth inequalities need a positive pressure value P(t)")
    if needs_p and c.h <= 0:
        raise PreconditionError("h must be positive")
    ns = [variant.supplied[0] if variant.supplied else variant.n1]
    certs = [{"l": 1, "n": ns[0], "checks": []}]
    for l in range(1, l_max):
        req = {name: _bounds(name, c, l, ns) for name in variant.inequalities}
        req["increasing"] = ns[-1] + 1
        if variant.supplied:
            if l >= len(variant.supplied):
                break
            n = int(variant.supplied[l])
        else:
            n = max(_least_int(v) for v in req.values())
        checks = [{"inequality": k, "bound": float(v), "ok": n >= v - 1e-9} for k, v in req.items()]
        ns.append(n)
        certs.append({"l": l + 1, "n": n, "checks": checks})
    return MoranSchedule(ns, variant, c, certs)


def _aratio(c, v: ARatio, l_max):
    a_low = v.alpha_low if v.alpha_low is not None else (c.alpha_low if c else None)
    if a_low is None or a_low <= 0 or v.A <= 0:
        raise PreconditionError("ARatio needs A > 0 and alpha_low > 0")
    admissible = None
    if c is not None and c.P is not None:
        if c.P <= 0:
            raise PreconditionError("pressure value must be positive")
        cap = c.P / (6 * c.h) * a_low / (math.log(c.C) + c.alpha_high)
        admissible = v.A <= cap
        if not admissible:
            raise PreconditionError(f"A = {v.A} exceeds the admissible bound {cap}")
    A, al = Fraction(v.A), Fraction(a_low)
    q = al / A
    ns = [v.n1]
    certs = [{"l": 1, "n": v.n1, "checks": [], "admissible": admissible}]
    for l in range(1, l_max):
        n = max(1, math.ceil(al * sum(ns) / A))
        r = Fraction(n, ns[-1])
        checks = [
            {"inequality": "ratio_low", "bound": float(q), "ok": r >= q},
            {"inequality": "ratio_high", "bound": float(q + 2), "ok": r <= q + 2},
            {"inequality": "increasing", "bound": ns[-1] + 1, "ok": n > ns[-1]},
        ]
        ns.append(n)
        certs.append({"l": l + 1, "n": n, "ratio": float(r), "checks": checks})
    return MoranSchedule(ns, v, c, certs)


# --- Moran tree ------------------------------------------------------------------------


@dataclass
class MoranLevel:
    n: int
    words: np.ndarray  # (N, n) alphabet positions
    centers: np.ndarray  # (N, d)
    log_radius: np.ndarray  # (N,)
    parent: np.ndarray  # (N,) index into previous level, -1 at level 1
    masses: list  # Fraction per node
    weights: list  # Fraction: true sibling count / kept sibling count
    true_counts: list = field(default_factory=list)  # per parent of this level
    capped: bool = False
    half_ball_counts: list = field(default_factory=list)

    def __len__(self):
        return len(self.words)

    @cached_property
    def log_mass(self):
        return np.array([math.log(m) for m in self.masses])


@dataclass
class MoranTree:
    system: object
    beta: object
    schedule: list
    levels: list
    setup: TargetSetup
    seed: int

    @property
    def depth(self):
        return len(self.levels)

    @property
    def leaves(self):
        return self.levels[-1]

    @property
    def capped(self):
        return any(lv.capped for lv in self.levels)

    def deepest_resolved(self):
        """Index of the deepest level whose ancestors and itself are uncapped."""
        k = -1
        for i, lv in enumerate(self.levels):
            if lv.capped:
                break
            k = i
        return k

    def level_mass_sum(self, l):
        """Total mass of the full ``R_l`` (kept nodes weighted by their sampling weights)."""
        lv = self.levels[l]
        total = Fraction(0)
        w = [Fraction(1)] * len(lv)
        # propagate the sampling weight along ancestors
        idx = np.arange(len(lv))
        for j in range(l, -1, -1):
            cur = self.levels[j]
            w = [wi * cur.weights[i] for wi, i in zip(w, idx)]
            idx = cur.parent[idx] if j else idx
        for m, wi in zip(lv.masses, w):
            total += m * wi
        return total

    def ell(self, r):
        """Least ``l`` with ``max radius over R_{l+1} <= r`` (``None`` if none)."""
        for l in range(self.depth - 1):
            if float(np.max(self.levels[l + 1].log_radius)) <= math.log(r):
                return l + 1
        return None


def _dist_interval(lo, hi, c):
    """Min and max distance from point(s) ``c`` to boxes ``[lo, hi]``."""
    below = np.clip(lo - c, 0, None)
    above = np.clip(c - hi, 0, None)
    mind = np.linalg.norm(np.maximum(below, above), axis=1)
    far = np.maximum(np.abs(c - lo), np.abs(hi - c))
    maxd = np.linalg.norm(far, axis=1)
    return mind, maxd


class _ChildSearch:
    """Counts and lists ``{t in I^n : B_t inside B(c, R)}`` by cylinder descent."""

    def __init__(self, setup, n):
        self.setup = setup
        self.system = setup.system
        self.n = n
        beta = setup.beta
        sys = self.system
        self.sizes = [sys.alphabet_size(k) for k in range(1, n + 1)]
        if beta.factorizable:
            self.vals = [beta.symbol_values(sys, k) for k in range(1, n + 1)]
            sup = np.array([v.max() for v in self.vals])
            inf = np.array([v.min() for v in self.vals])
        else:
            self.vals = None
            sup = np.array([beta.sup(sys, k) for k in range(1, n + 1)])
            inf = np.array([beta.inf(sys, k) for k in range(1, n + 1)])
        # remaining sums over levels m+1 .. n, indexed by m
        self.rest_sup = np.concatenate([np.cumsum(sup[::-1])[::-1], [0.0]])
        self.rest_inf = np.concatenate([np.cumsum(inf[::-1])[::-1], [0.0]])
        self.tot_sup = self.rest_sup[0]
        self.tot_inf = self.rest_inf[0]

    def _log_r_bounds(self, prefix):
        m = prefix.shape[1]
        if self.vals is not None:
            s = np.zeros(len(prefix))
            for j in range(m):
                s += self.vals[j][prefix[:, j]]
            return -(s + self.rest_sup[m]), -(s + self.rest_inf[m])
        return np.full(len(prefix), -self.tot_sup), np.full(len(prefix), -self.tot_inf)

    def search(self, c, log_R):
        """Return ``(full_prefixes, exact_leaves)``.

        ``full_prefixes`` are prefixes every extension of which qualifies;
        ``exact_leaves`` are complete words checked individually.
        """
        R = math.exp(log_R) * (1 + _REL_SLACK)
        c = np.asarray(c, dtype=float)
        frontier = np.zeros((1, 0), dtype=np.int64)
        full, leaves = [], []
        for m in range(0, self.n):
            # expand
            k = self.sizes[m]
            frontier = np.concatenate(
                [np.repeat(frontier, k, axis=0), np.tile(np.arange(k), len(frontier))[:, None]], axis=1)
            if m + 1 == self.n:
                centres, lr = self.setup.balls(frontier)
                d = np.linalg.norm(centres - c, axis=1)
                ok = d + np.exp(lr) <= R
                leaves.append(frontier[ok])
                break
            lo, hi = cylinders(self.system, frontier)
            mind, maxd = _dist_interval(lo, hi, c)
            rmin, rmax = (np.exp(v) for v in self._log_r_bounds(frontier))
            inside = maxd + rmax <= R
            alive = (mind + rmin <= R) & ~inside
            if inside.any():
                full.append(frontier[inside])
            frontier = frontier[alive]
            if len(frontier) == 0:
                break
        return full, leaves

    def ext_count(self, m):
        return math.prod(self.sizes[m:])


def _randbelow(rng, n):
    """Uniform integer in ``[0, n)`` for arbitrary-size ``n``."""
    if n <= (1 << 62):
        return int(rng.integers(0, n))
    k = n.bit_length()
    nbytes = (k + 7) // 8
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - k)
        if v < n:
            return v


def _sample_distinct(rng, total, k):
    """``k`` distinct uniform integers from ``[0, total)`` (Floyd's algorithm), sorted."""
    chosen = set()
    for j in range(total - k, total):
        t = _randbelow(rng, j + 1)
        chosen.add(t if t not in chosen else j)
    return sorted(chosen)


def _materialise(search, full, leaves, picks=None):
    """Expand counted prefixes into complete words; optionally only the ``picks`` indices."""
    blocks = [(p, search.ext_count(p.shape[1])) for arr in full for p in arr[:, None, :]]
    blocks += [(w[None, :], 1) for arr in leaves for w in arr]
    out = []
    if picks is None:
        for p, cnt in blocks:
            m = p.shape[1]
            if cnt == 1 and m == search.n:
                out.append(p[0])
                continue
            ext = enumerate_words(search.system, search.n - m, start=m + 1, cap=max(cnt, 1))
            out.extend(np.concatenate([np.repeat(p, len(ext), axis=0), ext], axis=1))
        return np.array(out, dtype=np.int64).reshape(-1, search.n)
    offsets = np.cumsum([0] + [cnt for _, cnt in blocks])
    bi = 0
    for g in picks:
        while offsets[bi + 1] <= g:
            bi += 1
        p, cnt = blocks[bi]
        r = g - int(offsets[bi])
        m = p.shape[1]
        tail = []
        for size in reversed(search.sizes[m:]):
            tail.append(r % size)
            r //= size
        out.append(np.concatenate([p[0], np.array(tail[::-1], dtype=np.int64)]))
    return np.array(out, dtype=np.int64).reshape(-1, search.n)


def _cap_for(cap, l):
    if cap is None:
        return None
    if isinstance(cap, (list, tuple)):
        return cap[min(l, len(cap) - 1)]
    return cap


def build_moran_tree(system, beta, schedule, per_parent_cap=DEFAULT_CAP, seed=0, setup=None,
                     threads=1, half_ball_diagnostics=False):
    """Construct the Moran tree for ``schedule = (n_1, n_2, ...)``.

    Children are found by closed-ball containment (centre distance plus child
    radius at most the parent radius, with a ``1e-12`` relative slack), by
    descending the cylinder tree and pruning cylinders that cannot hold a
    qualifying centre. When a parent has more than ``per_parent_cap``
    children a uniform sample of exactly that many is kept; the child mass
    always uses the true count.
    """
    ns = list(schedule.ns if isinstance(schedule, MoranSchedule) else schedule)
    if any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ValueError("schedule must be a strictly increasing sequence of positive integers")
    if setup is None:
        setup = target_setup(system, beta, max(ns))
    words = enumerate_words(system, ns[0])
    c1, lr1 = setup.balls(words)
    cnt1 = len(words)
    lv1 = MoranLevel(ns[0], words, c1, lr1, np.full(cnt1, -1), [Fraction(1, cnt1)] * cnt1,
                     [Fraction(1)] * cnt1, [cnt1])
    levels = [lv1]
    for l, n in enumerate(ns[1:], start=1):
        prev = levels[-1]
        search = _ChildSearch(setup, n)
        cap = _cap_for(per_parent_cap, l)

        def one(i, prev=prev, search=search, cap=cap, l=l):
            full, leaves = search.search(prev.centers[i], prev.log_radius[i])
            total = sum(len(a) * search.ext_count(a.shape[1]) for a in full) + sum(len(a) for a in leaves)
            if total == 0:
                w = word_from_positions(system, prev.words[i])
                raise ConstructionError(
                    f"empty child set at level {l + 1} for parent {w.symbols} (n = {prev.n} -> {n})")
            if cap is not None and total > cap:
                rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, l, i])))
                picks = _sample_distinct(rng, total, cap)
                kids = _materialise(search, full, leaves, picks)
            else:
                kids = _materialise(search, full, leaves)
            half = _half_ball_count(search, prev.centers[i], prev.log_radius[i]) if half_ball_diagnostics else None
            return total, kids, half

        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                results = list(ex.map(one, range(len(prev))))
        else:
            results = [one(i) for i in range(len(prev))]

        all_words, parents, masses, weights, counts, halfs = [], [], [], [], [], []
        capped = False
        for i, (total, kids, half) in enumerate(results):
            m = prev.masses[i] / total
            w = Fraction(total, len(kids))
            capped |= len(kids) < total
            all_words.append(kids)
            parents.append(np.full(len(kids), i))
            masses.extend([m] * len(kids))
            weights.extend([w] * len(kids))
            counts.append(total)
            halfs.append(half)
        wds = np.concatenate(all_words)
        cen, lr = setup.balls(wds)
        levels.append(MoranLevel(n, wds, cen, lr, np.concatenate(parents), masses, weights, counts,
                                 capped or prev.capped, halfs if half_ball_diagnostics else []))
    return MoranTree(system, beta, ns, levels, setup, seed)


def _half_ball_count(search, c, log_R):
    """Number of level-``n`` cylinders meeting ``B(c, R/2)``."""
    idx = enumerate_words(search.system, search.n)
    lo, hi = cylinders(search.system, idx)
    mind, _ = _dist_interval(lo, hi, np.asarray(c, dtype=float))
    return int(np.sum(mind <= 0.5 * math.exp(log_R)))


# --- checks on a built tree ---------------------------------------------------------------


def dichotomy_check(tree, l=1):
    """Exhaustive check of the cylinder dichotomy between levels ``l`` and ``l + 1`` (1-based).

    For every parent ``w`` in ``R_l`` and every ``t`` in ``I^{n_{l+1}}``, a
    cylinder meeting ``B_w / 2`` must lie inside ``B_w``. Returns the number of
    counterexamples and the number of (parent, cylinder) pairs examined.
    """
    parent = tree.levels[l - 1]
    n = tree.schedule[l]
    idx = enumerate_words(tree.system, n)
    lo, hi = cylinders(tree.system, idx)
    bad = 0
    for c, lr in zip(parent.centers, parent.log_radius):
        R = math.exp(lr)
        mind, maxd = _dist_interval(lo, hi, c)
        meets = mind <= 0.5 * R
        inside = maxd <= R * (1 + _REL_SLACK)
        bad += int(np.sum(meets & ~inside))
    return bad, len(parent) * len(idx)


def lower_bound_R_check(tree, C, h):
    """Check ``#R_{l+1}(w) >= C^{-1} (exp(-S_{n_l} beta(w)) / kappa_bar_{n_{l+1}})^h`` for every parent."""
    kb = kappa_bounds(tree.system, tree.schedule[-1])
    worst = math.inf
    ok = True
    for l in range(1, tree.depth):
        prev, cur = tree.levels[l - 1], tree.levels[l]
        kap = kb.upper[cur.n - 1]
        for lr, cnt in zip(prev.log_radius, cur.true_counts):
            log_bound = -math.log(C) + h * (lr - math.log(kap))
            slack = math.log(cnt) - log_bound
            worst = min(worst, slack)
            ok &= slack >= -1e-12
    return ok, worst


# --- sampling and Frostman scaling ------------------------------------------------------------


def sample_target_points(tree, count, seed=0):
    """Leaf centres along root-to-leaf paths drawn proportionally to mass.

    Returns ``(points (count, d), leaf indices, masses)``. When ``count``
    equals the number of leaves and nothing was capped the leaves are
    returned in order, without randomness.
    """
    if tree.depth < 2:
        raise ValueError("sampling needs a tree with at least two levels")
    leaves = tree.leaves
    if count == len(leaves) and not tree.capped:
        picks = np.arange(count)
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 7919])))
        # equal sibling masses make the path choice uniform among kept children
        kids = []
        for l in range(1, tree.depth):
            par = tree.levels[l].parent
            order = np.argsort(par, kind="stable")
            starts = np.searchsorted(par[order], np.arange(len(tree.levels[l - 1])))
            ends = np.searchsorted(par[order], np.arange(len(tree.levels[l - 1])), side="right")
            kids.append((order, starts, ends))
        node = rng.integers(0, len(tree.levels[0]), size=count)
        for order, starts, ends in kids:
            span = ends[node] - starts[node]
            node = order[starts[node] + (rng.random(count) * span).astype(np.int64)]
        picks = node
    pts = leaves.centers[picks]
    # nesting: every point lies in every ancestor ball
    node = picks
    for l in range(tree.depth - 1, -1, -1):
        lv = tree.levels[l]
        d = np.linalg.norm(pts - lv.centers[node], axis=1)
        if np.any(d > np.exp(lv.log_radius[node]) * (1 + 1e-9)):
            raise ConstructionError(f"sampled point escapes its level-{l + 1} ancestor ball")
        node = lv.parent[node] if l else node
    masses = np.array([float(leaves.masses[i]) for i in picks])
    return pts, picks, masses


def frostman_scaling(tree_or_points, radii=None, masses=None, ball_radii=None, max_centers=512, seed=0):
    """Fitted slope of ``log max_x m(B(x, r))`` against ``log r``.

    Accepts a ``MoranTree`` or an array of points with ``masses``. In one
    dimension each leaf's mass is spread uniformly over its target ball
    (``ball_radii`` for raw points; omitted means point masses), which is
    the natural extension of the level measure to X. In higher dimensions
    leaf masses sit at the centres. The maximum is taken over leaf centres
    (at most ``max_centers`` of them, drawn reproducibly).
    The default grid has 16 radii log-spaced from the smallest leaf radius
    to the diameter of X.
    """
    if isinstance(tree_or_points, MoranTree):
        tree = tree_or_points
        lv = tree.leaves
        pts = lv.centers
        w = np.ones(len(lv))
        node = np.arange(len(lv))
        for l in range(tree.depth - 1, -1, -1):
            cur = tree.levels[l]
            w = w * np.array([float(cur.weights[i]) for i in node])
            node = cur.parent[node] if l else node
        m = np.array([float(x) for x in lv.masses]) * w
        br = np.exp(lv.log_radius)
        if radii is None:
            radii = np.geomspace(br.min(), tree.system.domain.diam, 16)
    else:
        pts = np.asarray(tree_or_points, dtype=float)
        pts = pts[:, None] if pts.ndim == 1 else pts
        m = np.full(len(pts), 1.0 / len(pts)) if masses is None else np.asarray(masses, dtype=float)
        br = None if ball_radii is None else np.broadcast_to(np.asarray(ball_radii, dtype=float), (len(pts),))
        if radii is None:
            raise ValueError("radii are required for raw point sets")
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 2 or np.any(radii <= 0) or np.ptp(np.log(radii)) == 0:
        raise ValueError("degenerate radius grid")
    centers = pts
    if len(pts) > max_centers:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 104729])))
        centers = pts[np.sort(rng.choice(len(pts), max_centers, replace=False))]
    spread = br is not None and pts.shape[1] == 1
    best = np.zeros(len(radii))
    for c in centers:
        if spread:
            x = pts[:, 0]
            lo = np.maximum(x[None, :] - br[None, :], c[0] - radii[:, None])
            hi = np.minimum(x[None, :] + br[None, :], c[0] + radii[:, None])
            frac = np.clip(hi - lo, 0, None) / np.where(br > 0, 2 * br, 1.0)[None, :]
            frac = np.where(br[None, :] > 0, frac, (np.abs(x - c[0])[None, :] <= radii[:, None]).astype(float))
            vals = frac @ m
        else:
            d = np.linalg.norm(pts - c, axis=1)
            order = np.argsort(d)
            cum = np.cumsum(m[order])
            k = np.searchsorted(d[order], radii * (1 + 1e-12), side="right")
            vals = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
        best = np.maximum(best, vals)
    y = np.log(np.clip(best, 1e-300, None))
    return float(np.polyfit(np.log(radii), y, 1)[0])
