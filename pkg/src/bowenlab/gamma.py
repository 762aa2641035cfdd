"""Parametric perturbation functions on [0, 1] and their amplitude schedules.

A perturbation at level ``n`` for symbol ``e`` is ``a_n * shape_e(x) / S``
where ``S = max_e sup |shape_e|``, so the level sup-norm is exactly ``a_n``.
Every shape family knows its exact range and Lipschitz constant on [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "Affine",
    "Sinusoidal",
    "Polynomial",
    "ConstantAmplitude",
    "GeometricAmplitude",
    "PowerAmplitude",
    "GammaFamily",
    "shape_from_dict",
    "amplitude_from_dict",
]


@dataclass(frozen=True)
class Affine:
    """``c0 + c1 * x``."""

    c0: float = -1.0
    c1: float = 2.0

    def __call__(self, x):
        return self.c0 + self.c1 * np.asarray(x, dtype=float)

    def bounds(self):
        v = (self.c0, self.c0 + self.c1)
        return min(v), max(v)

    def lipschitz(self):
        return abs(self.c1)

    def integral(self, a, b):
        return self.c0 * (b - a) + 0.5 * self.c1 * (b * b - a * a)

    def to_dict(self):
        return {"family": "affine", "c0": self.c0, "c1": self.c1}


@dataclass(frozen=True)
class Sinusoidal:
    """``sin(2 pi f x + phase)``."""

    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, x):
        return np.sin(2 * np.pi * self.frequency * np.asarray(x, dtype=float) + self.phase)

    def _critical_points(self):
        w = 2 * math.pi * self.frequency
        if w == 0:
            return []
        # w x + phase = pi/2 + k pi
        k_lo = math.floor((self.phase - math.pi / 2) / math.pi) - 1
        k_hi = math.ceil((w + self.phase - math.pi / 2) / math.pi) + 1
        pts = ((math.pi / 2 + k * math.pi - self.phase) / w for k in range(k_lo, k_hi + 1))
        return [p for p in pts if 0.0 <= p <= 1.0]

    def bounds(self):
        xs = [0.0, 1.0, *self._critical_points()]
        v = self(np.array(xs))
        return float(v.min()), float(v.max())

    def lipschitz(self):
        return 2 * math.pi * abs(self.frequency)

    def integral(self, a, b):
        w = 2 * math.pi * self.frequency
        if w == 0:
            return math.sin(self.phase) * (b - a)
        return (np.cos(w * a + self.phase) - np.cos(w * b + self.phase)) / w

    def to_dict(self):
        return {"family": "sinusoidal", "frequency": self.frequency, "phase": self.phase}


@dataclass(frozen=True)
class Polynomial:
    """``sum_i coef[i] * x**i``."""

    coef: tuple[float, ...] = (0.0, 1.0)

    def __call__(self, x):
        return P.polyval(np.asarray(x, dtype=float), self.coef)

    @staticmethod
    def _extrema(coef):
        d = P.polyder(coef)
        xs = [0.0, 1.0]
        if len(d) and np.any(d):
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                r = P.polyroots(d) if len(d) > 1 else []
            xs += [float(z.real) for z in np.atleast_1d(r)
                   if np.isfinite(z) and abs(z.imag) < 1e-12 and 0 <= z.real <= 1]
        return np.array(xs)

    def bounds(self):
        v = P.polyval(self._extrema(self.coef), self.coef)
        return float(v.min()), float(v.max())

    def lipschitz(self):
        d = P.polyder(self.coef)
        if not len(d):
            return 0.0
        v = np.abs(P.polyval(self._extrema(d), d))
        return float(v.max())

    def integral(self, a, b):
        anti = P.polyint(self.coef)
        return P.polyval(b, anti) - P.polyval(a, anti)

    def to_dict(self):
        return {"family": "polynomial", "coef": list(self.coef)}


def shape_from_dict(d):
    d = dict(d)
    family = d.pop("family")
    if family == "affine":
        return Affine(**d)
    if family == "sinusoidal":
        return Sinusoidal(**d)
    if family == "polynomial":
        return Polynomial(coef=tuple(float(c) for c in d["coef"]))
    raise ValueError(f"unknown gamma family {family!r}")


# Amplitude schedules: a_k for k >= 1.


@dataclass(frozen=True)
class ConstantAmplitude:
    scale: float

    def __call__(self, k):
        return self.scale

    summable = property(lambda self: self.scale == 0)
    cesaro_zero = property(lambda self: self.scale == 0)
    non_increasing = True

    def tail_bound(self, n):
        return 0.0 if self.scale == 0 else math.inf

    def to_dict(self):
        return {"kind": "constant", "scale": self.scale}


@dataclass(frozen=True)
class GeometricAmplitude:
    """``scale * ratio**k``."""

    scale: float
    ratio: float

    def __call__(self, k):
        return self.scale * self.ratio**k

    summable = property(lambda self: self.scale == 0 or self.ratio < 1)
    cesaro_zero = summable
    non_increasing = property(lambda self: self.ratio <= 1)

    def tail_bound(self, n):
        """Exact value of ``sum_{k > n} a_k``."""
        if not self.summable:
            return math.inf
        return self.scale * self.ratio ** (n + 1) / (1 - self.ratio)

    def to_dict(self):
        return {"kind": "geometric", "scale": self.scale, "ratio": self.ratio}


@dataclass(frozen=True)
class PowerAmplitude:
    """``scale * k**(-power)``."""

    scale: float
    power: float

    def __call__(self, k):
        return self.scale * k ** (-self.power)

    summable = property(lambda self: self.scale == 0 or self.power > 1)
    cesaro_zero = property(lambda self: self.scale == 0 or self.power > 0)
    non_increasing = property(lambda self: self.power >= 0)

    def tail_bound(self, n):
        """Integral-test bound on ``sum_{k > n} a_k``."""
        if not self.summable:
            return math.inf
        return self.scale * n ** (1 - self.power) / (self.power - 1)

    def to_dict(self):
        return {"kind": "power", "scale": self.scale, "power": self.power}


def amplitude_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    cls = {"constant": ConstantAmplitude, "geometric": GeometricAmplitude, "power": PowerAmplitude}[kind]
    return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class GammaFamily:
    """Per-level, per-symbol perturbation functions.

    Parameters
    ----------
    shapes : sequence of shapes
        One shape per symbol position in the level alphabet, cycled if
        shorter than the alphabet. A single shape is shared by all symbols.
    amplitude : amplitude schedule
        ``a_k``, the exact sup-norm of the level-``k`` perturbations.
    eps : amplitude schedule, optional
        Declared open range ``(-eps_k, eps_k)``; defaults to ``amplitude``.
    """

    shapes: tuple = field(default=(Sinusoidal(),))
    amplitude: object = GeometricAmplitude(1.0, 0.25)
    eps: object = None

    def __post_init__(self):
        if not self.shapes:
            raise ValueError("at least one shape is required")
        object.__setattr__(self, "shapes", tuple(self.shapes))

    @property
    def _norm(self):
        return max(max(abs(lo), abs(hi)) for lo, hi in (s.bounds() for s in self.shapes))

    def shape_for(self, position):
        return self.shapes[position % len(self.shapes)]

    def function(self, level, position):
        """The level-``level`` perturbation for the symbol at ``position``."""
        return ScaledShape(self.shape_for(position), self.amplitude(level) / self._norm)

    def sup(self, level):
        """Exact level sup-norm (the quantity usually written gamma-bar)."""
        return float(self.amplitude(level))

    def eps_at(self, level):
        return float((self.eps or self.amplitude)(level))

    def to_dict(self):
        d = {"shapes": [s.to_dict() for s in self.shapes], "amplitude": self.amplitude.to_dict()}
        if self.eps is not None:
            d["eps"] = self.eps.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        shapes = d.get("shapes") or [d["shape"]]
        eps = d.get("eps")
        return cls(
            shapes=tuple(shape_from_dict(s) for s in shapes),
            amplitude=amplitude_from_dict(d["amplitude"]),
            eps=amplitude_from_dict(eps) if eps else None,
        )


@dataclass(frozen=True)
class ScaledShape:
    shape: object
    scale: float

    def __call__(self, x):
        return self.scale * self.shape(x)

    def bounds(self):
        lo, hi = self.shape.bounds()
        return (self.scale * lo, self.scale * hi) if self.scale >= 0 else (self.scale * hi, self.scale * lo)

    def sup(self):
        lo, hi = self.bounds()
        return max(abs(lo), abs(hi))

    def lipschitz(self):
        return abs(self.scale) * self.shape.lipschitz()

    def integral(self, a, b):
        return self.scale * self.shape.integral(a, b)


def gamma_sup_sequence(family: GammaFamily, n: int) -> np.ndarray:
    return np.array([family.sup(k) for k in range(1, n + 1)])

