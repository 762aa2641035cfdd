"""YAML run configurations: systems, beta schedules and per-subcommand parameters.

A document has four top-level keys::

    name: cantor
    system:
      period:                  # levels repeated forever
        - {base: 3, digits: [0, 2]}
      prefix: []               # optional leading levels
    perturbation:              # optional, 1-D systems on [0, 1] only
      shapes: [{family: sinusoidal, frequency: 1.0}]
      amplitude: {kind: geometric, scale: 1.0, ratio: 0.25}
      anchors: 0.0
    beta: {kind: contraction, factor: 2.0}
    run:
      horizon: 24
      ...

A level is either ``{base: q, digits: [...]}`` or an explicit
``{maps: [{ratio, offset, orth?}, ...], symbols: [...]}``.
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .gamma import GammaFamily
from .ifs import Box, LevelFamily, LinearMap, LinearSystem, PerturbedSystem, base_q_level
from .pressure import ConstantBeta, ContractionBeta, SymbolBeta

__all__ = ["RunConfig", "load_config", "parse_config", "system_to_dict", "bundled_config", "BUNDLED"]

BUNDLED = ("base3", "cantor", "alternating23", "perturbed_cantor")

RUN_DEFAULTS = {
    "horizon": 24,
    "tol": 1e-8,
    "seed": 0,
    "threads": 1,
    "route": "bounded",
    "pressure": {"t": [0.25, 0.5, 0.75, 1.0], "n_min": 1, "n_max": 14},
    "verify": {"horizon": 12, "ahlfors_horizon": 14, "ball_samples": 256, "radii": 24, "lower_bound_depth": 10},
    "moran": {"variant": "growth", "levels": 3, "inequalities": ["claim", "nonempty"], "cap": 4096},
    "sample": {"points": 10000},
    "boxcount": {"scales": 16},
}


def _line_map(text):
    """Map key paths like ``run.moran.cap`` to 1-based source lines."""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = f"{path}.{k.value}" if path else str(k.value)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = f"{path}[{i}]"
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return lines


class _Ctx:
    def __init__(self, lines, source):
        self.lines = lines
        self.source = source

    def fail(self, path, msg):
        line = None
        p = path
        while p and line is None:
            line = self.lines.get(p)
            p = p.rsplit(".", 1)[0] if "." in p else ""
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: field '{path}': {msg}")

    def get(self, d, key, path, kind=None, required=True, default=None):
        if not isinstance(d, dict):
            self.fail(path, "expected a mapping")
        if key not in d:
            if required:
                self.fail(f"{path}.{key}" if path else key, "missing")
            return default
        v = d[key]
        p = f"{path}.{key}" if path else key
        numeric = kind in (int, float, (int, float))
        if kind is not None and (not isinstance(v, kind) or numeric and isinstance(v, bool)):
            self.fail(p, f"expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
        return v


def _level(ctx, d, path):
    if not isinstance(d, dict):
        ctx.fail(path, "a level is a mapping")
    try:
        if "base" in d:
            q = ctx.get(d, "base", path, int)
            digits = d.get("digits")
            return base_q_level(q, digits)
        maps = ctx.get(d, "maps", path, list)
        out = []
        for i, m in enumerate(maps):
            p = f"{path}.maps[{i}]"
            ratio = ctx.get(m, "ratio", p, (int, float))
            offset = tuple(float(x) for x in ctx.get(m, "offset", p, list))
            orth = m.get("orth")
            out.append(LinearMap(float(ratio), offset, None if orth is None else tuple(tuple(r) for r in orth)))
        symbols = d.get("symbols", list(range(len(out))))
        return LevelFamily(tuple(symbols), tuple(out))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        ctx.fail(path, str(exc))


def _system(ctx, doc):
    s = ctx.get(doc, "system", "", dict)
    period = ctx.get(s, "period", "system", list)
    if not period:
        ctx.fail("system.period", "needs at least one level")
    levels = [_level(ctx, lv, f"system.period[{i}]") for i, lv in enumerate(period)]
    prefix = [_level(ctx, lv, f"system.prefix[{i}]") for i, lv in enumerate(s.get("prefix") or [])]
    dom = s.get("domain")
    kw = {"name": str(doc.get("name", ""))}
    if dom is not None:
        kw["domain"] = Box(tuple(ctx.get(dom, "lower", "system.domain", list)), tuple(ctx.get(dom, "upper", "system.domain", list)))
    if "grid_aligned" in s:
        kw["grid_aligned"] = bool(s["grid_aligned"])
    try:
        lin = LinearSystem(period=levels, prefix=prefix, **kw)
    except (ValueError, TypeError) as exc:
        ctx.fail("system", str(exc))
    return lin


def _perturbation(ctx, doc, lin):
    p = doc.get("perturbation")
    if p is None:
        return None, None
    if not isinstance(p, dict):
        ctx.fail("perturbation", "expected a mapping")
    try:
        gam = GammaFamily.from_dict(p)
    except (KeyError, ValueError, TypeError) as exc:
        ctx.fail("perturbation", f"invalid gamma family: {exc}")
    anchors = p.get("anchors", 0.0)
    anchors = tuple(float(a) for a in anchors) if isinstance(anchors, list) else float(anchors)
    try:
        sys_ = PerturbedSystem(lin, gam, anchors, float(p.get("quad_tol", 1e-12)), name=lin.name)
    except ValueError as exc:
        ctx.fail("perturbation", str(exc))
    return sys_, gam


def _beta(ctx, doc):
    b = ctx.get(doc, "beta", "", dict)
    kind = ctx.get(b, "kind", "beta", str)
    try:
        if kind == "contraction":
            return ContractionBeta(float(b.get("factor", 1.0)), float(b.get("shift", 0.0)))
        if kind == "constant":
            v = ctx.get(b, "period", "beta")
            return ConstantBeta(tuple(v) if isinstance(v, list) else (float(v),), tuple(b.get("prefix", ())))
        if kind == "symbol":
            base = ctx.get(b, "base", "beta")
            base = ConstantBeta(tuple(base) if isinstance(base, list) else (float(base),))
            return SymbolBeta(base, tuple(float(w) for w in ctx.get(b, "weights", "beta", list)))
    except ValueError as exc:
        ctx.fail("beta", str(exc))
    ctx.fail("beta.kind", f"unknown kind {kind!r} (contraction, constant, symbol)")


def _merge(defaults, given, ctx, path):
    out = copy.deepcopy(defaults)
    if given is None:
        return out
    if not isinstance(given, dict):
        ctx.fail(path, "expected a mapping")
    for k, v in given.items():
        p = f"{path}.{k}"
        if k not in defaults:
            ctx.fail(p, "unknown field")
        if isinstance(defaults[k], dict):
            if v is not None and not isinstance(v, dict):
                ctx.fail(p, "expected a mapping")
            out[k] = {**defaults[k], **(v or {})}
        else:
            out[k] = v
    return out


def _validate_run(ctx, run):
    def pos_int(path, v, lo=1):
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            ctx.fail(path, f"expected an integer >= {lo}, got {v!r}")

    pos_int("run.horizon", run["horizon"])
    pos_int("run.seed", run["seed"], 0)
    pos_int("run.threads", run["threads"])
    if not isinstance(run["tol"], (int, float)) or not 0 < run["tol"] < 1:
        ctx.fail("run.tol", f"expected a tolerance in (0, 1), got {run['tol']!r}")
    if run["route"] not in ("bounded", "subexponential"):
        ctx.fail("run.route", "expected 'bounded' or 'subexponential'")
    pr = run["pressure"]
    pos_int("run.pressure.n_min", pr["n_min"])
    pos_int("run.pressure.n_max", pr["n_max"], pr["n_min"] + 4)
    if not isinstance(pr["t"], list) or not pr["t"] or any(not isinstance(t, (int, float)) or t < 0 for t in pr["t"]):
        ctx.fail("run.pressure.t", "expected a non-empty list of non-negative numbers")
    v = run["verify"]
    for k in ("horizon", "ahlfors_horizon", "ball_samples", "radii", "lower_bound_depth"):
        pos_int(f"run.verify.{k}", v[k])
    m = run["moran"]
    if "schedule" in m:
        s = m["schedule"]
        if not isinstance(s, list) or not s or any(not isinstance(x, int) or x < 1 for x in s) or any(b <= a for a, b in zip(s, s[1:])):
            ctx.fail("run.moran.schedule", "expected a strictly increasing list of positive integers")
    elif m["variant"] not in ("growth", "aratio"):
        ctx.fail("run.moran.variant", "expected 'growth' or 'aratio'")
    pos_int("run.moran.levels", m["levels"])
    cap = m["cap"]
    caps = cap if isinstance(cap, list) else [cap]
    if any(c is not None and (not isinstance(c, int) or c < 1) for c in caps):
        ctx.fail("run.moran.cap", "expected null, a positive integer or a list of them")
    pos_int("run.sample.points", run["sample"]["points"])
    pos_int("run.boxcount.scales", run["boxcount"]["scales"], 4)


@dataclass
class RunConfig:
    name: str
    system: object
    linear: LinearSystem
    gammas: GammaFamily | None
    beta: object
    run: dict
    document: dict
    sha256: str
    source: str = "<string>"
    extras: dict = field(default_factory=dict)

    @property
    def perturbed(self):
        return self.gammas is not None


def parse_config(text, source="<string>"):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from exc
    ctx = _Ctx(_line_map(text), source)
    if not isinstance(doc, dict):
        ctx.fail("", "the document must be a mapping")
    for k in doc:
        if k not in ("name", "system", "perturbation", "beta", "run"):
            ctx.fail(str(k), "unknown top-level field")
    lin = _system(ctx, doc)
    pert, gam = _perturbation(ctx, doc, lin)
    beta = _beta(ctx, doc)
    run = _merge(RUN_DEFAULTS, doc.get("run"), ctx, "run")
    _validate_run(ctx, run)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RunConfig(str(doc.get("name", "")), pert or lin, lin, gam, beta, run, doc, digest, source)


def load_config(path):
    """Parse a YAML file, or a bundled example by name (``base3``, ``cantor``, ...)."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_config(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc}") from exc
    return parse_config(text, str(path))


def bundled_config(name):
    return Path(__file__).parent / "configs" / f"{name}.yaml"


def _level_dict(fam):
    return {"symbols": list(fam.symbols), "maps": [m.to_dict() for m in fam.maps]}


def system_to_dict(system, gammas=None, anchors=0.0):
    """Configuration-document fragment (``system`` and ``perturbation``) for a system."""
    if isinstance(system, PerturbedSystem):
        gammas, anchors, system = system.gammas, system.anchors, system.base
    d = {"system": {"period": [_level_dict(f) for f in system.period]}}
    if system.prefix:
        d["system"]["prefix"] = [_level_dict(f) for f in system.prefix]
    if system.domain != Box.unit(system.dim):
        d["system"]["domain"] = {"lower": list(system.domain.lower), "upper": list(system.domain.upper)}
    if gammas is not None:
        d["perturbation"] = {**gammas.to_dict(), "anchors": list(anchors) if isinstance(anchors, tuple) else anchors}
    return d
