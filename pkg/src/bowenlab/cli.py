"""Command-line entry point: ``bowenlab <subcommand> --config FILE [--out DIR] ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .conditions import ahlfors_suite, attractor_dimension, esc_constants, verify
from .config import load_config, system_to_dict
from .errors import BowenLabError
from .ifs import PerturbedSystem, word_from_positions
from .oracle import box_count_dimension, cross_check, default_scales
from .perturb import check_separation, perturbation_diagnostics
from .pressure import default_bowen, pressure_curve, target_sum
from .targets import (
    ARatio,
    GrowthChecked,
    MoranConstants,
    build_moran_tree,
    dichotomy_check,
    frostman_scaling,
    lower_bound_R_check,
    moran_schedule,
    sample_target_points,
)

log = logging.getLogger("bowenlab")

SUBCOMMANDS = ("pressure", "bowen", "verify", "moran", "sample", "boxcount", "perturb", "report")


# --- serialisation ----------------------------------------------------------------


def _plain(x):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(x, Fraction):
        return str(x)
    return x


def _fmt(x):
    return f"{x:.17g}" if isinstance(x, (float, np.floating)) else str(x)


def write_json(path, payload, cfg, command):
    doc = {"command": command, "config_sha256": cfg.sha256, "version": __version__, "result": payload}
    path.write_text(json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def write_csv(path, header, rows):
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_points_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise BowenLabError(f"{path}: empty points file")
    cols = [i for i, h in enumerate(rows[0]) if h.startswith("x")]
    if not cols:
        raise BowenLabError(f"{path}: no coordinate columns (x0, x1, ...)")
    return np.array([[float(r[i]) for i in cols] for r in rows[1:]], dtype=float)


# --- pipeline stages ------------------------------------------------------------------


def stage_pressure(cfg):
    p = cfg.run["pressure"]
    rows = []
    for t in p["t"]:
        curve = pressure_curve(cfg.system, cfg.beta, float(t), p["n_min"], p["n_max"])
        rows.extend(curve.rows())
    return rows


def stage_bowen(cfg):
    return default_bowen(cfg.system, cfg.beta, cfg.run["horizon"], tol=cfg.run["tol"])


# enumerating every word at the Ahlfors horizon; beyond this the horizon is lowered
AHLFORS_WORD_BUDGET = 1 << 20


def ahlfors_horizon(system, requested):
    n, words = 0, 1
    while n < requested and words * system.alphabet_size(n + 1) <= AHLFORS_WORD_BUDGET:
        n += 1
        words *= system.alphabet_size(n)
    return max(n, 1)


def _ahlfors(cfg, h):
    v = cfg.run["verify"]
    return ahlfors_suite(cfg.system, h, ahlfors_horizon(cfg.system, v["ahlfors_horizon"]), v["ball_samples"],
                         v["radii"], seed=cfg.run["seed"], lower_bound_depth=v["lower_bound_depth"])


def stage_verify(cfg):
    v = cfg.run["verify"]
    rep = verify(cfg.system, cfg.beta, v["horizon"], route=cfg.run["route"])
    h = rep.data["h"]
    ahl = _ahlfors(cfg, h)
    failures = rep.route_failures(cfg.run["route"])
    return {"conditions": rep.to_dict(), "ahlfors": ahl.to_dict(), "route": cfg.run["route"],
            "route_failures": failures, "passed": not failures}, ahl


def moran_constants(cfg, ahl=None, b=None):
    v = cfg.run["verify"]
    sysm = cfg.system
    a_lo, a_hi, _, _ = esc_constants(sysm, cfg.beta, v["horizon"])
    h = attractor_dimension(sysm).b
    if ahl is None:
        ahl = _ahlfors(cfg, h)
    m = cfg.run["moran"]
    P = None
    needs_p = m.get("variant") == "aratio" or {"incsubseq1", "incsubseq3", "gg"} & set(m.get("inequalities", []))
    if needs_p:
        if b is None:
            b = stage_bowen(cfg).b
        t = float(m.get("t", b / 2))
        n = cfg.run["horizon"]
        P = target_sum(sysm, cfg.beta, t, n).log_sum / n
    return MoranConstants(sysm.theta(), a_hi, a_lo, h, ahl.C, P, float(m.get("const", 1.0)))


def stage_moran(cfg, ahl=None, b=None):
    m = cfg.run["moran"]
    consts = moran_constants(cfg, ahl, b)
    if "schedule" in m:
        variant = GrowthChecked(inequalities=tuple(m["inequalities"]), supplied=tuple(m["schedule"]))
    elif m["variant"] == "aratio":
        variant = ARatio(float(m["A"]), int(m.get("n1", 2)))
    else:
        variant = GrowthChecked(int(m.get("n1", 1)), tuple(m["inequalities"]))
    sched = moran_schedule(consts, variant, len(m["schedule"]) if "schedule" in m else m["levels"])
    tree = build_moran_tree(cfg.system, cfg.beta, sched, per_parent_cap=m["cap"],
                            seed=cfg.run["seed"], threads=cfg.run["threads"])
    bad, pairs = dichotomy_check(tree, 1)
    lb_ok, lb_slack = lower_bound_R_check(tree, consts.C, consts.h)
    levels = []
    for l, lv in enumerate(tree.levels):
        levels.append({
            "n": lv.n,
            "nodes": len(lv),
            "capped": lv.capped,
            "min_children": min(lv.true_counts) if l else len(lv),
            "max_children": max(lv.true_counts) if l else len(lv),
            "mass_sum": tree.level_mass_sum(l),
        })
    summary = {
        "schedule": sched.to_dict(),
        "levels": levels,
        "dichotomy": {"counterexamples": bad, "pairs": pairs},
        "lower_bound_R": {"ok": lb_ok, "worst_log_slack": lb_slack},
        "frostman_exponent": frostman_scaling(tree),
        "deepest_resolved_level": tree.deepest_resolved() + 1,
    }
    return sched, tree, summary


def stage_sample(cfg, tree):
    pts, picks, masses = sample_target_points(tree, cfg.run["sample"]["points"], seed=cfg.run["seed"])
    leaves = tree.leaves
    rows = []
    for p, i, mass in zip(pts, picks, masses):
        w = word_from_positions(cfg.system, leaves.words[i])
        rows.append([*p.tolist(), ".".join(str(s) for s in w.symbols), float(mass)])
    header = [f"x{j}" for j in range(pts.shape[1])] + ["word", "mass"]
    return pts, header, rows


def stage_perturb(cfg):
    if cfg.gammas is None:
        raise BowenLabError("the configuration has no 'perturbation' section")
    h = cfg.run["horizon"]
    diag = perturbation_diagnostics(cfg.gammas, h)
    anchors = cfg.system.anchors if isinstance(cfg.system, PerturbedSystem) else 0.0
    sep = check_separation(cfg.linear, cfg.gammas, anchors=anchors)
    doc = {"name": cfg.name, **system_to_dict(cfg.system), "beta": cfg.document["beta"]}
    return {"diagnostics": diag.to_dict(), "separation": sep.to_dict()}, doc


# --- commands ---------------------------------------------------------------------------


def _apply_overrides(cfg, args):
    for key in ("seed", "threads", "horizon", "tol"):
        v = getattr(args, key)
        if v is not None:
            cfg.run[key] = v
    if cfg.run["horizon"] < 1 or cfg.run["threads"] < 1 or not 0 < cfg.run["tol"] < 1 or cfg.run["seed"] < 0:
        raise BowenLabError("invalid flag value: need horizon >= 1, threads >= 1, 0 < tol < 1, seed >= 0")


def run(args):
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    status = 0
    if cmd == "pressure":
        rows = stage_pressure(cfg)
        cols = ["t", "n", "log_sum", "over_n", "window_hi", "window_lo"]
        written = [write_csv(out / "pressure.csv", cols, ([r[c] for c in cols] for r in rows))]
    elif cmd == "bowen":
        res = stage_bowen(cfg)
        payload = {**res.to_dict(), "bracket": [res.t_lo, res.t_hi], "witnesses": {"p_lo": res.p_lo, "p_hi": res.p_hi}}
        written = [write_json(out / "bowen.json", payload, cfg, cmd)]
    elif cmd == "verify":
        payload, _ = stage_verify(cfg)
        written = [write_json(out / "verify.json", payload, cfg, cmd)]
        status = 0 if payload["passed"] else 1
    elif cmd == "moran":
        _, _, summary = stage_moran(cfg)
        written = [write_json(out / "moran.json", summary, cfg, cmd)]
    elif cmd == "sample":
        _, tree, _ = stage_moran(cfg)
        _, header, rows = stage_sample(cfg, tree)
        written = [write_csv(out / "points.csv", header, rows)]
    elif cmd == "boxcount":
        src = Path(args.points) if args.points else out / "points.csv"
        pts = read_points_csv(src)
        fit = box_count_dimension(pts, default_scales(pts, cfg.run["boxcount"]["scales"]))
        written = [write_json(out / "boxcount.json", {"points_file": src.name, **fit.to_dict()}, cfg, cmd)]
    elif cmd == "perturb":
        payload, doc = stage_perturb(cfg)
        sys_path = out / "perturbed_system.yaml"
        sys_path.write_text(yaml.safe_dump(_plain(doc), sort_keys=True), encoding="utf-8")
        written = [sys_path, write_json(out / "perturb.json", payload, cfg, cmd)]
    elif cmd == "report":
        payload = build_report(cfg)
        written = [write_json(out / "report.json", payload, cfg, cmd)]
        status = 0 if payload["verify"]["passed"] else 1
    else:
        raise BowenLabError(f"unknown subcommand {cmd!r}")
    for p in written:
        print(p)
    return status


def build_report(cfg):
    """verify, bowen, moran, sample, boxcount and cross_check in one record."""
    ver, ahl = stage_verify(cfg)
    res = stage_bowen(cfg)
    _, tree, moran = stage_moran(cfg, ahl, res.b)
    pts, _, _ = stage_sample(cfg, tree)
    cc = cross_check(tree, res.b, cfg.run["sample"]["points"], seed=cfg.run["seed"])
    return {
        "verify": ver,
        "bowen": res.to_dict(),
        "moran": moran,
        "sample": {"points": len(pts), "distinct": int(len(np.unique(pts, axis=0)))},
        "boxcount": cc.fit.to_dict() if cc.fit is not None else None,
        "cross_check": cc.to_dict(),
    }


def build_parser():
    p = argparse.ArgumentParser(prog="bowenlab", description="Shrinking-target dimension laboratory.")
    p.add_argument("--version", action="version", version=f"bowenlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML file or bundled name (base3, cantor, alternating23, perturbed_cantor)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--horizon", type=int)
        s.add_argument("--tol", type=float)
        if name == "boxcount":
            s.add_argument("--points", help="points CSV (default OUT/points.csv)")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except BowenLabError as exc:
        print(f"bowenlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"bowenlab {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bowenlab {args.command}: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
