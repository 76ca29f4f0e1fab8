"""Command-line entry point: ``psvf {fields,traj,shift,verify,portrait} ...``.

Exit status is 0 on success, 1 when a verification fails or a word is not
admissible, and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .canonical import (
    compartments,
    fold_lattice,
    invariant_set,
    make_canonical,
)
from .config import load_config
from .core import classify_fold, classify_point, field_to_dict, load_field
from .errors import InadmissibleWord, PSVFError, SkeletonMismatch

FAMILIES = "k2, k3, ..., inf or bean"


class UsageError(Exception):
    pass


def _default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _family(args, cfg):
    try:
        fam = make_canonical(args.kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return replace(fam, field=cfg.apply(fam.field))


def _point(fam, spec):
    """``p1``..``p_{k-1}``, ``r0``, ``r1``, ``origin`` or ``x,y``."""
    s = spec.strip().lower()
    if "," in s:
        x, y = (float(v) for v in s.split(","))
        return np.array([x, y])
    if s == "origin":
        return np.array([0.0, 0.0])
    if fam.kind == "bean":
        raise UsageError("bean starting points are given as x,y")
    lat = fold_lattice(fam.k if fam.kind == "finite" else "inf", fam.window)
    if s in ("r0", "r1") and fam.kind == "finite":
        return np.array([lat[s], 0.0])
    if s.startswith("p") and s[1:].lstrip("-").isdigit():
        j = int(s[1:])
        if fam.kind == "infinite":
            return np.array([float(j), 0.0])
        if 1 <= j <= len(lat["folds"]):
            return np.array([lat["folds"][j - 1], 0.0])
    raise UsageError(f"cannot parse starting point {spec!r}")


def _window(text):
    s = text.replace(" ", "")
    if ".." in s:
        a, b = s.split("..")
    elif ":" in s:
        a, b = s.split(":")
    else:
        raise UsageError(f"window must look like a..b, got {text!r}")
    return int(a), int(b)


def _arc_dict(arc):
    return {"governing": arc.governing.value, "t0": arc.t0, "t1": arc.t1,
            "start": [float(v) for v in arc.start], "end": [float(v) for v in arc.end]}


# --- fields ---------------------------------------------------------------------

def describe_family(fam):
    Z = fam.field
    doc = {"name": fam.name, "kind": fam.kind}
    if fam.kind in ("finite", "infinite"):
        lat = fold_lattice(fam.k if fam.kind == "finite" else "inf", 3 if fam.kind == "infinite" else fam.window)
        folds = lat["folds"]
        doc["folds"] = [{"x": x, "class": classify_fold(Z, np.array([x, 0.0])).as_dict()} for x in folds]
        if fam.kind == "finite":
            doc["crossing_points"] = [
                {"x": lat[r], "region": classify_point(Z, np.array([lat[r], 0.0])).value}
                for r in ("r0", "r1")]
            doc["compartments"] = [c.as_dict() for c in compartments(fam).arcs]
            doc["alphabet"] = fam.alphabet
        else:
            doc["compartments"] = [c.as_dict() for c in compartments(fam, (-3, 3)).arcs]
            doc["note"] = "lattice listed over [-3, 3]; it continues periodically"
    else:
        from .equivalence import tangencies

        tans = []
        for x in tangencies(Z, (-1.0, 1.0)):
            tans.append({"x": x, "class": classify_fold(Z, np.array([x, 0.0])).as_dict()})
        doc["tangencies"] = tans
        segs = [(-1.0, -math.sqrt(0.5)), (-math.sqrt(0.5), 0.0), (0.0, math.sqrt(0.5)), (math.sqrt(0.5), 1.0)]
        doc["regions"] = [{"interval": [a, b],
                           "region": classify_point(Z, np.array([(a + b) / 2, 0.0])).value}
                          for a, b in segs]
        doc["section"] = {"x": 0.0, "y": "(0, 1]"}
        doc["invariant_set"] = {"upper": "1 - x^2", "lower": "x^4/2 - x^2/2", "domain": [-1, 1]}
    inv = invariant_set(fam)
    if inv.domain is not None:
        doc["domain"] = list(inv.domain)
    return doc


def cmd_fields_describe(args, cfg):
    if args.field:
        from .equivalence import tangencies

        Z = cfg.apply(load_field(args.field))
        win = tuple(Z.meta.get("window", (-2.0, 2.0)))
        tans = []
        for x in tangencies(Z, win):
            try:
                cls = classify_fold(Z, np.array([x, 0.0])).as_dict()
            except PSVFError as exc:
                cls = {"error": type(exc).__name__}
            tans.append({"x": x, "class": cls})
        doc = {"name": Z.name, "window": list(win), "tangencies": tans}
    else:
        doc = describe_family(_family(args, cfg))
    _emit(dumps(doc), args.out or cfg.out)
    return 0


def cmd_portrait(args, cfg):
    from .portrait import family_portrait, field_portrait

    if args.field:
        svg = field_portrait(cfg.apply(load_field(args.field)))
    else:
        svg = family_portrait(_family(args, cfg))
    _emit(svg, args.out or cfg.out)
    return 0


def cmd_fields_export(args, cfg):
    fam = _family(args, cfg)
    _emit(dumps(field_to_dict(fam.field)), args.out or cfg.out)
    return 0


# --- trajectories --------------------------------------------------------------------

def cmd_traj_simulate(args, cfg):
    from .trajectory import enumerate_branches, simulate

    if args.field:
        Z = cfg.apply(load_field(args.field))
        p0 = _point(make_canonical("k2"), args.start) if "," in args.start else None
        if p0 is None:
            raise UsageError("with --field the starting point must be x,y")
    else:
        fam = _family(args, cfg)
        Z = fam.field
        p0 = _point(fam, args.start)
    exits = [float(v) for v in args.exits.split(",")] if args.exits else None
    horizon = cfg.horizon
    if args.branches == "all":
        tree = enumerate_branches(Z, p0, horizon, max_branches=cfg.max_branches, exits=exits)
        doc = {"root": list(tree.root), "horizon": horizon, "truncated": tree.truncated,
               "max_branches": cfg.max_branches, "depth": tree.depth,
               "junctions": [n.as_dict() for n in tree.nodes],
               "leaves": [{"branch": list(l.branch_log), "arcs": [_arc_dict(a) for a in l.arcs]}
                          for l in tree.leaves]}
    else:
        rng = np.random.default_rng(cfg.seed)
        g = simulate(Z, p0, horizon, policy=args.branches, rng=rng, exits=exits)
        doc = {"root": [float(v) for v in p0], "horizon": horizon,
               "branch": list(g.branch_log), "arcs": [_arc_dict(a) for a in g.arcs]}
    _emit(dumps(doc), args.out or cfg.out)
    if args.branches == "all" and doc["truncated"]:
        sys.stderr.write(f"BranchBudgetExceeded: more than {cfg.max_branches} branches; tree truncated\n")
    return 0


def trajectory_csv(gamma, per_arc):
    """Rows ``t,x,y,governing``: per-arc samples plus every multiple of 1/2 in the span."""
    times = set()
    for arc in gamma.arcs:
        n = max(2, per_arc)
        for t in np.linspace(arc.t0, arc.t1, n):
            times.add(float(t))
    lo, hi = math.ceil(2 * gamma.t_start - 1e-9), math.floor(2 * gamma.t_end + 1e-9)
    for h in range(lo, hi + 1):
        times.add(h / 2)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y", "governing"])
    for t in sorted(times):
        p = gamma.at(t)
        w.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1])), gamma.governing_at(t).value])
    return buf.getvalue()


def cmd_traj_synth(args, cfg):
    from .symbolic import SymbolWindow
    from .trajectory import bean_trajectory, trajectory_from_symbols

    fam = _family(args, cfg)
    if fam.kind == "bean":
        if not args.beats:
            raise UsageError("the bean family takes --beats y0,y1,...")
        gamma = bean_trajectory([float(v) for v in args.beats.split(",")], fam.field)
    else:
        if args.word is None:
            raise UsageError("--word is required")
        try:
            win = SymbolWindow.parse(args.word, fam.alphabet, args.offset)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        gamma = trajectory_from_symbols(fam, win)
    _emit(trajectory_csv(gamma, cfg.per_arc), args.out or cfg.out)
    return 0


class _Samples:
    """Trajectory stand-in backed by CSV rows (exact lookups at sample times)."""

    def __init__(self, rows):
        self.t = np.array([r[0] for r in rows])
        self.p = np.array([[r[1], r[2]] for r in rows])

    def at(self, t):
        i = int(np.searchsorted(self.t, t))
        for j in (i - 1, i, i + 1):
            if 0 <= j < len(self.t) and abs(self.t[j] - t) <= 1e-9:
                return self.p[j]
        raise PSVFError(f"no sample at t = {t}; regenerate the CSV with traj synth")


def _read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append((float(r["t"]), float(r["x"]), float(r["y"]), r.get("governing", "")))
    if not rows:
        raise UsageError(f"{path} has no samples")
    return sorted(rows)


def _infer_kind(rows):
    pts = [(x, y) for _, x, y, _ in rows]
    for kind in [f"k{k}" for k in range(2, 11)] + ["inf"]:
        inv = invariant_set(make_canonical(kind))
        if all(inv.contains(p, 1e-7) for p in pts):
            return kind
    raise UsageError("cannot infer the family from the samples; pass --kind")


def cmd_traj_itinerary(args, cfg):
    from .trajectory import itinerary

    rows = _read_csv(args.infile)
    kind = args.kind or _infer_kind(rows)
    fam = replace(make_canonical(kind), field=cfg.apply(make_canonical(kind).field))
    gamma = _Samples(rows)
    if args.window:
        a, b = _window(args.window)
    else:
        a, b = math.ceil(rows[0][0] - 1e-9), math.floor(rows[-1][0] - 0.5 + 1e-9)
    win = itinerary(fam, gamma, (a, b))
    doc = {"kind": fam.name, **win.as_dict()}
    _emit(dumps(doc), args.out or cfg.out)
    return 0


# --- symbolic --------------------------------------------------------------------------

def _alphabet(text):
    if str(text).lower() in ("inf", "int", "integers", "z"):
        return None
    return int(text)


def cmd_shift_metric(args, cfg):
    from .symbolic import SymbolWindow, metric_d

    alpha = _alphabet(args.alphabet)
    try:
        w1 = SymbolWindow.parse(args.w1, alpha, args.offset)
        w2 = SymbolWindow.parse(args.w2, alpha, args.offset2 if args.offset2 is not None else args.offset)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(dumps(metric_d(w1, w2).as_dict()), args.out or cfg.out)
    return 0


def _matrix(args):
    from .symbolic import sft_matrix

    if args.k < 2:
        raise UsageError("k must be at least 2")
    return sft_matrix(args.k)


def cmd_shift_mixing(args, cfg):
    from .symbolic import is_mixing

    _emit(dumps(is_mixing(_matrix(args))), args.out or cfg.out)
    return 0


def cmd_shift_matrix(args, cfg):
    _emit(dumps(_matrix(args).as_list()), args.out or cfg.out)
    return 0


def cmd_shift_periodic(args, cfg):
    from .symbolic import periodic_count

    M = _matrix(args)
    doc = {"k": args.k, "counts": {str(n): periodic_count(M, n) for n in range(1, args.n + 1)}}
    _emit(dumps(doc), args.out or cfg.out)
    return 0


# --- verification -----------------------------------------------------------------------

def _first_failure(report):
    for c in report.get("checks", []):
        if not c["passed"]:
            return c
    return None


def cmd_verify_conjugacy(args, cfg):
    from .orbit_metric import verify_conjugacy

    fam = _family(args, cfg)
    report = verify_conjugacy(fam, samples=cfg.samples, depth=cfg.depth, seed=cfg.seed,
                              per_arc=min(cfg.per_arc, 128))
    _emit(dumps(report), args.report or args.out or cfg.out)
    bad = _first_failure(report)
    if bad is not None:
        sys.stderr.write(f"verification failed: {bad['name']}: {json.dumps(bad['counterexample'], default=_default)}\n")
        return 1
    return 0


def _field_arg(spec, cfg):
    if spec.endswith(".json"):
        return cfg.apply(load_field(spec))
    try:
        return cfg.apply(make_canonical(spec).field)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_verify_equivalence(args, cfg):
    from .equivalence import sigma_equivalence_check

    Za, Zb = _field_arg(args.a, cfg), _field_arg(args.b, cfg)
    try:
        report = sigma_equivalence_check(Za, Zb)
    except SkeletonMismatch as exc:
        report = {"passed": False, "error": "SkeletonMismatch", "message": str(exc), "checks": []}
        _emit(dumps(report), args.report or args.out or cfg.out)
        sys.stderr.write(f"SkeletonMismatch: {exc}\n")
        return 1
    _emit(dumps(report), args.report or args.out or cfg.out)
    bad = _first_failure(report)
    if bad is not None:
        sys.stderr.write(f"verification failed: {bad['name']}\n")
        return 1
    return 0


# --- parser -----------------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output path (default: stdout)")


def _family_opt(p, required=True):
    p.add_argument("--kind", required=required, help=f"canonical family: {FAMILIES}")


def build_parser():
    ap = argparse.ArgumentParser(prog="psvf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"psvf {__version__}")
    ap.add_argument("--config", default=None, help="key = value configuration file")
    ap.add_argument("--seed", type=int, default=None, help="random seed")
    ap.add_argument("--out", default=None, help="output path (default: stdout)")
    top = ap.add_subparsers(dest="group", required=True)

    fields = top.add_parser("fields", help="inspect canonical or user fields")
    fsub = fields.add_subparsers(dest="cmd", required=True)
    p = fsub.add_parser("describe", help="folds, crossing points and compartments as JSON")
    _family_opt(p, required=False)
    p.add_argument("--field", help="JSON field document instead of --kind")
    _common(p)
    p.set_defaults(func=cmd_fields_describe)
    p = fsub.add_parser("portrait", help="SVG phase portrait")
    _family_opt(p, required=False)
    p.add_argument("--field", help="JSON field document instead of --kind")
    _common(p)
    p.set_defaults(func=cmd_portrait)
    p = fsub.add_parser("export", help="write a canonical field as a JSON document")
    _family_opt(p)
    _common(p)
    p.set_defaults(func=cmd_fields_export)

    p = top.add_parser("portrait", help="SVG phase portrait (same as fields portrait)")
    _family_opt(p, required=False)
    p.add_argument("--field", help="JSON field document instead of --kind")
    _common(p)
    p.set_defaults(func=cmd_portrait)

    traj = top.add_parser("traj", help="simulate, synthesize and encode trajectories")
    tsub = traj.add_subparsers(dest="cmd", required=True)
    p = tsub.add_parser("simulate", help="branching simulation from a point")
    _family_opt(p, required=False)
    p.add_argument("--field", help="JSON field document instead of --kind")
    p.add_argument("--from", dest="start", default="p1", help="p1, r0, origin or x,y")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--branches", choices=["all", "first", "random"], default="all")
    p.add_argument("--max-branches", type=int, default=None)
    p.add_argument("--exits", help="comma-separated escaping exit abscissas (bean)")
    _common(p)
    p.set_defaults(func=cmd_traj_simulate)
    p = tsub.add_parser("synth", help="trajectory CSV realizing a symbol word")
    _family_opt(p)
    p.add_argument("--word", help="symbols, e.g. 0110 or 0,2,4,3")
    p.add_argument("--offset", type=int, default=0, help="index of the first symbol")
    p.add_argument("--beats", help="bean beat heights y0,y1,... in (0,1]")
    p.add_argument("--per-arc", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_traj_synth)
    p = tsub.add_parser("itinerary", help="symbols of a trajectory CSV")
    _family_opt(p, required=False)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--window", help="index range a..b")
    _common(p)
    p.set_defaults(func=cmd_traj_itinerary)

    sh = top.add_parser("shift", help="symbolic dynamics")
    ssub = sh.add_subparsers(dest="cmd", required=True)
    p = ssub.add_parser("metric", help="distance between two symbol windows")
    p.add_argument("--alphabet", required=True, help="number of symbols, or inf for integers")
    p.add_argument("--w1", required=True)
    p.add_argument("--w2", required=True)
    p.add_argument("--offset", type=int, default=0, help="index of the first symbol")
    p.add_argument("--offset2", type=int, default=None, help="offset of w2 if different")
    _common(p)
    p.set_defaults(func=cmd_shift_metric)
    for name, func, hlp in (("mixing", cmd_shift_mixing, "primitivity of the transition matrix"),
                            ("matrix", cmd_shift_matrix, "transition matrix from flow simulation")):
        p = ssub.add_parser(name, help=hlp)
        p.add_argument("--k", type=int, required=True)
        _common(p)
        p.set_defaults(func=func)
    p = ssub.add_parser("periodic", help="number of period-n points, n = 1..N")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, default=8)
    _common(p)
    p.set_defaults(func=cmd_shift_periodic)

    ver = top.add_parser("verify", help="numerical conjugacy and equivalence checks")
    vsub = ver.add_subparsers(dest="cmd", required=True)
    p = vsub.add_parser("conjugacy", help="itinerary conjugacy report")
    _family_opt(p)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--report", help="report path (default: stdout)")
    _common(p)
    p.set_defaults(func=cmd_verify_conjugacy)
    p = vsub.add_parser("equivalence", help="Sigma-equivalence of two loop fields")
    p.add_argument("--a", required=True, help="field JSON or canonical name")
    p.add_argument("--b", required=True, help="field JSON or canonical name")
    p.add_argument("--report", help="report path (default: stdout)")
    _common(p)
    p.set_defaults(func=cmd_verify_equivalence)
    return ap


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(
            args.config, seed=args.seed, out=args.out,
            horizon=getattr(args, "horizon", None),
            max_branches=getattr(args, "max_branches", None),
            per_arc=getattr(args, "per_arc", None),
            samples=getattr(args, "samples", None),
            depth=getattr(args, "depth", None),
        )
        if getattr(args, "kind", None) is None and not getattr(args, "field", None) \
                and args.func in (cmd_fields_describe, cmd_portrait):
            raise UsageError("pass --kind or --field")
        if getattr(args, "kind", None) is None and not getattr(args, "field", None) \
                and args.func is cmd_traj_simulate:
            raise UsageError("pass --kind or --field")
        args.out = getattr(args, "out", None)
        return args.func(args, cfg)
    except InadmissibleWord as exc:
        sys.stderr.write(f"InadmissibleWord: {exc}\n")
        return 1
    except (UsageError, ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"psvf: error: {exc}\n")
        return 2
    except PSVFError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
