"""Sigma-equivalence of fields built from homoclinic loops through two-folds.

The combinatorial skeleton of a field is read off numerically: its
visible-visible two-folds along the switching line, and for each of them the
fold reached by following X (resp. Y) forward, through crossing points, until
the next fold.  Two fields with equal skeletons are matched by sending folds
to folds and every smooth arc to its partner by normalized arc length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import classify_fold, lie_derivative
from .errors import DegenerateTangency, NotATangency, SkeletonMismatch
from .flow import Mode, integrate_local
from .orbit_metric import arc_length_homeomorphism
from .trajectory import continue_at

SCAN_POINTS = 4001
FOLD_MATCH = 1e-6
EDGE_TIME_LIMIT = 50.0


def sigma_point(Z, x):
    """The switching-line point above ``x`` (the line is taken to be a graph over x)."""
    if Z.switching.is_y:
        return np.array([float(x), 0.0])
    y = 0.0
    for _ in range(50):
        p = np.array([float(x), y])
        fp = Z.switching(p)
        dy = Z.switching.grad(p)[1]
        if dy == 0:
            break
        y -= fp / dy
        if abs(fp) < 1e-15:
            break
    return np.array([float(x), y])


def _window(Z, window):
    if window is not None:
        return float(window[0]), float(window[1])
    if "window" in Z.meta:
        a, b = Z.meta["window"]
        return float(a), float(b)
    return -5.0, 5.0


def tangencies(Z, window=None, n=SCAN_POINTS):
    """Abscissas in ``window`` where ``Xf`` or ``Yf`` vanishes along the switching line."""
    a, b = _window(Z, window)
    xs = np.linspace(a, b, n)
    out = set()
    for fld in (Z.upper, Z.lower):
        def g(x, fld=fld):
            return lie_derivative(fld, Z.switching, sigma_point(Z, x))
        vals = np.array([g(x) for x in xs])
        for i in range(n - 1):
            if vals[i] == 0.0:
                out.add(round(float(xs[i]), 12))
            elif vals[i] * vals[i + 1] < 0:
                out.add(round(brentq(g, xs[i], xs[i + 1], xtol=1e-14), 12))
    return sorted(out)


def two_folds(Z, window=None):
    """Visible-visible two-folds inside ``window``, left to right."""
    folds = []
    for x in tangencies(Z, window):
        p = sigma_point(Z, x)
        try:
            fc = classify_fold(Z, p, tangency_tol=1e-7)
        except (NotATangency, DegenerateTangency):
            continue
        if fc.two_fold == "visible-visible":
            folds.append(p)
    merged = []
    for p in folds:
        if not merged or abs(p[0] - merged[-1][0]) > FOLD_MATCH:
            merged.append(p)
    return merged


@dataclass(frozen=True)
class Edge:
    start: int
    choice: str
    end: int
    arcs: tuple

    @property
    def key(self):
        return (self.start, self.choice, self.end, len(self.arcs))


@dataclass(frozen=True)
class Skeleton:
    folds: tuple
    edges: tuple

    def signature(self):
        return (len(self.folds), tuple(e.key for e in self.edges))

    def as_dict(self):
        return {"folds": [list(map(float, p)) for p in self.folds],
                "edges": [{"start": e.start, "choice": e.choice, "end": e.end, "arcs": len(e.arcs)}
                          for e in self.edges]}


def _match_fold(folds, p):
    for i, q in enumerate(folds):
        if np.linalg.norm(np.asarray(p) - q) <= 1e-5:
            return i
    return None


def _trace(Z, folds, i, choice):
    p = folds[i]
    arcs = []
    t = 0.0
    token = Mode(choice)
    while t < EDGE_TIME_LIMIT:
        arc, hit = integrate_local(Z, token, p, EDGE_TIME_LIMIT - t, t0=t)
        arcs.append(arc)
        t, p = arc.t1, arc.end
        if not hit:
            break
        j = _match_fold(folds, p)
        if j is not None:
            return Edge(i, choice, j, tuple(arcs))
        opts = continue_at(Z, p)
        if len(opts) != 1:
            raise SkeletonMismatch(f"orbit from fold {i} meets a junction {[o.value for o in opts]} "
                                   f"at {tuple(np.round(p, 9))} before any fold")
        token = opts[0]
    raise SkeletonMismatch(f"orbit leaving fold {i} by {choice} does not return to a fold")


def skeleton(Z, window=None):
    folds = two_folds(Z, window)
    if not folds:
        raise SkeletonMismatch("no visible-visible two-fold in the window")
    edges = [_trace(Z, folds, i, c) for i in range(len(folds)) for c in ("X", "Y")]
    return Skeleton(tuple(folds), tuple(edges))


def _arc_samples(arc, n):
    return arc.sample(n)


def sigma_equivalence_check(Z1, Z2, window1=None, window2=None, samples=256, tol=1e-6):
    """Build the arc-length matching between two loop fields and check it.

    Raises :class:`SkeletonMismatch` when the skeletons differ.  Otherwise the
    report lists, per check, whether it held and the worst deviation seen.
    """
    s1, s2 = skeleton(Z1, window1), skeleton(Z2, window2)
    if len(s1.folds) != len(s2.folds):
        raise SkeletonMismatch(f"{len(s1.folds)} two-folds versus {len(s2.folds)}")
    if s1.signature() != s2.signature():
        raise SkeletonMismatch("fold-to-fold transitions differ")

    sigma_err = side_err = orient_err = 0.0
    maps = []
    for e1, e2 in zip(s1.edges, s2.edges):
        for a1, a2 in zip(e1.arcs, e2.arcs):
            A, B = _arc_samples(a1, samples), _arc_samples(a2, samples)
            h = arc_length_homeomorphism(A, B)
            maps.append((e1, e2, A, B, h))
            # switching-line endpoints go to switching-line endpoints, in time order
            for p, q in ((A[0], B[0]), (A[-1], B[-1])):
                img = h(p)
                sigma_err = max(sigma_err, abs(Z2.switching(img)))
                orient_err = max(orient_err, float(np.linalg.norm(img - q)))
            # interior points stay on the same side
            for p in A[1:-1:max(1, samples // 32)]:
                f1, f2 = Z1.switching(p), Z2.switching(h(p))
                if abs(f1) > tol and np.sign(f1) != np.sign(f2):
                    side_err = max(side_err, abs(f2))
    # induced compartment correspondence: an interior point of edge e lands on edge e'
    itin_bad = 0
    checked = 0
    for e1, e2, A, B, h in maps:
        for s in np.linspace(0.1, 0.9, 9):
            q = h.at(s)
            dists = [min(np.min(np.linalg.norm(arc.sample(samples) - q, axis=1)) for arc in e.arcs)
                     for e in s2.edges]
            checked += 1
            if int(np.argmin(dists)) != s2.edges.index(e2):
                itin_bad += 1
    checks = [
        {"name": "sigma_to_sigma", "passed": sigma_err <= tol, "max_error": sigma_err, "tolerance": tol},
        {"name": "orientation", "passed": orient_err <= tol, "max_error": orient_err, "tolerance": tol},
        {"name": "sides_preserved", "passed": side_err == 0.0, "max_error": side_err, "tolerance": 0.0},
        {"name": "itinerary_conjugacy", "passed": itin_bad == 0, "checked": checked,
         "mismatches": itin_bad},
    ]
    return {"passed": all(c["passed"] for c in checks), "skeleton_a": s1.as_dict(),
            "skeleton_b": s2.as_dict(), "checks": checks}
