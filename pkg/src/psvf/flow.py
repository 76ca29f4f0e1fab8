"""Local orbit pieces: closed-form flows, numerical integration and arcs.

Canonical fields carry a closed-form flow: every orbit of ``(v, v * H'(x))``
is a level curve ``y = H(x) + c`` swept at constant horizontal speed ``v``.
Other fields are integrated with DOP853 and their switching-line hits are
located by bisection on the dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .core import (
    RegionClass,
    Side,
    UndefinedSliding,
    classify_point,
    lie_derivative,
    sliding_field,
)
from .errors import EventLocationFailure

HIT_TOL = 1e-12
GRAZE_TOL = 1e-8
ROOT_EPS = 1e-12
DEFAULT_SAMPLES = 512
_PROBES = 16


class Governing(str, Enum):
    UPPER = "upper"
    LOWER = "lower"
    SLIDING = "sliding"
    STATIONARY = "stationary"


class Mode(str, Enum):
    """A continuation at a switching-line point: follow X, Y or the sliding field."""

    X = "X"
    Y = "Y"
    ZT = "ZT"
    STAY = "STAY"


GOVERNING_OF = {Mode.X: Governing.UPPER, Mode.Y: Governing.LOWER,
                Mode.ZT: Governing.SLIDING, Mode.STAY: Governing.STATIONARY}


# --- closed-form flows ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GraphFlow:
    """Orbits ``x(t) = x0 + speed*t``, ``y = height(x) + c``.

    ``roots(c)`` returns the sorted real solutions of ``height(x) + c = 0``.
    """

    speed: float
    height: Callable
    roots: Callable

    def level(self, p):
        c = float(p[1] - self.height(p[0]))
        return 0.0 if abs(c) <= HIT_TOL else c

    def next_hit(self, x0, c):
        r = np.asarray(self.roots(c), dtype=float)
        if self.speed > 0:
            ahead = r[r > x0 + ROOT_EPS]
            return float(ahead.min()) if ahead.size else None
        ahead = r[r < x0 - ROOT_EPS]
        return float(ahead.max()) if ahead.size else None


@dataclass(frozen=True, eq=False)
class SlidingFlow:
    """Closed-form sliding motion along ``y = 0``.

    ``elapsed(xa, xb)`` is the (positive) time needed to slide from ``xa`` to
    ``xb``; ``position(xa, tau)`` inverts it.  ``stops`` lists the abscissas
    where the sliding regime ends.
    """

    velocity: Callable
    elapsed: Callable
    position: Callable
    stops: tuple

    def next_stop(self, x0):
        v = self.velocity(x0)
        if v < 0:
            ahead = [s for s in self.stops if s < x0 - ROOT_EPS]
            return max(ahead) if ahead else None
        ahead = [s for s in self.stops if s > x0 + ROOT_EPS]
        return min(ahead) if ahead else None


# --- curves (local time tau >= 0) ---------------------------------------------

@dataclass(frozen=True, eq=False)
class GraphCurve:
    flow: GraphFlow
    x0: float
    c: float
    x1: Optional[float] = None
    duration: Optional[float] = None

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        x = self.x0 + self.flow.speed * tau
        if self.x1 is not None:
            x = np.where(tau >= self.duration, self.x1, x)
        y = self.flow.height(x) + self.c
        if self.x1 is not None:
            y = np.where(tau >= self.duration, 0.0, y)
        return np.stack([x, y], axis=-1)

    def point(self, tau):
        if self.x1 is not None and tau >= self.duration:
            return np.array([self.x1, 0.0])
        x = self.x0 + self.flow.speed * tau
        return np.array([x, float(self.flow.height(x)) + self.c])


@dataclass(frozen=True, eq=False)
class SlideCurve:
    flow: SlidingFlow
    x0: float
    x1: Optional[float] = None
    duration: Optional[float] = None

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        xs = np.vectorize(self._x, otypes=[float])(tau)
        return np.stack([xs, np.zeros_like(xs)], axis=-1)

    def _x(self, t):
        if t <= 0:
            return self.x0
        if self.duration is not None and t >= self.duration:
            return self.x1
        return self.flow.position(self.x0, t)


@dataclass(frozen=True, eq=False)
class PolylineCurve:
    taus: np.ndarray
    points: np.ndarray

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        x = np.interp(tau, self.taus, self.points[:, 0])
        y = np.interp(tau, self.taus, self.points[:, 1])
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True, eq=False)
class PointCurve:
    p: tuple

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.broadcast_to(np.asarray(self.p, dtype=float), tau.shape + (2,)).copy()


def _point_at(curve, tau):
    if hasattr(curve, "point"):
        return curve.point(float(tau))
    pts = curve.at(np.array([tau]))
    return np.asarray(pts, dtype=float).reshape(-1, 2)[0]


@dataclass(frozen=True, eq=False)
class Arc:
    """One smooth piece of orbit on ``[t0, t0 + duration]``."""

    governing: Governing
    t0: float
    duration: float
    curve: Any

    @property
    def t1(self):
        return self.t0 + self.duration

    def point(self, t):
        return _point_at(self.curve, min(max(t - self.t0, 0.0), self.duration))

    @property
    def start(self):
        return _point_at(self.curve, 0.0)

    @property
    def end(self):
        return _point_at(self.curve, self.duration)

    def points(self, ts):
        taus = np.clip(np.asarray(ts, dtype=float) - self.t0, 0.0, self.duration)
        return np.asarray(self.curve.at(taus), dtype=float).reshape(-1, 2)

    def sample(self, n=DEFAULT_SAMPLES):
        return self.points(self.t0 + np.linspace(0.0, self.duration, max(n, 2)))

    def shifted(self, dt):
        """Same arc with the time origin moved forward by ``dt``."""
        return Arc(self.governing, self.t0 - dt, self.duration, self.curve)


# --- numerical integration ---------------------------------------------------

def _bisect(dense, lo, hi, g, tol, max_iter=200):
    """Shrink ``[lo, hi]`` with ``g(lo) >= 0 > g(hi)`` until ``|g| <= tol``."""
    glo = g(dense(lo))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(dense(mid))
        if abs(gm) <= tol and gm >= 0:
            return mid
        if gm >= 0:
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(hi)):
            break
    if abs(glo) <= tol:
        return lo
    raise EventLocationFailure(f"bisection stalled with |g| = {abs(glo):.3g} > {tol:g}")


def _argmin_bisect(dense, lo, hi, rate):
    """Locate the sign change of ``rate`` (negative at lo, positive at hi)."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(dense(mid)) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def integrate_numeric(fun, p, dt, event=None, event_rate=None, rtol=1e-11, atol=1e-13,
                      n_samples=DEFAULT_SAMPLES, graze_tol=GRAZE_TOL):
    """Integrate ``s' = fun(s)`` from ``p`` for at most ``dt``.

    ``event(s)`` is nonnegative on the admissible side; integration stops at its
    first zero (transversal crossing located by bisection to ``HIT_TOL``, or a
    tangential touch where ``event_rate`` changes sign and ``|event| <= graze_tol``).
    Returns ``(taus, points, hit, grazed)``.
    """
    p = np.asarray(p, dtype=float)
    if dt <= 0:
        return np.array([0.0]), p[None, :], False, False
    solver = DOP853(lambda t, s: fun(s), 0.0, p, dt, rtol=rtol, atol=atol)
    pieces = []
    hit = grazed = False
    t_end = dt
    prev_t = 0.0
    prev_rate = event_rate(p) if event_rate is not None else None
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise EventLocationFailure(f"integrator failed: {msg}")
        dense = solver.dense_output()
        pieces.append((prev_t, solver.t, dense))
        if event is not None:
            # probe inside the step so that a crossing-and-return or a touch
            # between two accepted steps is not missed
            grid = np.linspace(prev_t, solver.t, _PROBES + 1)[1:]
            lo = prev_t
            found = False
            for tk in grid:
                yk = dense(tk)
                if event(yk) < 0:
                    t_end = _bisect(dense, lo, tk, event, HIT_TOL)
                    hit = found = True
                    break
                if event_rate is not None:
                    rate = event_rate(yk)
                    if prev_rate is not None and prev_rate < 0 < rate and lo > 0:
                        tm = _argmin_bisect(dense, lo, tk, event_rate)
                        em = event(dense(tm))
                        if em < 0:
                            t_end = _bisect(dense, lo, tm, event, HIT_TOL)
                            hit = found = True
                            break
                        if em <= graze_tol:
                            t_end, hit, grazed, found = tm, True, True, True
                            break
                    prev_rate = rate
                lo = tk
            if found:
                break
        prev_t = solver.t
    if not pieces:
        return np.array([0.0]), p[None, :], False, False

    def evaluate(t):
        for a, b, d in pieces:
            if t <= b:
                return d(t)
        return pieces[-1][2](t)

    taus = np.linspace(0.0, t_end, max(n_samples, 2))
    pts = np.array([evaluate(t) for t in taus])
    pts[0] = p
    return taus, pts, hit, grazed


def _tangent(Z, p):
    g = Z.switching.grad(p)
    return np.array([-g[1], g[0]]) / np.linalg.norm(g)


def project_to_sigma(Z, p, iters=8):
    p = np.asarray(p, dtype=float)
    for _ in range(iters):
        fp = Z.switching(p)
        if abs(fp) <= 1e-15:
            break
        g = Z.switching.grad(p)
        p = p - fp * g / (g @ g)
    return p


def refine_tangency(Z, p, fld, radius=1e-5):
    """Move ``p`` along the switching line to the nearby zero of ``fld f``."""

    def at(s):
        return project_to_sigma(Z, p + s * _tangent(Z, p))

    def phi(s):
        return lie_derivative(fld, Z.switching, at(s))

    ss = np.linspace(-radius, radius, 41)
    vals = [phi(s) for s in ss]
    best = int(np.argmin(np.abs(vals)))
    for i in range(len(ss) - 1):
        if vals[i] == 0.0:
            return at(ss[i])
        if vals[i] * vals[i + 1] < 0:
            return at(brentq(phi, ss[i], ss[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return at(ss[best])


def sliding_velocity(Z, p):
    """Sliding vector at ``p``, continuously extended across two-folds."""
    if Z.sliding is not None:
        return np.array([Z.sliding.velocity(float(p[0])), 0.0])
    try:
        return sliding_field(Z, p)
    except UndefinedSliding:
        h = 1e-6
        t = _tangent(Z, p)
        vals = []
        for s in (-h, h):
            q = project_to_sigma(Z, p + s * t)
            try:
                vals.append(sliding_field(Z, q))
            except UndefinedSliding:
                pass
        if not vals:
            raise
        return np.mean(vals, axis=0)


def _numeric_side(Z, side, p, dt, n_samples):
    fld = Z.side(side)
    sign = 1.0 if side is Side.UPPER else -1.0
    sw = Z.switching

    def event(s):
        return sign * sw(s)

    def rate(s):
        return sign * lie_derivative(fld, sw, s)

    rtol = Z.meta.get("rtol", 1e-11)
    taus, pts, hit, grazed = integrate_numeric(fld, p, dt, event, rate, rtol=rtol, atol=rtol * 1e-2,
                                               n_samples=n_samples)
    if hit:
        end = project_to_sigma(Z, pts[-1])
        if grazed:
            end = refine_tangency(Z, end, fld)
        else:
            end = _snap_to_tangency(Z, fld, end, rtol)
        pts[-1] = end
    return taus, pts, hit


def _snap_to_tangency(Z, fld, p, rtol):
    """Move a shallow hit onto the nearby tangency it was aiming at.

    At a quadratic contact a height error ``e`` shifts the hit by about
    ``sqrt(e)`` along the line, so a nearly tangential hit within
    ``30 sqrt(rtol)`` of a zero of ``fld f`` is taken to be that zero.
    """
    radius = 30.0 * math.sqrt(rtol)
    v = fld(p)
    g = Z.switching.grad(p)
    scale = np.linalg.norm(v) * np.linalg.norm(g)
    if scale == 0 or abs(lie_derivative(fld, Z.switching, p)) > 10 * radius * scale:
        return p
    q = refine_tangency(Z, p, fld, radius=radius)
    if abs(lie_derivative(fld, Z.switching, q)) <= Z.tangency_tol and np.linalg.norm(q - p) <= radius:
        return q
    return p


def _numeric_sliding(Z, p, dt, n_samples, stop_x=None):
    def region(s):
        q = project_to_sigma(Z, s)
        xf = lie_derivative(Z.upper, Z.switching, q)
        yf = lie_derivative(Z.lower, Z.switching, q)
        return -xf * yf

    p = project_to_sigma(Z, p)
    v0 = sliding_velocity(Z, p)
    if stop_x is not None:
        direction = math.copysign(1.0, v0[0])

        def event(s):
            return min(region(s), direction * (stop_x - s[0]))
    else:
        event = region
    rtol = Z.meta.get("rtol", 1e-11)
    taus, pts, hit, _ = integrate_numeric(lambda s: sliding_velocity(Z, s), p, dt, event,
                                          rtol=rtol, atol=rtol * 1e-2, n_samples=n_samples)
    pts = np.array([project_to_sigma(Z, q) for q in pts])
    if hit and stop_x is not None and abs(pts[-1][0] - stop_x) < 1e-6:
        pts[-1] = project_to_sigma(Z, np.array([stop_x, pts[-1][1]]))
    elif hit:
        end = pts[-1]
        xf = abs(lie_derivative(Z.upper, Z.switching, end))
        yf = abs(lie_derivative(Z.lower, Z.switching, end))
        pts[-1] = refine_tangency(Z, end, Z.upper if xf < yf else Z.lower)
    return taus, pts, hit


def integrate_local(Z, mode, p, dt, t0=0.0, stop_x=None, n_samples=DEFAULT_SAMPLES):
    """One local orbit piece from ``p`` under ``mode`` for at most ``dt``.

    The arc ends at the first switching-line hit (or at ``stop_x`` for sliding
    arcs), or after ``dt``.  Returns ``(arc, hit)``.
    """
    mode = Mode(mode)
    p = np.asarray(p, dtype=float)
    gov = GOVERNING_OF[mode]
    if mode is Mode.STAY or dt <= 0:
        return Arc(gov if dt > 0 else Governing.STATIONARY, t0, max(dt, 0.0), PointCurve(tuple(p))), False
    if mode in (Mode.X, Mode.Y):
        side = Side.UPPER if mode is Mode.X else Side.LOWER
        fld = Z.side(side)
        if fld.flow is not None:
            return _closed_side(fld.flow, gov, p, dt, t0)
        taus, pts, hit = _numeric_side(Z, side, p, dt, n_samples)
        return Arc(gov, t0, float(taus[-1]), PolylineCurve(taus, pts)), hit
    if Z.sliding is not None:
        return _closed_sliding(Z.sliding, p, dt, t0, stop_x)
    taus, pts, hit = _numeric_sliding(Z, p, dt, n_samples, stop_x)
    return Arc(gov, t0, float(taus[-1]), PolylineCurve(taus, pts)), hit


def _closed_side(flow, gov, p, dt, t0):
    x0 = float(p[0])
    c = flow.level(p)
    x_hit = flow.next_hit(x0, c)
    if x_hit is not None:
        t_hit = abs(x_hit - x0) / abs(flow.speed)
        if t_hit <= dt:
            return Arc(gov, t0, t_hit, GraphCurve(flow, x0, c, x_hit, t_hit)), True
    return Arc(gov, t0, dt, GraphCurve(flow, x0, c)), False


def _closed_sliding(flow, p, dt, t0, stop_x):
    x0 = float(p[0])
    target = flow.next_stop(x0)
    if stop_x is not None and (target is None or abs(stop_x - x0) < abs(target - x0)):
        target = float(stop_x)
    if target is not None:
        t_hit = flow.elapsed(x0, target)
        if t_hit <= dt:
            return Arc(Governing.SLIDING, t0, t_hit, SlideCurve(flow, x0, target, t_hit)), True
    return Arc(Governing.SLIDING, t0, dt, SlideCurve(flow, x0)), False


def forward_ok(Z, mode, p, tol=None):
    """Whether ``mode`` yields a genuine forward arc from the switching-line point ``p``."""
    tol = Z.tangency_tol if tol is None else tol
    sw = Z.switching
    if mode is Mode.X:
        xf = lie_derivative(Z.upper, sw, p)
        if abs(xf) > tol:
            return xf > 0
        return lie_derivative(Z.upper, sw, p, 2) > tol
    if mode is Mode.Y:
        yf = lie_derivative(Z.lower, sw, p)
        if abs(yf) > tol:
            return yf < 0
        return lie_derivative(Z.lower, sw, p, 2) < -tol
    if mode is Mode.ZT:
        try:
            v = sliding_velocity(Z, p)
        except UndefinedSliding:
            return False
        speed = np.linalg.norm(v)
        if speed <= tol:
            return False
        for h in (1e-7, 1e-5):
            q = project_to_sigma(Z, p + h * v / speed)
            try:
                cls = classify_point(Z, q, on_sigma_tol=1e-6)
            except Exception:
                return False
            if cls not in (RegionClass.SLIDING, RegionClass.ESCAPING):
                return False
        return True
    return False
