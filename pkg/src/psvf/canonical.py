"""Concrete families: Z_k (finite k), Z_inf and the bean field.

For finite ``k`` the fields are ``X_k = (1, P_k'(x))`` and ``Y_k = (-1, P_k'(x))``
with ``P_k(x) = -(x - r0)(x - r1) prod_j (x - p_j)^2``.  The invariant set is the
union of the graphs of ``P_k`` and ``-P_k`` over ``[r0, r1]``; it is cut into
``2(k-1)`` compartments at the fold abscissas ``p_j``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .core import PiecewiseField, Side, SmoothField2D, Y_SWITCH, lie_derivative
from .errors import FamilyMismatch, OffInvariantSet
from .flow import GraphFlow, SlidingFlow

FOLD = None  # compartment_of result at fold points (indices can be negative)
DEFAULT_WINDOW = 64
ON_SET_TOL = 1e-9
SQRT_HALF = math.sqrt(0.5)


# --- the polynomials P_k ------------------------------------------------------

def fold_lattice(k, window=DEFAULT_WINDOW):
    """Roots of ``P_k``: ``{"r0", "r1", "folds"}``; folds only for the infinite family."""
    if k in (None, "inf", math.inf):
        w = int(window)
        return {"r0": None, "r1": None, "folds": [float(j) for j in range(-w, w + 1)]}
    k = int(k)
    if k < 2:
        raise ValueError("k must be at least 2")
    return {"r0": (1 - k) / 2, "r1": (k - 1) / 2, "folds": [j - k / 2 for j in range(1, k)]}


@lru_cache(maxsize=None)
def _factors(k):
    lat = fold_lattice(k)
    roots = [lat["r0"], lat["r1"]]
    for p in lat["folds"]:
        roots += [p, p]
    return tuple(roots)


def poly_Pk(k, x, order=0):
    """``P_k``, ``P_k'`` or ``P_k''`` evaluated from the factored product.

    The product rule is applied factor by factor, so values at the roots are
    exact zeros rather than cancellations of expanded coefficients.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    scalar = np.ndim(x) == 0
    x = float(x) if scalar else np.asarray(x, dtype=float)
    p, p1, p2 = -1.0, 0.0, 0.0
    for a in _factors(k):
        d = x - a
        p2 = p2 * d + 2 * p1
        p1 = p1 * d + p
        p = p * d
    out = (p, p1, p2)[order]
    if scalar:
        return float(out)
    return np.broadcast_to(out, np.shape(x)).astype(float)


def pk_coefficients(k, order=0):
    """Exact coefficients of ``P_k`` (or a derivative), lowest degree first."""
    coeffs = [Fraction(-1)]
    roots = [Fraction(1 - k, 2), Fraction(k - 1, 2)]
    roots += [Fraction(2 * j - k, 2) for j in range(1, k) for _ in range(2)]
    for r in roots:
        nxt = [Fraction(0)] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            nxt[i + 1] += c
            nxt[i] -= r * c
        coeffs = nxt
    for _ in range(order):
        coeffs = [i * c for i, c in enumerate(coeffs)][1:] or [Fraction(0)]
    return coeffs


def poly_to_expr(coeffs):
    terms = []
    for n, c in enumerate(coeffs):
        if c == 0:
            continue
        num = f"({c.numerator}/{c.denominator})" if c.denominator != 1 else f"({c.numerator})"
        terms.append(num if n == 0 else f"{num}*x^{n}")
    return " + ".join(terms) or "0"


def _poly_roots(coeffs_low_first, value):
    """Real solutions of ``P(x) = value`` for a float coefficient list."""
    c = np.array(coeffs_low_first, dtype=float)
    c[0] -= value
    raw = np.roots(c[::-1])
    dc = np.polynomial.polynomial.polyder(c)
    out = []
    for r in raw:
        if abs(r.imag) > 1e-4:
            continue
        x = r.real
        for _ in range(30):
            fx = np.polynomial.polynomial.polyval(x, c)
            dfx = np.polynomial.polynomial.polyval(x, dc)
            if dfx == 0:
                break
            step = fx / dfx
            x -= step
            if abs(step) < 1e-16:
                break
        if abs(np.polynomial.polynomial.polyval(x, c)) <= 1e-10:
            out.append(x)
    return np.unique(np.round(np.array(out), 13)) if out else np.array([])


# --- invariant sets and compartments ------------------------------------------

@dataclass(frozen=True)
class InvariantSet:
    """Region between ``lower(x)`` and ``upper(x)``; for Z_k only the two curves themselves."""

    upper: Callable
    lower: Callable
    domain: Optional[tuple]
    kind: str

    def contains(self, p, tol=ON_SET_TOL):
        x, y = float(p[0]), float(p[1])
        if self.domain is not None and not (self.domain[0] - tol <= x <= self.domain[1] + tol):
            return False
        if self.kind == "bean":
            return self.lower(x) - tol <= y <= self.upper(x) + tol
        return abs(y - self.upper(x)) <= tol or abs(y - self.lower(x)) <= tol


@dataclass(frozen=True)
class Compartment:
    """One arc ``I_n``: the orbit leaves fold ``start`` with ``choice`` and reaches fold ``end``."""

    index: int
    sides: tuple
    interval: tuple
    start: float
    choice: str
    end: float
    representative: tuple

    def as_dict(self):
        return {"index": self.index, "sides": [s.value for s in self.sides],
                "interval": list(self.interval), "start_fold": self.start,
                "choice": self.choice, "end_fold": self.end}


@dataclass(frozen=True)
class CompartmentPartition:
    arcs: tuple

    def __len__(self):
        return len(self.arcs)

    def __getitem__(self, n):
        for c in self.arcs:
            if c.index == n:
                return c
        raise KeyError(n)


@dataclass(frozen=True)
class Section:
    """``K = {0} x (0, 1]``: open at the bottom (the two-fold), closed at the top."""

    x: float = 0.0
    y_max: float = 1.0

    def contains(self, p, tol=1e-9):
        return abs(p[0] - self.x) <= tol and tol < p[1] <= self.y_max + tol


@dataclass(frozen=True, eq=False)
class CanonicalFamily:
    kind: str
    field: PiecewiseField
    k: Optional[int] = None
    window: int = DEFAULT_WINDOW
    extras: dict = dc_field(default_factory=dict)

    @property
    def name(self):
        return {"finite": f"k{self.k}", "infinite": "inf", "bean": "bean"}[self.kind]

    @property
    def alphabet(self):
        """Number of symbols, ``None`` for the integer alphabet, ``"real"`` for the bean."""
        if self.kind == "finite":
            return 2 * (self.k - 1)
        return None if self.kind == "infinite" else "real"

    @property
    def height(self):
        return self.extras["height"]


def _finite(k):
    coeffs = pk_coefficients(k)
    d1 = pk_coefficients(k, 1)
    fcoef = [float(c) for c in coeffs]
    lat = fold_lattice(k)
    exact = np.array(sorted([lat["r0"], lat["r1"], *lat["folds"]]))

    def height(x):
        return poly_Pk(k, x)

    def dp(x):
        return poly_Pk(k, x, 1)

    def upper_roots(c):
        # P(x) + c = 0
        return exact if c == 0.0 else _poly_roots(fcoef, -c)

    def lower_roots(c):
        # -P(x) + c = 0
        return exact if c == 0.0 else _poly_roots(fcoef, c)

    jac = lambda x, y: ((0.0, 0.0), (poly_Pk(k, x, 2), 0.0))  # noqa: E731
    fy_src = poly_to_expr(d1)
    upper = SmoothField2D(lambda x, y: 1.0, lambda x, y: dp(x), Side.UPPER, jac,
                          GraphFlow(1.0, height, upper_roots), {"fx": "1", "fy": fy_src})
    lower = SmoothField2D(lambda x, y: -1.0, lambda x, y: dp(x), Side.LOWER, jac,
                          GraphFlow(-1.0, lambda x: -height(x), lower_roots),
                          {"fx": "-1", "fy": fy_src})
    Z = PiecewiseField(upper, lower, Y_SWITCH, name=f"k{k}",
                       meta={"window": [lat["r0"] - 0.25, lat["r1"] + 0.25]})
    return CanonicalFamily("finite", Z, k=k, extras={"height": height})


def _infinite(window):
    two_pi = 2 * math.pi

    def height(x):
        return (1 - np.cos(two_pi * np.asarray(x, dtype=float))) / math.pi

    def roots_near(value):
        # solutions of (1 - cos 2 pi x)/pi = value over the materialized window
        if value == 0.0:
            return np.arange(-window - 2, window + 3, dtype=float)
        cosv = 1 - math.pi * value
        if abs(cosv) > 1:
            return np.array([])
        theta = math.acos(cosv) / two_pi
        n = np.arange(-window - 2, window + 3, dtype=float)
        return np.sort(np.concatenate([n - theta, n + theta]))

    def fy(x, y):
        return 2 * math.sin(two_pi * x)

    jac = lambda x, y: ((0.0, 0.0), (2 * two_pi * math.cos(two_pi * x), 0.0))  # noqa: E731
    upper = SmoothField2D(lambda x, y: 1.0, fy, Side.UPPER, jac,
                          GraphFlow(1.0, height, lambda c: roots_near(-c)),
                          {"fx": "1", "fy": "2*sin(2*pi*x)"})
    lower = SmoothField2D(lambda x, y: -1.0, fy, Side.LOWER, jac,
                          GraphFlow(-1.0, lambda x: -height(x), lambda c: roots_near(c)),
                          {"fx": "-1", "fy": "2*sin(2*pi*x)"})
    Z = PiecewiseField(upper, lower, Y_SWITCH, name="inf", meta={"window": [-3.25, 3.25]})
    return CanonicalFamily("infinite", Z, window=window, extras={"height": height})


def bean_sliding_velocity(x):
    return -(1 + 2 * x * x) / (2 * (1 - x * x))


def _bean_G(x):
    # antiderivative of -1/v on (-1, 1); strictly increasing there
    return -x + 3 / math.sqrt(2) * math.atan(math.sqrt(2) * x)


def _bean_elapsed(xa, xb):
    return _bean_G(xa) - _bean_G(xb)


def _bean_position(xa, tau):
    target = _bean_G(xa) - tau
    lo = -1 + 1e-12
    if _bean_G(lo) > target:
        raise ValueError("sliding time exceeds the bean's sliding segment")
    return brentq(lambda x: _bean_G(x) - target, lo, xa, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _bean():
    def up_h(x):
        return -np.asarray(x, dtype=float) ** 2 if np.ndim(x) else -float(x) ** 2

    def low_h(x):
        x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
        return x**4 / 2 - x**2 / 2

    def up_roots(c):
        # c - x^2 = 0
        if c == 0.0:
            return np.array([0.0])
        return np.array([-math.sqrt(c), math.sqrt(c)]) if c > 0 else np.array([])

    def low_roots(c):
        # x^4 - x^2 + 2c = 0
        if c == 0.0:
            return np.array([-1.0, 0.0, 1.0])
        disc = 1 - 8 * c
        if disc < 0:
            return np.array([])
        out = []
        for s2 in ((1 + math.sqrt(disc)) / 2, (1 - math.sqrt(disc)) / 2):
            if s2 >= 0:
                out += [-math.sqrt(s2), math.sqrt(s2)]
        return np.array(sorted(set(out)))

    upper = SmoothField2D(lambda x, y: 1.0, lambda x, y: -2.0 * x, Side.UPPER,
                          lambda x, y: ((0.0, 0.0), (-2.0, 0.0)),
                          GraphFlow(1.0, up_h, up_roots), {"fx": "1", "fy": "-2*x"})
    lower = SmoothField2D(lambda x, y: -2.0, lambda x, y: -4.0 * x**3 + 2.0 * x, Side.LOWER,
                          lambda x, y: ((0.0, 0.0), (-12.0 * x * x + 2.0, 0.0)),
                          GraphFlow(-2.0, low_h, low_roots),
                          {"fx": "-2", "fy": "-4*x^3 + 2*x"})
    slide = SlidingFlow(bean_sliding_velocity, _bean_elapsed, _bean_position,
                        (-SQRT_HALF, 0.0, SQRT_HALF))
    Z = PiecewiseField(upper, lower, Y_SWITCH, name="bean", sliding=slide,
                       meta={"window": [-1.25, 1.25]})
    return CanonicalFamily("bean", Z, extras={"height": None, "section": Section()})


def make_canonical(kind, window=DEFAULT_WINDOW):
    """Build a family from ``"k2"``, ``"k3"``, ..., an integer ``k``, ``"inf"`` or ``"bean"``.

    Families are immutable, so each distinct request is built once and shared.
    """
    if isinstance(kind, CanonicalFamily):
        return kind
    if isinstance(kind, (int, np.integer)):
        return _build(f"k{int(kind)}", int(window))
    return _build(str(kind).strip().lower(), int(window))


@lru_cache(maxsize=64)
def _build(s, window):
    if s in ("inf", "infinite", "kinf"):
        return _infinite(window)
    if s in ("bean", "z"):
        return _bean()
    if s.startswith("k") and s[1:].isdigit():
        return _finite(int(s[1:]))
    if s.isdigit():
        return _finite(int(s))
    raise ValueError(f"unknown family {s!r}; use k2, k3, ..., inf or bean")


def invariant_set(family):
    fam = make_canonical(family)
    if fam.kind == "bean":
        return InvariantSet(lambda x: 1 - x * x, lambda x: x**4 / 2 - x * x / 2, (-1.0, 1.0), "bean")
    h = fam.height
    dom = None
    if fam.kind == "finite":
        lat = fold_lattice(fam.k)
        dom = (lat["r0"], lat["r1"])
    return InvariantSet(h, lambda x: -h(x), dom, fam.kind)


def compartments(family, j_range=None):
    """The arcs ``I_n``.  For the infinite family ``j_range`` limits the listed cells."""
    fam = make_canonical(family)
    if fam.kind == "bean":
        return CompartmentPartition(())
    h = fam.height
    U, L = Side.UPPER, Side.LOWER
    arcs = []
    if fam.kind == "finite":
        k = fam.k
        lat = fold_lattice(k)
        r0, r1, p = lat["r0"], lat["r1"], lat["folds"]
        xm = (r0 + p[0]) / 2
        arcs.append(Compartment(0, (L, U), (r0, p[0]), p[0], "Y", p[0], (xm, -h(xm))))
        for j in range(1, k - 1):
            a, b = p[j - 1], p[j]
            xm = (a + b) / 2
            arcs.append(Compartment(2 * j - 1, (U,), (a, b), a, "X", b, (xm, h(xm))))
            arcs.append(Compartment(2 * j, (L,), (a, b), b, "Y", a, (xm, -h(xm))))
        xm = (p[-1] + r1) / 2
        arcs.append(Compartment(2 * k - 3, (U, L), (p[-1], r1), p[-1], "X", p[-1], (xm, h(xm))))
    else:
        lo, hi = j_range if j_range is not None else (-fam.window, fam.window)
        for j in range(lo, hi):
            xm = j + 0.5
            arcs.append(Compartment(2 * j, (U,), (j, j + 1), j, "X", j + 1, (xm, h(xm))))
            arcs.append(Compartment(2 * j + 1, (L,), (j, j + 1), j + 1, "Y", j, (xm, -h(xm))))
    return CompartmentPartition(tuple(arcs))


def is_fold_point(Z, p, f_tol=1e-12, xf_tol=1e-9):
    return abs(Z.switching(p)) <= f_tol and abs(lie_derivative(Z.upper, Z.switching, p)) <= xf_tol


def compartment_of(family, p, tol=ON_SET_TOL):
    """Index ``n`` with ``p`` in ``I_n``; ``FOLD`` at fold points.

    Raises :class:`OffInvariantSet` when ``p`` is not on the invariant curves.
    """
    fam = make_canonical(family)
    if fam.kind == "bean":
        raise FamilyMismatch("the bean field has no compartments; use section hits")
    x, y = float(p[0]), float(p[1])
    h = fam.height
    hx = float(h(x))
    if abs(y - hx) > tol and abs(y + hx) > tol:
        raise OffInvariantSet(f"({x:.6g}, {y:.6g}) is not on the invariant curves")
    if is_fold_point(fam.field, np.array([x, y])):
        return FOLD
    if fam.kind == "infinite":
        n = math.floor(x)
        return 2 * n if y >= 0 else 2 * n + 1
    k = fam.k
    lat = fold_lattice(k)
    r0, r1, folds = lat["r0"], lat["r1"], lat["folds"]
    if x < r0 - tol or x > r1 + tol:
        raise OffInvariantSet(f"x = {x:.6g} lies outside [{r0}, {r1}]")
    if x < folds[0]:
        return 0
    if x > folds[-1]:
        return 2 * k - 3
    j = min(int(math.floor(x - folds[0])) + 1, k - 2)
    return 2 * j - 1 if y > 0 else 2 * j
