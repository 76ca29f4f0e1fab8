"""Planar piecewise smooth vector fields and the geometry of their switching line.

A :class:`PiecewiseField` pairs an upper field ``X`` (active where ``f >= 0``)
with a lower field ``Y`` (active where ``f <= 0``).  Points of ``f = 0`` are
classified by the signs of the Lie derivatives ``Xf`` and ``Yf``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from .errors import (
    DegenerateTangency,
    NotATangency,
    NotOnSwitchingManifold,
    UndefinedSliding,
)
from .expr import Expression

ON_SIGMA_TOL = 1e-9
TANGENCY_TOL = 1e-9
FD_STEP = 1e-6
# second differences lose accuracy much faster than first ones
FD_STEP_2 = 1e-4


class Side(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


class RegionClass(str, Enum):
    CROSSING_POS = "CrossingPos"
    CROSSING_NEG = "CrossingNeg"
    SLIDING = "Sliding"
    ESCAPING = "Escaping"
    TANGENCY_REGULAR = "TangencyRegular"
    TANGENCY_SINGULAR = "TangencySingular"

    @property
    def is_tangency(self):
        return self in (RegionClass.TANGENCY_REGULAR, RegionClass.TANGENCY_SINGULAR)


class Visibility(str, Enum):
    VISIBLE = "visible"
    INVISIBLE = "invisible"


@dataclass(frozen=True)
class FoldClass:
    """Fold data at a tangency: visibility per field, ``None`` where the field is transversal."""

    upper: Optional[Visibility]
    lower: Optional[Visibility]

    @property
    def is_two_fold(self):
        return self.upper is not None and self.lower is not None

    @property
    def field(self):
        if self.is_two_fold:
            return None
        return Side.UPPER if self.upper is not None else Side.LOWER

    @property
    def visibility(self):
        return self.upper if self.upper is not None else self.lower

    @property
    def two_fold(self):
        """Pairing label such as ``"invisible-visible"`` (upper field first)."""
        if not self.is_two_fold:
            return None
        return f"{self.upper.value}-{self.lower.value}"

    def as_dict(self):
        return {
            "upper": self.upper.value if self.upper else None,
            "lower": self.lower.value if self.lower else None,
            "two_fold": self.two_fold,
        }


def _as_point(p):
    p = np.asarray(p, dtype=float)
    if p.shape != (2,):
        raise ValueError(f"expected a planar point, got shape {p.shape}")
    return p


@dataclass(frozen=True, eq=False)
class SmoothField2D:
    """A smooth planar vector field ``(fx, fy)``.

    ``jacobian`` returns ``[[dfx/dx, dfx/dy], [dfy/dx, dfy/dy]]``; when it is
    omitted, central differences with step ``FD_STEP`` are used.  ``flow`` is
    an optional closed-form integrator (see :mod:`psvf.flow`).
    """

    fx: Callable
    fy: Callable
    label: Side = Side.UPPER
    jacobian: Optional[Callable] = None
    flow: Any = None
    source: Optional[dict] = None

    def __call__(self, p):
        x, y = _as_point(p)
        return np.array([self.fx(x, y), self.fy(x, y)], dtype=float)

    def jac(self, p):
        x, y = _as_point(p)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x, y), dtype=float)
        h = FD_STEP
        ddx = (self(np.array([x + h, y])) - self(np.array([x - h, y]))) / (2 * h)
        ddy = (self(np.array([x, y + h])) - self(np.array([x, y - h]))) / (2 * h)
        return np.column_stack([ddx, ddy])


@dataclass(frozen=True, eq=False)
class SwitchingFunction:
    """Scalar function whose zero set is the switching line."""

    f: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    source: Optional[str] = None

    def __call__(self, p):
        x, y = _as_point(p)
        return float(self.f(x, y))

    def grad(self, p):
        x, y = _as_point(p)
        if self.gradient is not None:
            return np.asarray(self.gradient(x, y), dtype=float)
        h = FD_STEP
        return np.array([
            (self.f(x + h, y) - self.f(x - h, y)) / (2 * h),
            (self.f(x, y + h) - self.f(x, y - h)) / (2 * h),
        ])

    def hess(self, p):
        x, y = _as_point(p)
        if self.hessian is not None:
            return np.asarray(self.hessian(x, y), dtype=float)
        h = FD_STEP_2
        f = self.f
        fxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / h**2
        fyy = (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / h**2
        fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
        return np.array([[fxx, fxy], [fxy, fyy]])

    def is_regular_at(self, points, tol=1e-12):
        """True when the gradient is nonzero at every given point of the zero set."""
        return all(np.linalg.norm(self.grad(p)) > tol for p in points)

    @property
    def is_y(self):
        return self.source == "y"


def _y(x, y):
    return y


Y_SWITCH = SwitchingFunction(
    f=_y,
    gradient=lambda x, y: (0.0, 1.0),
    hessian=lambda x, y: ((0.0, 0.0), (0.0, 0.0)),
    source="y",
)


@dataclass(frozen=True, eq=False)
class PiecewiseField:
    upper: SmoothField2D
    lower: SmoothField2D
    switching: SwitchingFunction = Y_SWITCH
    name: str = ""
    sliding: Any = None
    on_sigma_tol: float = ON_SIGMA_TOL
    tangency_tol: float = TANGENCY_TOL
    meta: dict = dc_field(default_factory=dict)

    def __call__(self, p):
        """Z(p): X above the switching line, Y below; X on the line itself."""
        return self.upper(p) if self.switching(p) >= 0 else self.lower(p)

    def side(self, which):
        return self.upper if Side(which) is Side.UPPER else self.lower

    def on_sigma(self, p, tol=None):
        return abs(self.switching(p)) <= (self.on_sigma_tol if tol is None else tol)


def lie_derivative(field, f, p, order=1):
    """``Xf(p)`` for order 1 and ``X^2 f(p) = <grad(Xf)(p), X(p)>`` for order 2."""
    p = _as_point(p)
    v = field(p)
    g = f.grad(p)
    if order == 1:
        return float(g @ v)
    if order == 2:
        # grad(Xf) = H_f X + J_X^T grad f
        return float(v @ f.hess(p) @ v + g @ (field.jac(p) @ v))
    raise ValueError("order must be 1 or 2")


def _visibility(second, side, tol):
    if abs(second) <= tol:
        return None
    positive = second > 0
    # lower field lives in f <= 0: its tangent orbit stays on its own side when Y^2 f < 0
    visible = positive if side is Side.UPPER else not positive
    return Visibility.VISIBLE if visible else Visibility.INVISIBLE


def classify_point(Z, p, on_sigma_tol=None, tangency_tol=None):
    p = _as_point(p)
    on_tol = Z.on_sigma_tol if on_sigma_tol is None else on_sigma_tol
    tan_tol = Z.tangency_tol if tangency_tol is None else tangency_tol
    fp = Z.switching(p)
    if abs(fp) > on_tol:
        raise NotOnSwitchingManifold(f"|f(p)| = {abs(fp):.3g} exceeds {on_tol:g}")
    xf = lie_derivative(Z.upper, Z.switching, p)
    yf = lie_derivative(Z.lower, Z.switching, p)
    x_tan = abs(xf) <= tan_tol
    y_tan = abs(yf) <= tan_tol
    if x_tan or y_tan:
        if x_tan and y_tan:
            xv = _visibility(lie_derivative(Z.upper, Z.switching, p, 2), Side.UPPER, tan_tol)
            yv = _visibility(lie_derivative(Z.lower, Z.switching, p, 2), Side.LOWER, tan_tol)
            if xv is Visibility.INVISIBLE and yv is Visibility.INVISIBLE:
                return RegionClass.TANGENCY_SINGULAR
        return RegionClass.TANGENCY_REGULAR
    if xf > 0 and yf > 0:
        return RegionClass.CROSSING_POS
    if xf < 0 and yf < 0:
        return RegionClass.CROSSING_NEG
    if xf < 0 < yf:
        return RegionClass.SLIDING
    return RegionClass.ESCAPING


def classify_fold(Z, p, tangency_tol=None):
    p = _as_point(p)
    tol = Z.tangency_tol if tangency_tol is None else tangency_tol
    data = {}
    for side, fld in ((Side.UPPER, Z.upper), (Side.LOWER, Z.lower)):
        if abs(lie_derivative(fld, Z.switching, p)) > tol:
            data[side] = None
            continue
        second = lie_derivative(fld, Z.switching, p, 2)
        vis = _visibility(second, side, tol)
        if vis is None:
            raise DegenerateTangency(f"{side.value} field has second Lie derivative {second:.3g} at {tuple(p)}")
        data[side] = vis
    if data[Side.UPPER] is None and data[Side.LOWER] is None:
        raise NotATangency(f"neither field is tangent at {tuple(p)}")
    return FoldClass(upper=data[Side.UPPER], lower=data[Side.LOWER])


def sliding_field(Z, p, tol=None):
    """Filippov sliding vector ``(Yf X - Xf Y) / (Yf - Xf)`` at ``p``."""
    p = _as_point(p)
    tol = Z.tangency_tol if tol is None else tol
    xf = lie_derivative(Z.upper, Z.switching, p)
    yf = lie_derivative(Z.lower, Z.switching, p)
    if abs(yf - xf) <= tol:
        raise UndefinedSliding(f"Yf - Xf = {yf - xf:.3g} vanishes at {tuple(p)}")
    if xf * yf > tol * tol and not (abs(xf) <= tol or abs(yf) <= tol):
        raise UndefinedSliding(f"{tuple(p)} is a crossing point")
    return (yf * Z.upper(p) - xf * Z.lower(p)) / (yf - xf)


# --- JSON field documents -------------------------------------------------

def _expr_field(doc, label):
    fx = Expression(doc["fx"])
    fy = Expression(doc["fy"])
    return SmoothField2D(fx=fx, fy=fy, label=label, source={"fx": fx.source, "fy": fy.source})


def field_from_dict(doc, name=""):
    """Build a field from ``{"upper": {"fx", "fy"}, "lower": {...}, "switching": expr}``."""
    try:
        upper = _expr_field(doc["upper"], Side.UPPER)
        lower = _expr_field(doc["lower"], Side.LOWER)
        sw_src = str(doc.get("switching", "y"))
    except KeyError as exc:
        raise ValueError(f"field document is missing {exc}") from None
    if sw_src.replace(" ", "") == "y":
        switching = Y_SWITCH
    else:
        switching = SwitchingFunction(f=Expression(sw_src), source=sw_src)
    meta = {k: v for k, v in doc.items() if k not in ("upper", "lower", "switching")}
    return PiecewiseField(upper=upper, lower=lower, switching=switching,
                          name=name or str(doc.get("name", "")), meta=meta)


def load_field(path):
    with open(path) as fh:
        return field_from_dict(json.load(fh))


def field_to_dict(Z):
    if Z.upper.source is None or Z.lower.source is None:
        raise ValueError(f"field {Z.name!r} has no expression source")
    doc = {"upper": dict(Z.upper.source), "lower": dict(Z.lower.source),
           "switching": Z.switching.source or "y"}
    if Z.name:
        doc["name"] = Z.name
    doc.update(Z.meta)
    return doc
