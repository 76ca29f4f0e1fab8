"""Deterministic SVG phase portraits.

The picture shows the switching line colored by region, the invariant set
(or a few sampled orbits for user fields) and tangency markers: the upper
half of a marker is filled when the fold is visible for X, the lower half
when it is visible for Y, and a half is hollow for an invisible fold.
"""

from __future__ import annotations

import numpy as np

from . import __version__
from .core import RegionClass, classify_fold, classify_point
from .errors import PSVFError

WIDTH, HEIGHT, MARGIN = 640, 480, 40
REGION_COLORS = {
    RegionClass.CROSSING_POS: "#9e9e9e",
    RegionClass.CROSSING_NEG: "#616161",
    RegionClass.SLIDING: "#1f77b4",
    RegionClass.ESCAPING: "#ff7f0e",
}


class _Frame:
    def __init__(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        sx = (WIDTH - 2 * MARGIN) / (xlim[1] - xlim[0])
        sy = (HEIGHT - 2 * MARGIN) / (ylim[1] - ylim[0])
        self.s = min(sx, sy)

    def __call__(self, x, y):
        cx = WIDTH / 2 + (x - sum(self.xlim) / 2) * self.s
        cy = HEIGHT / 2 - (y - sum(self.ylim) / 2) * self.s
        return f"{cx:.2f},{cy:.2f}"

    def xy(self, x, y):
        return tuple(float(v) for v in self(x, y).split(","))


def _polyline(frame, pts, color, width=1.5, dash=None):
    coords = " ".join(frame(x, y) for x, y in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{extra}/>')


def _marker(frame, p, fold, r=5.0):
    cx, cy = frame.xy(p[0], p[1])
    parts = []
    for vis, sweep, color in ((fold.upper, 1, "#d62728"), (fold.lower, 0, "#2ca02c")):
        fill = color if (vis is not None and vis.value == "visible") else "white"
        stroke = color if vis is not None else "#bbbbbb"
        parts.append(f'<path d="M {cx - r:.2f},{cy:.2f} A {r},{r} 0 0 {sweep} {cx + r:.2f},{cy:.2f} Z" '
                     f'fill="{fill}" stroke="{stroke}" stroke-width="1"/>')
    return "\n".join(parts)


def _sigma_segments(Z, xs):
    segs, cur, cls_prev = [], [], None
    for x in xs:
        try:
            cls = classify_point(Z, np.array([x, 0.0]))
        except PSVFError:
            cls = None
        if cls is not None and cls.is_tangency:
            cls = cls_prev
        if cls != cls_prev and cur:
            segs.append((cls_prev, cur))
            cur = [cur[-1]]
        cur.append(x)
        cls_prev = cls
    if cur:
        segs.append((cls_prev, cur))
    return segs


def render_svg(Z, curves=(), xlim=None, ylim=None, tangencies=(), title=""):
    """SVG text for ``Z`` with the given ``curves`` (lists of points) and tangency abscissas."""
    xlim = xlim or tuple(Z.meta.get("window", (-2.0, 2.0)))
    if ylim is None:
        ys = [p[1] for c in curves for p in c] or [-1.0, 1.0]
        lo, hi = min(ys), max(ys)
        pad = 0.1 * max(hi - lo, 1e-3)
        ylim = (lo - pad, hi + pad)
    frame = _Frame(xlim, ylim)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- generator: psvf {__version__} -->",
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN}" y="{MARGIN / 2:.0f}" font-family="sans-serif" '
                   f'font-size="14">{title}</text>')
    xs = np.linspace(xlim[0], xlim[1], 801)
    if Z.switching.is_y:
        for cls, seg in _sigma_segments(Z, xs):
            color = REGION_COLORS.get(cls, "#000000")
            width = 3.0 if cls in (RegionClass.SLIDING, RegionClass.ESCAPING) else 1.5
            out.append(_polyline(frame, [(x, 0.0) for x in seg], color, width))
    for c in curves:
        out.append(_polyline(frame, c, "#222222", 1.2))
    for x in tangencies:
        p = np.array([x, 0.0])
        try:
            fold = classify_fold(Z, p)
        except PSVFError:
            continue
        out.append(_marker(frame, p, fold))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def family_portrait(family):
    """Portrait of a canonical family with its invariant set drawn in full."""
    from .canonical import fold_lattice, invariant_set, make_canonical
    from .equivalence import tangencies

    fam = make_canonical(family)
    Z = fam.field
    inv = invariant_set(fam)
    if fam.kind == "infinite":
        a, b = -3.0, 3.0
    else:
        a, b = inv.domain
    xs = np.linspace(a, b, 601)
    curves = [list(zip(xs, inv.upper(xs))), list(zip(xs, inv.lower(xs)))]
    if fam.kind == "bean":
        tans = tangencies(Z, (-1.0, 1.0))
    elif fam.kind == "finite":
        tans = fold_lattice(fam.k)["folds"]
    else:
        tans = [float(j) for j in range(-3, 4)]
    w = Z.meta["window"]
    return render_svg(Z, curves, xlim=(w[0], w[1]), tangencies=tans, title=fam.name)


def field_portrait(Z, horizon=4.0, n_orbits=9):
    """Portrait of a user field: orbits started on a small grid above and below the line."""
    from .equivalence import tangencies
    from .trajectory import simulate

    a, b = Z.meta.get("window", (-2.0, 2.0))
    curves = []
    for x in np.linspace(a, b, n_orbits):
        for y in (0.25, -0.25):
            try:
                g = simulate(Z, (x, y), horizon)
            except PSVFError:
                continue
            pts = g.sample(per_arc=64)
            keep = (pts[:, 0] >= a - 1) & (pts[:, 0] <= b + 1) & (np.abs(pts[:, 1]) < 5)
            if keep.sum() > 1:
                curves.append([tuple(p) for p in pts[keep]])
    return render_svg(Z, curves, xlim=(a, b), tangencies=tangencies(Z, (a, b)), title=Z.name)
