"""Distances between orbits and numerical conjugacy checks.

Orbits are compared arc by arc: ``rho`` weighs the Hausdorff distance of the
``i``-th unit-time pieces (or, for the bean field, of the ``i``-th loops
between section hits) by ``2^-|i|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from .canonical import invariant_set, make_canonical
from .errors import DegenerateCurve, EmptyCurve, FamilyMismatch, InadmissibleWord
from .symbolic import (
    MetricBound,
    SymbolWindow,
    metric_d,
    sft_matrix,
    shift,
)

PER_ARC = 512
_CHUNK = 256


# --- Hausdorff distance ----------------------------------------------------------

def _as_samples(A):
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        raise EmptyCurve("curve sample is empty")
    return A.reshape(-1, 2)


def _point_cloud_directed(A, B):
    worst = 0.0
    for i in range(0, len(A), _CHUNK):
        d = np.linalg.norm(A[i:i + _CHUNK, None, :] - B[None, :, :], axis=-1)
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def _polyline_directed(A, B):
    """``max_a min_segment dist(a, segment)`` over vertices ``a`` of ``A`` and segments of ``B``."""
    if len(B) == 1:
        return _point_cloud_directed(A, B)
    P, Q = B[:-1], B[1:]
    D = Q - P
    L2 = np.einsum("ij,ij->i", D, D)
    safe = np.where(L2 > 0, L2, 1.0)
    worst = 0.0
    for i in range(0, len(A), _CHUNK):
        a = A[i:i + _CHUNK, None, :]
        t = np.einsum("nmj,mj->nm", a - P[None], D) / safe
        t = np.where(L2 > 0, np.clip(t, 0.0, 1.0), 0.0)
        proj = P[None] + t[..., None] * D[None]
        d = np.linalg.norm(a - proj, axis=-1)
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def hausdorff(A, B, mode="polyline"):
    """Hausdorff distance between two sampled curves (``"polyline"``) or point sets (``"points"``)."""
    A, B = _as_samples(A), _as_samples(B)
    if A.shape == B.shape and np.array_equal(A, B):
        return 0.0
    directed = _polyline_directed if mode == "polyline" else _point_cloud_directed
    return max(directed(A, B), directed(B, A))


# --- orbit classes ------------------------------------------------------------------

@dataclass(frozen=True)
class RealWindow:
    """Beat heights ``values[i]`` at beat indices ``offset + i``; every entry lies in (0, 1]."""

    offset: int
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(not (0 < v <= 1 + 1e-12) for v in vals):
            raise ValueError("beat heights must lie in (0, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def first(self):
        return self.offset

    @property
    def last(self):
        return self.offset + len(self.values) - 1

    def __getitem__(self, j):
        return self.values[j - self.offset]


def real_distance(w1, w2):
    """``sum_j |y_j - y'_j| / 2^|j|`` over the shared beats; unseen terms are at most 1 each."""
    a, b = max(w1.first, w2.first), min(w1.last, w2.last)
    value = sum(abs(w1[j] - w2[j]) * 2.0 ** (-abs(j)) for j in range(a, b + 1))
    seen = sum(2.0 ** (-abs(j)) for j in range(a, b + 1))
    return MetricBound(float(value), max(3.0 - seen, 0.0))


@dataclass(frozen=True, eq=False)
class OrbitClass:
    """A normalized representative (anchored at a fold or section hit) and its itinerary."""

    family: str
    representative: object
    itinerary: object
    anchor_time: float = 0.0

    def same_class(self, other):
        return self.family == other.family and self.itinerary == other.itinerary


def normalize(family, gamma):
    """Re-anchor ``gamma`` at its latest fold (or section) hit at time ``<= 0``."""
    from .trajectory import beat_times, fold_hit_times, itinerary

    fam = make_canonical(family)
    if fam.kind == "bean":
        beats = beat_times(gamma)
        t0 = beats[0]
        rep = gamma.shift(t0)
        bt = beat_times(rep)
        vals = {j: float(rep.at(t)[1]) for j, t in bt.items()}
        js = sorted(vals)
        return OrbitClass(fam.name, rep, RealWindow(js[0], tuple(vals[j] for j in js)), t0)
    hits = [t for t in fold_hit_times(fam, gamma) if t <= 1e-9]
    if not hits:
        raise ValueError("no fold hit at or before time 0")
    t0 = hits[-1]
    rep = gamma.shift(t0) if t0 != 0 else gamma
    a = math.ceil(rep.t_start - 1e-9)
    b = math.floor(rep.t_end - 0.5 + 1e-9)
    return OrbitClass(fam.name, rep, itinerary(fam, rep, (a, b)), t0)


@lru_cache(maxsize=None)
def diameter(family):
    """Diameter of the (bounded) invariant set, slightly overestimated for safety."""
    fam = make_canonical(family)
    if fam.kind == "infinite":
        raise ValueError("the infinite family is unbounded")
    inv = invariant_set(fam)
    a, b = inv.domain
    xs = np.linspace(a, b, 4001)
    pts = np.vstack([np.column_stack([xs, inv.upper(xs)]), np.column_stack([xs, inv.lower(xs)])])
    hull = pts[ConvexHull(pts).vertices]
    step = float(np.max(np.linalg.norm(np.diff(pts[:4001], axis=0), axis=1)))
    return float(pdist(hull).max()) + step


def _pieces(family, o, N):
    """Time intervals of the ``i``-th pieces, ``|i| <= N``."""
    from .trajectory import beat_times

    fam = make_canonical(family)
    gamma = o.representative if isinstance(o, OrbitClass) else o
    if fam.kind == "bean":
        bt = beat_times(gamma)
        missing = [i for i in range(-N, N + 2) if i not in bt]
        if missing:
            raise ValueError(f"beats {missing} are outside the representative")
        return gamma, {i: (bt[i], bt[i + 1]) for i in range(-N, N + 1)}
    if gamma.t_start > -N + 1e-9 or gamma.t_end < N + 1 - 1e-9:
        raise ValueError(f"representative must cover [{-N}, {N + 1}]")
    return gamma, {i: (float(i), float(i + 1)) for i in range(-N, N + 1)}


def rho_terms(family, o1, o2, N, per_arc=PER_ARC):
    fam = make_canonical(family)
    for o in (o1, o2):
        if isinstance(o, OrbitClass) and o.family != fam.name:
            raise FamilyMismatch(f"orbit of {o.family} compared inside {fam.name}")
    g1, iv1 = _pieces(fam, o1, N)
    g2, iv2 = _pieces(fam, o2, N)
    return {i: hausdorff(g1.sample(*iv1[i], per_arc=per_arc), g2.sample(*iv2[i], per_arc=per_arc))
            for i in range(-N, N + 1)}


def rho(o1, o2, N, family=None, per_arc=PER_ARC):
    """``sum_{|i| <= N} d_i / 2^|i|`` with a bound on the omitted terms."""
    if family is None:
        if not (isinstance(o1, OrbitClass) and isinstance(o2, OrbitClass)):
            raise ValueError("pass family= when comparing bare trajectories")
        if o1.family != o2.family:
            raise FamilyMismatch(f"{o1.family} vs {o2.family}")
        family = o1.family
    fam = make_canonical(family)
    d = rho_terms(fam, o1, o2, N, per_arc)
    value = sum(d[i] * 2.0 ** (-abs(i)) for i in sorted(d, key=lambda i: (abs(i), i)))
    if fam.kind == "infinite":
        # d_i <= d_N + 4 sqrt(5) (|i| - N) beyond the window, on each side
        c = 8 * math.sqrt(5)
        tail = 2.0 ** (-N) * (d[N] + c) + 2.0 ** (-N) * (d[-N] + c)
    else:
        tail = diameter(fam.name) / 2.0 ** (N - 1)
    return MetricBound(float(value), float(tail))


# --- arc-length homeomorphism ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ArcLengthMap:
    """``h`` sends the point of ``A`` at normalized arc length ``s`` to the point of ``B`` at ``s``."""

    A: np.ndarray
    B: np.ndarray
    sA: np.ndarray
    sB: np.ndarray

    def param_of(self, p):
        """Normalized arc length of the point of ``A`` closest to ``p``."""
        p = np.asarray(p, dtype=float)
        P, Q = self.A[:-1], self.A[1:]
        D = Q - P
        L2 = np.einsum("ij,ij->i", D, D)
        t = np.clip(np.einsum("ij,ij->i", p - P, D) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
        d = np.linalg.norm(P + t[:, None] * D - p, axis=1)
        i = int(np.argmin(d))
        return float(self.sA[i] + t[i] * (self.sA[i + 1] - self.sA[i]))

    def at(self, s):
        s = np.asarray(s, dtype=float)
        x = np.interp(s, self.sB, self.B[:, 0])
        y = np.interp(s, self.sB, self.B[:, 1])
        return np.stack([x, y], axis=-1)

    def __call__(self, p):
        return self.at(self.param_of(p))

    def inverse(self):
        return ArcLengthMap(self.B, self.A, self.sB, self.sA)


def _normalized_length(C):
    seg = np.linalg.norm(np.diff(C, axis=0), axis=1)
    total = float(seg.sum())
    if not total > 0:
        raise DegenerateCurve("curve has zero length")
    s = np.concatenate([[0.0], np.cumsum(seg)]) / total
    s[-1] = 1.0
    return s


def arc_length_homeomorphism(A, B):
    A, B = _as_samples(A), _as_samples(B)
    if len(A) < 2 or len(B) < 2:
        raise DegenerateCurve("need at least two samples per curve")
    return ArcLengthMap(A, B, _normalized_length(A), _normalized_length(B))


# --- conjugacy verification ---------------------------------------------------------------

def _entry(name, passed, checked, tolerance=0.0, counterexample=None, **extra):
    out = {"name": name, "passed": bool(passed), "checked": int(checked), "tolerance": tolerance,
           "counterexample": counterexample}
    out.update(extra)
    return out


def _extend_random(fam, core, offset, left, right, rng):
    """Random admissible word agreeing with ``core`` and padded on both sides."""
    from .trajectory import admissible_successor

    word = list(core)
    alphabet = range(fam.alphabet) if fam.kind == "finite" else None
    for _ in range(right):
        if alphabet is not None:
            nxt = [b for b in alphabet if admissible_successor(fam, word[-1], b)]
        else:
            s = word[-1]
            nxt = [s + 1, s + 2] if s % 2 == 0 else [s - 1, s - 2]
        word.append(int(rng.choice(nxt)))
    for _ in range(left):
        if alphabet is not None:
            prv = [a for a in alphabet if admissible_successor(fam, a, word[0])]
        else:
            s = word[0]
            prv = [c for c in range(s - 3, s + 4) if admissible_successor(fam, c, s)]
        word.insert(0, int(rng.choice(prv)))
    return word, offset - left


def _symbolic_report(fam, samples, depth, rng, per_arc):
    from .trajectory import (
        enumerate_branches,
        itinerary,
        random_word,
        time_one,
        trajectory_from_symbols,
    )

    Z = fam.field
    entries = []

    # (a) s(T1 gamma) = sigma(s(gamma)) on branch-tree leaves and synthesized orbits
    folds = [-0.5 * (fam.k - 2) + j for j in range(fam.k - 1)] if fam.kind == "finite" else [0.0]
    bad, checked = None, 0
    for x in folds:
        tree = enumerate_branches(Z, (x, 0.0), float(depth), max_branches=1 << 16)
        for leaf in tree.leaves:
            it = itinerary(fam, leaf, (0, depth - 1))
            it1 = itinerary(fam, time_one(leaf), (0, depth - 2))
            checked += 1
            if it1 != shift(it, 1).restrict(0, depth - 2) and bad is None:
                bad = {"branch": list(leaf.branch_log), "itinerary": list(it.symbols)}
    entries.append(_entry("shift_identity_branch_leaves", bad is None, checked, counterexample=bad))

    words = [random_word(fam, depth, rng) for _ in range(samples)]
    bad_rt = bad_sh = None
    for w in words:
        win = SymbolWindow(fam.alphabet, -(depth // 2), tuple(w))
        g = trajectory_from_symbols(fam, win)
        it = itinerary(fam, g, (win.first, win.last))
        if it != win and bad_rt is None:
            bad_rt = {"word": w, "itinerary": list(it.symbols)}
        it1 = itinerary(fam, time_one(g), (win.first, win.last - 1))
        if it1 != shift(win, 1).restrict(win.first, win.last - 1) and bad_sh is None:
            bad_sh = {"word": w}
    entries.append(_entry("shift_identity_samples", bad_sh is None, len(words), counterexample=bad_sh))
    # (b) every admissible word is realized by an orbit
    entries.append(_entry("surjectivity_round_trip", bad_rt is None, len(words), counterexample=bad_rt))

    # (b') words are rejected exactly when the transition structure forbids them
    bad_rej, n_rej = None, 0
    if fam.kind == "finite":
        M = sft_matrix(fam)
        cands = [list(rng.integers(fam.alphabet, size=6)) for _ in range(samples)]
    else:
        M = None
        cands = []
        for _ in range(samples):
            w = [int(rng.integers(-4, 4))]
            for _ in range(5):
                w.append(w[-1] + int(rng.integers(-3, 4)))
            cands.append(w)
    for w in cands:
        w = [int(v) for v in w]
        if M is not None:
            ok = all(M.allows(a, b) for a, b in zip(w, w[1:]))
        else:
            ok = all((b - a in (1, 2)) if a % 2 == 0 else (a - b in (1, 2)) for a, b in zip(w, w[1:]))
        try:
            trajectory_from_symbols(fam, SymbolWindow(fam.alphabet, 0, tuple(w)))
            realized = True
        except InadmissibleWord:
            realized = False
        n_rej += 1
        if realized != ok and bad_rej is None:
            bad_rej = {"word": w, "expected_admissible": ok}
    entries.append(_entry("rejection_matches_transitions", bad_rej is None, n_rej,
                          counterexample=bad_rej,
                          matrix=M.as_list() if M is not None else None))

    # (c) orbits whose itineraries share |j| <= N have identical central arcs and close itineraries
    N = max(2, min(depth // 2, 6))
    pad = 2
    bound = (fam.alphabet - 1) / 2.0 ** (N - 1) if fam.kind == "finite" else 1 / 2.0 ** (N - 4)
    bad_c, n_c = None, 0
    for _ in range(max(1, samples // 10)):
        core = random_word(fam, 2 * N + 2, rng)
        w1, off = _extend_random(fam, core, -N, pad, pad, rng)
        w2, _ = _extend_random(fam, core, -N, pad, pad, rng)
        g1 = trajectory_from_symbols(fam, SymbolWindow(fam.alphabet, off, tuple(w1)))
        g2 = trajectory_from_symbols(fam, SymbolWindow(fam.alphabet, off, tuple(w2)))
        r = rho(g1, g2, N, family=fam, per_arc=per_arc)
        s1 = SymbolWindow(fam.alphabet, off, tuple(w1))
        s2 = SymbolWindow(fam.alphabet, off, tuple(w2))
        d = metric_d(s1, s2)
        tail_only = d.value - sum(abs(s1[j] - s2[j]) * 2.0 ** -abs(j) for j in range(-N, N + 1))
        n_c += 1
        ok = r.value == 0.0 and tail_only <= bound + 1e-12
        if not ok and bad_c is None:
            bad_c = {"w1": w1, "w2": w2, "rho": r.value, "d": d.value}
    entries.append(_entry("continuity_modulus", bad_c is None, n_c, tolerance=bound,
                          counterexample=bad_c, window=N))
    return entries


def _bean_report(fam, samples, rng, per_arc, tol=1e-9):
    from .trajectory import beat_times, bean_trajectory, return_map, return_time

    entries = []
    bad, n = None, 0
    for _ in range(samples):
        beats = [float(v) for v in 1.0 - rng.random(6)]
        g = bean_trajectory(beats, fam.field)
        eta = return_time(g)
        t = beat_times(g)
        tt = beat_times(return_map(g))
        n += 1
        errs = [abs(tt[j] - (t[j + 1] - eta)) for j in tt if j + 1 in t]
        if (not errs or max(errs) > tol) and bad is None:
            bad = {"beats": beats, "max_error": max(errs) if errs else None}
    entries.append(_entry("beat_time_identity", bad is None, n, tolerance=tol, counterexample=bad))

    N = 2
    bad, n = None, 0
    for _ in range(max(1, samples // 5)):
        pair = []
        for _ in range(2):
            beats = [float(v) for v in 1.0 - rng.random(2 * N + 2)]
            g = bean_trajectory(beats, fam.field)
            g = g.shift(beat_times(g)[N])
            pair.append((g, RealWindow(-N, tuple(beats))))
        (g1, s1), (g2, s2) = pair
        r = rho(g1, g2, N, family=fam, per_arc=per_arc)
        d = real_distance(s1, s2)
        n += 1
        if d.value > r.value + tol and bad is None:
            bad = {"d": d.value, "rho": r.value, "beats1": list(s1.values), "beats2": list(s2.values)}
    entries.append(_entry("itinerary_continuity", bad is None, n, tolerance=tol, counterexample=bad))
    return entries


def verify_conjugacy(family, samples=100, depth=8, seed=0, per_arc=128):
    """Report on the conjugacy between the orbit dynamics and the shift for ``family``."""
    fam = make_canonical(family)
    rng = np.random.default_rng(seed)
    if fam.kind == "bean":
        entries = _bean_report(fam, samples, rng, per_arc)
    else:
        entries = _symbolic_report(fam, samples, depth, rng, per_arc)
    return {"family": fam.name, "samples": samples, "depth": depth, "seed": seed,
            "passed": all(e["passed"] for e in entries), "checks": entries}
