"""Global trajectories with explicit branching at non-deterministic junctions.

A junction is a switching-line point where the local orbit changes.  The
continuations offered there follow the Filippov rules: one field at crossing
points, the sliding field on sliding points, any of X, Y, Z^T at escaping
points, and at tangencies whichever of them produce a genuine forward arc.

Choices are written as tokens ``"X"``, ``"Y"``, ``"ZT"``, ``"STAY"``, or
``"ZT@x"`` (slide and leave the switching line at abscissa ``x``).  A branch is
identified by the sequence of tokens taken at junctions with more than one
option.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .canonical import (
    FOLD,
    Compartment,
    Section,
    compartment_of,
    compartments,
    is_fold_point,
    make_canonical,
)
from .core import RegionClass, classify_point
from .errors import (
    BranchBudgetExceeded,
    EventLocationFailure,
    InadmissibleWord,
    OffInvariantSet,
    SectionNotReached,
)
from .flow import (
    Arc,
    GraphCurve,
    Governing,
    Mode,
    forward_ok,
    integrate_local,
    sliding_velocity,
)

TIME_EPS = 1e-12
MAX_JUNCTIONS = 100_000
SQRT_HALF = math.sqrt(0.5)


# --- trajectories -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered, contiguous arcs plus the choices made at junctions."""

    arcs: tuple
    branch_log: tuple = ()
    anchor: str = "start"

    def __post_init__(self):
        if not self.arcs:
            raise ValueError("a trajectory needs at least one arc")
        object.__setattr__(self, "_t0s", [a.t0 for a in self.arcs])

    @property
    def t_start(self):
        return self.arcs[0].t0

    @property
    def t_end(self):
        return self.arcs[-1].t1

    def _starts(self):
        return self._t0s

    def at(self, t):
        if t < self.t_start - 1e-9 or t > self.t_end + 1e-9:
            raise ValueError(f"t = {t} outside [{self.t_start}, {self.t_end}]")
        i = max(bisect.bisect_right(self._starts(), t) - 1, 0)
        return self.arcs[i].point(t)

    def shift(self, dt):
        """The trajectory ``t -> self(t + dt)``."""
        return Trajectory(tuple(a.shifted(dt) for a in self.arcs), self.branch_log, self.anchor)

    def sample(self, a=None, b=None, per_arc=512):
        """Points on ``[a, b]``; every arc contributes ``per_arc`` samples over its overlap."""
        a = self.t_start if a is None else a
        b = self.t_end if b is None else b
        chunks = []
        for arc in self.arcs:
            lo, hi = max(a, arc.t0), min(b, arc.t1)
            if hi < lo:
                continue
            frac = (hi - lo) / arc.duration if arc.duration > 0 else 0.0
            n = max(2, int(math.ceil(per_arc * frac)))
            chunks.append(arc.points(np.linspace(lo, hi, n)))
        if not chunks:
            raise ValueError(f"no arc overlaps [{a}, {b}]")
        return np.vstack(chunks)

    def junctions(self):
        """``(time, point)`` at every arc boundary, including both ends."""
        out = [(self.arcs[0].t0, self.arcs[0].start)]
        out += [(a.t1, a.end) for a in self.arcs]
        return out

    def max_mismatch(self):
        """Largest endpoint gap between consecutive arcs (space and time)."""
        worst = 0.0
        for a, b in zip(self.arcs, self.arcs[1:]):
            worst = max(worst, float(np.linalg.norm(a.end - b.start)), abs(a.t1 - b.t0))
        return worst

    def governing_at(self, t):
        i = max(bisect.bisect_right(self._starts(), t) - 1, 0)
        return self.arcs[i].governing


def concat(first, second):
    """Join two trajectories that meet end to start."""
    return Trajectory(first.arcs + second.arcs, first.branch_log + second.branch_log, first.anchor)


# --- continuations --------------------------------------------------------------

def continue_at(Z, p, regime=None):
    """Modes that produce valid forward arcs from the switching-line point ``p``."""
    p = np.asarray(p, dtype=float)
    regime = classify_point(Z, p) if regime is None else RegionClass(regime)
    if regime is RegionClass.CROSSING_POS:
        return [Mode.X]
    if regime is RegionClass.CROSSING_NEG:
        return [Mode.Y]
    if regime is RegionClass.SLIDING:
        return [Mode.ZT]
    if regime is RegionClass.ESCAPING:
        return [Mode.X, Mode.Y, Mode.ZT]
    if regime is RegionClass.TANGENCY_SINGULAR:
        return [Mode.STAY]
    return [m for m in (Mode.X, Mode.Y, Mode.ZT) if forward_ok(Z, m, p)]


def parse_token(token):
    token = str(token)
    if token.startswith("ZT@"):
        return Mode.ZT, float(token[3:])
    return Mode(token), None


def _exit_tokens(Z, p, exits):
    """``ZT@x`` tokens for grid abscissas ahead of ``p`` inside the escaping region."""
    v = sliding_velocity(Z, p)
    out = []
    for x in exits:
        if (x - p[0]) * v[0] <= 1e-12:
            continue
        q = np.array([x, 0.0])
        try:
            if classify_point(Z, q) is RegionClass.ESCAPING:
                out.append((abs(x - p[0]), f"ZT@{float(x)!r}"))
        except Exception:
            continue
    return [t for _, t in sorted(out)]


def _options(Z, p, exits=None, after_exit=False):
    tokens = [m.value for m in continue_at(Z, p)]
    if after_exit:
        tokens = [t for t in tokens if t != "ZT"]
    if "ZT" in tokens and exits is not None and len(exits) and Z.switching.is_y:
        tokens += _exit_tokens(Z, p, exits)
    return tokens


def _initial_mode(Z, p):
    fp = Z.switching(p)
    if abs(fp) <= Z.on_sigma_tol:
        return None
    return Mode.X if fp > 0 else Mode.Y


def _advance(Z, p, token, t, horizon):
    mode, stop_x = parse_token(token)
    arc, hit = integrate_local(Z, mode, p, horizon - t, t0=t, stop_x=stop_x)
    return arc, hit, stop_x is not None


@dataclass
class _Cursor:
    arcs: list
    log: list
    p: np.ndarray
    t: float
    after_exit: bool = False
    zero_steps: int = 0


def _step(Z, cur, token, horizon, logged):
    arc, hit, was_exit = _advance(Z, cur.p, token, cur.t, horizon)
    arcs = cur.arcs + [arc]
    log = cur.log + [token] if logged else cur.log
    zero = cur.zero_steps + 1 if arc.duration <= TIME_EPS else 0
    if zero > 8:
        raise EventLocationFailure(f"no progress from {tuple(cur.p)} at t = {cur.t}")
    return _Cursor(arcs, log, arc.end, arc.t1, was_exit and hit, zero), hit


def simulate(Z, p0, horizon, choices=(), policy="first", rng=None, exits=None, t0=0.0):
    """One global trajectory from ``p0`` on ``[t0, t0 + horizon]``.

    At a junction with several options the next entry of ``choices`` is used;
    once they run out, ``policy`` decides: ``"first"`` takes the first option,
    ``"random"`` draws uniformly with ``rng``.  Tokens may also be callables
    ``f(options, point, time) -> token``.
    """
    p0 = np.asarray(p0, dtype=float)
    end = t0 + horizon
    if horizon <= 0:
        return Trajectory((integrate_local(Z, Mode.STAY, p0, 0.0, t0)[0],))
    rng = np.random.default_rng() if (policy == "random" and rng is None) else rng
    queue = list(choices)
    cur = _Cursor([], [], p0, t0)
    first = _initial_mode(Z, p0)
    if first is not None:
        cur, hit = _step(Z, cur, first.value, end, logged=False)
        if not hit:
            return Trajectory(tuple(cur.arcs), ())
    for _ in range(MAX_JUNCTIONS):
        if cur.t >= end - TIME_EPS:
            break
        opts = _options(Z, cur.p, exits, cur.after_exit)
        if not opts:
            raise EventLocationFailure(f"no admissible continuation at {tuple(cur.p)}")
        if len(opts) == 1:
            token, logged = opts[0], False
        else:
            logged = True
            if queue:
                token = queue.pop(0)
                if callable(token):
                    token = token(opts, cur.p, cur.t)
            elif policy == "random":
                token = opts[int(rng.integers(len(opts)))]
            else:
                token = opts[0]
            if not str(token).startswith("ZT@") and token not in opts:
                raise ValueError(f"choice {token!r} not available at {tuple(cur.p)}; options {opts}")
            if str(token).startswith("ZT@") and "ZT" not in opts:
                raise ValueError(f"cannot slide from {tuple(cur.p)}; options {opts}")
        cur, hit = _step(Z, cur, token, end, logged)
        if not hit:
            break
    return Trajectory(tuple(cur.arcs), tuple(cur.log))


# --- branch enumeration ---------------------------------------------------------

@dataclass
class Junction:
    time: float
    point: tuple
    options: tuple
    depth: int

    def as_dict(self):
        return {"time": self.time, "point": list(self.point), "options": list(self.options),
                "depth": self.depth}


@dataclass
class BranchTree:
    root: tuple
    horizon: float
    leaves: list = dc_field(default_factory=list)
    nodes: list = dc_field(default_factory=list)
    truncated: bool = False
    max_branches: Optional[int] = None

    @property
    def depth(self):
        return max((n.depth for n in self.nodes), default=-1) + 1

    def raise_if_truncated(self):
        if self.truncated:
            raise BranchBudgetExceeded(
                f"more than {self.max_branches} branches before t = {self.horizon}", partial=self)
        return self


def enumerate_branches(Z, p0, horizon, max_branches=4096, exits=None, strict=False):
    """Every distinct trajectory from ``p0`` up to ``horizon`` (options ordered X, Y, Z^T).

    On the bean field the escaping continuum is sampled at the abscissas
    ``exits``.  When more than ``max_branches`` leaves would be produced the
    tree is truncated; with ``strict`` that raises :class:`BranchBudgetExceeded`
    carrying the partial tree.
    """
    p0 = np.asarray(p0, dtype=float)
    tree = BranchTree(tuple(p0), float(horizon), max_branches=max_branches)
    if horizon <= 0:
        tree.leaves.append(simulate(Z, p0, 0.0))
        return tree
    cur = _Cursor([], [], p0, 0.0)
    first = _initial_mode(Z, p0)
    if first is not None:
        cur, hit = _step(Z, cur, first.value, horizon, logged=False)
        if not hit:
            tree.leaves.append(Trajectory(tuple(cur.arcs)))
            return tree
    stack = [(cur, 0)]
    while stack:
        cur, depth = stack.pop()
        while cur.t < horizon - TIME_EPS:
            opts = _options(Z, cur.p, exits, cur.after_exit)
            if not opts:
                raise EventLocationFailure(f"no admissible continuation at {tuple(cur.p)}")
            if len(opts) > 1:
                tree.nodes.append(Junction(cur.t, tuple(float(v) for v in cur.p), tuple(opts), depth))
                for token in reversed(opts[1:]):
                    stack.append((_branch(Z, cur, token, horizon, True), depth + 1))
                cur, hit = _step(Z, cur, opts[0], horizon, True)
                depth += 1
            else:
                cur, hit = _step(Z, cur, opts[0], horizon, False)
            if not hit:
                break
        if len(tree.leaves) >= max_branches:
            tree.truncated = True
            break
        tree.leaves.append(Trajectory(tuple(cur.arcs), tuple(cur.log)))
    if tree.truncated and strict:
        tree.raise_if_truncated()
    return tree


def _branch(Z, cur, token, horizon, logged):
    nxt, _ = _step(Z, cur, token, horizon, logged)
    return nxt


# --- symbols <-> trajectories -----------------------------------------------------

def compartment_info(family, n):
    fam = make_canonical(family)
    if fam.kind == "finite":
        if not 0 <= n < fam.alphabet:
            raise ValueError(f"symbol {n} outside the alphabet 0..{fam.alphabet - 1}")
        return compartments(fam)[n]
    if fam.kind == "infinite":
        j = n // 2
        h = fam.height
        if n % 2 == 0:
            return Compartment(n, ("upper",), (j, j + 1), float(j), "X", float(j + 1), (j + 0.5, h(j + 0.5)))
        return Compartment(n, ("lower",), (j, j + 1), float(j + 1), "Y", float(j), (j + 0.5, -h(j + 0.5)))
    raise ValueError("symbolic synthesis needs a finite or infinite family")


def admissible_successor(family, a, b):
    return abs(compartment_info(family, a).end - compartment_info(family, b).start) < 1e-9


def _to_next_fold(Z, p, t, token):
    """Take ``token`` at the fold ``p`` and follow the forced path to the next fold."""
    cur = _Cursor([], [], p, t)
    cur, hit = _step(Z, cur, token, t + 10.0, logged=False)
    for _ in range(64):
        if not hit:
            raise OffInvariantSet(f"orbit from {tuple(p)} left the invariant set")
        if is_fold_point(Z, cur.p):
            return cur.arcs, cur.p, cur.t
        opts = continue_at(Z, cur.p)
        if len(opts) != 1:
            raise OffInvariantSet(f"unexpected junction {opts} at {tuple(cur.p)}")
        cur, hit = _step(Z, cur, opts[0].value, t + 10.0, logged=False)
    raise EventLocationFailure("no fold reached")


def trajectory_from_symbols(family, window):
    """Concatenate the compartment arcs named by ``window`` starting at time ``window.offset``."""
    fam = make_canonical(family)
    Z = fam.field
    symbols = [int(s) for s in window.symbols]
    if not symbols:
        raise ValueError("empty symbol window")
    for i, (a, b) in enumerate(zip(symbols, symbols[1:])):
        compartment_info(fam, a)
        if not admissible_successor(fam, a, b):
            raise InadmissibleWord(window.offset + i, (a, b))
    comp = compartment_info(fam, symbols[0])
    p = np.array([comp.start, 0.0])
    t = float(window.offset)
    arcs, log = [], []
    for s in symbols:
        comp = compartment_info(fam, s)
        opts = [m.value for m in continue_at(Z, p)]
        if comp.choice not in opts:
            raise OffInvariantSet(f"{comp.choice} is not available at fold {tuple(p)}")
        piece, p, t = _to_next_fold(Z, p, t, comp.choice)
        arcs += piece
        log.append(comp.choice)
    return Trajectory(tuple(arcs), tuple(log), anchor="fold")


def itinerary(family, gamma, window):
    """Symbols ``s_j`` for ``j`` in the inclusive index range ``window = (a, b)``."""
    from .symbolic import SymbolWindow

    fam = make_canonical(family)
    a, b = int(window[0]), int(window[1])
    out = []
    for j in range(a, b + 1):
        n = compartment_of(fam, gamma.at(float(j)))
        if n is FOLD:
            n = compartment_of(fam, gamma.at(j + 0.5))
            if n is FOLD:
                raise OffInvariantSet(f"trajectory rests at a fold at t = {j + 0.5}")
        out.append(n)
    return SymbolWindow(fam.alphabet, a, tuple(out))


def time_one(gamma, steps=1):
    return gamma.shift(float(steps))


def fold_hit_times(family, gamma, tol=1e-9):
    """Times in the trajectory's span at which it sits on a fold."""
    fam = make_canonical(family)
    times = []
    for t, p in gamma.junctions():
        if is_fold_point(fam.field, p) and (not times or t - times[-1] > tol):
            times.append(t)
    return times


def random_word(family, length, rng):
    """Uniformly chosen admissible word (each successor picked among the allowed ones)."""
    fam = make_canonical(family)
    if fam.kind == "finite":
        m = fam.alphabet
        word = [int(rng.integers(m))]
        for _ in range(length - 1):
            nxt = [b for b in range(m) if admissible_successor(fam, word[-1], b)]
            word.append(int(rng.choice(nxt)))
        return word
    word = [int(rng.integers(-4, 4))]
    for _ in range(length - 1):
        s = word[-1]
        nxt = [s + 1, s + 2] if s % 2 == 0 else [s - 1, s - 2]
        word.append(int(rng.choice(nxt)))
    return word


# --- bean field: section, beats, return map ----------------------------------------

SECTION = Section()


def section_hits(gamma, section=SECTION, tol=1e-9):
    """Times at which ``gamma`` crosses ``K``, in increasing order."""
    hits = []
    for arc in gamma.arcs:
        if arc.governing is not Governing.UPPER:
            continue
        a, b = arc.start, arc.end
        if isinstance(arc.curve, GraphCurve):
            speed = arc.curve.flow.speed
            tau = (section.x - a[0]) / speed
        elif (a[0] - section.x) * (b[0] - section.x) <= 0 and a[0] != b[0]:
            ts = np.linspace(arc.t0, arc.t1, 2049)
            xs = arc.points(ts)[:, 0] - section.x
            i = int(np.nonzero(np.diff(np.sign(xs)))[0][0]) if np.any(np.diff(np.sign(xs))) else 0
            tau = brentq(lambda t: arc.point(t)[0] - section.x, ts[i], ts[i + 1]) - arc.t0
        else:
            continue
        if -tol <= tau <= arc.duration + tol:
            t = arc.t0 + min(max(tau, 0.0), arc.duration)
            if section.contains(arc.point(t)) and (not hits or t - hits[-1] > tol):
                hits.append(t)
    return hits


def beat_times(gamma, window=None, tol=1e-9):
    """``{j: t_j}`` with ``t_0`` the latest section hit at time ``<= 0``."""
    hits = section_hits(gamma)
    past = [i for i, t in enumerate(hits) if t <= tol]
    if not past:
        raise SectionNotReached("no section hit at or before time 0")
    i0 = past[-1]
    beats = {i - i0: t for i, t in enumerate(hits)}
    if window is None:
        return beats
    a, b = window
    missing = [j for j in range(a, b + 1) if j not in beats]
    if missing:
        raise SectionNotReached(f"beats {missing} are outside the simulated span")
    return {j: beats[j] for j in range(a, b + 1)}


def return_time(gamma, tol=1e-9):
    """``eta = min{t > 0 : gamma(t) in K}``."""
    for t in section_hits(gamma):
        if t > tol:
            return t
    raise SectionNotReached(f"no return to K before t = {gamma.t_end}")


def return_map(gamma):
    return gamma.shift(return_time(gamma))


def beat_values(gamma):
    """``{j: y(gamma(t_j))}``, the bean itinerary on the simulated beats."""
    return {j: float(gamma.at(t)[1]) for j, t in beat_times(gamma).items()}


def exit_tokens_for(target):
    """Choices at the origin that send the next beat to height ``target``.

    ``Y`` at the two-fold yields 1; sliding to the escaping boundary yields 1/2;
    leaving the escaping segment at ``x`` with X yields ``x^2`` and with Y
    yields ``1 - x^2``.
    """
    if not 0 < target <= 1:
        raise ValueError("beat heights lie in (0, 1]")
    if target == 1.0:
        return ["Y"]
    if target == 0.5:
        return ["ZT"]
    if target < 0.5:
        return [f"ZT@{-math.sqrt(target)!r}", "X"]
    return [f"ZT@{-math.sqrt(1 - target)!r}", "Y"]


def bean_trajectory(beats, Z=None):
    """Bean orbit through ``(0, beats[0])`` whose successive section hits are ``beats``."""
    Z = make_canonical("bean").field if Z is None else Z
    beats = [float(b) for b in beats]
    tokens = []
    for b in beats[1:]:
        tokens += exit_tokens_for(b)
    # generous horizon; the run is cut at the last requested beat
    gamma = simulate(Z, (0.0, beats[0]), 4.0 * len(beats) + 4.0, choices=tokens)
    hits = section_hits(gamma)
    if len(hits) < len(beats):
        raise SectionNotReached("synthesized orbit fell short of the requested beats")
    return truncate(gamma, hits[len(beats) - 1])


def truncate(gamma, t_end):
    """Restrict ``gamma`` to times ``<= t_end`` (cutting the last arc)."""
    arcs = []
    for a in gamma.arcs:
        if a.t0 >= t_end - TIME_EPS and arcs:
            break
        if a.t1 > t_end:
            arcs.append(Arc(a.governing, a.t0, t_end - a.t0, a.curve))
            break
        arcs.append(a)
    return Trajectory(tuple(arcs), gamma.branch_log, gamma.anchor)


def next_beat(Z, y0, tokens, horizon=8.0):
    """Height of the first section hit after leaving ``(0, y0)`` with ``tokens``."""
    gamma = simulate(Z, (0.0, y0), horizon, choices=tokens)
    hits = [t for t in section_hits(gamma) if t > 1e-9]
    if not hits:
        raise SectionNotReached("no return within the horizon")
    return float(gamma.at(hits[0])[1])


def bean_branch_to(Z, y0, target, tol=1e-6):
    """Search the branches from ``(0, y0)`` for one whose next beat is ``target``.

    The candidates are Y at the two-fold, sliding to the escaping boundary, and
    leaving the escaping segment at an abscissa ``x`` with X or Y; the exit
    abscissa is found by root finding on the simulated next beat.
    Returns ``(tokens, reached)`` or ``None``.
    """
    for tokens in (["Y"], ["ZT"]):
        try:
            got = next_beat(Z, y0, tokens)
        except Exception:
            continue
        if abs(got - target) <= tol:
            return tokens, got
    lo, hi = -SQRT_HALF + 1e-9, -1e-4
    for leave in ("X", "Y"):
        def g(x, leave=leave):
            return next_beat(Z, y0, [f"ZT@{x!r}", leave]) - target
        try:
            glo, ghi = g(lo), g(hi)
        except Exception:
            continue
        if glo * ghi > 0:
            continue
        x = brentq(g, lo, hi, xtol=1e-15)
        tokens = [f"ZT@{x!r}", leave]
        got = next_beat(Z, y0, tokens)
        if abs(got - target) <= tol:
            return tokens, got
    return None
