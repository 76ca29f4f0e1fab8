"""Symbol sequences, the shift, the weighted metric and subshifts of finite type.

A bi-infinite sequence is represented by a finite :class:`SymbolWindow`; every
distance carries a rigorous bound on what the unseen entries could add.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AlphabetMismatch

THETA_STEP = 2
# number of explicit tail terms summed before switching to the closed form
_TAIL_TERMS = 200


@dataclass(frozen=True)
class SymbolWindow:
    """Entries ``symbols[i]`` at indices ``offset + i``.

    ``alphabet`` is the number of symbols, or ``None`` for the integer alphabet.
    """

    alphabet: Optional[int]
    offset: int
    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if self.alphabet is not None:
            bad = [s for s in self.symbols if not 0 <= s < self.alphabet]
            if bad:
                raise ValueError(f"symbols {bad} outside 0..{self.alphabet - 1}")

    @property
    def first(self):
        return self.offset

    @property
    def last(self):
        return self.offset + len(self.symbols) - 1

    def indices(self):
        return range(self.first, self.last + 1)

    def __getitem__(self, j):
        if not self.first <= j <= self.last:
            raise IndexError(f"index {j} outside [{self.first}, {self.last}]")
        return self.symbols[j - self.offset]

    def restrict(self, a, b):
        a, b = max(a, self.first), min(b, self.last)
        return SymbolWindow(self.alphabet, a, tuple(self[j] for j in range(a, b + 1)))

    def as_dict(self):
        return {"alphabet": self.alphabet, "offset": self.offset, "symbols": list(self.symbols)}

    @classmethod
    def parse(cls, text, alphabet, offset=0):
        """From ``"0110"`` (single digits) or ``"0,2,4,-2"`` (comma separated)."""
        text = str(text).strip()
        parts = text.split(",") if "," in text else list(text)
        return cls(alphabet, int(offset), tuple(int(p) for p in parts if p.strip()))


@dataclass(frozen=True)
class MetricBound:
    """A partial sum ``value`` with the true distance in ``[value, value + tail]``."""

    value: float
    tail: float

    @property
    def upper(self):
        return self.value + self.tail

    def as_dict(self):
        return {"value": self.value, "tail": self.tail, "upper": self.upper}


def shift(w, steps=1):
    """``b_j = a_{j + steps}``: the same entries re-indexed ``steps`` places to the left."""
    return SymbolWindow(w.alphabet, w.offset - int(steps), w.symbols)


def _common(w1, w2):
    if w1.alphabet != w2.alphabet:
        raise AlphabetMismatch(f"alphabets {w1.alphabet} and {w2.alphabet} differ")
    a, b = max(w1.first, w2.first), min(w1.last, w2.last)
    return a, b


def _weight(j):
    return 2.0 ** (-abs(j))


def _linear_tail(start, step, base, anchor):
    """``sum_{j = start, start+step, ...} (base + 4|j - anchor|) 2^{-|j|}`` (step = +-1)."""
    total = 0.0
    j = start
    for _ in range(_TAIL_TERMS):
        total += (base + 4 * abs(j - anchor)) * _weight(j)
        j += step
    # remaining terms all have |j| >= s and |j - anchor| <= |j| + |anchor|
    s = abs(j)
    a = base + 4 * abs(anchor)
    total += a * 2.0 ** (1 - s) + 4 * (s + 1) * 2.0 ** (1 - s)
    return total


def metric_d(w1, w2):
    """``d(x, y) = sum_j |x_j - y_j| / 2^|j|`` on the shared indices, plus a tail bound."""
    a, b = _common(w1, w2)
    if w1.alphabet is None:
        if not (theta_inf_admissible(w1) and theta_inf_admissible(w2)):
            raise ValueError("integer windows must have steps of size at most 2")
        if a > b:
            raise ValueError("integer windows must overlap to bound the distance")
    value = sum(abs(w1[j] - w2[j]) * _weight(j) for j in range(a, b + 1))
    if w1.alphabet is not None:
        seen = sum(_weight(j) for j in range(a, b + 1))
        tail = (w1.alphabet - 1) * max(3.0 - seen, 0.0)
    else:
        # each step moves either sequence by at most 2, so the gap grows by at most 4
        left = abs(w1[a] - w2[a])
        right = abs(w1[b] - w2[b])
        tail = _linear_tail(b + 1, 1, right, b) + _linear_tail(a - 1, -1, left, a)
    return MetricBound(float(value), float(tail))


def theta_inf_admissible(w):
    """Window-level membership in Theta_inf (necessary, not sufficient, for the full sequence)."""
    s = w.symbols
    return all(abs(y - x) <= THETA_STEP for x, y in zip(s, s[1:]))


# --- subshifts of finite type --------------------------------------------------

@dataclass(frozen=True)
class TransitionMatrix:
    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        m = len(rows)
        if any(len(r) != m for r in rows):
            raise ValueError("transition matrix must be square")
        if any(v not in (0, 1) for r in rows for v in r):
            raise ValueError("transition matrix entries must be 0 or 1")
        object.__setattr__(self, "rows", rows)

    @property
    def size(self):
        return len(self.rows)

    @property
    def array(self):
        return np.array(self.rows, dtype=np.int64)

    def allows(self, a, b):
        return bool(self.rows[a][b])

    def as_list(self):
        return [list(r) for r in self.rows]


def is_mixing(M):
    """Primitivity: smallest ``n0 <= (m-1)^2 + 1`` with ``M^n0 > 0`` entrywise."""
    A = (M.array > 0).astype(np.int64)
    m = M.size
    P = A.copy()
    for n in range(1, (m - 1) ** 2 + 2):
        if P.min() > 0:
            return {"mixing": True, "n0": n}
        P = ((P @ A) > 0).astype(np.int64)
    return {"mixing": False, "n0": None}


def periodic_count(M, n):
    """Number of period-``n`` points of the subshift: ``trace(M^n)``, in exact integers."""
    if n < 1:
        raise ValueError("period must be at least 1")
    A = np.array(M.rows, dtype=object)
    P = np.identity(M.size, dtype=object)
    for _ in range(n):
        P = P.dot(A)
    return int(sum(P[i, i] for i in range(M.size)))


def sft_matrix(family, horizon=1.5):
    """Adjacency of compartments, found by simulating the flow out of each one.

    From a point inside ``I_i`` every branch is followed to its first fold
    hit ``t_f``; the compartment holding the orbit at ``t_f + 1/2`` is a
    successor of ``i``.
    """
    from .canonical import compartment_of, compartments, make_canonical
    from .trajectory import enumerate_branches, fold_hit_times

    fam = make_canonical(family)
    if fam.kind != "finite":
        raise ValueError("transition matrices are defined for finite k")
    m = fam.alphabet
    rows = [[0] * m for _ in range(m)]
    for comp in compartments(fam).arcs:
        q = np.array(comp.representative, dtype=float)
        if compartment_of(fam, q) != comp.index:
            raise AssertionError(f"representative of I_{comp.index} misplaced")
        tree = enumerate_branches(fam.field, q, horizon)
        for leaf in tree.leaves:
            hits = [t for t in fold_hit_times(fam, leaf) if t > 0]
            if not hits or hits[0] + 0.5 > leaf.t_end:
                continue
            rows[comp.index][compartment_of(fam, leaf.at(hits[0] + 0.5))] = 1
    return TransitionMatrix(tuple(tuple(r) for r in rows))


def geometric_matrix(k):
    """Adjacency read off the compartment table: ``j`` follows ``i`` iff ``I_j`` starts where ``I_i`` ends."""
    from .canonical import compartments

    arcs = compartments(k).arcs
    return TransitionMatrix(tuple(
        tuple(int(abs(a.end - b.start) < 1e-12) for b in arcs) for a in arcs))


def admissible(M, word):
    """Index of the first forbidden transition in ``word``, or ``None``."""
    for i, (a, b) in enumerate(zip(word, word[1:])):
        if not M.allows(a, b):
            return i
    return None
