import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psvf.errors import AlphabetMismatch
from psvf.symbolic import (
    SymbolWindow,
    TransitionMatrix,
    admissible,
    geometric_matrix,
    is_mixing,
    metric_d,
    periodic_count,
    sft_matrix,
    shift,
    theta_inf_admissible,
)


def windows(alphabet, offset=-4, length=9):
    return st.lists(st.integers(0, alphabet - 1), min_size=length, max_size=length).map(
        lambda s: SymbolWindow(alphabet, offset, tuple(s)))


def exact_d(w1, w2):
    return sum(Fraction(abs(w1[j] - w2[j]), 2 ** abs(j)) for j in w1.indices())


def test_metric_example_all_zero_versus_all_one():
    for N in (1, 3, 6):
        z = SymbolWindow(2, -N, (0,) * (2 * N + 1))
        o = SymbolWindow(2, -N, (1,) * (2 * N + 1))
        d = metric_d(z, o)
        assert d.value == 3 - 2.0 ** (1 - N)
        assert d.tail == 2.0 ** (1 - N)
        assert d.upper == 3.0


@settings(max_examples=200, deadline=None)
@given(windows(4), windows(4), windows(4))
def test_metric_axioms_exact(a, b, c):
    assert metric_d(a, a).value == 0
    assert metric_d(a, b).value == metric_d(b, a).value
    assert metric_d(a, c).value <= metric_d(a, b).value + metric_d(b, c).value
    assert metric_d(a, b).value == float(exact_d(a, b))
    if a != b:
        assert metric_d(a, b).value > 0


@settings(max_examples=100, deadline=None)
@given(windows(3), windows(3))
def test_tail_bounds_any_extension(a, b):
    """Extending both windows arbitrarily never leaves [value, upper]."""
    rng = np.random.default_rng(abs(hash((a.symbols, b.symbols))) % 2**32)
    d = metric_d(a, b)
    for _ in range(5):
        ext = [SymbolWindow(3, -30, tuple(rng.integers(3, size=26)) + w.symbols + tuple(rng.integers(3, size=26)))
               for w in (a, b)]
        full = metric_d(*ext).value
        assert d.value - 1e-12 <= full <= d.upper + 1e-12


def test_shift_reindexes():
    w = SymbolWindow(2, -2, (0, 1, 1, 0))
    s = shift(w, 1)
    assert s.offset == -3 and s[-3] == w[-2]
    assert shift(shift(w, 2), -2) == w


def test_alphabet_errors():
    with pytest.raises(AlphabetMismatch):
        metric_d(SymbolWindow(2, 0, (0,)), SymbolWindow(3, 0, (0,)))
    with pytest.raises(ValueError):
        SymbolWindow(2, 0, (0, 2))
    with pytest.raises(ValueError):
        metric_d(SymbolWindow(None, 0, (0, 5)), SymbolWindow(None, 0, (0, 1)))


def test_integer_window_tail_dominates_extensions():
    a = SymbolWindow(None, -3, (0, 2, 3, 5, 4, 2, 3))
    b = SymbolWindow(None, -3, (1, 2, 0, 1, 3, 4, 5))
    d = metric_d(a, b)
    rng = np.random.default_rng(1)
    for _ in range(20):
        ext = []
        for w in (a, b):
            left = [w.symbols[0]]
            for _ in range(40):
                left.insert(0, left[0] + int(rng.integers(-2, 3)))
            right = [w.symbols[-1]]
            for _ in range(40):
                right.append(right[-1] + int(rng.integers(-2, 3)))
            ext.append(SymbolWindow(None, -43, tuple(left[:-1]) + w.symbols + tuple(right[1:])))
        assert d.value <= metric_d(*ext).value <= d.upper + 1e-12
    assert theta_inf_admissible(a) and not theta_inf_admissible(SymbolWindow(None, 0, (0, 3)))


def test_parse():
    assert SymbolWindow.parse("0110", 2).symbols == (0, 1, 1, 0)
    assert SymbolWindow.parse("0,-2,-4", None, offset=3).symbols == (0, -2, -4)


M3 = TransitionMatrix(((1, 1, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0), (0, 0, 1, 1)))


def test_k3_matrix_mixing_and_periodic_points():
    assert is_mixing(M3) == {"mixing": True, "n0": 2}
    assert [periodic_count(M3, n) for n in (1, 2, 3)] == [2, 4, 8]
    assert admissible(M3, [0, 1, 2, 0]) is None
    assert admissible(M3, [0, 1, 1]) == 1


def test_non_mixing_matrices():
    assert is_mixing(TransitionMatrix(((0, 1), (1, 0)))) == {"mixing": False, "n0": None}
    assert is_mixing(TransitionMatrix(((1, 0), (0, 1))))["mixing"] is False


@pytest.mark.parametrize("k", range(2, 6))
def test_simulated_matrix_equals_geometric_matrix(k):
    assert sft_matrix(k) == geometric_matrix(k)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**16), st.integers(1, 6))
def test_periodic_count_matches_enumeration(m, seed, n):
    rng = np.random.default_rng(seed)
    rows = tuple(tuple(int(v) for v in r) for r in rng.integers(0, 2, size=(m, m)))
    M = TransitionMatrix(rows)
    brute = sum(all(rows[w[i]][w[(i + 1) % n]] for i in range(n))
                for w in itertools.product(range(m), repeat=n))
    assert periodic_count(M, n) == brute


def test_periodic_count_is_exact_for_large_n():
    full = TransitionMatrix(((1, 1), (1, 1)))
    assert periodic_count(full, 80) == 2**80


def test_matrix_validation():
    with pytest.raises(ValueError):
        TransitionMatrix(((1, 2), (0, 1)))
    with pytest.raises(ValueError):
        TransitionMatrix(((1, 0),))
