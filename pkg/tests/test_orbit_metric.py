import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from psvf.canonical import make_canonical
from psvf.errors import DegenerateCurve, EmptyCurve, FamilyMismatch
from psvf.orbit_metric import (
    RealWindow,
    arc_length_homeomorphism,
    diameter,
    hausdorff,
    normalize,
    real_distance,
    rho,
    verify_conjugacy,
)
from psvf.symbolic import SymbolWindow
from psvf.trajectory import random_word, trajectory_from_symbols

pts = arrays(np.float64, st.tuples(st.integers(1, 25), st.just(2)), elements=st.floats(-5, 5))


def brute(A, B):
    d = lambda P, Q: max(min(math.dist(p, q) for q in Q) for p in P)
    return max(d(A, B), d(B, A))


@settings(max_examples=100, deadline=None)
@given(pts, pts)
def test_point_hausdorff_matches_oracle(A, B):
    assert hausdorff(A, B, mode="points") == pytest.approx(brute(A, B), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(pts, pts)
def test_polyline_hausdorff_is_at_most_point_distance(A, B):
    assert hausdorff(A, B) <= hausdorff(A, B, mode="points") + 1e-12
    assert hausdorff(A, B) == hausdorff(B, A)


def test_polyline_hausdorff_sees_segments():
    A = np.array([[0.0, 0.0], [2.0, 0.0]])
    B = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    assert hausdorff(A, B) == 0.0
    assert hausdorff(A, B, mode="points") == 1.0
    assert hausdorff(A, np.array([[1.0, 0.0]])) == 1.0
    with pytest.raises(EmptyCurve):
        hausdorff(np.empty((0, 2)), B)


def test_diameters():
    assert diameter("k2") == pytest.approx(1.0, abs=5e-3)
    assert diameter("bean") == pytest.approx(2.0, abs=5e-3)
    with pytest.raises(ValueError):
        diameter("inf")


def test_rho_of_identical_and_different_orbits():
    fam = make_canonical(2)
    g1 = trajectory_from_symbols(fam, SymbolWindow(2, -4, (0, 1, 0, 1, 1, 0, 0, 1, 0)))
    g2 = trajectory_from_symbols(fam, SymbolWindow(2, -4, (0, 1, 0, 1, 0, 0, 0, 1, 0)))
    same = rho(g1, g1, 3, family=fam)
    assert same.value == 0.0 and same.tail == pytest.approx(diameter("k2") / 4)
    d = rho(g1, g2, 3, family=fam)
    # only piece 0 differs: the left and right loops are half a unit apart
    assert d.value == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        rho(g1, g2, 3)


def test_rho_infinite_tail_is_per_pair():
    fam = make_canonical("inf")
    rng = np.random.default_rng(0)
    g1, g2 = (trajectory_from_symbols(fam, SymbolWindow(None, -4, tuple(random_word(fam, 9, rng))))
              for _ in range(2))
    r = rho(g1, g2, 3, family=fam, per_arc=64)
    assert r.tail >= 2 * 2.0**-3 * 8 * math.sqrt(5)


def test_normalize_and_family_mismatch():
    fam = make_canonical(3)
    g = trajectory_from_symbols(fam, SymbolWindow(4, -2, (0, 1, 3, 2, 0)))
    o = normalize(fam, g.shift(0.25))
    assert o.anchor_time == pytest.approx(-0.25)
    assert o.representative.t_start == pytest.approx(-2.0)
    assert o.itinerary.offset == -2 and o.itinerary.symbols == (0, 1, 3, 2, 0)
    other = normalize("k2", trajectory_from_symbols("k2", SymbolWindow(2, -2, (0, 1, 1, 0))))
    with pytest.raises(FamilyMismatch):
        rho(o, other, 1)


def test_real_window_distance():
    a, b = RealWindow(-1, (0.5, 0.5, 0.5)), RealWindow(-1, (0.25, 0.5, 1.0))
    d = real_distance(a, b)
    assert d.value == pytest.approx(0.125 + 0.25)
    assert d.tail == pytest.approx(1.0)


def test_arc_length_homeomorphism():
    A = np.column_stack([np.linspace(0, 1, 11), np.zeros(11)])
    B = np.column_stack([np.zeros(21), np.linspace(0, 4, 21) ** 2 / 4])
    h = arc_length_homeomorphism(A, B)
    assert np.allclose(h(A[0]), B[0]) and np.allclose(h(A[-1]), B[-1])
    s = np.linspace(0, 1, 7)
    imgs = [h(p) for p in h.inverse().at(s)]
    assert np.all(np.diff([q[1] for q in imgs]) > 0)  # orientation preserved
    back = h.inverse()
    for p in A:
        assert np.allclose(back(h(p)), p, atol=1e-12)
    with pytest.raises(DegenerateCurve):
        arc_length_homeomorphism(np.zeros((3, 2)), B)


@pytest.mark.parametrize("kind", ["k2", "k3", "inf", "bean"])
def test_verify_conjugacy_passes(kind):
    report = verify_conjugacy(kind, samples=10, depth=6, seed=1, per_arc=64)
    assert report["passed"], [c for c in report["checks"] if not c["passed"]]
    assert {c["name"] for c in report["checks"]}
