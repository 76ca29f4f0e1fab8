import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psvf.canonical import (
    FOLD,
    Section,
    compartment_of,
    compartments,
    fold_lattice,
    invariant_set,
    make_canonical,
    pk_coefficients,
    poly_Pk,
)
from psvf.errors import FamilyMismatch, OffInvariantSet
from psvf.trajectory import simulate, fold_hit_times


def expand(k):
    """Coefficients of P_k by multiplying out the factors with exact fractions."""
    lat = fold_lattice(k)
    roots = [Fraction(lat["r0"]), Fraction(lat["r1"])]
    for p in lat["folds"]:
        roots += [Fraction(p)] * 2
    c = [Fraction(-1)]
    for r in roots:
        c = [(c[i - 1] if i else 0) - r * (c[i] if i < len(c) else 0) for i in range(len(c) + 1)]
    return c


@pytest.mark.parametrize("k", range(2, 8))
def test_coefficients_match_independent_expansion(k):
    assert list(pk_coefficients(k)) == expand(k)
    d = [i * c for i, c in enumerate(expand(k))][1:]
    assert list(pk_coefficients(k, 1)) == d


@pytest.mark.parametrize("k", range(2, 7))
def test_lattice_spacing_and_roots(k):
    lat = fold_lattice(k)
    folds = lat["folds"]
    assert len(folds) == k - 1
    assert all(b - a == 1 for a, b in zip(folds, folds[1:]))
    for r in [lat["r0"], lat["r1"]] + folds:
        assert poly_Pk(k, r) == 0.0
    for p in folds:
        assert poly_Pk(k, p, 1) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(-3, 3))
def test_poly_matches_coefficients(k, x):
    for order in (0, 1, 2):
        c = [float(v) for v in pk_coefficients(k, order)]
        assert poly_Pk(k, x, order) == pytest.approx(np.polynomial.polynomial.polyval(x, c), abs=1e-9)


@pytest.mark.parametrize("kind", ["k2", "k3", "k5", "inf"])
def test_invariant_curves_are_integral_curves(kind):
    fam = make_canonical(kind)
    inv = invariant_set(fam)
    a, b = inv.domain if inv.domain else (-2.0, 2.0)
    h = 1e-6
    for x in np.linspace(a + 0.01, b - 0.01, 200):
        up = fam.field.upper((x, inv.upper(x)))
        slope = (inv.upper(x + h) - inv.upper(x - h)) / (2 * h)
        assert slope == pytest.approx(up[1] / up[0], abs=1e-7)
        lo = fam.field.lower((x, inv.lower(x)))
        slope = (inv.lower(x + h) - inv.lower(x - h)) / (2 * h)
        assert slope == pytest.approx(lo[1] / lo[0], abs=1e-7)


def test_bean_boundaries_are_integral_curves():
    Z = make_canonical("bean").field
    inv = invariant_set("bean")
    for x in np.linspace(-0.95, 0.95, 200):
        up = Z.upper((x, inv.upper(x)))
        assert up[1] / up[0] == pytest.approx(-2 * x, abs=1e-12)
        lo = Z.lower((x, inv.lower(x)))
        assert lo[1] / lo[0] == pytest.approx(2 * x**3 - x, abs=1e-12)
    assert inv.lower(1.0) == inv.lower(-1.0) == inv.lower(0.0) == 0.0


def test_infinite_field_components():
    Z = make_canonical("inf").field
    for x in np.linspace(-3, 3, 25):
        assert Z.upper((x, 0.5))[1] == pytest.approx(2 * math.sin(2 * math.pi * x), abs=1e-12)


@pytest.mark.parametrize("k", range(2, 7))
def test_compartments_partition_the_loop(k):
    part = compartments(k)
    assert [c.index for c in part.arcs] == list(range(2 * (k - 1)))
    fam = make_canonical(k)
    for c in part.arcs:
        assert compartment_of(fam, c.representative) == c.index
    for p in fold_lattice(k)["folds"]:
        assert compartment_of(fam, (p, 0.0)) is FOLD


def test_k3_compartment_layout():
    arcs = compartments(3).arcs
    assert [(c.start, c.choice, c.end) for c in arcs] == [
        (-0.5, "Y", -0.5), (-0.5, "X", 0.5), (0.5, "Y", -0.5), (0.5, "X", 0.5)]


def test_infinite_compartments_and_adjacency():
    fam = make_canonical("inf")
    assert compartment_of(fam, (0.5, fam.height(0.5))) == 0
    assert compartment_of(fam, (0.5, -fam.height(0.5))) == 1
    assert compartment_of(fam, (-1.5, fam.height(-1.5))) == -4
    assert compartment_of(fam, (-2.0, 0.0)) is FOLD
    # from I_{2l} the next compartment is I_{2l+1} or I_{2l+2}
    for l in range(-2, 2):
        c = compartments(fam, (l, l + 1))[2 * l]
        nxt = {d.index for d in compartments(fam, (l - 1, l + 3)).arcs if d.start == c.end}
        assert nxt == {2 * l + 1, 2 * l + 2}


def test_compartment_of_errors():
    with pytest.raises(OffInvariantSet):
        compartment_of("k3", (0.0, 5.0))
    with pytest.raises(FamilyMismatch):
        compartment_of("bean", (0.0, 0.5))


def test_section_membership():
    K = Section()
    assert K.contains((0.0, 1.0)) and K.contains((0.0, 0.3))
    assert not K.contains((0.0, 0.0)) and not K.contains((0.1, 0.5)) and not K.contains((0.0, 1.1))


def test_section_is_transversal_and_reaches_origin():
    Z = make_canonical("bean").field
    for y in np.linspace(0.1, 1.0, 10):
        assert Z.upper((0.0, y))[0] != 0
        g = simulate(Z, (0.0, y), 3.0)
        assert any(np.allclose(p, 0.0, atol=1e-12) for _, p in g.junctions())


def test_make_canonical_is_shared_and_validates():
    assert make_canonical("k3") is make_canonical(3)
    with pytest.raises(ValueError):
        make_canonical("k1")
    with pytest.raises(ValueError):
        make_canonical("banana")


def test_fold_hits_in_infinite_family_are_integers():
    fam = make_canonical("inf")
    g = simulate(fam.field, (0.0, 0.0), 6.0, choices=["X", "Y", "X", "X", "Y", "Y"])
    assert fold_hit_times(fam, g) == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
