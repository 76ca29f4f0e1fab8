import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psvf.canonical import make_canonical
from psvf.core import PiecewiseField, SmoothField2D
from psvf.errors import BranchBudgetExceeded, InadmissibleWord, SectionNotReached
from psvf.flow import Governing, Mode, integrate_local
from psvf.symbolic import SymbolWindow, shift
from psvf.trajectory import (
    bean_branch_to,
    bean_trajectory,
    beat_times,
    beat_values,
    continue_at,
    enumerate_branches,
    exit_tokens_for,
    fold_hit_times,
    itinerary,
    next_beat,
    parse_token,
    random_word,
    return_map,
    return_time,
    section_hits,
    simulate,
    time_one,
    trajectory_from_symbols,
)

K2, K3, INF, BEAN = (make_canonical(k) for k in ("k2", "k3", "inf", "bean"))


def test_continuations_at_folds():
    assert continue_at(K2.field, (0.0, 0.0)) == [Mode.X, Mode.Y]
    assert continue_at(BEAN.field, (0.0, 0.0)) == [Mode.Y, Mode.ZT]
    assert continue_at(BEAN.field, (-math.sqrt(0.5), 0.0)) == [Mode.X]
    assert continue_at(BEAN.field, (math.sqrt(0.5), 0.0)) == [Mode.ZT]
    assert continue_at(BEAN.field, (-0.3, 0.0)) == [Mode.X, Mode.Y, Mode.ZT]


def test_parse_token():
    assert parse_token("X") == (Mode.X, None)
    assert parse_token("ZT@-0.25") == (Mode.ZT, -0.25)
    with pytest.raises(ValueError):
        parse_token("W")


def test_z2_loops_take_one_time_unit():
    g = simulate(K2.field, (0.0, 0.0), 2.0, choices=["Y", "X"])
    assert g.branch_log == ("Y", "X")
    assert fold_hit_times(K2, g) == [0.0, 1.0, 2.0]
    assert g.max_mismatch() == 0.0
    assert np.allclose(g.at(0.5), (-0.5, 0.0), atol=1e-12)  # r0 crossing
    assert np.allclose(g.at(1.5), (0.5, 0.0), atol=1e-12)


def test_numeric_integration_agrees_with_closed_form():
    """The same Z2 without closed-form flows, integrated numerically."""
    up, lo = K2.field.upper, K2.field.lower
    plain = PiecewiseField(SmoothField2D(up.fx, up.fy, up.label, up.jacobian),
                           SmoothField2D(lo.fx, lo.fy, lo.label, lo.jacobian))
    g_exact = simulate(K2.field, (0.0, 0.0), 2.5, choices=["X", "Y", "X"])
    g_num = simulate(plain, (0.0, 0.0), 2.5, choices=["X", "Y", "X"])
    for t in np.linspace(0, 2.5, 26):
        assert np.allclose(g_num.at(t), g_exact.at(t), atol=1e-5)
    assert g_num.branch_log == g_exact.branch_log
    fold_times = [t for t, p in g_num.junctions() if np.allclose(p, 0.0, atol=1e-12)]
    assert fold_times == pytest.approx([0.0, 1.0, 2.0], abs=1e-5)


def test_integrate_local_stops_on_sigma():
    arc, hit = integrate_local(K3.field, Mode.X, np.array([-0.5, 0.0]), 5.0)
    assert hit and arc.duration == pytest.approx(1.0, abs=1e-12)
    assert arc.governing is Governing.UPPER
    assert np.allclose(arc.end, (0.5, 0.0), atol=1e-12)


def test_enumeration_counts_and_order():
    tree = enumerate_branches(K2.field, (0.0, 0.0), 4.0)
    assert len(tree.leaves) == 16
    logs = [leaf.branch_log for leaf in tree.leaves]
    assert logs[0] == ("X",) * 4 and logs[-1] == ("Y",) * 4
    assert len(set(logs)) == 16
    with pytest.raises(BranchBudgetExceeded) as err:
        enumerate_branches(K2.field, (0.0, 0.0), 6.0, max_branches=10, strict=True)
    assert err.value.partial is not None


def test_branch_choice_validation():
    with pytest.raises(ValueError):
        simulate(K2.field, (0.0, 0.0), 1.0, choices=["ZT"])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["X", "Y"]), min_size=1, max_size=8))
def test_shift_commutes_with_itinerary_on_random_branches(choices):
    g = simulate(K2.field, (0.0, 0.0), float(len(choices)), choices=choices)
    n = len(choices)
    it = itinerary(K2, g, (0, n - 1))
    assert list(it.symbols) == [0 if c == "Y" else 1 for c in choices]
    if n > 1:
        assert itinerary(K2, time_one(g), (0, n - 2)) == shift(it, 1).restrict(0, n - 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["k2", "k3", "k4", "inf"]), st.integers(-5, 5))
def test_round_trip(seed, kind, offset):
    fam = make_canonical(kind)
    w = random_word(fam, 7, np.random.default_rng(seed))
    win = SymbolWindow(fam.alphabet, offset, tuple(w))
    g = trajectory_from_symbols(fam, win)
    assert g.t_start == offset and g.t_end == pytest.approx(offset + 7, abs=1e-12)
    assert itinerary(fam, g, (win.first, win.last)) == win


def test_inadmissible_word_reports_index():
    with pytest.raises(InadmissibleWord) as err:
        trajectory_from_symbols(K3, SymbolWindow(4, 3, (0, 1, 1)))
    assert err.value.index == 4 and err.value.pair == (1, 1)


def test_half_step_rule_at_folds():
    g = trajectory_from_symbols(K3, SymbolWindow(4, 0, (1, 3, 2)))
    # integer times land on folds: symbols come from t + 1/2
    assert itinerary(K3, g, (0, 2)).symbols == (1, 3, 2)


def test_bean_outer_loop_and_section():
    g = simulate(BEAN.field, (0.0, 1.0), 6.0)
    assert return_time(g) == pytest.approx(3.0, abs=1e-12)
    assert section_hits(g)[:2] == [0.0, pytest.approx(3.0, abs=1e-12)]
    with pytest.raises(SectionNotReached):
        return_time(simulate(BEAN.field, (0.0, 1.0), 2.0))


@pytest.mark.parametrize("target", [1.0, 0.5, 0.1, 0.3, 0.7, 0.95])
def test_exit_tokens_reach_target(target):
    assert next_beat(BEAN.field, 0.6, exit_tokens_for(target)) == pytest.approx(target, abs=1e-12)


def test_bean_trajectory_and_return_map():
    beats = [0.8, 0.25, 1.0, 0.6]
    g = bean_trajectory(beats)
    assert list(beat_values(g).values()) == pytest.approx(beats, abs=1e-12)
    eta = return_time(g)
    t, tt = beat_times(g), beat_times(return_map(g))
    for j in tt:
        if j + 1 in t:
            assert tt[j] == pytest.approx(t[j + 1] - eta, abs=1e-12)


def test_bean_branch_search():
    tokens, got = bean_branch_to(BEAN.field, 0.4, 0.123)
    assert got == pytest.approx(0.123, abs=1e-6)
    assert next_beat(BEAN.field, 0.4, tokens) == pytest.approx(got, abs=1e-12)


def test_random_policy_is_reproducible():
    a = simulate(K3.field, (-0.5, 0.0), 6.0, policy="random", rng=np.random.default_rng(3))
    b = simulate(K3.field, (-0.5, 0.0), 6.0, policy="random", rng=np.random.default_rng(3))
    assert a.branch_log == b.branch_log


def test_sampling_covers_arcs():
    g = simulate(INF.field, (0.0, 0.0), 3.0, choices=["X", "X", "Y"])
    pts = g.sample(per_arc=32)
    assert len(pts) >= 3 * 32
    assert np.allclose(pts[0], (0, 0)) and np.allclose(pts[-1], (1.0, 0.0), atol=1e-12)
