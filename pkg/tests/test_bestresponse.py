from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashbc.bestresponse import Infeasible, best_response, mip_minimize
from nashbc.flowgame import encode, fg1
from nashbc.instances import random_game
from nashbc.model import Game, LinearRow, Mode, PlayerBlock, QuadraticCost, Structure
from nashbc.oracle import Oracle


def test_integer_player_takes_largest():
    g = Game(Mode.NEP, (PlayerBlock(1, 0, (0.0,), (2.0,)),), (),
             (QuadraticCost(0, 0.0, {0: -1.0}, (), Structure.CONVEX_IN_ALL),))
    br = best_response(g, 0, [0.0])
    assert br.strategy.tolist() == [2.0]
    assert br.value == -2.0


def test_fg1_flow_player_routes_on_cheap_edge():
    g = encode(fg1())
    br = best_response(g, 0, [0, 0, 0, 7, 0])
    assert br.strategy.tolist() == [0.0, 1.0, 1.0]
    assert br.value == -1.0


def test_fg1_authority_zero_objective():
    g = encode(fg1())
    br = best_response(g, 1, [0, 1, 1, 3, 3])
    assert br.value == 0.0
    assert br.strategy.tolist() == [0.0, 0.0]


def test_mip_lower_bound_forces_one():
    res = mip_minimize([1.0], np.array([[-1.0]]), [-0.4], [0.0], [1.0], [True])
    assert res.point.tolist() == [1.0]
    assert res.value == 1.0


def test_mip_tie_break():
    res = mip_minimize([-1.0, -1.0], np.array([[1.0, 1.0]]), [1.5], [0, 0], [1, 1], [True, True])
    assert res.value == -1.0
    assert res.point.tolist() == [1.0, 0.0]


def test_mip_empty_region():
    with pytest.raises(Infeasible):
        mip_minimize([0.0], np.array([[1.0], [-1.0]]), [-1.0, 0.0], [-5.0], [5.0], [False])


def test_gnep_best_response_infeasible_when_rivals_overload():
    players = (PlayerBlock(1, 0, (1.0,), (2.0,)),) * 2
    rows = (LinearRow(0, {0: 1.0, 1: 1.0}, 2.0),)
    costs = tuple(QuadraticCost(i, 0.0, {i: -1.0}, (), Structure.CONVEX_IN_ALL) for i in range(2))
    g = Game(Mode.GNEP, players, rows, costs)
    with pytest.raises(Infeasible):
        best_response(g, 0, [1.0, 2.0])


@pytest.mark.parametrize("seed", range(60))
@pytest.mark.parametrize("mode", ["NEP", "GNEP"])
def test_matches_enumeration(seed, mode):
    g = random_game(seed, mode)
    oracle = Oracle(g)
    for d in oracle.data:
        for i in range(g.n_players):
            br = best_response(g, i, d.profile)
            assert abs(br.value - float(d.br_values[i])) <= 1e-9
            own = tuple(int(round(v)) for v in br.strategy)
            assert own in d.br_sets[i]


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 3))
def test_extra_bound_never_lowers_value(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    c = rng.integers(-5, 6, size=n).astype(float)
    A = rng.integers(-3, 4, size=(2, n)).astype(float)
    b = rng.integers(0, 6, size=2).astype(float)
    lower, upper = np.zeros(n), np.full(n, 3.0)
    try:
        base = mip_minimize(c, A, b, lower, upper, [True] * n)
    except Infeasible:
        return
    j = int(rng.integers(0, n))
    tight = upper.copy()
    tight[j] = min(upper[j], k - 1)
    try:
        restricted = mip_minimize(c, A, b, lower, tight, [True] * n)
    except Infeasible:
        return
    assert restricted.value >= base.value - 1e-9


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_mip_matches_lattice_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    c = rng.integers(-5, 6, size=n)
    A = rng.integers(-5, 6, size=(int(rng.integers(1, 4)), n))
    b = rng.integers(-2, 8, size=A.shape[0])
    pts = [np.array(p) for p in np.ndindex(*(4,) * n) if np.all(A @ np.array(p) <= b)]
    if not pts:
        with pytest.raises(Infeasible):
            mip_minimize(c, A, b, np.zeros(n), np.full(n, 3.0), [True] * n)
        return
    best = min(Fraction(int(c @ p)) for p in pts)
    res = mip_minimize(c, A, b, np.zeros(n), np.full(n, 3.0), [True] * n)
    assert abs(res.value - float(best)) <= 1e-9
