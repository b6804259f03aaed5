import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashbc.flowgame import encode, fg1
from nashbc.instances import gmp2, gnep_toy, random_game, t1
from nashbc.model import (Game, LinearRow, Mode, ParseError, PlayerBlock, ProductLinearizer,
                          QuadraticCost, Structure, UnsupportedTerm, ValidationError,
                          compute_proxy_bounds, dump_instance, eval_constraints, eval_cost,
                          game_to_dict, linearize_bilinear, load_instance)
from nashbc.oracle import Oracle

ONE_PLAYER = {
    "mode": "NEP",
    "players": [{"k": 1, "l": 0, "lower": [0], "upper": [1]}],
    "constraints": [],
    "costs": [{"owner": 0, "constant": 0, "linear": {"0": 1}, "quadratic": [],
               "structure": "ConvexInAll"}],
    "integrality_flag": False,
}


def single(cost: QuadraticCost, lower=0.0, upper=1.0, k=1, l=0) -> Game:
    return Game(Mode.NEP, (PlayerBlock(k, l, (lower,), (upper,)),), (), (cost,))


def test_load_minimal_document():
    g = load_instance(json.dumps(ONE_PLAYER))
    assert g.n_players == 1
    assert g.n_vars == 1


def test_fg1_encoding_counts():
    g = encode(fg1())
    assert g.n_players == 2
    assert g.n_vars == 5
    assert list(g.is_integer) == [True, True, True, False, False]


def test_missing_rhs_is_parse_error():
    doc = dict(ONE_PLAYER, constraints=[{"owner": 0, "coeffs": {"0": 1}}])
    with pytest.raises(ParseError):
        load_instance(json.dumps(doc))


def test_not_json_is_parse_error():
    with pytest.raises(ParseError):
        load_instance("{not json")


def test_unbounded_variable_rejected():
    with pytest.raises(ValidationError):
        Game(Mode.NEP, (PlayerBlock(0, 1, (None,), (1.0,)),), (),
             (QuadraticCost(0, 0.0, {}, (), Structure.CONVEX_IN_ALL),))


def test_nep_row_on_rival_rejected():
    players = (PlayerBlock(1, 0, (0.0,), (1.0,)),) * 2
    costs = tuple(QuadraticCost(i, 0.0, {}, (), Structure.CONVEX_IN_ALL) for i in range(2))
    with pytest.raises(ValidationError):
        Game(Mode.NEP, players, (LinearRow(0, {0: 1.0, 1: 1.0}, 1.0),), costs)
    Game(Mode.GNEP, players, (LinearRow(0, {0: 1.0, 1: 1.0}, 1.0),), costs)


def test_structure_tag_mismatch_rejected():
    with pytest.raises(ValidationError):
        single(QuadraticCost(0, 0.0, {}, ((0, 0, -1.0),), Structure.CONVEX_IN_ALL))
    with pytest.raises(ValidationError):
        single(QuadraticCost(0, 0.0, {}, ((0, 0, 1.0),), Structure.CONCAVE_LINEAR_IN_RIVALS))
    players = (PlayerBlock(1, 0, (0.0,), (1.0,)),) * 2
    own_own = QuadraticCost(0, 0.0, {}, ((0, 0, 1.0),), Structure.BILINEAR_OWN_RIVAL)
    with pytest.raises(ValidationError):
        Game(Mode.NEP, players, (), (own_own, QuadraticCost(1, 0.0, {}, (), Structure.CONVEX_IN_ALL)))


def test_eval_cost_examples():
    g = single(QuadraticCost(0, 0.0, {0: -2.0}, ((0, 0, 1.0),), Structure.CONVEX_IN_ALL),
               upper=3.0)
    assert eval_cost(g, 0, [1.0]) == -1.0
    f = encode(fg1())
    # flow player, unit flow on edge 2, zero prices
    assert eval_cost(f, 0, [0, 1, 1, 0, 0]) == -1.0
    # authority at load == target pays nothing whatever the price
    for p in ([0, 0], [7, 7], [3, 1]):
        assert eval_cost(f, 1, [0, 1, 1] + p) == 0.0


def test_eval_constraints_examples():
    g = gnep_toy()
    assert eval_constraints(g, [1, 1])[0] == 0.0
    assert eval_constraints(g, [2, 2])[0] == 2.0
    f = encode(fg1())
    assert np.all(eval_constraints(f, [0, 1, 1, 0, 0])[:4] == 0.0)


def test_proxy_bounds_examples():
    pb = compute_proxy_bounds(t1())
    assert (pb.phi_plus[0], pb.pihat_minus[0]) == (1.0, 0.0)
    players = (PlayerBlock(1, 0, (0.0,), (1.0,)), PlayerBlock(0, 1, (0.0,), (10.0,)))
    costs = (QuadraticCost(0, 0.0, {0: -3.0}, ((0, 1, 1.0),), Structure.BILINEAR_OWN_RIVAL),
             QuadraticCost(1, 0.0, {}, (), Structure.CONVEX_IN_ALL))
    pb = compute_proxy_bounds(Game(Mode.NEP, players, (), costs))
    assert (pb.phi_plus[0], pb.pihat_minus[0]) == (7.0, -3.0)
    pb = compute_proxy_bounds(single(QuadraticCost(0, 5.0, {}, (), Structure.CONVEX_IN_ALL)))
    assert (pb.phi_plus[0], pb.pihat_minus[0]) == (5.0, 5.0)


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("mode", ["NEP", "GNEP"])
def test_proxy_bounds_sound_on_enumerable_games(seed, mode):
    g = random_game(seed, mode)
    pb = compute_proxy_bounds(g)
    for d in Oracle(g).data:
        assert all(float(v) <= pb.phi_plus[i] + 1e-9 for i, v in enumerate(d.br_values))
        assert all(float(v) >= pb.pihat_minus[i] - 1e-9 for i, v in enumerate(d.costs))


@pytest.mark.parametrize("seed", range(20))
def test_round_trip_is_exact(seed):
    g = random_game(seed, "GNEP")
    again = load_instance(dump_instance(g))
    assert game_to_dict(again) == game_to_dict(g)


def _rows_force(lin: ProductLinearizer, x: np.ndarray) -> np.ndarray:
    """Check the lifted point satisfies every auxiliary row, return it."""
    full = np.concatenate([x, lin.lift(x)])
    for row in lin.rows:
        r = sum(c * full[j] for j, c in row.coeffs.items()) - row.rhs
        if row.equality:
            assert abs(r) <= 1e-9
        else:
            assert r <= 1e-9
    return full


def test_binary_times_continuous_mccormick():
    lin = ProductLinearizer([0.0, 0.0], [1.0, 5.0], [True, False])
    w = lin.product(0, 1)
    assert lin.n_aux == 1
    assert len(lin.rows) == 4
    full = _rows_force(lin, np.array([1.0, 2.0]))
    assert sum(c * full[j] for j, c in w.items()) == 2.0


def test_two_bit_expansion_exact():
    P = 4.0
    lin = ProductLinearizer([0.0, 0.0], [3.0, P], [True, False])
    w = lin.product(0, 1)
    for x in range(4):
        for p in (0.0, P / 2, P):
            full = _rows_force(lin, np.array([float(x), p]))
            assert sum(c * full[j] for j, c in w.items()) == x * p


def test_no_products_is_identity():
    ext = linearize_bilinear(gnep_toy())
    assert ext.n_aux == 0
    assert ext.rows == []


def test_continuous_times_continuous_unsupported():
    lin = ProductLinearizer([0.0, 0.0], [1.0, 1.0], [False, False])
    with pytest.raises(UnsupportedTerm):
        lin.product(0, 1)


@settings(max_examples=1000, deadline=None)
@given(lo=st.integers(-3, 2), width=st.integers(0, 6),
       plo=st.floats(-5, 0), pw=st.floats(0, 10), u=st.floats(0, 1), k=st.integers(0, 6))
def test_linearization_exact_at_integral_points(lo, width, plo, pw, u, k):
    x = lo + min(k, width)
    p = plo + u * pw
    lin = ProductLinearizer([lo, plo], [lo + width, plo + pw], [True, False])
    w = lin.product(0, 1)
    full = _rows_force(lin, np.array([float(x), p]))
    assert abs(sum(c * full[j] for j, c in w.items()) - x * p) <= 1e-12 * max(1.0, abs(x * p))


def test_gmp2_linearized_costs_exact():
    g = gmp2()
    ext = linearize_bilinear(g)
    for x in ([0, 0], [0, 1], [1, 0], [1, 1]):
        full = np.concatenate([x, ext.lift(x)])
        for i in range(2):
            const, coeffs = ext.linear_cost(i)
            assert const + sum(c * full[j] for j, c in coeffs.items()) == eval_cost(g, i, x)
