import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashbc.bestresponse import best_response
from nashbc.bnc import Status, check_ne, solve
from nashbc.flowgame import (FlowError, FlowInstance, FlowPlayer, GenParams, InvalidBound,
                             check_implementation, decode, default_price_bound, dump_flow,
                             encode, fg1, flow_from_dict, flow_to_dict, generate,
                             is_flow_document, load, price_floor, profile)
from nashbc.model import eval_constraints


def test_fg1_encoding():
    inst = fg1()
    assert price_floor(inst) == 6.0
    assert default_price_bound(inst) == 7.0
    g = encode(inst)
    assert [(b.k, b.l) for b in g.players] == [(3, 0), (0, 2)]
    assert g.integrality_flag


def test_price_bound_must_exceed_floor():
    inst = fg1()
    bad = FlowInstance(inst.n_nodes, inst.edges, inst.capacity, inst.players, inst.target,
                       (6.0, 7.0))
    with pytest.raises(InvalidBound):
        encode(bad)


def test_inactive_player_sends_nothing():
    g = encode(fg1())
    assert np.all(eval_constraints(g, [0, 0, 0, 1, 1]) <= 0)
    for flows in ([1, 0], [0, 1]):
        assert np.any(eval_constraints(g, flows + [0, 1, 1]) > 0)


def test_unreachable_sink_leaves_zero_flow():
    inst = FlowInstance(3, ((0, 1),), (2,), (FlowPlayer(0, 2, 1, (9.0,)),), (0.0,), (19.0,))
    br = best_response(encode(inst), 0, [0, 0, 0])
    assert br.strategy.tolist() == [0.0, 0.0]


def test_fg1_implementation_conditions():
    inst = fg1()
    assert check_implementation(inst, [[0, 1]], [7, 0]).all
    res = check_implementation(inst, [[0, 0]], [0, 1])
    assert not res.slack_edges_free
    res = check_implementation(inst, [[0, 1]], [8, 0])
    assert not res.prices_bounded
    # at zero prices the player prefers the more valuable first edge
    assert not check_implementation(inst, [[0, 1]], [0, 0]).equilibrium


def test_fg1_solve_implements_target():
    inst = fg1()
    res = solve(encode(inst), 1.0, 0.0)
    assert res.status is Status.NE_FOUND
    prof = decode(inst, res.witness)
    assert check_implementation(inst, prof.flows, prof.prices).all


def test_profile_round_trip():
    inst = fg1()
    x = profile(inst, [[0, 1]], [7.0, 0.0])
    assert x.tolist() == [0, 1, 1, 7, 0]
    prof = decode(inst, x)
    assert prof.flows == ((0, 1),) and prof.active == (1,) and prof.prices == (7.0, 0.0)
    assert load(inst, prof.flows).tolist() == [0.0, 1.0]
    with pytest.raises(FlowError):
        profile(inst, [[0, 1], [1, 0]], [0, 0])


def test_generator_seed_one():
    inst = generate(GenParams(2, 2, 1, seed=1))
    assert inst.edges == ((0, 1), (0, 1))
    assert inst.capacity == (2, 1)
    assert inst.players == (FlowPlayer(0, 1, 2, (5.0, 1.0)),)
    assert inst.target == (1.0, 1.0)
    assert inst.p_max == (21.0, 21.0)


@pytest.mark.parametrize("seed", range(10))
def test_generator_deterministic_and_valid(seed):
    params = GenParams(5, 8, 3, seed=seed)
    a, b = generate(params), generate(params)
    assert dump_flow(a) == dump_flow(b)
    assert a.n_edges == 8 and a.n_players == 3
    a.validate()


def test_authority_only_game():
    inst = generate(GenParams(3, 3, 0, seed=4))
    assert inst.n_players == 0
    res = solve(encode(inst), 1.0, 0.0)
    assert res.status is Status.NE_FOUND
    assert res.witness.tolist() == [0.0, 0.0, 0.0]


def test_document_round_trip():
    inst = generate(GenParams(4, 6, 2, seed=7))
    doc = json.loads(dump_flow(inst))
    assert is_flow_document(doc)
    assert flow_from_dict(doc) == inst
    assert flow_to_dict(flow_from_dict(doc)) == doc
    with pytest.raises(FlowError):
        flow_from_dict({"format": "flow-instance", "nodes": 2})
    assert not is_flow_document({"mode": "NEP"})


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), draw=st.integers(0, 10_000))
def test_implementation_matches_exact_equilibrium(seed, draw):
    inst = generate(GenParams(3, 4, 2, seed=seed))
    g = encode(inst)
    rng = np.random.default_rng(draw)
    pmax = np.asarray(inst.p_max)
    prices = np.where(rng.random(inst.n_edges) < 0.5, 0.0,
                      np.round(rng.uniform(0, 1, inst.n_edges) * pmax))
    m = inst.n_edges
    point = np.zeros(inst.n_players * (m + 1))
    x = np.concatenate([point, prices])
    flows = []
    for i in range(inst.n_players):
        if rng.random() < 0.7:
            own = best_response(g, i, x).strategy[:m]
        else:
            own = np.zeros(m)
        flows.append([int(v) for v in own])
    impl = check_implementation(inst, flows, prices)
    exact = check_ne(g, profile(inst, flows, prices), 1.0, 0.0).is_ne
    assert impl.all == (impl.load_within_target and exact)
