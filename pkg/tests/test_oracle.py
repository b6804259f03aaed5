import math
from fractions import Fraction

import pytest

from nashbc.flowgame import encode, fg1
from nashbc.instances import gmp2, gnep_toy, matching_pennies, random_game, t1
from nashbc.model import Game, Mode, PlayerBlock, QuadraticCost, Structure
from nashbc.oracle import (UNBOUNDED, HasContinuous, Oracle, TooLarge, brute_alpha_min,
                           brute_br_family, brute_ne_set, enumerate_profiles)


def test_enumerate_profiles_examples():
    assert enumerate_profiles(t1()) == [(0,), (1,)]
    assert len(enumerate_profiles(gmp2())) == 4
    assert len(enumerate_profiles(gnep_toy())) == 6


def test_ne_sets():
    assert brute_ne_set(t1(), 1.0) == [(0,)]
    assert brute_ne_set(gmp2(), 1.0) == []
    assert sorted(brute_ne_set(gmp2(), 2.0)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert sorted(brute_ne_set(gnep_toy(), 1.0)) == [(0, 2), (1, 1), (2, 0)]


def test_alpha_min():
    assert brute_alpha_min(gmp2()) == 2
    assert brute_alpha_min(t1()) == 1
    assert brute_alpha_min(matching_pennies()) == UNBOUNDED


def test_br_families():
    assert brute_br_family(t1(), 0) == {frozenset({(0,)})}
    assert brute_br_family(gmp2(), 0) == {frozenset({(1,)}), frozenset({(0,)})}
    const = Game(Mode.NEP, (PlayerBlock(1, 0, (0.0,), (2.0,)),), (),
                 (QuadraticCost(0, 3.0, {}, (), Structure.CONVEX_IN_ALL),))
    assert brute_br_family(const, 0) == {frozenset({(0,), (1,), (2,)})}


def test_scope_errors():
    with pytest.raises(HasContinuous):
        Oracle(encode(fg1()))
    big = Game(Mode.NEP, tuple(PlayerBlock(1, 0, (0.0,), (99.0,)) for _ in range(4)), (),
               tuple(QuadraticCost(i, 0.0, {}, (), Structure.CONVEX_IN_ALL) for i in range(4)))
    with pytest.raises(TooLarge):
        Oracle(big)


def test_alpha_interval_signs():
    o = Oracle(gnep_toy())
    d = next(d for d in o.data if d.profile == (1, 1))
    # Phi = (-1, -1) and pi = (-1, -1): the interval is capped at alpha = 1
    assert d.alpha_interval() == (Fraction(1), Fraction(1))
    d = next(d for d in Oracle(matching_pennies()).data if d.profile == (0, 0))
    assert d.alpha_interval() is None


def test_report_is_consistent():
    o = Oracle(gmp2())
    rep = o.report(2.0).to_dict()
    assert rep["alpha_min"] == 2
    assert rep["br_family_sizes"] == [2, 2]
    inside = [p["x"] for p in rep["profiles"]
              if p["alpha_interval"] is not None and Fraction(p["alpha_interval"][0]) <= 2]
    assert sorted(inside) == sorted(rep["ne_set"])


@pytest.mark.parametrize("seed", range(60))
@pytest.mark.parametrize("mode", ["NEP", "GNEP"])
def test_alpha_min_cross_validation(seed, mode):
    o = Oracle(random_game(seed, mode))
    amin = o.alpha_min()
    if amin == UNBOUNDED:
        assert all(d.alpha_interval() is None for d in o.data)
        return
    assert o.ne_set(amin)
    below = float(amin) - 1e-9
    if below >= 1:
        assert not o.ne_set(below)
