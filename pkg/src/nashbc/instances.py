"""Small named games and a seeded random generator for all-integer games."""

from __future__ import annotations

import numpy as np

from .model import Game, LinearRow, Mode, PlayerBlock, QuadraticCost, Structure


def _binary_players(n: int) -> tuple[PlayerBlock, ...]:
    return tuple(PlayerBlock(1, 0, (0.0,), (1.0,)) for _ in range(n))


def t1() -> Game:
    """One player choosing x in {0, 1} with cost x."""
    cost = QuadraticCost(0, 0.0, {0: 1.0}, (), Structure.CONVEX_IN_ALL)
    return Game(Mode.NEP, _binary_players(1), (), (cost,))


def gmp2() -> Game:
    """Two binary players with no pure NE; every profile is a (2,0)-NE."""
    c1 = QuadraticCost(0, 2.0, {0: -1.0, 1: -1.0}, ((0, 1, 2.0),), Structure.BILINEAR_OWN_RIVAL)
    c2 = QuadraticCost(1, 1.0, {0: 1.0, 1: 1.0}, ((0, 1, -2.0),), Structure.BILINEAR_OWN_RIVAL)
    return Game(Mode.NEP, _binary_players(2), (), (c1, c2), integrality_flag=True)


def matching_pennies() -> Game:
    """0/1 matching pennies: some player always has pi = 1 while Phi = 0."""
    c1 = QuadraticCost(0, 1.0, {0: -1.0, 1: -1.0}, ((0, 1, 2.0),), Structure.BILINEAR_OWN_RIVAL)
    c2 = QuadraticCost(1, 0.0, {0: 1.0, 1: 1.0}, ((0, 1, -2.0),), Structure.BILINEAR_OWN_RIVAL)
    return Game(Mode.NEP, _binary_players(2), (), (c1, c2), integrality_flag=True)


def gnep_toy() -> Game:
    """x_i in {0, 1, 2}, shared row x_1 + x_2 <= 2, cost -x_i."""
    players = tuple(PlayerBlock(1, 0, (0.0,), (2.0,)) for _ in range(2))
    rows = tuple(LinearRow(i, {0: 1.0, 1: 1.0}, 2.0) for i in range(2))
    costs = tuple(QuadraticCost(i, 0.0, {i: -1.0}, (), Structure.CONVEX_IN_ALL) for i in range(2))
    return Game(Mode.GNEP, players, rows, costs, integrality_flag=True)


NAMED = {
    "t1": t1,
    "gmp2": gmp2,
    "matching-pennies": matching_pennies,
    "gnep-toy": gnep_toy,
}


def random_game(seed: int, mode: Mode | str = Mode.NEP) -> Game:
    """All-integer game with 2-3 players, at most 5 strategies each and
    integer data in [-5, 5].

    Each player's cost class is drawn from: bilinear own x rival terms,
    convex squares of any variable, or concave squares of own variables.
    GNEP games get coupling rows satisfied by a random reference profile.
    """
    mode = Mode(mode)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    players = []
    for _ in range(n):
        if rng.random() < 0.5:
            lo = int(rng.integers(-2, 2))
            width = int(rng.integers(1, 5))
            players.append(PlayerBlock(1, 0, (float(lo),), (float(lo + width),)))
        else:
            players.append(PlayerBlock(2, 0, (0.0, 0.0), (1.0, 1.0)))
    offsets = np.cumsum([0] + [p.size for p in players])
    nv = int(offsets[-1])
    owner = np.repeat(np.arange(n), [p.size for p in players])

    def data(lo: int = -5, hi: int = 5) -> float:
        return float(rng.integers(lo, hi + 1))

    costs = []
    for i in range(n):
        own = list(range(offsets[i], offsets[i + 1]))
        rivals = [j for j in range(nv) if owner[j] != i]
        linear = {j: data() for j in range(nv) if rng.random() < 0.7}
        kind = int(rng.integers(0, 3))
        quad = []
        if kind == 0:
            for a in own:
                for b in rivals:
                    if rng.random() < 0.5:
                        quad.append((a, b, data()))
            tag = Structure.BILINEAR_OWN_RIVAL
        elif kind == 1:
            for j in range(nv):
                if rng.random() < 0.4:
                    quad.append((j, j, data(0, 3)))
            tag = Structure.CONVEX_IN_ALL
        else:
            for j in own:
                if rng.random() < 0.6:
                    quad.append((j, j, data(-3, 0)))
            tag = Structure.CONCAVE_LINEAR_IN_RIVALS
        quad = [t for t in quad if t[2] != 0]
        costs.append(QuadraticCost(i, data(), {j: v for j, v in linear.items() if v},
                                   tuple(quad), tag))

    rows = []
    ref = [float(rng.integers(int(players[owner[j]].lower[j - offsets[owner[j]]]),
                              int(players[owner[j]].upper[j - offsets[owner[j]]]) + 1))
           for j in range(nv)]
    for i in range(n):
        if mode is Mode.NEP:
            own = list(range(offsets[i], offsets[i + 1]))
            if len(own) == 2 and rng.random() < 0.4:
                rows.append(LinearRow(i, {own[0]: 1.0, own[1]: 1.0}, 1.0))
            continue
        for _ in range(int(rng.integers(1, 3))):
            coeffs = {j: data(-3, 3) for j in range(nv) if rng.random() < 0.6}
            coeffs = {j: v for j, v in coeffs.items() if v}
            if not coeffs:
                continue
            rhs = sum(v * ref[j] for j, v in coeffs.items()) + float(rng.integers(0, 3))
            rows.append(LinearRow(i, coeffs, float(rhs)))
    return Game(mode, tuple(players), tuple(rows), tuple(costs), integrality_flag=True)
