"""Integral-flow pricing games.

A set of flow players each route an integral demand from a source to a sink
(or send nothing at all), paying ``(p - mu_i) . x_i``. A pricing authority
picks edge prices ``p`` in ``[0, p_max]`` and pays ``(u - load) . p``, where
``u`` is a target edge load. Exact equilibria of this game are precisely the
price/flow pairs that weakly implement ``u``.

Variable layout of the encoded game: player ``i`` owns ``|E|`` integer edge
flows followed by one activation binary; the authority (last player) owns
``|E|`` continuous prices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .bestresponse import best_response
from .model import Game, LinearRow, Mode, PlayerBlock, QuadraticCost, Structure

FORMAT = "flow-instance"
CHECK_TOL = 1e-8


class FlowError(ValueError):
    pass


class InvalidBound(FlowError):
    pass


class GenerationFailure(FlowError):
    pass


@dataclass(frozen=True)
class FlowPlayer:
    source: int
    sink: int
    demand: int
    utility: tuple[float, ...]


@dataclass(frozen=True)
class FlowInstance:
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    capacity: tuple[int, ...]
    players: tuple[FlowPlayer, ...]
    target: tuple[float, ...]
    p_max: tuple[float, ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_players(self) -> int:
        return len(self.players)

    def validate(self) -> None:
        m = self.n_edges
        for tail, head in self.edges:
            if not (0 <= tail < self.n_nodes and 0 <= head < self.n_nodes):
                raise FlowError(f"edge ({tail}, {head}) leaves the node range")
        if len(self.capacity) != m or len(self.target) != m or len(self.p_max) != m:
            raise FlowError("capacity, target and p_max need one entry per edge")
        if any(c < 0 or c != int(c) for c in self.capacity):
            raise FlowError("capacities must be nonnegative integers")
        if any(v < 0 for v in self.target):
            raise FlowError("target loads must be nonnegative")
        for k, pl in enumerate(self.players):
            if pl.demand < 1:
                raise FlowError(f"player {k}: demand must be at least 1")
            if len(pl.utility) != m or any(v < 0 for v in pl.utility):
                raise FlowError(f"player {k}: utility needs |E| nonnegative entries")
            if not (0 <= pl.source < self.n_nodes and 0 <= pl.sink < self.n_nodes):
                raise FlowError(f"player {k}: terminal out of range")
        bound = price_floor(self)
        for e, v in enumerate(self.p_max):
            if not v > bound:
                raise InvalidBound(f"p_max[{e}] = {v} must exceed {bound}")


def price_floor(inst: FlowInstance) -> float:
    """The value every price bound has to exceed strictly."""
    mu = max((max(p.utility, default=0.0) for p in inst.players), default=0.0)
    cap = max(inst.capacity, default=0)
    return float(inst.n_edges * mu * cap)


def default_price_bound(inst: FlowInstance) -> float:
    return float(math.floor(price_floor(inst)) + 1)


# ---------------------------------------------------------------- encoding

def encode(inst: FlowInstance) -> Game:
    inst.validate()
    m, n = inst.n_edges, inst.n_players
    players = [PlayerBlock(m + 1, 0, (0.0,) * (m + 1),
                           tuple(float(c) for c in inst.capacity) + (1.0,))
               for _ in range(n)]
    players.append(PlayerBlock(0, m, (0.0,) * m, tuple(float(v) for v in inst.p_max)))
    price = n * (m + 1)

    rows: list[LinearRow] = []
    for i, pl in enumerate(inst.players):
        base = i * (m + 1)
        z = base + m
        for v in range(inst.n_nodes):
            coeffs: dict[int, float] = {}
            for e, (tail, head) in enumerate(inst.edges):
                if tail == head:
                    continue
                if tail == v:
                    coeffs[base + e] = coeffs.get(base + e, 0.0) + 1.0
                elif head == v:
                    coeffs[base + e] = coeffs.get(base + e, 0.0) - 1.0
            supply = pl.demand * ((v == pl.source) - (v == pl.sink))
            if supply:
                coeffs[z] = -float(supply)
            coeffs = {j: c for j, c in coeffs.items() if c}
            if not coeffs:
                continue
            rows.append(LinearRow(i, coeffs, 0.0))
            rows.append(LinearRow(i, {j: -c for j, c in coeffs.items()}, 0.0))
        for e, cap in enumerate(inst.capacity):
            rows.append(LinearRow(i, {base + e: 1.0, z: -float(cap)}, 0.0))

    costs = []
    for i, pl in enumerate(inst.players):
        base = i * (m + 1)
        linear = {base + e: -float(mu) for e, mu in enumerate(pl.utility) if mu}
        quad = tuple((base + e, price + e, 1.0) for e in range(m))
        costs.append(QuadraticCost(i, 0.0, linear, quad, Structure.BILINEAR_OWN_RIVAL))
    linear = {price + e: float(u) for e, u in enumerate(inst.target) if u}
    quad = tuple((price + e, i * (m + 1) + e, -1.0) for i in range(n) for e in range(m))
    structure = Structure.BILINEAR_OWN_RIVAL if quad else Structure.CONVEX_IN_ALL
    costs.append(QuadraticCost(n, 0.0, linear, quad, structure))
    # every player's cost is linear in its own variables once rivals are
    # fixed, so best-response cuts stay valid without a row-integrality check
    return Game(Mode.NEP, tuple(players), tuple(rows), tuple(costs), integrality_flag=True)


@dataclass(frozen=True)
class FlowProfile:
    flows: tuple[tuple[int, ...], ...]
    active: tuple[int, ...]
    prices: tuple[float, ...]


def profile(inst: FlowInstance, flows: Sequence[Sequence[float]],
            prices: Sequence[float]) -> np.ndarray:
    """Point of the encoded game; a player is active when it sends flow."""
    out: list[float] = []
    for x in flows:
        out.extend(float(v) for v in x)
        out.append(1.0 if any(v > 0 for v in x) else 0.0)
    out.extend(float(v) for v in prices)
    if len(flows) != inst.n_players or len(out) != inst.n_players * (inst.n_edges + 1) + inst.n_edges:
        raise FlowError("profile shape does not match the instance")
    return np.asarray(out)


def decode(inst: FlowInstance, point: Sequence[float]) -> FlowProfile:
    m = inst.n_edges
    point = list(point)
    flows, active = [], []
    for i in range(inst.n_players):
        block = point[i * (m + 1):(i + 1) * (m + 1)]
        flows.append(tuple(int(round(v)) for v in block[:m]))
        active.append(int(round(block[m])))
    prices = tuple(float(v) for v in point[inst.n_players * (m + 1):])
    return FlowProfile(tuple(flows), tuple(active), prices)


def load(inst: FlowInstance, flows: Sequence[Sequence[float]]) -> np.ndarray:
    total = np.zeros(inst.n_edges)
    for x in flows:
        total += np.asarray(x, dtype=float)
    return total


@dataclass(frozen=True)
class Implementation:
    load_within_target: bool
    equilibrium: bool
    slack_edges_free: bool
    prices_bounded: bool

    @property
    def all(self) -> bool:
        return (self.load_within_target and self.equilibrium
                and self.slack_edges_free and self.prices_bounded)


def check_implementation(inst: FlowInstance, flows: Sequence[Sequence[float]],
                         prices: Sequence[float], tol: float = CHECK_TOL) -> Implementation:
    p = np.asarray(prices, dtype=float)
    u = np.asarray(inst.target, dtype=float)
    ell = load(inst, flows)
    within = bool(np.all(ell <= u + tol))
    free = bool(np.all((ell >= u - tol) | (np.abs(p) <= tol)))
    bounded = bool(np.all(p <= np.asarray(inst.p_max) + tol))
    game = encode(inst)
    x = profile(inst, flows, prices)
    eq = True
    for i in range(inst.n_players):
        br = best_response(game, i, x)
        pi = game.costs[i].value(x)
        if pi > br.value + tol * max(1.0, abs(br.value)):
            eq = False
            break
    return Implementation(within, eq, free, bounded)


# ---------------------------------------------------------------- generation

@dataclass(frozen=True)
class GenParams:
    nodes: int
    edges: int
    players: int
    demand_range: tuple[int, int] = (1, 2)
    mu_range: tuple[int, int] = (0, 5)
    capacity_range: tuple[int, int] = (1, 2)
    seed: int = 0
    common_source: bool = False
    common_utility: bool = False


def _reachable(n: int, edges: Sequence[tuple[int, int]], s: int) -> set[int]:
    seen, todo = {s}, [s]
    while todo:
        v = todo.pop()
        for a, b in edges:
            if a == v and b not in seen:
                seen.add(b)
                todo.append(b)
    return seen


def _random_unit_path(rng: np.random.Generator, edges: Sequence[tuple[int, int]],
                      room: np.ndarray, s: int, t: int) -> list[int] | None:
    """Edge indices of an s-t path using only edges with room left."""
    def walk(v: int, seen: set[int]) -> list[int] | None:
        if v == t:
            return []
        out = [e for e, (a, b) in enumerate(edges) if a == v and room[e] > 0 and b not in seen]
        for e in rng.permutation(out):
            rest = walk(edges[e][1], seen | {edges[e][1]})
            if rest is not None:
                return [int(e)] + rest
        return None
    return walk(s, {s})


def generate(params: GenParams, retries: int = 100) -> FlowInstance:
    """Random instance on a connected acyclic digraph.

    Nodes are put in a random order; node ``k`` gets an edge from a random
    earlier node, and the remaining edges join random ordered pairs, so
    parallel edges may occur. The target load is the load of a random
    feasible joint flow.
    """
    if params.nodes < 2 or params.edges < params.nodes - 1 or params.players < 0:
        raise FlowError("need nodes >= 2, edges >= nodes - 1 and players >= 0")
    rng = np.random.default_rng(params.seed)
    order = [int(v) for v in rng.permutation(params.nodes)]
    edges: list[tuple[int, int]] = []
    for k in range(1, params.nodes):
        edges.append((order[int(rng.integers(0, k))], order[k]))
    while len(edges) < params.edges:
        a, b = sorted(int(v) for v in rng.choice(params.nodes, size=2, replace=False))
        edges.append((order[a], order[b]))
    m = len(edges)
    capacity = tuple(int(v) for v in rng.integers(params.capacity_range[0],
                                                  params.capacity_range[1] + 1, size=m))

    def draw_mu() -> tuple[float, ...]:
        return tuple(float(v) for v in rng.integers(params.mu_range[0], params.mu_range[1] + 1, size=m))

    def draw_pair(source: int | None) -> tuple[int, int]:
        for _ in range(retries):
            s = int(rng.integers(0, params.nodes)) if source is None else source
            reach = sorted(_reachable(params.nodes, edges, s) - {s})
            if reach:
                return s, int(rng.choice(reach))
        raise GenerationFailure("no terminal pair with a connecting path")

    common_s = None
    if params.common_source and params.players:
        common_s = draw_pair(None)[0]
    common_mu = draw_mu() if params.common_utility else None
    players = []
    for _ in range(params.players):
        s, t = draw_pair(common_s)
        d = int(rng.integers(params.demand_range[0], params.demand_range[1] + 1))
        players.append(FlowPlayer(s, t, d, common_mu if common_mu is not None else draw_mu()))

    target = np.zeros(m)
    for pl in players:
        if rng.random() < 0.2:
            continue
        room = np.array(capacity, dtype=float)
        used = np.zeros(m)
        for _ in range(pl.demand):
            path = _random_unit_path(rng, edges, room, pl.source, pl.sink)
            if path is None:
                used[:] = 0
                break
            for e in path:
                room[e] -= 1
                used[e] += 1
        target += used

    inst = FlowInstance(params.nodes, tuple(edges), capacity, tuple(players),
                        tuple(float(v) for v in target), (0.0,) * m)
    bound = default_price_bound(inst)
    inst = FlowInstance(inst.n_nodes, inst.edges, inst.capacity, inst.players,
                        inst.target, (bound,) * m)
    inst.validate()
    return inst


def fg1() -> FlowInstance:
    """Two parallel s-t edges, one player with demand 1."""
    return FlowInstance(2, ((0, 1), (0, 1)), (1, 1), (FlowPlayer(0, 1, 1, (3.0, 1.0)),),
                        (0.0, 1.0), (7.0, 7.0))


# ---------------------------------------------------------------- documents

def flow_to_dict(inst: FlowInstance) -> dict[str, Any]:
    return {
        "format": FORMAT,
        "nodes": inst.n_nodes,
        "edges": [list(e) for e in inst.edges],
        "capacity": list(inst.capacity),
        "target": list(inst.target),
        "p_max": list(inst.p_max),
        "players": [{"source": p.source, "sink": p.sink, "demand": p.demand,
                     "utility": list(p.utility)} for p in inst.players],
    }


def flow_from_dict(doc: Mapping[str, Any]) -> FlowInstance:
    if doc.get("format") != FORMAT:
        raise FlowError(f"not a {FORMAT} document")
    try:
        inst = FlowInstance(
            n_nodes=int(doc["nodes"]),
            edges=tuple((int(a), int(b)) for a, b in doc["edges"]),
            capacity=tuple(int(c) for c in doc["capacity"]),
            players=tuple(FlowPlayer(int(p["source"]), int(p["sink"]), int(p["demand"]),
                                     tuple(float(v) for v in p["utility"]))
                          for p in doc["players"]),
            target=tuple(float(v) for v in doc["target"]),
            p_max=tuple(float(v) for v in doc["p_max"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowError(f"malformed flow instance: {exc}") from None
    inst.validate()
    return inst


def is_flow_document(doc: Any) -> bool:
    return isinstance(doc, Mapping) and doc.get("format") == FORMAT


def dump_flow(inst: FlowInstance) -> str:
    return json.dumps(flow_to_dict(inst), indent=1, sort_keys=True) + "\n"


def read_flow(path: str | Path) -> FlowInstance:
    return flow_from_dict(json.loads(Path(path).read_text("utf-8")))
