"""Game data model: instance I/O, validation, cost evaluation, proxy bounds
and exact linearization of products with an integer factor.

Variables use one global order: player 0's integer variables, player 0's
continuous variables, player 1's integer variables, and so on.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import jsonschema
import numpy as np

# eigenvalue slack for the PSD / NSD structure checks
PSD_TOL = 1e-9


class ModelError(Exception):
    """Base class for instance and model errors."""


class ParseError(ModelError):
    """The instance document is malformed."""


class ValidationError(ModelError):
    """The instance is well-formed but violates a model invariant."""


class UnsupportedTerm(ModelError):
    """A product term cannot be linearized exactly."""


class Mode(str, enum.Enum):
    GNEP = "GNEP"
    NEP = "NEP"


class Structure(str, enum.Enum):
    CONVEX_IN_ALL = "ConvexInAll"
    CONCAVE_LINEAR_IN_RIVALS = "ConcaveAllLinearInRivals"
    BILINEAR_OWN_RIVAL = "BilinearOwnRival"


@dataclass(frozen=True)
class PlayerBlock:
    k: int
    l: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    @property
    def size(self) -> int:
        return self.k + self.l


@dataclass(frozen=True)
class LinearRow:
    """Row ``coeffs . x <= rhs`` belonging to ``g_owner``."""

    owner: int
    coeffs: Mapping[int, float]
    rhs: float

    def residual(self, x: Sequence[float]) -> float:
        return sum(c * x[j] for j, c in self.coeffs.items()) - self.rhs


@dataclass(frozen=True)
class QuadraticCost:
    """``constant + linear . x + sum(coeff * x[a] * x[b])``."""

    owner: int
    constant: float
    linear: Mapping[int, float]
    quadratic: tuple[tuple[int, int, float], ...]
    structure: Structure

    def value(self, x: Sequence[float]) -> float:
        v = self.constant
        for j, c in self.linear.items():
            v += c * x[j]
        for a, b, c in self.quadratic:
            v += c * x[a] * x[b]
        return float(v)

    def gradient(self, x: Sequence[float], n: int) -> np.ndarray:
        g = np.zeros(n)
        for j, c in self.linear.items():
            g[j] += c
        for a, b, c in self.quadratic:
            g[a] += c * x[b]
            g[b] += c * x[a]
        return g

    def matrix(self, n: int) -> np.ndarray:
        """Symmetric Q with quadratic part equal to x^T Q x."""
        q = np.zeros((n, n))
        for a, b, c in self.quadratic:
            if a == b:
                q[a, a] += c
            else:
                q[a, b] += c / 2
                q[b, a] += c / 2
        return q


@dataclass(frozen=True)
class Game:
    mode: Mode
    players: tuple[PlayerBlock, ...]
    constraints: tuple[LinearRow, ...]
    costs: tuple[QuadraticCost, ...]
    integrality_flag: bool = False

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def n_players(self) -> int:
        return len(self.players)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, pos = [], 0
        for blk in self.players:
            out.append(pos)
            pos += blk.size
        out.append(pos)
        return tuple(out)

    @property
    def n_vars(self) -> int:
        return self.offsets[-1]

    def own(self, i: int) -> range:
        return range(self.offsets[i], self.offsets[i + 1])

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([v for blk in self.players for v in blk.lower], dtype=float)

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([v for blk in self.players for v in blk.upper], dtype=float)

    @cached_property
    def is_integer(self) -> np.ndarray:
        mask = np.zeros(self.n_vars, dtype=bool)
        for i, blk in enumerate(self.players):
            mask[self.offsets[i]:self.offsets[i] + blk.k] = True
        return mask

    @cached_property
    def owner_of(self) -> np.ndarray:
        out = np.empty(self.n_vars, dtype=int)
        for i in range(self.n_players):
            out[self.offsets[i]:self.offsets[i + 1]] = i
        return out

    def rows_of(self, i: int) -> list[LinearRow]:
        return [r for r in self.constraints if r.owner == i]

    @property
    def all_integer(self) -> bool:
        return all(blk.l == 0 for blk in self.players)


def _validate(game: Game) -> None:
    n = game.n_players
    if n == 0:
        raise ValidationError("a game needs at least one player")
    for i, blk in enumerate(game.players):
        if len(blk.lower) != blk.size or len(blk.upper) != blk.size:
            raise ValidationError(f"player {i}: bound vectors must have length k+l={blk.size}")
        for j, (lo, hi) in enumerate(zip(blk.lower, blk.upper)):
            if lo is None or hi is None or not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValidationError(f"player {i}, variable {j}: unbounded variable")
            if lo > hi:
                raise ValidationError(f"player {i}, variable {j}: lower bound exceeds upper bound")
            if j < blk.k and (lo != math.floor(lo) or hi != math.floor(hi)):
                raise ValidationError(f"player {i}, variable {j}: integer variable needs integral bounds")
    nv = game.n_vars
    owner = game.owner_of
    for r in game.constraints:
        if not 0 <= r.owner < n:
            raise ValidationError(f"constraint owner {r.owner} out of range")
        for j in r.coeffs:
            if not 0 <= j < nv:
                raise ValidationError(f"constraint references variable {j} out of range")
        if game.mode is Mode.NEP:
            rivals = [j for j, c in r.coeffs.items() if c != 0 and owner[j] != r.owner]
            if rivals:
                raise ValidationError(
                    f"NEP row owned by player {r.owner} references rival variables {rivals}")
    if len(game.costs) != n or any(c.owner != i for i, c in enumerate(game.costs)):
        raise ValidationError("exactly one cost per player, listed in player order, is required")
    for cost in game.costs:
        _validate_cost(game, cost)


def _validate_cost(game: Game, cost: QuadraticCost) -> None:
    nv, i = game.n_vars, cost.owner
    own = set(game.own(i))
    for j in cost.linear:
        if not 0 <= j < nv:
            raise ValidationError(f"cost of player {i} references variable {j} out of range")
    for a, b, _ in cost.quadratic:
        if not (0 <= a < nv and 0 <= b < nv):
            raise ValidationError(f"cost of player {i} references variable out of range")
        if a in own and b in own and not (game.is_integer[a] or game.is_integer[b]):
            raise ValidationError(
                f"cost of player {i}: own continuous x continuous term ({a},{b}) "
                "makes the best response non-linear")
    if not cost.quadratic:
        return
    eig = np.linalg.eigvalsh(cost.matrix(nv))
    tag = cost.structure
    if tag is Structure.CONVEX_IN_ALL:
        if eig.min() < -PSD_TOL:
            raise ValidationError(f"cost of player {i} tagged ConvexInAll is not PSD")
    elif tag is Structure.CONCAVE_LINEAR_IN_RIVALS:
        if eig.max() > PSD_TOL:
            raise ValidationError(f"cost of player {i} tagged ConcaveAllLinearInRivals is not NSD")
        for a, b, _ in cost.quadratic:
            if a not in own and b not in own:
                raise ValidationError(
                    f"cost of player {i} tagged ConcaveAllLinearInRivals has rival-only term ({a},{b})")
    elif tag is Structure.BILINEAR_OWN_RIVAL:
        for a, b, _ in cost.quadratic:
            if (a in own) == (b in own):
                raise ValidationError(
                    f"cost of player {i} tagged BilinearOwnRival has term ({a},{b}) "
                    "that is not own x rival")


# ---------------------------------------------------------------- instance I/O

def _schema() -> dict:
    text = resources.files("nashbc").joinpath("schemas/instance.schema.json").read_text("utf-8")
    return json.loads(text)


_SCHEMA: dict | None = None


def _sparse(d: Mapping[str, float]) -> dict[int, float]:
    return {int(k): float(v) for k, v in sorted(d.items(), key=lambda kv: int(kv[0]))}


def game_from_dict(doc: Mapping[str, Any]) -> Game:
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = _schema()
    try:
        jsonschema.validate(doc, _SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParseError(f"{where}: {exc.message}") from None
    players = tuple(
        PlayerBlock(
            k=p["k"], l=p["l"],
            lower=tuple(None if v is None else float(v) for v in p["lower"]),
            upper=tuple(None if v is None else float(v) for v in p["upper"]),
        )
        for p in doc["players"]
    )
    constraints = tuple(
        LinearRow(owner=r["owner"], coeffs=_sparse(r["coeffs"]), rhs=float(r["rhs"]))
        for r in doc["constraints"]
    )
    costs = tuple(
        QuadraticCost(
            owner=c["owner"],
            constant=float(c["constant"]),
            linear=_sparse(c["linear"]),
            quadratic=tuple((int(a), int(b), float(v)) for a, b, v in c["quadratic"]),
            structure=Structure(c["structure"]),
        )
        for c in sorted(doc["costs"], key=lambda c: c["owner"])
    )
    return Game(
        mode=Mode(doc["mode"]),
        players=players,
        constraints=constraints,
        costs=costs,
        integrality_flag=bool(doc["integrality_flag"]),
    )


def game_to_dict(game: Game) -> dict[str, Any]:
    def sparse(d: Mapping[int, float]) -> dict[str, float]:
        return {str(j): float(v) for j, v in sorted(d.items())}

    return {
        "mode": game.mode.value,
        "players": [
            {"k": b.k, "l": b.l, "lower": list(b.lower), "upper": list(b.upper)}
            for b in game.players
        ],
        "constraints": [
            {"owner": r.owner, "coeffs": sparse(r.coeffs), "rhs": r.rhs}
            for r in game.constraints
        ],
        "costs": [
            {
                "owner": c.owner,
                "constant": c.constant,
                "linear": sparse(c.linear),
                "quadratic": [[a, b, v] for a, b, v in c.quadratic],
                "structure": c.structure.value,
            }
            for c in game.costs
        ],
        "integrality_flag": game.integrality_flag,
    }


def load_instance(document: str | bytes) -> Game:
    """Parse and validate a JSON instance document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a JSON document: {exc}") from None
    return game_from_dict(doc)


def read_instance(path: str | Path) -> Game:
    return load_instance(Path(path).read_text(encoding="utf-8"))


def dump_instance(game: Game) -> str:
    return json.dumps(game_to_dict(game), indent=1) + "\n"


# ---------------------------------------------------------------- evaluation

def eval_cost(game: Game, i: int, point: Sequence[float]) -> float:
    return game.costs[i].value(point)


def eval_constraints(game: Game, point: Sequence[float]) -> np.ndarray:
    """Residuals g(x) = A x - rhs, one entry per row; feasible means all <= tol."""
    return np.array([r.residual(point) for r in game.constraints], dtype=float)


def cost_gradient(game: Game, i: int, point: Sequence[float]) -> np.ndarray:
    return game.costs[i].gradient(point, game.n_vars)


@dataclass(frozen=True)
class ProxyBounds:
    """Box-hull range of each player's cost: phi_plus is an upper bound on
    every best-response value, pihat_minus a lower bound on every cost."""

    phi_plus: np.ndarray
    pihat_minus: np.ndarray


def _imul(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(p), max(p)


def _isq(a: tuple[float, float]) -> tuple[float, float]:
    lo, hi = a
    hi2 = max(lo * lo, hi * hi)
    if lo <= 0 <= hi:
        return 0.0, hi2
    return min(lo * lo, hi * hi), hi2


def cost_range(game: Game, i: int) -> tuple[float, float]:
    """Sound enclosure of cost i over the variable box.

    Each cross term is grouped under one factor (the owner's variable when
    exactly one factor is own, else the lower index) so that expressions
    like (p - mu) * x are evaluated as one interval product.
    """
    cost = game.costs[i]
    own = set(game.own(i))
    box = [(float(l), float(u)) for l, u in zip(game.lower, game.upper)]
    group: dict[int, list[tuple[float, float]]] = {}
    lin = dict(cost.linear)
    squares: dict[int, float] = {}
    for a, b, c in cost.quadratic:
        if a == b:
            squares[a] = squares.get(a, 0.0) + c
            continue
        if (a in own) != (b in own):
            g, o = (a, b) if a in own else (b, a)
        else:
            g, o = min(a, b), max(a, b)
        group.setdefault(g, []).append(_imul((c, c), box[o]))
    lo = hi = cost.constant
    for j in sorted(set(lin) | set(group) | set(squares)):
        factor = (lin.get(j, 0.0), lin.get(j, 0.0))
        for t in group.get(j, []):
            factor = (factor[0] + t[0], factor[1] + t[1])
        t = _imul(box[j], factor)
        if j in squares:
            s = _imul((squares[j], squares[j]), _isq(box[j]))
            t = (t[0] + s[0], t[1] + s[1])
        lo += t[0]
        hi += t[1]
    return lo, hi


def compute_proxy_bounds(game: Game) -> ProxyBounds:
    rng = [cost_range(game, i) for i in range(game.n_players)]
    return ProxyBounds(
        phi_plus=np.array([r[1] for r in rng]),
        pihat_minus=np.array([r[0] for r in rng]),
    )


# ---------------------------------------------------------------- linearization

@dataclass(frozen=True)
class AuxRow:
    """Row over base + auxiliary indices; ``equality`` rows hold with ==."""

    coeffs: Mapping[int, float]
    rhs: float
    equality: bool = False


class ProductLinearizer:
    """Accumulates auxiliary variables that represent products exactly at
    points where every integer variable is integral.

    An integer factor x in [L, U] is written as L + sum 2^k z_k with binary
    bits z_k; each bit times the other factor y gets one McCormick variable
    v = z*y, which the four McCormick rows force to equal z*y whenever z is
    0 or 1. Binary factors are used directly as their own single bit.
    """

    def __init__(self, lower: Sequence[float], upper: Sequence[float],
                 is_integer: Sequence[bool]):
        self.n_base = len(lower)
        self._lo = [float(v) for v in lower]
        self._hi = [float(v) for v in upper]
        self._int = [bool(v) for v in is_integer]
        self.aux_defs: list[tuple] = []
        self.rows: list[AuxRow] = []
        self.products: dict[tuple[int, int], dict[int, float]] = {}
        self._expansions: dict[int, tuple[int, list[tuple[int, int]]]] = {}
        self._mc: dict[tuple[int, int], int] = {}

    def _new(self, lo: float, hi: float, integer: bool, definition: tuple) -> int:
        self._lo.append(lo)
        self._hi.append(hi)
        self._int.append(integer)
        self.aux_defs.append(definition)
        return len(self._lo) - 1

    def _expand(self, j: int) -> tuple[int, list[tuple[int, int]]]:
        if j in self._expansions:
            return self._expansions[j]
        lo, hi = int(round(self._lo[j])), int(round(self._hi[j]))
        if hi == lo:
            exp = (lo, [])
        elif lo == 0 and hi == 1:
            exp = (0, [(j, 1)])
        else:
            nbits = (hi - lo).bit_length()
            bits = [(self._new(0.0, 1.0, True, ("bit", j, k)), 1 << k) for k in range(nbits)]
            coeffs = {j: 1.0}
            for z, w in bits:
                coeffs[z] = -float(w)
            self.rows.append(AuxRow(coeffs, float(lo), equality=True))
            exp = (lo, bits)
        self._expansions[j] = exp
        return exp

    def _mccormick(self, z: int, y: int) -> int:
        key = (z, y)
        if key in self._mc:
            return self._mc[key]
        ly, uy = self._lo[y], self._hi[y]
        v = self._new(min(0.0, ly), max(0.0, uy), False, ("prod", z, y))
        self.rows += [
            AuxRow({z: ly, v: -1.0}, 0.0),                       # v >= ly z
            AuxRow({y: 1.0, z: uy, v: -1.0}, uy),                 # v >= y - uy (1 - z)
            AuxRow({v: 1.0, z: -uy}, 0.0),                        # v <= uy z
            AuxRow({v: 1.0, y: -1.0, z: -ly}, -ly),               # v <= y - ly (1 - z)
        ]
        self._mc[key] = v
        return v

    def product(self, a: int, b: int) -> dict[int, float]:
        """Linear expression equal to x[a] * x[b] at integral points."""
        a, b = min(a, b), max(a, b)
        if (a, b) in self.products:
            return self.products[(a, b)]
        for j in (a, b):
            if not (math.isfinite(self._lo[j]) and math.isfinite(self._hi[j])):
                raise UnsupportedTerm(f"product ({a},{b}) has an unbounded factor")
        if a == b:
            if not self._int[a]:
                raise UnsupportedTerm(f"square of continuous variable {a}")
            e, o = a, a
        elif self._int[a] and self._int[b]:
            ra, rb = self._hi[a] - self._lo[a], self._hi[b] - self._lo[b]
            e, o = (a, b) if ra <= rb else (b, a)
        elif self._int[a]:
            e, o = a, b
        elif self._int[b]:
            e, o = b, a
        else:
            raise UnsupportedTerm(f"continuous x continuous product ({a},{b})")
        lo, bits = self._expand(e)
        expr: dict[int, float] = {}
        if lo:
            expr[o] = float(lo)
        for z, w in bits:
            v = z if z == o else self._mccormick(z, o)
            expr[v] = expr.get(v, 0.0) + w
        self.products[(a, b)] = expr
        return expr

    @property
    def n_aux(self) -> int:
        return len(self.aux_defs)

    @property
    def aux_lower(self) -> np.ndarray:
        return np.array(self._lo[self.n_base:], dtype=float)

    @property
    def aux_upper(self) -> np.ndarray:
        return np.array(self._hi[self.n_base:], dtype=float)

    @property
    def aux_integer(self) -> np.ndarray:
        return np.array(self._int[self.n_base:], dtype=bool)

    def lift(self, x: Sequence[float]) -> np.ndarray:
        """Auxiliary values implied by a point whose integer coordinates are integral."""
        full = list(map(float, x))
        for d in self.aux_defs:
            if d[0] == "bit":
                j, k = d[1], d[2]
                lo = self._expansions[j][0]
                full.append(float((int(round(full[j])) - lo) >> k & 1))
            else:
                full.append(full[d[1]] * full[d[2]])
        return np.array(full[self.n_base:], dtype=float)

    def linearize(self, constant: float, linear: Mapping[int, float],
                  quadratic: Iterable[tuple[int, int, float]]) -> tuple[float, dict[int, float]]:
        coeffs = dict(linear)
        for a, b, c in quadratic:
            for j, w in self.product(a, b).items():
                coeffs[j] = coeffs.get(j, 0.0) + c * w
        return constant, coeffs


@dataclass(frozen=True, eq=False)
class ExtendedGame:
    """A game plus auxiliary variables (indices n_vars, n_vars+1, ...) whose
    rows make every linearized cost exact at integral points."""

    game: Game
    linearizer: ProductLinearizer
    products: Mapping[tuple[int, int], Mapping[int, float]] = field(default_factory=dict)

    @property
    def n_aux(self) -> int:
        return self.linearizer.n_aux

    @property
    def rows(self) -> list[AuxRow]:
        return self.linearizer.rows

    @property
    def aux_lower(self) -> np.ndarray:
        return self.linearizer.aux_lower

    @property
    def aux_upper(self) -> np.ndarray:
        return self.linearizer.aux_upper

    @property
    def aux_integer(self) -> np.ndarray:
        return self.linearizer.aux_integer

    def lift(self, x: Sequence[float]) -> np.ndarray:
        return self.linearizer.lift(x)

    def linear_cost(self, i: int) -> tuple[float, dict[int, float]]:
        c = self.game.costs[i]
        return self.linearizer.linearize(c.constant, c.linear, c.quadratic)


def linearize_bilinear(game: Game, players: Iterable[int] | None = None) -> ExtendedGame:
    """Replace every product in the costs of ``players`` (default: all) by
    auxiliary variables; exact whenever integer variables are integral."""
    lin = ProductLinearizer(game.lower, game.upper, game.is_integer)
    chosen = range(game.n_players) if players is None else players
    for i in chosen:
        for a, b, _ in game.costs[i].quadratic:
            lin.product(a, b)
    return ExtendedGame(game=game, linearizer=lin, products=lin.products)


def integrality_holds(game: Game) -> bool:
    """True when every row evaluates to an integer at every integral profile
    (all variables integer, integral coefficients and right-hand sides)."""
    if not game.all_integer:
        return False
    for r in game.constraints:
        if r.rhs != math.floor(r.rhs):
            return False
        if any(c != math.floor(c) for c in r.coeffs.values()):
            return False
    return True
