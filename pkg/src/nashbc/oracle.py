"""Brute-force ground truth for small all-integer games, in exact rational
arithmetic: feasible profiles, best responses, (alpha, beta)-NE sets, the
minimal uniform alpha and the families of best-response sets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Sequence

from .model import Game, Mode

MAX_POINTS = 10**6
UNBOUNDED = math.inf

Profile = tuple[int, ...]


class OracleError(Exception):
    pass


class TooLarge(OracleError):
    pass


class HasContinuous(OracleError):
    pass


def _q(v: float) -> Fraction:
    return Fraction(v)


class _Exact:
    """Exact views of a game's rows and costs."""

    def __init__(self, game: Game):
        if not game.all_integer:
            raise HasContinuous("oracle needs an all-integer game")
        self.game = game
        self.rows = [({j: _q(c) for j, c in r.coeffs.items()}, _q(r.rhs), r.owner)
                     for r in game.constraints]
        self.costs = [(_q(c.constant), {j: _q(v) for j, v in c.linear.items()},
                       [(a, b, _q(v)) for a, b, v in c.quadratic]) for c in game.costs]
        self.ranges = [range(int(lo), int(hi) + 1) for lo, hi in zip(game.lower, game.upper)]
        size = math.prod(len(r) for r in self.ranges)
        if size > MAX_POINTS:
            raise TooLarge(f"{size} lattice points exceed {MAX_POINTS}")

    def cost(self, i: int, x: Sequence[int]) -> Fraction:
        const, lin, quad = self.costs[i]
        v = const
        for j, c in lin.items():
            v += c * x[j]
        for a, b, c in quad:
            v += c * x[a] * x[b]
        return v

    def feasible(self, x: Sequence[int], owner: int | None = None) -> bool:
        for coeffs, rhs, o in self.rows:
            if owner is not None and o != owner:
                continue
            if sum(c * x[j] for j, c in coeffs.items()) > rhs:
                return False
        return True

    def own_box(self, i: int) -> list[Profile]:
        own = self.game.own(i)
        return list(itertools.product(*(self.ranges[j] for j in own)))


@dataclass(frozen=True)
class ProfileData:
    profile: Profile
    costs: tuple[Fraction, ...]
    br_values: tuple[Fraction, ...]
    br_sets: tuple[frozenset[Profile], ...]

    def alpha_interval(self, beta: Sequence[Fraction] | None = None) -> tuple[Fraction, float | Fraction] | None:
        """Feasible uniform alphas >= 1 with pi_i <= alpha*Phi_i + beta_i for all i."""
        lo: Fraction = Fraction(1)
        hi: float | Fraction = UNBOUNDED
        for i, (pi, phi) in enumerate(zip(self.costs, self.br_values)):
            b = Fraction(0) if beta is None else beta[i]
            need = pi - b
            if phi > 0:
                lo = max(lo, need / phi)
            elif phi == 0:
                if need > 0:
                    return None
            else:
                hi = min(hi, need / phi)
        if hi < lo:
            return None
        return lo, hi

    def is_ne(self, alpha: Sequence[Fraction], beta: Sequence[Fraction]) -> bool:
        return all(pi <= a * phi + b
                   for pi, phi, a, b in zip(self.costs, self.br_values, alpha, beta))


class Oracle:
    def __init__(self, game: Game):
        self.game = game
        self.exact = _Exact(game)

    @cached_property
    def profiles(self) -> list[Profile]:
        ex = self.exact
        return [x for x in itertools.product(*ex.ranges) if ex.feasible(x)]

    def _best(self, i: int, x: Profile) -> tuple[Fraction, frozenset[Profile]]:
        ex, g = self.exact, self.game
        start, stop = g.offsets[i], g.offsets[i + 1]
        best, arg = None, []
        y = list(x)
        for s in self._strategies(i):
            y[start:stop] = s
            if g.mode is Mode.GNEP and not ex.feasible(y, owner=i):
                continue
            v = ex.cost(i, y)
            if best is None or v < best:
                best, arg = v, [s]
            elif v == best:
                arg.append(s)
        return best, frozenset(arg)

    def _strategies(self, i: int) -> list[Profile]:
        cache = self.__dict__.setdefault("_strat", {})
        if i not in cache:
            box = self.exact.own_box(i)
            if self.game.mode is Mode.NEP:
                start = self.game.offsets[i]
                rows = self.game.rows_of(i)
                box = [s for s in box
                       if all(sum(c * s[j - start] for j, c in r.coeffs.items()) <= r.rhs
                              for r in rows)]
            cache[i] = box
        return cache[i]

    @cached_property
    def data(self) -> list[ProfileData]:
        out = []
        for x in self.profiles:
            brs = [self._best(i, x) for i in range(self.game.n_players)]
            out.append(ProfileData(
                profile=x,
                costs=tuple(self.exact.cost(i, x) for i in range(self.game.n_players)),
                br_values=tuple(v for v, _ in brs),
                br_sets=tuple(s for _, s in brs),
            ))
        return out

    def ne_set(self, alpha: Sequence[float] | float, beta: Sequence[float] | float = 0.0) -> list[Profile]:
        n = self.game.n_players
        a = [_q(v) for v in _vec(alpha, n)]
        b = [_q(v) for v in _vec(beta, n)]
        return [d.profile for d in self.data if d.is_ne(a, b)]

    def alpha_min(self) -> Fraction | float:
        best: Fraction | float = UNBOUNDED
        for d in self.data:
            iv = d.alpha_interval()
            if iv is not None and iv[0] < best:
                best = iv[0]
        return best

    def br_family(self, i: int) -> set[frozenset[Profile]]:
        g = self.game
        start, stop = g.offsets[i], g.offsets[i + 1]
        seen: dict[tuple, frozenset[Profile]] = {}
        for x in self.profiles:
            key = x[:start] + x[stop:]
            if key not in seen:
                seen[key] = self._best(i, x)[1]
        return set(seen.values())

    def eq_tuples(self, alpha, beta=0.0) -> list[tuple[Profile, tuple[float, ...], tuple[float, ...]]]:
        """(x, Phi(x), pi(x)) for every (alpha, beta)-NE x, as floats."""
        n = self.game.n_players
        a = [_q(v) for v in _vec(alpha, n)]
        b = [_q(v) for v in _vec(beta, n)]
        return [(d.profile, tuple(map(float, d.br_values)), tuple(map(float, d.costs)))
                for d in self.data if d.is_ne(a, b)]

    def any_negative_phi(self) -> bool:
        return any(v < 0 for d in self.data for v in d.br_values)

    def report(self, alpha, beta=0.0) -> "OracleReport":
        n = self.game.n_players
        return OracleReport(
            profiles=[d.profile for d in self.data],
            costs=[d.costs for d in self.data],
            br_values=[d.br_values for d in self.data],
            intervals=[d.alpha_interval() for d in self.data],
            alpha=tuple(_vec(alpha, n)),
            beta=tuple(_vec(beta, n)),
            ne_set=self.ne_set(alpha, beta),
            alpha_min=self.alpha_min(),
            br_family_sizes=[len(self.br_family(i)) for i in range(n)],
        )


def _vec(v, n: int) -> list[float]:
    if isinstance(v, (int, float, Fraction)):
        return [v] * n
    v = list(v)
    if len(v) != n:
        raise ValueError(f"expected {n} values, got {len(v)}")
    return v


def _num(v: Fraction | float) -> Any:
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


@dataclass(frozen=True)
class OracleReport:
    profiles: list[Profile]
    costs: list[tuple[Fraction, ...]]
    br_values: list[tuple[Fraction, ...]]
    intervals: list[tuple | None]
    alpha: tuple
    beta: tuple
    ne_set: list[Profile]
    alpha_min: Fraction | float
    br_family_sizes: list[int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "profiles": [
                {
                    "x": list(p),
                    "pi": [_num(v) for v in c],
                    "phi": [_num(v) for v in f],
                    "alpha_interval": None if iv is None else [_num(iv[0]), _num(iv[1])],
                }
                for p, c, f, iv in zip(self.profiles, self.costs, self.br_values, self.intervals)
            ],
            "ne_set": [list(p) for p in self.ne_set],
            "alpha_min": "unbounded" if self.alpha_min == UNBOUNDED else _num(self.alpha_min),
            "br_family_sizes": self.br_family_sizes,
        }


# module-level helpers mirroring the operation names

def enumerate_profiles(game: Game) -> list[Profile]:
    return Oracle(game).profiles


def brute_ne_set(game: Game, alpha, beta=0.0) -> list[Profile]:
    return Oracle(game).ne_set(alpha, beta)


def brute_alpha_min(game: Game) -> Fraction | float:
    return Oracle(game).alpha_min()


def brute_br_family(game: Game, i: int) -> set[frozenset[Profile]]:
    return Oracle(game).br_family(i)
