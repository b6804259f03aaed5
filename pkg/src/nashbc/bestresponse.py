"""Exact best responses by depth-first branch-and-bound over LP relaxations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lp import LpProblem, LpStatus, solve_lp
from .model import Game, ProductLinearizer

INT_TOL = 1e-6
GAP_TOL = 1e-9


class Infeasible(Exception):
    """The feasible region of a minimization is empty."""


@dataclass(frozen=True)
class MipResult:
    point: np.ndarray
    value: float
    nodes: int


def mip_minimize(c: Sequence[float], A: np.ndarray, b: Sequence[float],
                 lower: Sequence[float], upper: Sequence[float],
                 is_integer: Sequence[bool], equality: Sequence[bool] | None = None,
                 ) -> MipResult:
    """Minimize c.x over {A x <= b (== on equality rows), bounds, integrality}.

    Depth-first search branching on the most fractional variable (smallest
    index on ties), down-branch first. The incumbent only changes on strict
    improvement, so the first minimizer found is kept.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, len(c))
    b = np.asarray(b, dtype=float)
    integer = np.asarray(is_integer, dtype=bool)
    stack = [(np.asarray(lower, float).copy(), np.asarray(upper, float).copy())]
    best, best_val, nodes = None, np.inf, 0
    while stack:
        lo, hi = stack.pop()
        nodes += 1
        sol = solve_lp(LpProblem(A=A, b=b, c=c, lower=lo, upper=hi, equality=equality))
        if sol.status is LpStatus.INFEASIBLE:
            continue
        if sol.objective >= best_val - GAP_TOL:
            continue
        x = sol.x
        frac = np.where(integer, np.abs(x - np.round(x)), 0.0)
        if frac.max(initial=0.0) > INT_TOL:
            j = int(np.argmax(frac))
            up_lo = lo.copy()
            up_lo[j] = np.ceil(x[j])
            down_hi = hi.copy()
            down_hi[j] = np.floor(x[j])
            stack.append((up_lo, hi))
            stack.append((lo, down_hi))
            continue
        x = np.where(integer, np.round(x), x)
        val = float(c @ x)
        if val < best_val - GAP_TOL:
            best, best_val = x, val
    if best is None:
        raise Infeasible("no feasible point")
    return MipResult(point=best, value=best_val, nodes=nodes)


@dataclass(frozen=True)
class BestResponse:
    player: int
    strategy: np.ndarray      # y*_i, own block only
    value: float              # Phi_i(x_{-i})
    nodes: int

    def profile(self, game: Game, x: Sequence[float]) -> np.ndarray:
        """The profile (y*_i, x_{-i})."""
        out = np.array(x, dtype=float)
        out[game.offsets[self.player]:game.offsets[self.player + 1]] = self.strategy
        return out


def best_response(game: Game, i: int, x: Sequence[float]) -> BestResponse:
    """Minimize pi_i(., x_{-i}) over X_i(x_{-i}); only rival entries of x are read."""
    x = np.asarray(x, dtype=float)
    start, stop = game.offsets[i], game.offsets[i + 1]
    size = stop - start
    cost = game.costs[i]

    def local(j: int) -> int | None:
        return j - start if start <= j < stop else None

    lin = ProductLinearizer(game.lower[start:stop], game.upper[start:stop],
                            game.is_integer[start:stop])
    obj: dict[int, float] = {}
    for j, v in cost.linear.items():
        if local(j) is not None:
            obj[local(j)] = obj.get(local(j), 0.0) + v
    for a, b_, v in cost.quadratic:
        la, lb = local(a), local(b_)
        if la is not None and lb is not None:
            for k, w in lin.product(la, lb).items():
                obj[k] = obj.get(k, 0.0) + v * w
        elif la is not None:
            obj[la] = obj.get(la, 0.0) + v * x[b_]
        elif lb is not None:
            obj[lb] = obj.get(lb, 0.0) + v * x[a]

    nv = size + lin.n_aux
    rows, rhs, eq = [], [], []
    for r in game.rows_of(i):
        row = np.zeros(nv)
        shift = r.rhs
        for j, v in r.coeffs.items():
            if local(j) is None:
                shift -= v * x[j]
            else:
                row[local(j)] += v
        rows.append(row)
        rhs.append(shift)
        eq.append(False)
    for ar in lin.rows:
        row = np.zeros(nv)
        for j, v in ar.coeffs.items():
            row[j] += v
        rows.append(row)
        rhs.append(ar.rhs)
        eq.append(ar.equality)
    c = np.zeros(nv)
    for k, v in obj.items():
        c[k] += v
    lower = np.concatenate([game.lower[start:stop], lin.aux_lower])
    upper = np.concatenate([game.upper[start:stop], lin.aux_upper])
    integer = np.concatenate([game.is_integer[start:stop], lin.aux_integer])
    res = mip_minimize(c, np.array(rows).reshape(-1, nv), rhs, lower, upper, integer, eq)
    y = res.point[:size]
    full = x.copy()
    full[start:stop] = y
    return BestResponse(player=i, strategy=y, value=cost.value(full), nodes=res.nodes)
