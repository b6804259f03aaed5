"""Bounded-variable revised simplex exposing the optimal basis and the
extreme rays of the corner polyhedron at the optimal vertex.

Problems have the form ``min c.x  s.t.  A x <= b`` (or ``==`` for rows
flagged in ``equality``) and ``lower <= x <= upper`` with finite bounds.
Every row i gets a slack ``s_i = b_i - A_i x`` (index ``n + i``) with
bounds [0, inf), or [0, 0] for equality rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50


class LpError(Exception):
    pass


class NumericalFailure(LpError):
    pass


class NotAVertex(LpError):
    pass


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


class VarStatus(enum.IntEnum):
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2


@dataclass(frozen=True, eq=False)
class LpProblem:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    equality: np.ndarray | None = None

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = len(self.c)
        if A.size == 0:
            A = A.reshape(0, n)
        object.__setattr__(self, "A", A)
        for name in ("b", "c", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        m = A.shape[0]
        eq = np.zeros(m, dtype=bool) if self.equality is None else np.asarray(self.equality, bool)
        object.__setattr__(self, "equality", eq)
        if A.shape[1] != n or len(self.b) != m or len(self.lower) != n or len(self.upper) != n \
                or len(eq) != m:
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("all LP variables need finite bounds")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound above upper bound")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(eq=False)
class LpSolution:
    status: LpStatus
    problem: LpProblem
    x: np.ndarray | None = None
    objective: float = float("nan")
    basis: np.ndarray | None = None        # VarStatus per structural + slack
    basic: np.ndarray | None = None        # column index basic in each row position
    duals: np.ndarray | None = None        # y; reduced cost d = c - A^T y
    reduced_costs: np.ndarray | None = None
    farkas: np.ndarray | None = None       # w >= 0 (free on == rows) with min_box w.A x > w.b
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    @property
    def slack(self) -> np.ndarray:
        return self.problem.b - self.problem.A @ self.x

    @cached_property
    def basis_inverse(self) -> np.ndarray:
        if self.basic is None:
            raise NotAVertex("solution carries no basis")
        return np.linalg.inv(_columns(self.problem.A)[:, self.basic])

    def nonbasic(self) -> list[int]:
        if self.basis is None:
            raise NotAVertex("solution carries no basis")
        return [j for j, s in enumerate(self.basis) if s != VarStatus.BASIC]

    def is_fixed(self, j: int) -> bool:
        lo, hi = _full_bounds(self.problem)
        return hi[j] - lo[j] <= 0.0

    def distance(self, j: int) -> tuple[np.ndarray, float]:
        """Affine map (g, h) with s_j(x) = g.x + h: how far nonbasic j has
        moved away from the bound it sits at."""
        p = self.problem
        n = p.A.shape[1]
        g = np.zeros(n)
        if j < n:
            if self.basis[j] == VarStatus.AT_LOWER:
                g[j] = 1.0
                return g, -p.lower[j]
            g[j] = -1.0
            return g, p.upper[j]
        i = j - n
        # slack s_i = b_i - A_i x sits at its lower bound 0
        return -p.A[i].copy(), float(p.b[i])


@dataclass(frozen=True, eq=False)
class Ray:
    direction: np.ndarray
    source: int
    fixed: bool = False


def _columns(A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    return np.hstack([A, np.eye(m)])


def _full_bounds(p: LpProblem) -> tuple[np.ndarray, np.ndarray]:
    m = p.A.shape[0]
    lo = np.concatenate([p.lower, np.zeros(m)])
    hi = np.concatenate([p.upper, np.where(p.equality, 0.0, np.inf)])
    return lo, hi


class _Simplex:
    """Primal bounded simplex over columns M = [A | I | artificials]."""

    def __init__(self, p: LpProblem):
        A, b = p.A, p.b
        m, n = A.shape
        self.m, self.n = m, n
        lo, hi = _full_bounds(p)
        x = np.concatenate([p.lower.copy(), np.zeros(m)])
        r = b - A @ p.lower
        art_rows = [i for i in range(m) if r[i] < 0 or (p.equality[i] and r[i] != 0)]
        k = len(art_rows)
        art = np.zeros((m, k))
        for t, i in enumerate(art_rows):
            art[i, t] = 1.0 if r[i] > 0 else -1.0
        self.M = np.hstack([A, np.eye(m), art])
        self.b = b
        self.lo = np.concatenate([lo, np.zeros(k)])
        self.hi = np.concatenate([hi, np.full(k, np.inf)])
        self.n_real = n + m
        status = np.full(n + m + k, VarStatus.AT_LOWER, dtype=np.int8)
        basic = np.empty(m, dtype=int)
        art_of = {i: t for t, i in enumerate(art_rows)}
        x = np.concatenate([x, np.zeros(k)])
        for i in range(m):
            if i in art_of:
                j = n + m + art_of[i]
                x[j] = abs(r[i])
            else:
                j = n + i
                x[j] = r[i]
            basic[i] = j
            status[j] = VarStatus.BASIC
        self.x, self.status, self.basic = x, status, basic
        self.Binv = np.eye(m)
        for t, i in enumerate(art_rows):
            if r[i] < 0 or (p.equality[i] and r[i] < 0):
                self.Binv[i, i] = -1.0
        self.iterations = 0
        self.degenerate = 0
        self.bland = False
        self.active = np.ones(len(x), dtype=bool)

    def refactor(self) -> None:
        B = self.M[:, self.basic]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis") from None
        nb = self.status != VarStatus.BASIC
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        self.x[self.basic] = self.Binv @ rhs

    def run(self, cost: np.ndarray, max_iter: int) -> None:
        m = self.m
        since_refactor = 0
        while True:
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            y = cost[self.basic] @ self.Binv
            d = cost - y @ self.M
            d[self.basic] = 0.0
            st = self.status
            movable = (self.hi - self.lo > 0) & self.active
            cand = movable & (((st == VarStatus.AT_LOWER) & (d < -OPT_TOL))
                              | ((st == VarStatus.AT_UPPER) & (d > OPT_TOL)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return
            if self.iterations >= max_iter:
                raise NumericalFailure(f"simplex iteration limit {max_iter} reached")
            if self.bland:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx]))])
            col = self.Binv @ self.M[:, q]
            sigma = 1.0 if st[q] == VarStatus.AT_LOWER else -1.0
            delta = sigma * col
            xb = self.x[self.basic]
            lob, hib = self.lo[self.basic], self.hi[self.basic]
            theta = np.full(m, np.inf)
            dec = delta > PIVOT_TOL
            inc = (delta < -PIVOT_TOL) & np.isfinite(hib)
            theta[dec] = (xb[dec] - lob[dec]) / delta[dec]
            theta[inc] = (hib[inc] - xb[inc]) / (-delta[inc])
            theta = np.maximum(theta, 0.0)
            t_min = theta.min() if m else np.inf
            t_flip = self.hi[q] - self.lo[q]
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                raise NumericalFailure("unbounded direction in a bounded problem")
            self.iterations += 1
            if t_flip <= t_min:
                self.x[self.basic] = xb - t_flip * delta
                self.x[q] = self.hi[q] if sigma > 0 else self.lo[q]
                self.status[q] = VarStatus.AT_UPPER if sigma > 0 else VarStatus.AT_LOWER
                step = t_flip
            else:
                ties = np.flatnonzero(theta <= t_min + 1e-12)
                if self.bland:
                    r = int(ties[np.argmin(self.basic[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(delta[ties]))])
                leaving = self.basic[r]
                self.x[self.basic] = xb - t_min * delta
                self.x[q] = self.x[q] + sigma * t_min
                self.x[leaving] = self.lo[leaving] if delta[r] > 0 else self.hi[leaving]
                self.status[leaving] = VarStatus.AT_LOWER if delta[r] > 0 else VarStatus.AT_UPPER
                self.status[q] = VarStatus.BASIC
                self.basic[r] = q
                row = self.Binv[r] / col[r]
                self.Binv -= np.outer(col, row)
                self.Binv[r] = row
                since_refactor += 1
                step = t_min
            if step <= 1e-12:
                self.degenerate += 1
                if self.degenerate > 10 * (self.m + self.n):
                    self.bland = True

    def drop_artificials(self) -> None:
        """Pivot zero-valued basic artificials out, then deactivate them."""
        n_real = self.n_real
        for r in range(self.m):
            j = self.basic[r]
            if j < n_real:
                continue
            row = self.Binv[r] @ self.M[:, :n_real]
            cand = [k for k in np.argsort(-np.abs(row), kind="stable")
                    if self.status[k] != VarStatus.BASIC and abs(row[k]) > PIVOT_TOL]
            if not cand:
                raise NumericalFailure("cannot remove artificial variable from basis")
            q = int(cand[0])
            col = self.Binv @ self.M[:, q]
            self.status[q] = VarStatus.BASIC
            self.status[j] = VarStatus.AT_LOWER
            self.x[j] = 0.0
            self.basic[r] = q
            prow = self.Binv[r] / col[r]
            self.Binv -= np.outer(col, prow)
            self.Binv[r] = prow
        self.active[n_real:] = False
        self.hi[n_real:] = 0.0
        self.refactor()


def solve_lp(problem: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve to an optimal vertex or prove infeasibility (Farkas ray)."""
    m, n = problem.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    s = _Simplex(problem)
    n_real = n + m
    k = len(s.x) - n_real
    if k:
        c1 = np.zeros(len(s.x))
        c1[n_real:] = 1.0
        s.run(c1, max_iter)
        infeas = float(s.x[n_real:].sum())
        if infeas > FEAS_TOL * max(1.0, float(np.abs(problem.b).max(initial=0.0))):
            y = c1[s.basic] @ s.Binv
            return LpSolution(LpStatus.INFEASIBLE, problem, farkas=-y, iterations=s.iterations)
        s.drop_artificials()
    cost = np.concatenate([problem.c, np.zeros(m + k)])
    s.run(cost, max_iter)
    s.refactor()
    x = s.x[:n].copy()
    y = cost[s.basic] @ s.Binv
    d = (cost - y @ s.M)[:n_real]
    d[s.basic] = 0.0
    return LpSolution(
        status=LpStatus.OPTIMAL,
        problem=problem,
        x=x,
        objective=float(problem.c @ x),
        basis=np.array([VarStatus(v) for v in s.status[:n_real]], dtype=object),
        basic=s.basic.copy(),
        duals=y,
        reduced_costs=d,
        iterations=s.iterations,
    )


def corner_rays(solution: LpSolution) -> list[Ray]:
    """One ray per nonbasic variable: the change of the structural variables
    when that nonbasic moves one unit away from its active bound."""
    if not solution.optimal or solution.basis is None:
        raise NotAVertex("corner rays need an optimal basic solution")
    p = solution.problem
    m, n = p.shape
    M = _columns(p.A)
    Binv = solution.basis_inverse
    lo, hi = _full_bounds(p)
    rays = []
    for j in solution.nonbasic():
        full = np.zeros(n + m)
        full[j] = 1.0
        full[solution.basic] = -(Binv @ M[:, j])
        sign = 1.0 if solution.basis[j] == VarStatus.AT_LOWER else -1.0
        rays.append(Ray(direction=sign * full[:n], source=j, fixed=bool(hi[j] - lo[j] <= 0.0)))
    return rays
