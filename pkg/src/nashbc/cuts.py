"""Equilibrium cuts over the lifted space z = (x, lambda, phi, pihat, aux).

Two families: intersection cuts from convex sets whose interior holds the
point to cut off but no equilibrium tuple, and best-response cuts
phi_i <= pi_i(y*_i, x_{-i}) for standard games.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .lp import LpSolution, corner_rays
from .model import Game, Mode, Structure, UnsupportedTerm

ETA_MIN = 1e-9
ETA_MAX = 1e12
INTERIOR_TOL = 1e-9
DISPATCH_TOL = 1e-9


class CutError(Exception):
    pass


class NotInInterior(CutError):
    pass


class NoViolation(CutError):
    pass


class WrongCostClass(CutError):
    pass


class WrongMode(CutError):
    pass


class AssumptionViolated(CutError):
    pass


class DichotomyViolation(CutError):
    pass


class Provenance(str, enum.Enum):
    IC_PHI = "ic_phi"
    IC_PI_CONV = "ic_pi_conv"
    IC_PI_CONC = "ic_pi_conc"
    BR = "br"
    ROOT_PIHAT = "root_pihat"


class Scope(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class Layout:
    """Index map of the lifted space: x, then lambda, phi_1..phi_n,
    pihat_1..pihat_n, then auxiliary product/bit variables."""

    n_vars: int
    n_players: int
    n_aux: int = 0

    @property
    def lam(self) -> int:
        return self.n_vars

    def phi(self, i: int) -> int:
        return self.n_vars + 1 + i

    def pihat(self, i: int) -> int:
        return self.n_vars + 1 + self.n_players + i

    @property
    def aux_start(self) -> int:
        return self.n_vars + 1 + 2 * self.n_players

    @property
    def dim(self) -> int:
        return self.aux_start + self.n_aux

    def map(self, j: int) -> int:
        """Lifted index of a base (< n_vars) or linearizer auxiliary index."""
        return j if j < self.n_vars else j + 1 + 2 * self.n_players

    def split(self, z: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
        n = self.n_players
        return (z[:self.n_vars], float(z[self.lam]),
                z[self.n_vars + 1:self.n_vars + 1 + n], z[self.n_vars + 1 + n:self.aux_start])


@dataclass(frozen=True, eq=False)
class Cut:
    """Row ``coeffs . z <= rhs``."""

    coeffs: np.ndarray
    rhs: float
    provenance: Provenance
    scope: Scope
    player: int
    node: int | None = None
    violation: float = 0.0

    def residual(self, z: np.ndarray) -> float:
        return float(self.coeffs @ z - self.rhs)

    def normalized(self) -> "Cut":
        scale = float(np.abs(self.coeffs).max(initial=0.0))
        if scale == 0.0:
            return self
        return Cut(self.coeffs / scale, self.rhs / scale, self.provenance, self.scope,
                   self.player, self.node, self.violation / scale)

    def with_violation(self, z: np.ndarray) -> "Cut":
        return Cut(self.coeffs, self.rhs, self.provenance, self.scope, self.player,
                   self.node, self.residual(z))

    def to_dict(self) -> dict:
        nz = np.flatnonzero(self.coeffs)
        return {
            "provenance": self.provenance.value,
            "scope": self.scope.value,
            "player": self.player,
            "node": self.node,
            "coeffs": {str(int(j)): float(self.coeffs[j]) for j in nz},
            "rhs": float(self.rhs),
            "violation": float(self.violation),
        }


# ---------------------------------------------------------------- free sets

@dataclass(frozen=True)
class Piece:
    """Convex function h(z) = const + linear.z + sum(c * z_a * z_b)."""

    linear: np.ndarray
    const: float
    quad: tuple[tuple[int, int, float], ...] = ()

    def value(self, z: np.ndarray) -> float:
        v = self.const + float(self.linear @ z)
        for a, b, c in self.quad:
            v += c * z[a] * z[b]
        return v

    def slope(self, z: np.ndarray, r: np.ndarray) -> float:
        d = float(self.linear @ r)
        for a, b, c in self.quad:
            d += c * (z[a] * r[b] + z[b] * r[a])
        return d

    def curvature(self, r: np.ndarray) -> float:
        return sum(c * r[a] * r[b] for a, b, c in self.quad)

    def step(self, z: np.ndarray, r: np.ndarray) -> float:
        """First eta >= 0 with h(z + eta r) = 0, given h(z) < 0; inf if none."""
        h0 = self.value(z)
        d1 = self.slope(z, r)
        q = self.curvature(r)
        scale = max(1.0, abs(h0), abs(d1))
        if q <= 1e-14 * scale:
            return -h0 / d1 if d1 > 0 else math.inf
        disc = math.sqrt(d1 * d1 - 4.0 * q * h0)
        if d1 > 0:
            return -2.0 * h0 / (d1 + disc)
        return (-d1 + disc) / (2.0 * q)

    def step_bisect(self, z: np.ndarray, r: np.ndarray, hi: float = ETA_MAX,
                    tol: float = 1e-9) -> float:
        if self.value(z + hi * r) < 0:
            return math.inf
        lo = 0.0
        while hi - lo > tol * max(1.0, lo):
            mid = 0.5 * (lo + hi)
            if self.value(z + mid * r) < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class FreeSetKind(str, enum.Enum):
    POLYHEDRAL_OPEN = "PolyhedralOpen"
    CONVEX_OPEN = "ConvexOpen"
    GRADIENT_HALFSPACE = "GradientHalfspace"
    CONCAVE_SUBLEVEL = "ConcaveSublevel"


@dataclass(frozen=True)
class ConvexFreeSet:
    """Open set {z : h_k(z) < 0 for every piece k}."""

    kind: FreeSetKind
    player: int
    pieces: tuple[Piece, ...]

    def slack(self, z: np.ndarray) -> float:
        return min((-p.value(z) for p in self.pieces), default=math.inf)

    def contains_interior(self, z: np.ndarray, margin: float = INTERIOR_TOL) -> bool:
        return self.slack(z) >= margin

    def step_length(self, z: np.ndarray, r: np.ndarray, bisect: bool = False) -> float:
        steps = [p.step_bisect(z, r) if bisect else p.step(z, r) for p in self.pieces]
        return min(steps, default=math.inf)


def _linear_part(game: Game, i: int, fixed_own: Sequence[float] | None):
    """pi_i split for a fixed own strategy: (const, rival linear, rival quad)."""
    cost = game.costs[i]
    start, stop = game.offsets[i], game.offsets[i + 1]

    def own(j: int) -> bool:
        return start <= j < stop

    const = cost.constant
    lin: dict[int, float] = {}
    quad: list[tuple[int, int, float]] = []
    for j, v in cost.linear.items():
        if own(j):
            const += v * fixed_own[j - start]
        else:
            lin[j] = lin.get(j, 0.0) + v
    for a, b, v in cost.quadratic:
        if own(a) and own(b):
            const += v * fixed_own[a - start] * fixed_own[b - start]
        elif own(a):
            lin[b] = lin.get(b, 0.0) + v * fixed_own[a - start]
        elif own(b):
            lin[a] = lin.get(a, 0.0) + v * fixed_own[b - start]
        else:
            quad.append((a, b, v))
    return const, lin, quad


def build_free_set_phi(game: Game, layout: Layout, i: int, z: np.ndarray,
                       y_star: Sequence[float], eps: float) -> ConvexFreeSet:
    """{phi_i > pi_i(y*_i, x_{-i}), g_i(y*_i, x_{-i}) < eps}."""
    if eps < 0:
        raise AssumptionViolated("the g-row margin eps must be nonnegative")
    # rival-only terms exist only under ConvexInAll, where they stay PSD
    const, lin, quad = _linear_part(game, i, y_star)
    dim = layout.dim
    a = np.zeros(dim)
    for j, v in lin.items():
        a[j] = v
    a[layout.phi(i)] = -1.0
    pieces = [Piece(a, const, tuple(quad))]
    start, stop = game.offsets[i], game.offsets[i + 1]
    for row in game.rows_of(i):
        g = np.zeros(dim)
        c = -row.rhs - eps
        for j, v in row.coeffs.items():
            if start <= j < stop:
                c += v * y_star[j - start]
            else:
                g[j] += v
        if not g.any():
            if c >= 0:
                raise NotInInterior(f"g_{i}(y*) >= eps on a rival-free row")
            continue
        pieces.append(Piece(g, c))
    kind = FreeSetKind.CONVEX_OPEN if quad else FreeSetKind.POLYHEDRAL_OPEN
    fs = ConvexFreeSet(kind, i, tuple(pieces))
    if not fs.contains_interior(z):
        raise NotInInterior(f"target is not interior to the phi free set of player {i}")
    return fs


def build_free_set_pi_conv(game: Game, layout: Layout, i: int, z: np.ndarray) -> ConvexFreeSet:
    """{pihat_i < pi_i(x*) + grad pi_i(x*).(x - x*)}."""
    cost = game.costs[i]
    if cost.quadratic and cost.structure is not Structure.CONVEX_IN_ALL:
        raise WrongCostClass(f"player {i}: gradient free set needs a convex cost")
    x = z[:layout.n_vars]
    grad = cost.gradient(x, layout.n_vars)
    a = np.zeros(layout.dim)
    a[:layout.n_vars] = -grad
    a[layout.pihat(i)] = 1.0
    fs = ConvexFreeSet(FreeSetKind.GRADIENT_HALFSPACE, i,
                       (Piece(a, -cost.value(x) + float(grad @ x)),))
    if not fs.contains_interior(z):
        raise NotInInterior(f"target is not interior to the gradient free set of player {i}")
    return fs


def build_free_set_pi_conc(game: Game, layout: Layout, i: int, z: np.ndarray) -> ConvexFreeSet:
    """{pihat_i < pi_i(x)} for a concave cost."""
    cost = game.costs[i]
    if cost.quadratic and cost.structure is not Structure.CONCAVE_LINEAR_IN_RIVALS:
        raise WrongCostClass(f"player {i}: sublevel free set needs a concave cost")
    a = np.zeros(layout.dim)
    for j, v in cost.linear.items():
        a[j] -= v
    a[layout.pihat(i)] = 1.0
    quad = tuple((p, q, -v) for p, q, v in cost.quadratic)
    fs = ConvexFreeSet(FreeSetKind.CONCAVE_SUBLEVEL, i, (Piece(a, -cost.constant, quad),))
    if not fs.contains_interior(z):
        raise NotInInterior(f"target is not interior to the sublevel free set of player {i}")
    return fs


# ---------------------------------------------------------------- cut builders

def intersection_cut(solution: LpSolution, free_set: ConvexFreeSet,
                     provenance: Provenance, node: int | None = None) -> Cut:
    """Cut sum_j s_j / eta_j >= 1 in the nonbasic distances s_j, rewritten
    over z and normalized by its largest coefficient."""
    z = solution.x
    if not free_set.contains_interior(z):
        raise NotInInterior("vertex is not interior to the free set")
    a = np.zeros_like(z)
    rhs = -1.0
    finite = False
    for ray in corner_rays(solution):
        if ray.fixed:
            continue
        eta = free_set.step_length(z, ray.direction)
        if not eta <= ETA_MAX:
            continue
        eta = max(eta, ETA_MIN)
        finite = True
        g, h = solution.distance(ray.source)
        a -= g / eta
        rhs += h / eta
    if not finite:
        raise NoViolation("free set contains the whole corner polyhedron")
    cut = Cut(a, rhs, provenance, Scope.LOCAL, free_set.player, node)
    return cut.with_violation(z).normalized()


def best_response_cut(game: Game, layout: Layout, i: int, y_star: Sequence[float],
                      products: Mapping[tuple[int, int], Mapping[int, float]]) -> Cut:
    """phi_i - pi_i(y*_i, x_{-i}) <= 0, with rival products taken from the
    exact linearization ``products``."""
    if game.mode is not Mode.NEP:
        raise WrongMode("best-response cuts need fixed strategy sets")
    const, lin, quad = _linear_part(game, i, y_star)
    a = np.zeros(layout.dim)
    a[layout.phi(i)] = 1.0
    for j, v in lin.items():
        a[j] -= v
    for p, q, v in quad:
        key = (min(p, q), max(p, q))
        if key not in products:
            raise UnsupportedTerm(f"rival product {key} of player {i} is not linearized")
        for j, w in products[key].items():
            a[layout.map(j)] -= v * w
    return Cut(a, const, Provenance.BR, Scope.GLOBAL, i)


def root_pihat_cuts(game: Game, layout: Layout,
                    products: Mapping[tuple[int, int], Mapping[int, float]],
                    players: Sequence[int] | None = None) -> list[Cut]:
    """pihat_i >= linearized pi_i(x), exact at integral points."""
    chosen = range(game.n_players) if players is None else players
    out = []
    for i in chosen:
        cost = game.costs[i]
        a = np.zeros(layout.dim)
        for j, v in cost.linear.items():
            a[j] += v
        for p, q, v in cost.quadratic:
            key = (min(p, q), max(p, q))
            if key not in products:
                raise UnsupportedTerm(f"product {key} of player {i} is not linearized")
            for j, w in products[key].items():
                a[layout.map(j)] += v * w
        a[layout.pihat(i)] = -1.0
        out.append(Cut(a, -cost.constant, Provenance.ROOT_PIHAT, Scope.GLOBAL, i))
    return out


def dispatch_cut_targets(phi: Sequence[float], pihat: Sequence[float],
                         br_values: Sequence[float], costs: Sequence[float],
                         tol: float = DISPATCH_TOL) -> tuple[list[int], list[int]]:
    """Players whose phi proxy overshoots Phi_i and whose pihat proxy
    undershoots pi_i; at least one of the two lists is non-empty at an
    integral candidate that fails the equilibrium check."""
    n_phi = [i for i, (p, v) in enumerate(zip(phi, br_values)) if p > v + tol]
    n_pi = [i for i, (p, v) in enumerate(zip(pihat, costs)) if p < v - tol]
    if not n_phi and not n_pi:
        raise DichotomyViolation(
            f"no proxy gap: phi={list(phi)} Phi={list(br_values)} pihat={list(pihat)} pi={list(costs)}")
    return n_phi, n_pi
