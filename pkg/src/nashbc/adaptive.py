"""Bisection for the smallest uniform alpha admitting an (alpha, 0)-NE.

The single-tree variants continue every probe below the current upper
bound from the open nodes (plus the equilibrium node) left by the last
successful probe, instead of building a fresh tree.
"""

from __future__ import annotations

import csv
import enum
import io
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .bnc import (BranchAndCut, Limits, Observer, SolveResult, Stats, Status, Tolerances,
                  TreeState)
from .model import Game

DEFAULT_ALPHA0 = 10.0
DEFAULT_FACTOR = 10.0
DEFAULT_TOL = 0.1
DEFAULT_MAX_GROWTH = 20
# Beyond this, lambda ~ gap/alpha falls to the integrality tolerance and
# node LPs can no longer separate candidates; growth stops there.
ALPHA_CAP = 1e5


class NotADecrease(ValueError):
    pass


class Variant(str, enum.Enum):
    MULTITREE = "multitree"
    REUSE_TREE = "reuse-tree"
    REUSE_CUTS = "reuse-cuts"


class SearchStatus(str, enum.Enum):
    CONVERGED = "Converged"
    UNBOUNDED = "AlphaUnbounded"
    LIMIT = "LimitHit"


@dataclass(frozen=True)
class Probe:
    iteration: int
    alpha: float
    status: Status
    nodes: int
    cuts: int
    elapsed: float


@dataclass
class AlphaSearchResult:
    status: SearchStatus
    variant: Variant
    alpha_lo: float
    alpha_hi: float | None
    witness: np.ndarray | None
    probes: list[Probe]
    stats: Stats
    heuristic: bool = False
    wall_time: float = 0.0

    @property
    def width(self) -> float:
        return np.inf if self.alpha_hi is None else self.alpha_hi - self.alpha_lo

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "variant": self.variant.value,
            "alpha_lo": self.alpha_lo,
            "alpha_hi": self.alpha_hi,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "heuristic": self.heuristic,
            "probes": [{"alpha": p.alpha, "status": p.status.value, "nodes": p.nodes,
                        "cuts": p.cuts} for p in self.probes],
            "stats": self.stats.to_dict(),
            "wall_time_s": round(self.wall_time, 6) if timing else None,
        }

    def trace_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "alpha_probe", "status", "nodes", "cuts", "cumulative_time_s"])
        for p in self.probes:
            w.writerow([p.iteration, repr(p.alpha), p.status.value, p.nodes, p.cuts,
                        f"{p.elapsed:.6f}" if timing else ""])
        return buf.getvalue()


def retarget_nodes(tree: TreeState, alpha_new, reuse_cuts: bool) -> TreeState:
    """Copy of ``tree`` aimed at a smaller alpha. Branching bounds survive;
    cuts survive only with ``reuse_cuts``. The lambda rows are rebuilt from
    the stored alpha when each node LP is assembled."""
    a = np.broadcast_to(np.asarray(alpha_new, dtype=float), tree.alpha.shape).copy()
    if np.any(a > tree.alpha):
        raise NotADecrease(f"alpha {a.tolist()} exceeds {tree.alpha.tolist()}")
    out = tree.copy()
    out.alpha = a
    if not reuse_cuts:
        out.global_cuts = []
        for node in out.stack:
            node.cuts = []
    return out


ProbeHook = Callable[[float, TreeState], None]


class _Search:
    def __init__(self, game: Game, variant: Variant, limits: Limits,
                 observer: Observer | None, hook: ProbeHook | None,
                 tolerances: Tolerances = Tolerances()):
        self.bc = BranchAndCut(game, tolerances, observer=observer)
        self.variant = variant
        self.limits = limits
        self.hook = hook
        self.start = time.perf_counter()
        self.probes: list[Probe] = []
        self.stats = Stats()
        self.heuristic = False

    def probe(self, alpha: float, tree: TreeState | None = None) -> SolveResult:
        limits = self.limits
        if limits.time_s is not None:
            left = max(0.0, limits.time_s - (time.perf_counter() - self.start))
            limits = replace(limits, time_s=left)
        if tree is not None and self.hook is not None:
            self.hook(alpha, tree)
        res = self.bc.solve(alpha, 0.0, limits, tree)
        self.stats.add(res.stats)
        if res.status is Status.NE_FOUND and res.negative_phi:
            self.heuristic = True
        self.probes.append(Probe(len(self.probes), float(alpha), res.status, res.stats.nodes,
                                 res.stats.total_cuts, time.perf_counter() - self.start))
        return res

    def result(self, status: SearchStatus, lo: float, hi: float | None,
               witness: np.ndarray | None) -> AlphaSearchResult:
        if self.heuristic:
            warnings.warn("a best-response value at an equilibrium candidate is negative; "
                          "alpha feasibility may not be monotone, the interval is heuristic",
                          stacklevel=3)
        return AlphaSearchResult(status, self.variant, lo, hi, witness, self.probes,
                                 self.stats, self.heuristic, time.perf_counter() - self.start)


@dataclass(frozen=True)
class UpperBound:
    alpha: float | None          # None: no alpha tried admitted an equilibrium
    lower: float                 # largest alpha tried without an equilibrium, or 1
    result: SolveResult | None
    status: SearchStatus | None = None
    lower_proven: bool = False   # a probe at ``lower`` found no equilibrium


def _find_upper(s: _Search, alpha0: float, factor: float, max_growth: int,
                alpha_cap: float = ALPHA_CAP) -> UpperBound:
    if alpha0 < 1 or factor <= 1:
        raise ValueError("need alpha0 >= 1 and factor > 1")
    lo, alpha, proven = 1.0, alpha0, False
    for _ in range(max_growth + 1):
        if alpha > alpha_cap:
            break
        res = s.probe(alpha)
        if res.status is Status.NE_FOUND:
            return UpperBound(alpha, lo, res, lower_proven=proven)
        if res.status.is_limit:
            return UpperBound(None, lo, res, SearchStatus.LIMIT, proven)
        lo, proven = alpha, True
        alpha *= factor
    return UpperBound(None, lo, None, SearchStatus.UNBOUNDED, True)


def find_alpha_upper(game: Game, alpha0: float = DEFAULT_ALPHA0, factor: float = DEFAULT_FACTOR,
                     max_growth: int = DEFAULT_MAX_GROWTH, limits: Limits = Limits(),
                     alpha_cap: float = ALPHA_CAP) -> UpperBound:
    """First alpha in alpha0, F alpha0, F^2 alpha0, ... with an (alpha, 0)-NE."""
    s = _Search(game, Variant.MULTITREE, limits, None, None)
    up = _find_upper(s, alpha0, factor, max_growth, alpha_cap)
    return up if up.status is not None else replace(up, status=SearchStatus.CONVERGED)


def best_alpha(game: Game, variant: Variant | str = Variant.REUSE_CUTS,
               alpha0: float = DEFAULT_ALPHA0, factor: float = DEFAULT_FACTOR,
               tol: float = DEFAULT_TOL, max_growth: int = DEFAULT_MAX_GROWTH,
               limits: Limits = Limits(), observer: Observer | None = None,
               hook: ProbeHook | None = None,
               alpha_cap: float = ALPHA_CAP,
               tolerances: Tolerances = Tolerances()) -> AlphaSearchResult:
    """Bisection on [1, alpha+] to width <= tol.

    ``hook(alpha, tree)`` is called before every probe that starts from a
    retained frontier.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    variant = Variant(variant)
    s = _Search(game, variant, limits, observer, hook, tolerances)
    up = _find_upper(s, alpha0, factor, max_growth, alpha_cap)
    if up.alpha is None:
        return s.result(up.status, up.lower, None, None)
    lo, hi = up.lower, up.alpha
    witness = up.result.witness
    saved = up.result.tree
    proven_lo = up.lower_proven

    def start(alpha: float) -> TreeState | None:
        if variant is Variant.MULTITREE:
            return None
        return retarget_nodes(saved, alpha, reuse_cuts=variant is Variant.REUSE_CUTS)

    while hi - lo > tol or (not proven_lo and hi > lo):
        alpha = lo if not proven_lo else 0.5 * (lo + hi)
        res = s.probe(alpha, start(alpha))
        if res.status.is_limit:
            return s.result(SearchStatus.LIMIT, lo, hi, witness)
        if res.status is Status.NE_FOUND:
            hi, witness, saved = alpha, res.witness, res.tree
        else:
            lo = alpha
        proven_lo = True
    return s.result(SearchStatus.CONVERGED, lo, hi, witness)


def best_alpha_multitree(game: Game, alpha0: float = DEFAULT_ALPHA0,
                         factor: float = DEFAULT_FACTOR, tol: float = DEFAULT_TOL,
                         limits: Limits = Limits(), **kw) -> AlphaSearchResult:
    return best_alpha(game, Variant.MULTITREE, alpha0, factor, tol, limits=limits, **kw)


def best_alpha_singletree(game: Game, alpha0: float = DEFAULT_ALPHA0,
                          factor: float = DEFAULT_FACTOR, tol: float = DEFAULT_TOL,
                          reuse_cuts: bool = True, limits: Limits = Limits(),
                          **kw) -> AlphaSearchResult:
    variant = Variant.REUSE_CUTS if reuse_cuts else Variant.REUSE_TREE
    return best_alpha(game, variant, alpha0, factor, tol, limits=limits, **kw)
