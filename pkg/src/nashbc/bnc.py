"""Branch-and-cut search for (alpha, beta)-approximate pure equilibria.

Each node solves an LP over z = (x, lambda, phi, pihat, aux) minimizing
lambda, where lambda >= pihat_i/alpha_i - phi_i - beta_i/alpha_i. A node
whose LP value is positive holds no equilibrium; an integral node point is
either an equilibrium or is cut off with equilibrium cuts.
"""

from __future__ import annotations

import copy
import enum
import resource
import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .bestresponse import BestResponse, Infeasible, best_response
from .cuts import (
    Cut, CutError, DichotomyViolation, Layout, Provenance, Scope,
    best_response_cut, build_free_set_phi, build_free_set_pi_conc,
    build_free_set_pi_conv, dispatch_cut_targets, intersection_cut, root_pihat_cuts,
)
from .lp import LpProblem, LpSolution, LpStatus, solve_lp
from .model import (
    ExtendedGame, Game, Mode, ProxyBounds, Structure, compute_proxy_bounds,
    linearize_bilinear,
)


class InvalidApproximation(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    ne: float = 1e-8           # pi_i <= alpha_i Phi_i + beta_i + ne
    prune: float = 1e-5        # prune a node whose LP value exceeds this
    cut: float = 5e-6          # minimum normalized violation of an added cut
    integer: float = 1e-6      # integrality test for branching
    positive: float = 1e-9     # LP value treated as strictly positive when no cut exists
    weak_cut: float = 1e-9     # fallback violation threshold when no cut reaches ``cut``


class NodeStatus(str, enum.Enum):
    OPEN = "Open"
    CUT_LOOP_ACTIVE = "CutLoopActive"
    BRANCHED = "Branched"
    PRUNED_INFEASIBLE = "PrunedInfeasible"
    PRUNED_POSITIVE = "PrunedPositive"
    NE_FOUND = "NeFound"
    STALLED = "CutLoopStalled"
    CUT_LIMIT = "CutLimit"


class Status(str, enum.Enum):
    NE_FOUND = "NeFound"
    NO_NE = "NoNeExists"
    TIME_LIMIT = "TimeLimit"
    NODE_LIMIT = "NodeLimit"
    CUT_LIMIT = "CutLimit"
    STALLED = "CutLoopStalled"
    MEMORY_LIMIT = "MemoryLimit"

    @property
    def is_limit(self) -> bool:
        return self not in (Status.NE_FOUND, Status.NO_NE)


@dataclass(frozen=True)
class Limits:
    time_s: float | None = 3600.0
    nodes: int | None = None
    cut_rounds: int | None = None      # per node; default 10 * n_vars + 100
    memory_mb: float | None = None     # advisory peak-RSS cap


@dataclass(eq=False)
class Node:
    id: int
    parent: int | None
    depth: int
    lower: np.ndarray
    upper: np.ndarray
    cuts: list[Cut] = field(default_factory=list)
    status: NodeStatus = NodeStatus.OPEN
    lp_value: float | None = None
    branch: tuple[int, str, float] | None = None   # (variable, "<=" | ">=", bound)

    def child(self, id_: int, var: int, sense: str, bound: float) -> "Node":
        lo, hi = self.lower.copy(), self.upper.copy()
        if sense == "<=":
            hi[var] = bound
        else:
            lo[var] = bound
        return Node(id_, self.id, self.depth + 1, lo, hi, list(self.cuts),
                    branch=(var, sense, bound))


@dataclass(frozen=True)
class EqCandidate:
    x: np.ndarray
    lam: float
    phi: np.ndarray
    pihat: np.ndarray


@dataclass
class TreeState:
    """Open nodes (LIFO stack), global cuts and the (alpha, beta) target."""

    alpha: np.ndarray
    beta: np.ndarray
    stack: list[Node]
    global_cuts: list[Cut] = field(default_factory=list)
    next_id: int = 1

    def copy(self) -> "TreeState":
        nodes = [copy.copy(n) for n in self.stack]
        for n in nodes:
            n.cuts = list(n.cuts)
        return TreeState(self.alpha.copy(), self.beta.copy(), nodes,
                         list(self.global_cuts), self.next_id)


class Formulation:
    """The alpha-independent part of every node LP."""

    def __init__(self, game: Game, bounds: ProxyBounds | None = None):
        self.game = game
        self.bounds = bounds if bounds is not None else compute_proxy_bounds(game)
        n = game.n_players
        if game.mode is Mode.NEP:
            lin_players = list(range(n))
        else:
            lin_players = [i for i, c in enumerate(game.costs)
                           if c.quadratic and c.structure is Structure.BILINEAR_OWN_RIVAL]
        self.root_players = lin_players
        self.ext: ExtendedGame = linearize_bilinear(game, lin_players)
        self.layout = Layout(game.n_vars, n, self.ext.n_aux)
        lay, dim = self.layout, self.layout.dim

        rows, rhs, eq = [], [], []
        for r in game.constraints:
            a = np.zeros(dim)
            for j, v in r.coeffs.items():
                a[j] += v
            rows.append(a)
            rhs.append(r.rhs)
            eq.append(False)
        for r in self.ext.rows:
            a = np.zeros(dim)
            for j, v in r.coeffs.items():
                a[lay.map(j)] += v
            rows.append(a)
            rhs.append(r.rhs)
            eq.append(r.equality)
        self.root_cuts = root_pihat_cuts(game, lay, self.ext.products, lin_players)
        for c in self.root_cuts:
            rows.append(c.coeffs)
            rhs.append(c.rhs)
            eq.append(False)
        self.A = np.array(rows).reshape(-1, dim)
        self.b = np.array(rhs, dtype=float)
        self.eq = np.array(eq, dtype=bool)

        phi_plus, pi_minus = self.bounds.phi_plus, self.bounds.pihat_minus
        self.big_m = 1.0 + 2.0 * float(np.max(np.abs(phi_plus) + np.abs(pi_minus)))
        lo = np.concatenate([game.lower, [-self.big_m], pi_minus, pi_minus, self.ext.aux_lower])
        hi = np.concatenate([game.upper, [self.big_m], phi_plus, phi_plus, self.ext.aux_upper])
        self.lower, self.upper = lo, hi
        self.integer = np.concatenate([game.is_integer, np.zeros(1 + 2 * n, bool),
                                       self.ext.aux_integer])
        self.c = np.zeros(dim)
        self.c[lay.lam] = 1.0

    def lambda_rows(self, alpha: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lay, n = self.layout, self.game.n_players
        A = np.zeros((n, lay.dim))
        for i in range(n):
            A[i, lay.pihat(i)] = 1.0 / alpha[i]
            A[i, lay.phi(i)] = -1.0
            A[i, lay.lam] = -1.0
        return A, beta / alpha

    def problem(self, node: Node, alpha: np.ndarray, beta: np.ndarray,
                global_cuts: Sequence[Cut] = ()) -> LpProblem:
        La, Lb = self.lambda_rows(alpha, beta)
        cuts = list(global_cuts) + list(node.cuts)
        parts_a = [self.A, La] + [c.coeffs[None, :] for c in cuts]
        parts_b = [self.b, Lb, np.array([c.rhs for c in cuts], dtype=float)]
        eq = np.concatenate([self.eq, np.zeros(len(Lb) + len(cuts), bool)])
        return LpProblem(A=np.vstack(parts_a), b=np.concatenate(parts_b), c=self.c,
                         lower=node.lower, upper=node.upper, equality=eq)

    def root(self) -> Node:
        return Node(0, None, 0, self.lower.copy(), self.upper.copy())

    def lift(self, x: Sequence[float], phi: Sequence[float], pihat: Sequence[float],
             lam: float = 0.0) -> np.ndarray:
        """Lifted point with exact auxiliary values (x integral where required)."""
        return np.concatenate([np.asarray(x, float), [lam], np.asarray(phi, float),
                               np.asarray(pihat, float), self.ext.lift(x)])

    def candidate(self, z: np.ndarray) -> EqCandidate:
        x, lam, phi, pihat = self.layout.split(z)
        return EqCandidate(x.copy(), lam, phi.copy(), pihat.copy())


def _vector(v: float | Sequence[float], n: int, name: str) -> np.ndarray:
    arr = np.full(n, float(v)) if np.isscalar(v) else np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise InvalidApproximation(f"{name} needs {n} entries")
    return arr


def validate_approximation(game: Game, alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    a = _vector(alpha, game.n_players, "alpha")
    b = _vector(beta, game.n_players, "beta")
    if np.any(a < 1):
        raise InvalidApproximation(f"alpha must be >= 1, got {a.tolist()}")
    if np.any(b < 0):
        raise InvalidApproximation(f"beta must be >= 0, got {b.tolist()}")
    return a, b


def build_root(game: Game, alpha, beta, bounds: ProxyBounds | None = None,
               ) -> tuple[Formulation, Node]:
    validate_approximation(game, alpha, beta)
    form = Formulation(game, bounds)
    return form, form.root()


@dataclass(frozen=True)
class NeCheck:
    is_ne: bool
    violators: list[int]
    phi: np.ndarray
    pi: np.ndarray
    responses: list[BestResponse | None]
    diagnostic: str | None = None


BrFunction = Callable[[Game, int, np.ndarray], BestResponse]


def check_ne(game: Game, x: Sequence[float], alpha, beta, tol: float = 1e-8,
             br: BrFunction = best_response) -> NeCheck:
    """pi_i(x) <= alpha_i Phi_i(x_{-i}) + beta_i + tol for every player."""
    a, b = validate_approximation(game, alpha, beta)
    x = np.asarray(x, dtype=float)
    n = game.n_players
    phi, pi = np.full(n, np.nan), np.array([c.value(x) for c in game.costs])
    responses: list[BestResponse | None] = []
    violators, diag = [], None
    for i in range(n):
        try:
            r = br(game, i, x)
        except Infeasible:
            responses.append(None)
            violators.append(i)
            diag = f"player {i} has no feasible strategy against the candidate"
            continue
        responses.append(r)
        phi[i] = r.value
        if pi[i] > a[i] * r.value + b[i] + tol:
            violators.append(i)
    return NeCheck(not violators, violators, phi, pi, responses, diag)


@dataclass
class Stats:
    nodes: int = 0
    lp_solves: int = 0
    br_solves: int = 0
    cuts: dict[str, int] = field(default_factory=lambda: {
        "ic_phi": 0, "ic_pi_conv": 0, "ic_pi_conc": 0, "br": 0})
    max_cut_rounds: int = 0
    weak_cuts: int = 0

    def add(self, other: "Stats") -> None:
        self.nodes += other.nodes
        self.lp_solves += other.lp_solves
        self.br_solves += other.br_solves
        for k, v in other.cuts.items():
            self.cuts[k] += v
        self.max_cut_rounds = max(self.max_cut_rounds, other.max_cut_rounds)
        self.weak_cuts += other.weak_cuts

    @property
    def total_cuts(self) -> int:
        return sum(self.cuts.values())

    def to_dict(self) -> dict[str, Any]:
        return {"nodes": self.nodes, "lp_solves": self.lp_solves,
                "br_solves": self.br_solves, "cuts": dict(self.cuts)}


@dataclass
class SolveResult:
    status: Status
    alpha: np.ndarray
    beta: np.ndarray
    stats: Stats
    tree: TreeState
    witness: np.ndarray | None = None
    message: str | None = None
    negative_phi: bool = False
    wall_time: float = 0.0
    cut_log: list[Cut] = field(default_factory=list)

    @property
    def frontier(self) -> list[Node]:
        return self.tree.stack

    def to_dict(self, timing: bool = True, cuts: bool = False) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "status": self.status.value,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "alpha": [float(v) for v in self.alpha],
            "beta": [float(v) for v in self.beta],
            "stats": self.stats.to_dict(),
            "wall_time_s": round(self.wall_time, 6) if timing else None,
        }
        if self.message:
            doc["message"] = self.message
        if cuts:
            doc["cuts"] = [c.to_dict() for c in self.cut_log]
        return doc


class Observer:
    """Hooks called during a solve; the default does nothing."""

    def node_event(self, event: NodeStatus, node: Node, tree: TreeState) -> None:
        pass

    def cut_added(self, node: Node, cut: Cut, z: np.ndarray, lp: LpSolution) -> None:
        pass


class _LimitHit(Exception):
    def __init__(self, status: Status):
        self.status = status


def _peak_rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


class BranchAndCut:
    """Solver bound to one game; reusable across (alpha, beta) targets."""

    def __init__(self, game: Game, tolerances: Tolerances = Tolerances(),
                 eps: float | None = None, prefer_conv: bool = True,
                 observer: Observer | None = None, formulation: Formulation | None = None):
        self.game = game
        self.tol = tolerances
        self.form = formulation if formulation is not None else Formulation(game)
        if game.integrality_flag:
            self.eps = 1.0
        else:
            self.eps = 1e-6 if eps is None else eps
            if game.mode is Mode.GNEP:
                warnings.warn("integrality_flag is not set: phi intersection cuts use "
                              f"eps={self.eps} and are only heuristically valid", stacklevel=2)
        self.prefer_conv = prefer_conv
        self.observer = observer or Observer()
        self._br_cache: dict[tuple, BestResponse] = {}
        self.stats = Stats()

    # -- best responses -------------------------------------------------------
    def _br(self, game: Game, i: int, x: np.ndarray) -> BestResponse:
        s, e = game.offsets[i], game.offsets[i + 1]
        key = (i, tuple(x[:s]), tuple(x[e:]))
        hit = self._br_cache.get(key)
        if hit is None:
            hit = best_response(game, i, x)
            self.stats.br_solves += 1
            self._br_cache[key] = hit
        return hit

    def check(self, x: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> NeCheck:
        return check_ne(self.game, x, alpha, beta, self.tol.ne, self._br)

    # -- tree -----------------------------------------------------------------
    def initial_tree(self, alpha, beta) -> TreeState:
        a, b = validate_approximation(self.game, alpha, beta)
        return TreeState(a, b, [self.form.root()])

    def solve(self, alpha=1.0, beta=0.0, limits: Limits = Limits(),
              tree: TreeState | None = None) -> SolveResult:
        start = time.perf_counter()
        self.stats = Stats()
        if tree is None:
            tree = self.initial_tree(alpha, beta)
        deadline = None if limits.time_s is None else start + limits.time_s
        guard = limits.cut_rounds
        if guard is None:
            guard = 10 * self.game.n_vars + 100
        log: list[Cut] = []

        def finish(status: Status, witness=None, message=None, neg=False) -> SolveResult:
            return SolveResult(status, tree.alpha, tree.beta, self.stats, tree, witness,
                               message, neg, time.perf_counter() - start, log)

        while tree.stack:
            if limits.nodes is not None and self.stats.nodes >= limits.nodes:
                return finish(Status.NODE_LIMIT)
            if deadline is not None and time.perf_counter() > deadline:
                return finish(Status.TIME_LIMIT)
            if limits.memory_mb is not None and _peak_rss_mb() > limits.memory_mb:
                return finish(Status.MEMORY_LIMIT)
            node = tree.stack.pop()
            self.stats.nodes += 1
            try:
                out = self._process(node, tree, guard, deadline, log)
            except _LimitHit as hit:
                node.status = NodeStatus.OPEN
                tree.stack.append(node)
                return finish(hit.status)
            self.observer.node_event(node.status, node, tree)
            if node.status is NodeStatus.NE_FOUND:
                witness, chk = out
                tree.stack.append(node)     # the equilibrium node stays unexplored
                neg = bool(np.any(chk.phi < 0))
                return finish(Status.NE_FOUND, witness, None, neg)
            if node.status in (NodeStatus.STALLED, NodeStatus.CUT_LIMIT):
                tree.stack.append(node)
                status = Status.STALLED if node.status is NodeStatus.STALLED else Status.CUT_LIMIT
                return finish(status, message=out)
        return finish(Status.NO_NE)

    def _process(self, node: Node, tree: TreeState, guard: int, deadline: float | None,
                 log: list[Cut]):
        form, tol = self.form, self.tol
        node.status = NodeStatus.CUT_LOOP_ACTIVE
        rounds = 0
        while True:
            if deadline is not None and time.perf_counter() > deadline:
                raise _LimitHit(Status.TIME_LIMIT)
            sol = solve_lp(form.problem(node, tree.alpha, tree.beta, tree.global_cuts))
            self.stats.lp_solves += 1
            if sol.status is LpStatus.INFEASIBLE:
                node.status = NodeStatus.PRUNED_INFEASIBLE
                return None
            node.lp_value = sol.objective
            if sol.objective > tol.prune:
                node.status = NodeStatus.PRUNED_POSITIVE
                return None
            z = sol.x
            frac = np.where(form.integer, np.abs(z - np.round(z)), 0.0)
            if frac.max(initial=0.0) > tol.integer:
                j = int(np.argmax(frac))
                up = node.child(tree.next_id, j, ">=", float(np.ceil(z[j])))
                down = node.child(tree.next_id + 1, j, "<=", float(np.floor(z[j])))
                tree.next_id += 2
                tree.stack.append(up)
                tree.stack.append(down)
                node.status = NodeStatus.BRANCHED
                return None
            nv = self.game.n_vars
            x = np.where(self.game.is_integer, np.round(z[:nv]), z[:nv])
            chk = self.check(x, tree.alpha, tree.beta)
            if chk.is_ne:
                node.status = NodeStatus.NE_FOUND
                return x, chk
            rounds += 1
            self.stats.max_cut_rounds = max(self.stats.max_cut_rounds, rounds)
            if rounds > guard:
                node.status = NodeStatus.CUT_LIMIT
                return f"node {node.id}: cut-round guard {guard} exceeded"
            cuts, why = self._separate(node, sol, x, chk)
            if not cuts:
                if sol.objective > tol.positive:
                    # no equilibrium tuple has a positive LP value; the absolute
                    # prune threshold is too coarse once lambda scales like 1/alpha
                    node.status = NodeStatus.PRUNED_POSITIVE
                    return None
                node.status = NodeStatus.STALLED
                return f"node {node.id}: {why}"
            for cut in cuts:
                if cut.scope is Scope.GLOBAL:
                    tree.global_cuts.append(cut)
                else:
                    node.cuts.append(cut)
                self.stats.cuts[cut.provenance.value] += 1
                log.append(cut)
                self.observer.cut_added(node, cut, z, sol)

    def _separate(self, node: Node, sol: LpSolution, x: np.ndarray,
                  chk: NeCheck) -> tuple[list[Cut], str]:
        game, form, z = self.game, self.form, sol.x
        cand = form.candidate(z)
        if chk.diagnostic:
            return [], chk.diagnostic
        try:
            n_phi, n_pi = dispatch_cut_targets(cand.phi, cand.pihat, chk.phi, chk.pi)
        except DichotomyViolation as exc:
            return [], str(exc)
        out: list[Cut] = []
        if game.mode is Mode.NEP:
            for i in n_phi:
                cut = best_response_cut(game, form.layout, i, chk.responses[i].strategy,
                                        form.ext.products)
                out.append(cut.with_violation(z).normalized())
            return self._screen(out), "no best-response cut with sufficient violation"
        for i in n_phi:
            self._ic(out, sol, node, Provenance.IC_PHI, lambda: build_free_set_phi(
                game, form.layout, i, z, chk.responses[i].strategy, self.eps))
        for i in n_pi:
            cost = game.costs[i]
            if i in form.root_players:
                continue
            convex = not cost.quadratic or cost.structure is Structure.CONVEX_IN_ALL
            concave = not cost.quadratic or cost.structure is Structure.CONCAVE_LINEAR_IN_RIVALS
            if convex and (self.prefer_conv or not concave):
                self._ic(out, sol, node, Provenance.IC_PI_CONV,
                         lambda: build_free_set_pi_conv(game, form.layout, i, z))
            elif concave:
                self._ic(out, sol, node, Provenance.IC_PI_CONC,
                         lambda: build_free_set_pi_conc(game, form.layout, i, z))
        return self._screen(out), "no intersection cut with sufficient violation"

    def _screen(self, cuts: list[Cut]) -> list[Cut]:
        """Cuts above the violation threshold; failing those, the weakly
        violated ones, so that a positive LP value can still emerge when
        proxy gaps shrink like 1/alpha."""
        strong = [c for c in cuts if c.violation > self.tol.cut]
        if strong:
            return strong
        weak = [c for c in cuts if c.violation > self.tol.weak_cut]
        self.stats.weak_cuts += len(weak)
        return weak

    def _ic(self, out: list[Cut], sol: LpSolution, node: Node, prov: Provenance,
            make: Callable) -> None:
        try:
            out.append(intersection_cut(sol, make(), prov, node.id))
        except CutError:
            return


def solve(game: Game, alpha=1.0, beta=0.0, limits: Limits = Limits(),
          observer: Observer | None = None, tolerances: Tolerances = Tolerances(),
          eps: float | None = None) -> SolveResult:
    return BranchAndCut(game, tolerances, eps, observer=observer).solve(alpha, beta, limits)
