"""Preconditioned primal-dual splitting with automatic diagonal stepsizes.

Solves ``min sum_i g_i(y_i) + sum_j h_j(z_j)  s.t.  z_j = sum_i G_ji y_i``
given prox oracles for every g_i and h_j and matrix-free operators for the
nonzero G_ji blocks. Stepsizes follow the operator-norm rule: each primal
slot gets the reciprocal of the summed squared-norm bounds of its incident
edges, each dual slot gets 1 over the number of primal slots. Dual proxes
are always routed through the Moreau identity, so callers supply the prox
of h_j itself, never of its conjugate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linops import LinearOperator, NegatedOperator

ProxFn = Callable[[np.ndarray, float], np.ndarray]


class SolverError(RuntimeError):
    pass


class SolverDivergence(SolverError):
    """Relative change exploded; the instance is likely ill-posed."""


@dataclass
class PrimalSlot:
    """One primal variable: its dimension and the prox of its g term.

    ``prox=None`` means g = 0 (identity prox).
    """

    dim: int
    prox: ProxFn | None = None
    name: str = ""


@dataclass
class DualSlot:
    """One dual variable: its dimension and the prox of its h term."""

    dim: int
    prox: ProxFn
    name: str = ""


@dataclass
class Edge:
    """Nonzero coupling block: z[dual] accumulates op(y[primal])."""

    dual: int
    primal: int
    op: LinearOperator


class ProblemGraph:
    """Primal/dual slots plus the sparse table of coupling operators."""

    def __init__(self, primal: Sequence[PrimalSlot], dual: Sequence[DualSlot],
                 edges: Sequence[Edge]):
        if not primal or not dual:
            raise ValueError("need at least one primal and one dual slot")
        self.primal = list(primal)
        self.dual = list(dual)
        self.edges = list(edges)
        for e in self.edges:
            if not 0 <= e.primal < len(self.primal):
                raise ValueError(f"edge references unknown primal slot {e.primal}")
            if not 0 <= e.dual < len(self.dual):
                raise ValueError(f"edge references unknown dual slot {e.dual}")
            if e.op.in_dim != self.primal[e.primal].dim:
                raise ValueError(
                    f"edge ({e.dual},{e.primal}): operator in_dim {e.op.in_dim} "
                    f"!= primal dim {self.primal[e.primal].dim}"
                )
            if e.op.out_dim != self.dual[e.dual].dim:
                raise ValueError(
                    f"edge ({e.dual},{e.primal}): operator out_dim {e.op.out_dim} "
                    f"!= dual dim {self.dual[e.dual].dim}"
                )
        self._by_primal = [[] for _ in self.primal]
        self._by_dual = [[] for _ in self.dual]
        for e in self.edges:
            self._by_primal[e.primal].append(e)
            self._by_dual[e.dual].append(e)


@dataclass(frozen=True)
class Stepsizes:
    gamma1: np.ndarray
    gamma2: np.ndarray


def compute_stepsizes(graph: ProblemGraph) -> Stepsizes:
    """gamma1_i = 1 / sum of incident squared-norm bounds; gamma2_j = 1/N."""
    sums = np.zeros(len(graph.primal))
    for e in graph.edges:
        sums[e.primal] += e.op.norm_sq_bound
    if np.any(sums <= 0.0):
        i = int(np.nonzero(sums <= 0.0)[0][0])
        raise ValueError(f"primal slot {i} has no incident edges; stepsize undefined")
    gamma1 = 1.0 / sums
    gamma2 = np.full(len(graph.dual), 1.0 / len(graph.primal))
    return Stepsizes(gamma1=gamma1, gamma2=gamma2)


@dataclass
class SolverState:
    ys: list[np.ndarray]
    zs: list[np.ndarray]
    n: int = 0
    rel_change: float = np.inf
    converged: bool = False
    trace: "Trace | None" = None


@dataclass
class StoppingRule:
    """Relative primal change threshold plus an iteration cap."""

    tol: float = 1e-5
    max_iters: int = 20000


@dataclass
class Trace:
    """Per-iteration scalar diagnostics."""

    iters: list[int] = field(default_factory=list)
    rel_change: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    residuals: list[list[float]] = field(default_factory=list)

    def write_csv(self, path) -> None:
        n_res = len(self.residuals[0]) if self.residuals else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "rel_change", "objective"]
                       + [f"residual_{j + 1}" for j in range(n_res)])
            for row_i, it in enumerate(self.iters):
                obj = self.objective[row_i] if self.objective else ""
                res = self.residuals[row_i] if self.residuals else []
                w.writerow([it, repr(self.rel_change[row_i]),
                            repr(obj) if obj != "" else ""]
                           + [repr(v) for v in res])


def _unwrap(op: LinearOperator) -> tuple[LinearOperator, float]:
    sign = 1.0
    while isinstance(op, NegatedOperator):
        sign = -sign
        op = op.op
    return op, sign


class _AppCache:
    """Memo for operator applications within one sweep.

    Several edges can carry the same operator (possibly negated) against the
    same operand; the base application is computed once. Cached arrays are
    shared, so callers must not mutate them.
    """

    def __init__(self):
        self._store = {}

    def apply(self, op: LinearOperator, operand_key, vec: np.ndarray,
              adjoint: bool) -> tuple[np.ndarray, bool]:
        base, sign = _unwrap(op)
        key = (id(base), adjoint, operand_key)
        res = self._store.get(key)
        if res is None:
            res = base.adjoint(vec) if adjoint else base.forward(vec)
            self._store[key] = res
        if sign < 0:
            return -res, True  # negation allocates, safe to mutate
        return res, False


def _sweep(graph: ProblemGraph, ys: list[np.ndarray], zs: list[np.ndarray],
           steps: Stepsizes) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """One full update; returns new iterates and per-slot primal change norms.

    All primal slots update from the old duals, then all dual slots update
    from the reflected primals (2*new - old)."""
    g1, g2 = steps.gamma1, steps.gamma2
    cache = _AppCache()
    new_ys = []
    for i, slot in enumerate(graph.primal):
        grad = None
        for e in graph._by_primal[i]:
            term, fresh = cache.apply(e.op, e.dual, zs[e.dual], adjoint=True)
            if grad is None:
                grad = term if fresh else term.copy()
            else:
                grad += term
        if grad is None:
            grad = np.zeros(slot.dim)
        # ybar = y - gamma1 * grad, built in place on the accumulator
        grad *= -g1[i]
        grad += ys[i]
        new_ys.append(slot.prox(grad, g1[i]) if slot.prox is not None else grad)
    reflected = [2.0 * new_ys[i] - ys[i] for i in range(len(ys))]
    new_zs = []
    for j, slot in enumerate(graph.dual):
        acc = None
        for e in graph._by_dual[j]:
            term, fresh = cache.apply(e.op, e.primal, reflected[e.primal],
                                      adjoint=False)
            if acc is None:
                acc = term if fresh else term.copy()
            else:
                acc += term
        if acc is None:
            acc = np.zeros(slot.dim)
        # zbar = z + gamma2 * acc; then the conjugate prox via Moreau
        acc *= g2[j]
        acc += zs[j]
        prox_val = slot.prox(acc / g2[j], 1.0 / g2[j])
        prox_val *= -g2[j]
        prox_val += acc
        new_zs.append(prox_val)
    change = np.array([np.linalg.norm(new_ys[i] - ys[i]) for i in range(len(ys))])
    return new_ys, new_zs, change


def iterate(graph: ProblemGraph, state: SolverState, steps: Stepsizes) -> SolverState:
    """Apply one solver sweep to ``state`` and return the successor state."""
    new_ys, new_zs, change = _sweep(graph, state.ys, state.zs, steps)
    rel, _ = _relative_change(state.ys, change, graph)
    return SolverState(ys=new_ys, zs=new_zs, n=state.n + 1, rel_change=rel,
                       converged=state.converged, trace=state.trace)


def _relative_change(old_ys, change, graph) -> tuple[float, float]:
    """Per-slot relative change for the stop test, plus a scale-floored
    variant for divergence detection.

    The stop test divides by max(norm, 1e-12), which legitimately spikes
    when a zero-initialized slot first moves; the divergence signal floors
    the denominator at 1 so only genuine blowups trip it.
    """
    rel = 0.0
    rel_div = 0.0
    for i in range(len(old_ys)):
        norm = float(np.linalg.norm(old_ys[i]))
        r = change[i] / max(norm, 1e-12)
        if not np.isfinite(r):
            name = graph.primal[i].name or f"primal[{i}]"
            raise SolverError(f"non-finite iterate in slot {name}")
        rel = max(rel, float(r))
        rel_div = max(rel_div, float(change[i] / max(norm, 1.0)))
    return rel, rel_div


def run(graph: ProblemGraph,
        init_ys: Sequence[np.ndarray],
        init_zs: Sequence[np.ndarray] | None = None,
        stop: StoppingRule | None = None,
        objective: Callable[[list[np.ndarray]], float] | None = None,
        residuals: Callable[[list[np.ndarray]], Sequence[float]] | None = None,
        trace_every: int = 1) -> SolverState:
    """Iterate until the relative primal change drops below ``stop.tol`` or
    the iteration cap is reached.

    ``objective`` and ``residuals`` are optional caller-registered
    diagnostics recorded in the trace every ``trace_every`` iterations
    (relative change is recorded at the same cadence). The iterate sequence
    is deterministic for identical inputs.
    """
    stop = stop or StoppingRule()
    ys = [np.asarray(y, dtype=np.float64).copy() for y in init_ys]
    if init_zs is None:
        zs = [np.zeros(slot.dim) for slot in graph.dual]
    else:
        zs = [np.asarray(z, dtype=np.float64).copy() for z in init_zs]
    if len(ys) != len(graph.primal) or len(zs) != len(graph.dual):
        raise ValueError("initialization does not match the slot counts")
    for i, y in enumerate(ys):
        if y.size != graph.primal[i].dim:
            raise ValueError(f"init for primal slot {i}: size {y.size} != {graph.primal[i].dim}")

    trace = Trace()
    state = SolverState(ys=ys, zs=zs, n=0, rel_change=np.inf, trace=trace)
    for _ in range(stop.max_iters):
        new_ys, new_zs, change = _sweep(graph, state.ys, state.zs, steps=_steps(graph))
        rel, rel_div = _relative_change(state.ys, change, graph)
        if rel_div > 1e6:
            raise SolverDivergence(
                f"relative change {rel_div:.3e} at iteration {state.n + 1}"
            )
        # NaN/Inf persists once introduced, so a strided scan still aborts.
        if state.n % 25 == 0 or state.n + 1 >= stop.max_iters:
            for j, z in enumerate(new_zs):
                if not np.all(np.isfinite(z)):
                    name = graph.dual[j].name or f"dual[{j}]"
                    raise SolverError(f"non-finite iterate in slot {name}")
        state.ys = new_ys
        state.zs = new_zs
        state.n += 1
        state.rel_change = rel
        # From a cold start the first sweep charges only the duals, leaving
        # the primals untouched; the change test is meaningful from sweep 2.
        settled = rel < stop.tol and state.n >= 2
        if state.n % trace_every == 0 or settled or state.n == stop.max_iters:
            trace.iters.append(state.n)
            trace.rel_change.append(rel)
            if objective is not None:
                trace.objective.append(float(objective(state.ys)))
            if residuals is not None:
                trace.residuals.append([float(v) for v in residuals(state.ys)])
        if settled:
            state.converged = True
            break
    return state


def _steps(graph: ProblemGraph) -> Stepsizes:
    cached = getattr(graph, "_steps_cache", None)
    if cached is None:
        cached = compute_stepsizes(graph)
        graph._steps_cache = cached
    return cached
