"""Parent-to-child generalized belief propagation on a ground region graph.

Flooding schedule: each iteration computes every belief from the current
message buffer, then every message into a fresh buffer, then swaps. Messages
start uniform. Beliefs and messages are normalized, damping is geometric
(a convex combination of log-messages).

Region scopes are sorted with one global order, so a child's variables appear
in the same relative order inside every ancestor; embedding a child table into
a parent is a reshape and marginalizing a parent onto a child needs no
transpose.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .factor import FactorTable, clamp, log_sum_exp
from .region_graph import GroundRegionGraph

DEFAULT_ITERS = 500
DEFAULT_DAMPING = 0.5
DEFAULT_TOL = 1e-9


def _normalize(log_table: np.ndarray) -> np.ndarray:
    return clamp(log_table - log_sum_exp(log_table))


@dataclass
class GBPResult:
    beliefs: list  # FactorTable per region
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)  # max residual per iteration
    messages: list = field(default_factory=list)


class GroundGBP:
    """Precomputed plan for running GBP on one ground region graph."""

    def __init__(self, graph: GroundRegionGraph, cardinalities: dict | None = None) -> None:
        if cardinalities is None:
            if graph.mrf is None:
                raise ValueError("need cardinalities or a graph built with an mrf")
            cardinalities = graph.mrf.cardinalities
        self.graph = graph
        self.cards = cardinalities
        self.shapes = [tuple(cardinalities[v] for v in r.scope) for r in graph.regions]
        self.base = []
        for r, shape in zip(graph.regions, self.shapes):
            acc = np.zeros(shape)
            for fi in r.factors:
                acc = acc + graph.mrf.factors[fi].aligned(list(r.scope))
            self.base.append(acc)
        self.in_edges = [[] for _ in graph.regions]
        for k, (p, c) in enumerate(graph.edges):
            self.in_edges[c].append(k)
        # for every alpha: (edge id, shape of the child broadcast into alpha)
        self.corr_terms = []
        for a, r in enumerate(graph.regions):
            terms = []
            for k in graph.corrections[a]:
                child = graph.edges[k][1]
                terms.append((k, self._embed_shape(a, child)))
            self.corr_terms.append(terms)
        self.sum_axes = []
        for p, c in graph.edges:
            child = set(graph.regions[c].scope)
            self.sum_axes.append(tuple(i for i, v in enumerate(graph.regions[p].scope) if v not in child))

    def _embed_shape(self, outer: int, inner: int) -> tuple:
        inner_vars = set(self.graph.regions[inner].scope)
        return tuple(self.cards[v] if v in inner_vars else 1 for v in self.graph.regions[outer].scope)

    # -- state ------------------------------------------------------------------

    def initial_messages(self) -> list:
        out = []
        for _, c in self.graph.edges:
            shape = self.shapes[c]
            out.append(np.full(shape, -np.log(np.prod(shape))))
        return out

    def message_table(self, msgs: list, k: int) -> FactorTable:
        return FactorTable(self.graph.regions[self.graph.edges[k][1]].scope, msgs[k])

    # -- updates ----------------------------------------------------------------

    def belief(self, msgs: list, alpha: int) -> np.ndarray:
        acc = self.base[alpha]
        for k in self.in_edges[alpha]:
            acc = acc + msgs[k]
        for k, shape in self.corr_terms[alpha]:
            acc = acc + msgs[k].reshape(shape)
        return _normalize(acc)

    def beliefs(self, msgs: list, pool=None) -> list:
        n = len(self.graph.regions)
        if pool is None:
            return [self.belief(msgs, a) for a in range(n)]
        return list(pool.map(lambda a: self.belief(msgs, a), range(n)))

    def message(self, msgs: list, beliefs: list, k: int, damping: float) -> np.ndarray:
        p, c = self.graph.edges[k]
        axes = self.sum_axes[k]
        marg = log_sum_exp(beliefs[p], axis=axes) if axes else beliefs[p]
        old = msgs[k]
        new = clamp(marg) - clamp(beliefs[c]) + old
        return _normalize((1.0 - damping) * old + damping * new)

    def step(self, msgs: list, damping: float, pool=None):
        """One flooding iteration. Returns ``(new_msgs, beliefs_used, residual)``."""
        beliefs = self.beliefs(msgs, pool)
        ks = range(len(self.graph.edges))
        if pool is None:
            new = [self.message(msgs, beliefs, k, damping) for k in ks]
        else:
            new = list(pool.map(lambda k: self.message(msgs, beliefs, k, damping), ks))
        residual = max((float(np.max(np.abs(a - b))) for a, b in zip(new, msgs)), default=0.0)
        return new, beliefs, residual

    def belief_tables(self, beliefs: list) -> list:
        return [FactorTable(r.scope, b) for r, b in zip(self.graph.regions, beliefs)]


# -- functional surface ------------------------------------------------------------

def compute_belief(engine: GroundGBP, msgs: list, alpha: int) -> FactorTable:
    """Normalized belief of region ``alpha`` from the given message buffer."""
    return FactorTable(engine.graph.regions[alpha].scope, engine.belief(msgs, alpha))


def update_message(engine: GroundGBP, msgs: list, edge: int, damping: float) -> FactorTable:
    """Damped, normalized update of message ``edge`` from the current buffer."""
    p, c = engine.graph.edges[edge]
    beliefs = {p: engine.belief(msgs, p), c: engine.belief(msgs, c)}
    return FactorTable(engine.graph.regions[c].scope, engine.message(msgs, beliefs, edge, damping))


def run_ground_gbp(graph: GroundRegionGraph, iters: int = DEFAULT_ITERS, damping: float = DEFAULT_DAMPING,
                   tol: float = DEFAULT_TOL, callback: Callable | None = None, threads: int = 1,
                   engine: GroundGBP | None = None) -> GBPResult:
    """Run flooding GBP until the largest log-message change drops below ``tol``.

    ``callback(t, engine, msgs)`` is invoked with the buffer after ``t`` updates,
    starting at ``t = 0``.
    """
    engine = engine or GroundGBP(graph)
    msgs = engine.initial_messages()
    trace = []
    converged = False
    t = 0
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        if callback is not None:
            callback(0, engine, msgs)
        while t < iters:
            msgs, _, residual = engine.step(msgs, damping, pool)
            t += 1
            trace.append(residual)
            if callback is not None:
                callback(t, engine, msgs)
            if residual < tol:
                converged = True
                break
        beliefs = engine.beliefs(msgs, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return GBPResult(engine.belief_tables(beliefs), converged, t, trace, msgs)
