"""Message passing on a lifted region graph.

One message lives on every lifted edge, over the child's canonical atoms. The
belief of a canonical region multiplies its factors, each incoming message
raised to the edge's cardinality, and, for every proper subset ``gamma`` of the
region, the messages into ``gamma``'s class raised to ``kappa`` minus the
number of parents of ``gamma`` that lie inside the region, relabeled onto
``gamma``. The schedule, damping and normalization match
:mod:`liftedgbp.ground_gbp` step for step, so beliefs agree with ground GBP at
every iteration.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .csg import build_csg, canonize
from .errors import NegativeExponent, NoContainingRegion
from .factor import LOG_FLOOR, FactorTable, clamp, log_sum_exp
from .ground_gbp import DEFAULT_DAMPING, DEFAULT_ITERS, DEFAULT_TOL
from .lifted_graph import LiftedRegionGraph, kappa
from .local_graph import _first, local_par_counts
from .model import GroundAtom

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    n: object  # int or {domain: size}
    iterations: int = DEFAULT_ITERS
    damping: float = DEFAULT_DAMPING
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class LiftedResult:
    beliefs: list  # FactorTable per canonical region
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    op_counts: list = field(default_factory=list)  # table operations per iteration


class LiftedGBP:
    def __init__(self, lifted: LiftedRegionGraph, n, choose_mu=_first) -> None:
        self.lifted = lifted
        self.n = n
        self.op_count = 0
        self._warned = False
        need = lifted.max_objects()
        for dom, k in need.items():
            size = n[dom] if isinstance(n, dict) else n
            if size < k:
                from .errors import DomainTooSmall
                raise DomainTooSmall(f"domain {dom or 'default'} of size {size} < {k}")
        self.kappas = [kappa(e, n) for e in lifted.edges]
        self.local_tables = [local_par_counts(a, lifted) if choose_mu is _first else
                             _local_with(a, lifted, choose_mu) for a in range(len(lifted.regions))]
        self.shapes = [tuple(lifted.ranges[a.predicate] for a in r.atoms) for r in lifted.regions]
        self.terms = [self._belief_terms(a) for a in range(len(lifted.regions))]
        self.edge_plans = [self._edge_plan(e) for e in lifted.edges]

    def _belief_terms(self, alpha: int) -> list:
        lifted = self.lifted
        atoms = lifted.regions[alpha].atoms
        shape = self.shapes[alpha]
        terms = [(k, self.kappas[k], None, None) for k in lifted.in_edges[alpha]]
        table = self.local_tables[alpha]
        local = table.local
        for node in range(1, len(local.nodes)):
            cls = local.node_class[node]
            mu = local.mu[node]
            canon = lifted.regions[cls].atoms
            pos = [atoms.index(mu[c]) for c in canon]
            perm = tuple(int(i) for i in np.argsort(pos))
            embed = tuple(shape[i] if i in pos else 1 for i in range(len(atoms)))
            for k in lifted.in_edges[cls]:
                exponent = self.kappas[k] - table.counts.get((node, k), 0)
                if exponent < 0:
                    raise NegativeExponent(
                        f"region {alpha}, subset {[str(a) for a in local.nodes[node]]}, edge {k}: {exponent}")
                terms.append((k, exponent, perm, embed))
        return terms

    def _edge_plan(self, e) -> tuple:
        atoms = self.lifted.regions[e.parent].atoms
        subset = set(e.subset)
        axes = tuple(i for i, a in enumerate(atoms) if a not in subset)
        kept = [a for a in atoms if a in subset]
        perm = tuple(kept.index(a) for a in e.subset)
        return axes, perm

    # -- state ------------------------------------------------------------------

    def initial_messages(self) -> list:
        out = []
        for e in self.lifted.edges:
            shape = self.shapes[e.child]
            out.append(np.full(shape, -np.log(np.prod(shape))))
        return out

    def belief(self, msgs: list, alpha: int) -> np.ndarray:
        acc = self.lifted.regions[alpha].factors.table
        for k, exponent, perm, embed in self.terms[alpha]:
            m = msgs[k]
            if perm is not None:
                m = m.transpose(perm).reshape(embed)
            acc = acc + exponent * m
            self.op_count += 1
        out = acc - log_sum_exp(acc)
        self.op_count += 1
        if not self._warned and np.any(out < LOG_FLOOR):
            log.warning("lifted belief of region %d underflows the log floor; clamping", alpha)
            self._warned = True
        return clamp(out)

    def beliefs(self, msgs: list, pool=None) -> list:
        n = len(self.lifted.regions)
        if pool is None:
            return [self.belief(msgs, a) for a in range(n)]
        return list(pool.map(lambda a: self.belief(msgs, a), range(n)))

    def message(self, msgs: list, beliefs: list, k: int, damping: float) -> np.ndarray:
        e = self.lifted.edges[k]
        axes, perm = self.edge_plans[k]
        marg = log_sum_exp(beliefs[e.parent], axis=axes) if axes else beliefs[e.parent]
        marg = np.transpose(marg, perm)
        old = msgs[k]
        new = clamp(marg) - clamp(beliefs[e.child]) + old
        mixed = (1.0 - damping) * old + damping * new
        self.op_count += 4
        return clamp(mixed - log_sum_exp(mixed))

    def step(self, msgs: list, damping: float, pool=None):
        beliefs = self.beliefs(msgs, pool)
        ks = range(len(self.lifted.edges))
        if pool is None:
            new = [self.message(msgs, beliefs, k, damping) for k in ks]
        else:
            new = list(pool.map(lambda k: self.message(msgs, beliefs, k, damping), ks))
        residual = max((float(np.max(np.abs(a - b))) for a, b in zip(new, msgs)), default=0.0)
        return new, beliefs, residual

    def belief_tables(self, beliefs: list) -> list:
        return [FactorTable(r.atoms, b) for r, b in zip(self.lifted.regions, beliefs)]


def _local_with(alpha, lifted, choose_mu):
    from .local_graph import build_local_graph
    return local_par_counts(alpha, lifted, build_local_graph(alpha, lifted, choose_mu))


# -- functional surface --------------------------------------------------------------

def lifted_belief(engine: LiftedGBP, msgs: list, alpha: int) -> FactorTable:
    return FactorTable(engine.lifted.regions[alpha].atoms, engine.belief(msgs, alpha))


def lifted_message_update(engine: LiftedGBP, msgs: list, edge: int, damping: float) -> FactorTable:
    e = engine.lifted.edges[edge]
    beliefs = {e.parent: engine.belief(msgs, e.parent), e.child: engine.belief(msgs, e.child)}
    return FactorTable(engine.lifted.regions[e.child].atoms, engine.message(msgs, beliefs, edge, damping))


def run_lifted_gbp(lifted: LiftedRegionGraph, cfg: RunConfig, callback: Callable | None = None,
                   threads: int = 1, engine: LiftedGBP | None = None) -> LiftedResult:
    """Flooding lifted GBP; ``callback(t, engine, msgs)`` sees the buffer after ``t`` updates."""
    engine = engine or LiftedGBP(lifted, cfg.n)
    msgs = engine.initial_messages()
    trace, ops = [], []
    converged = False
    t = 0
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        if callback is not None:
            callback(0, engine, msgs)
        while t < cfg.iterations:
            before = engine.op_count
            msgs, _, residual = engine.step(msgs, cfg.damping, pool)
            ops.append(engine.op_count - before)
            t += 1
            trace.append(residual)
            if callback is not None:
                callback(t, engine, msgs)
            if residual < cfg.tolerance:
                converged = True
                break
        beliefs = engine.beliefs(msgs, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return LiftedResult(engine.belief_tables(beliefs), converged, t, trace, msgs, ops)


def representative_atom(arg_domains: dict, predicate: str) -> GroundAtom:
    """A ground atom of ``predicate`` over the smallest canonical labels."""
    doms = arg_domains[predicate]
    counters: dict = {}
    objs = []
    for d in doms:
        counters[d] = counters.get(d, 0) + 1
        objs.append(counters[d])
    return GroundAtom(predicate, tuple(objs))


def query_marginal(beliefs: list, lifted: LiftedRegionGraph, query) -> FactorTable:
    """Marginal of one ground atom (or of any atom of a predicate, by symmetry).

    The result's scope is the queried atom (the representative atom when a
    predicate name is given).
    """
    if isinstance(query, str) and query not in lifted.arg_domains:
        raise NoContainingRegion(f"unknown predicate {query!r}")
    atom = representative_atom(lifted.arg_domains, query) if isinstance(query, str) else query
    try:
        cc, _ = canonize(build_csg([atom], lifted.arg_domains))
    except KeyError:
        raise NoContainingRegion(f"unknown predicate {atom.predicate!r}") from None
    target = cc.canon_form
    for rid, region in enumerate(lifted.regions):
        for a in region.atoms:
            form, _ = canonize(build_csg([a], lifted.arg_domains))
            if form.canon_form == target:
                return beliefs[rid].marginalize_sum([a]).rename({a: atom})
    raise NoContainingRegion(f"no lifted region contains an atom like {atom}")
