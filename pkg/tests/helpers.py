"""Brute-force oracles shared by the test modules.

Everything here works on the ground region graph directly; the lifted
structures are consulted only to name the class a ground object falls in.
"""

from __future__ import annotations

import itertools

import numpy as np

from liftedgbp import build_lifted_region_graph, build_region_graph, ground, load_benchmark, shatter
from liftedgbp.factor import FactorTable
from liftedgbp.model import GroundAtom

BENCHMARKS = ("friends_smokers", "transitive", "friends_knows", "chain", "pq", "pp")


def model_at(name: str, n: int):
    return shatter(load_benchmark(name)).with_domain_size(n)


def ground_graph(name: str, n: int, closure: str = "subsets"):
    return build_region_graph(mrf=ground(model_at(name, n)), closure=closure)


def lifted_graph(name: str):
    return build_lifted_region_graph(shatter(load_benchmark(name)))


def min_size(lifted) -> int:
    return max(lifted.max_objects().values())


def edge_matches(lifted, k: int, rho, child_map: dict) -> bool:
    """Does ground edge ``rho -> child`` play the role of lifted edge ``k``?

    ``child_map`` sends the canonical child atoms onto the ground child. The
    edge matches when some isomorphism from the canonical parent onto ``rho``
    agrees with ``sigma`` followed by ``child_map``.
    """
    e = lifted.edges[k]
    want = {a: child_map[c] for a, c in e.sigma}
    for tau in lifted.isomorphisms_to(e.parent, rho):
        if all(tau[a] == b for a, b in want.items()):
            return True
    return False


def ground_parent_classes(lifted, graph, child_scope, child_map: dict) -> dict:
    """Map each ground parent of ``child_scope`` to the lifted edges it matches."""
    cid, _ = lifted.lookup(child_scope)
    child = graph.find(child_scope)
    out = {}
    for p in graph.parents[child]:
        rho = graph.regions[p].scope
        pid, _ = lifted.lookup(rho)
        out[p] = [k for k in lifted.in_edges[cid]
                  if lifted.edges[k].parent == pid and edge_matches(lifted, k, rho, child_map)]
    return out


def identity_map(atoms) -> dict:
    return {a: a for a in atoms}


def permute_atom(atom: GroundAtom, perm: dict, arg_domains) -> GroundAtom:
    doms = arg_domains[atom.predicate]
    return GroundAtom(atom.predicate, tuple(perm.get(d, {}).get(o, o) for d, o in zip(doms, atom.objects)))


def transpositions(sizes: dict):
    """Every swap of two objects inside one domain, as ``{domain: {obj: obj}}``."""
    for dom, n in sorted(sizes.items()):
        for i, j in itertools.combinations(range(1, n + 1), 2):
            yield {dom: {i: j, j: i}}


def relabeled(table: np.ndarray, scope, perm, arg_domains, target_scope) -> np.ndarray:
    """Express a table over ``scope`` as one over ``target_scope`` via the object permutation."""
    ft = FactorTable(scope, table).rename({a: permute_atom(a, perm, arg_domains) for a in scope})
    return ft.reorder(target_scope).table


def symmetry_violation(model, graph, iters: int, damping: float = 0.5) -> float:
    """Largest gap between ``m[u->v]`` and ``m[pi(u)->pi(v)]`` over object swaps and iterations."""
    from liftedgbp.ground_gbp import GroundGBP, run_ground_gbp

    doms = model.arg_domains()
    plans = []
    for perm in transpositions(model.domain_sizes()):
        plan = []
        for k, (p, c) in enumerate(graph.edges):
            src = graph.scope(c)
            moved = [permute_atom(a, perm, doms) for a in src]
            k2 = graph.edge_index[(graph.find(permute_atom(a, perm, doms) for a in graph.scope(p)),
                                   graph.find(moved))]
            target = graph.scope(graph.edges[k2][1])
            axes = [moved.index(t) for t in target]  # swaps are involutions
            plan.append((k2, tuple(axes)))
        plans.append(plan)
    worst = [0.0]

    def check(t, engine, msgs):
        for plan in plans:
            for k, (k2, axes) in enumerate(plan):
                worst[0] = max(worst[0], float(np.max(np.abs(msgs[k].transpose(axes) - msgs[k2]))))

    run_ground_gbp(graph, iters=iters, damping=damping, tol=0.0, callback=check, engine=GroundGBP(graph))
    return worst[0]


def acyclic_mrf(seed: int = 0):
    """Pairwise tree over seven binary variables plus unary fields."""
    from liftedgbp.model import GroundMrf

    rng = np.random.default_rng(seed)
    tree = [("x1", "x2"), ("x2", "x3"), ("x2", "x4"), ("x4", "x5"), ("x1", "x6"), ("x6", "x7")]
    factors = [FactorTable.from_log(list(e), [2, 2], rng.normal(size=4)) for e in tree]
    factors += [FactorTable.from_log([v], [2], rng.normal(size=2)) for v in ("x1", "x3", "x5", "x7")]
    return GroundMrf.from_factors(factors)
