"""Ground region graphs.

Regions are sets of variables; a region also owns every factor whose scope it
contains. Two constructions are offered:

``closure="intersection"``
    Outer regions are closed under pairwise intersection, repeatedly, and each
    region is linked to its maximal proper subsets.
``closure="subsets"``
    Every non-empty subset of an outer region is a region, and each region is
    linked to the subsets one variable smaller. This is the ground graph that
    the lifted construction compresses.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import OuterRegionsDontCoverFactors
from .model import GroundMrf

CLOSURES = ("intersection", "subsets")


@dataclass(frozen=True)
class Region:
    scope: tuple  # sorted variables
    factors: tuple = ()  # indices into GroundMrf.factors


def maximal_scopes(scopes: Iterable[Iterable]) -> list:
    """Distinct scopes that are not strictly contained in another one."""
    sets = sorted({frozenset(s) for s in scopes}, key=len, reverse=True)
    kept = []
    for s in sets:
        if not any(s < k for k in kept):
            kept.append(s)
    return kept


def default_outer_regions(mrf: GroundMrf) -> list:
    return maximal_scopes(f.scope for f in mrf.factors)


class GroundRegionGraph:
    """Regions, parent -> child edges and the caches used by message passing."""

    def __init__(self, scopes: Sequence[Iterable], edges: Iterable, outer: Iterable[int],
                 mrf: GroundMrf | None = None, closure: str | None = None) -> None:
        self.regions = [Region(tuple(sorted(s))) for s in scopes]
        self.edges = sorted(set((int(p), int(c)) for p, c in edges))
        self.outer = tuple(sorted(outer))
        self.mrf = mrf
        self.closure = closure
        self.index = {frozenset(r.scope): i for i, r in enumerate(self.regions)}
        self.edge_index = {e: k for k, e in enumerate(self.edges)}
        self.parents = [[] for _ in self.regions]
        self.children = [[] for _ in self.regions]
        for p, c in self.edges:
            self.parents[c].append(p)
            self.children[p].append(c)
        if mrf is not None:
            self._attach_factors(mrf)
        self.descendants = [frozenset(self._reach(i)) for i in range(len(self.regions))]
        self.corrections = [self._correction_edges(a) for a in range(len(self.regions))]

    def __len__(self) -> int:
        return len(self.regions)

    def _attach_factors(self, mrf: GroundMrf) -> None:
        by_var = defaultdict(list)
        for i, r in enumerate(self.regions):
            for v in r.scope:
                by_var[v].append(i)
        attached = [[] for _ in self.regions]
        for fi, f in enumerate(mrf.factors):
            scope = set(f.scope)
            if not scope:
                continue
            for ri in by_var.get(next(iter(scope)), ()):
                if scope <= set(self.regions[ri].scope):
                    attached[ri].append(fi)
        self.regions = [Region(r.scope, tuple(a)) for r, a in zip(self.regions, attached)]

    def _reach(self, start: int) -> set:
        seen, stack = set(), list(self.children[start])
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(self.children[n])
        return seen

    def _correction_edges(self, alpha: int) -> list:
        """Edge ids of ``rho -> gamma`` with gamma a descendant of alpha and rho outside alpha's subtree."""
        desc = self.descendants[alpha]
        out = []
        for g in sorted(desc):
            for rho in self.parents[g]:
                if rho != alpha and rho not in desc:
                    out.append(self.edge_index[(rho, g)])
        return out

    def scope(self, i: int) -> tuple:
        return self.regions[i].scope

    def find(self, scope: Iterable) -> int:
        return self.index[frozenset(scope)]

    # -- export -----------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "closure": self.closure,
            "regions": [
                {"id": i, "scope": [str(v) for v in r.scope], "factors": list(r.factors),
                 "outer": i in self.outer}
                for i, r in enumerate(self.regions)
            ],
            "edges": [{"parent": p, "child": c} for p, c in self.edges],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_dot(self, name: str = "region_graph") -> str:
        lines = [f"digraph {name} {{"]
        for i, r in enumerate(self.regions):
            label = ", ".join(str(v) for v in r.scope)
            shape = "box" if i in self.outer else "ellipse"
            lines.append(f'  r{i} [label="{{{label}}}", shape={shape}];')
        for p, c in self.edges:
            lines.append(f"  r{p} -> r{c};")
        lines.append("}")
        return "\n".join(lines)


def _intersection_closure(outer: list) -> set:
    regions = set(outer)
    by_var = defaultdict(set)
    for r in regions:
        for v in r:
            by_var[v].add(r)
    frontier = list(outer)
    while frontier:
        new = set()
        for a in frontier:
            partners = set().union(*(by_var[v] for v in a))
            for b in partners:
                if b == a:
                    continue
                i = a & b
                if i and i not in regions and i not in new:
                    new.add(i)
        for r in new:
            for v in r:
                by_var[v].add(r)
        regions |= new
        frontier = list(new)
    return regions


def _containment_edges(regions: list) -> list:
    """Edges from every region to its maximal proper subsets within ``regions``."""
    by_var = defaultdict(list)
    for i, r in enumerate(regions):
        for v in r:
            by_var[v].append(i)
    edges = []
    for ci, child in enumerate(regions):
        first = next(iter(child))
        supers = [i for i in by_var[first] if i != ci and child < regions[i]]
        supers.sort(key=lambda i: len(regions[i]))
        minimal = []
        for i in supers:
            if not any(regions[m] < regions[i] for m in minimal):
                minimal.append(i)
        edges.extend((p, ci) for p in minimal)
    return edges


def _sort_key(scope: frozenset):
    return (-len(scope), tuple(sorted(scope)))


def build_region_graph(outer: Iterable[Iterable] | None = None, mrf: GroundMrf | None = None,
                       closure: str = "intersection") -> GroundRegionGraph:
    """Build a region graph from outer regions.

    Args:
        outer: Outer-region scopes. Defaults to the maximal factor scopes of ``mrf``.
            Scopes strictly contained in another outer scope are dropped.
        mrf: Optional model; when given, factors are attached to regions and
            must be covered by the outer regions.
        closure: ``"intersection"`` or ``"subsets"`` (see module docstring).
    """
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}")
    if outer is None:
        if mrf is None:
            raise ValueError("need outer regions or a model")
        outer_sets = default_outer_regions(mrf)
    else:
        outer_sets = maximal_scopes(outer)
    outer_sets = [s for s in outer_sets if s]
    if mrf is not None:
        for f in mrf.factors:
            fs = frozenset(f.scope)
            if fs and not any(fs <= o for o in outer_sets):
                raise OuterRegionsDontCoverFactors(f"no outer region contains factor scope {sorted(fs)}")

    if closure == "intersection":
        region_sets = sorted(_intersection_closure(outer_sets), key=_sort_key)
        edges = _containment_edges(region_sets)
    else:
        all_sets = set()
        for o in outer_sets:
            items = sorted(o)
            for k in range(1, len(items) + 1):
                all_sets.update(frozenset(c) for c in itertools.combinations(items, k))
        region_sets = sorted(all_sets, key=_sort_key)
        index = {s: i for i, s in enumerate(region_sets)}
        edges = [(index[s], index[s - {v}]) for s in region_sets if len(s) > 1 for v in s]
    index = {s: i for i, s in enumerate(region_sets)}
    outer_ids = [index[o] for o in outer_sets]
    return GroundRegionGraph(region_sets, edges, outer_ids, mrf=mrf, closure=closure)


def validate_region_graph(g: GroundRegionGraph) -> list:
    """List every violated region-graph condition; empty means valid.

    (0) acyclic; (1) intersections of non-nested regions are regions;
    (2) containment iff descendant; (3) parent-less regions are exactly the
    outer regions, and every factor lies inside some region.
    """
    problems = []
    n = len(g.regions)
    sets = [frozenset(r.scope) for r in g.regions]
    children = [[] for _ in range(n)]
    for p, c in g.edges:
        children[p].append(c)

    state = [0] * n
    for root in range(n):
        if state[root]:
            continue
        stack = [(root, iter(children[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state[nxt] == 1:
                problems.append(f"cycle through regions {node} -> {nxt}")
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(children[nxt])))

    def reach(i):
        seen, stack = set(), list(children[i])
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(children[x])
        return seen

    desc = [reach(i) for i in range(n)]
    present = set(sets)
    for i, j in itertools.combinations(range(n), 2):
        a, b = sets[i], sets[j]
        inter = a & b
        if inter and not (a <= b or b <= a) and inter not in present:
            problems.append(f"condition 1: regions {i} and {j} have no intersection region {sorted(inter)}")
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if (sets[j] < sets[i]) != (j in desc[i]):
                if j in desc[i]:
                    problems.append(f"condition 2: region {j} is a descendant of {i} but not a subset")
                else:
                    problems.append(f"condition 2: region {j} is a subset of {i} but not a descendant")
    has_parent = {c for _, c in g.edges}
    parentless = {i for i in range(n) if i not in has_parent}
    if g.mrf is not None:
        expected = set(default_outer_regions(g.mrf))
    else:
        expected = {sets[i] for i in g.outer}
    got = {sets[i] for i in parentless}
    if got != expected:
        problems.append(
            f"condition 3: parent-less regions {sorted(map(sorted, got - expected))} are not outer, "
            f"outer regions {sorted(map(sorted, expected - got))} have parents or are missing")
    if g.mrf is not None:
        for fi, f in enumerate(g.mrf.factors):
            if f.scope and not any(frozenset(f.scope) <= s for s in sets):
                problems.append(f"condition 3: factor {fi} is not inside any region")
    return problems
