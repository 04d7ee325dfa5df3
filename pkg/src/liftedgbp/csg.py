"""Cluster signature graphs.

A cluster of ground atoms is drawn as a directed, edge-colored multigraph over
the domain objects it mentions: a unary atom ``p(i)`` becomes a self-edge on
``i`` colored ``p`` and a binary atom ``r(i, j)`` an edge ``i -> j`` colored
``r``. Two clusters are symmetric when their graphs are isomorphic, so
canonical labeling of the graph yields a representative cluster per symmetry
class.

Nodes are ``(domain, object)`` pairs so that objects of different domains are
never identified. Canonical labels restart at 1 in every domain.

Everything here searches only over permutations of the cluster's own nodes;
clusters are small, so exhaustive search inside color-refined cells is used.
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ArityUnsupported
from .model import GroundAtom


@dataclass(frozen=True)
class Csg:
    nodes: tuple  # sorted (domain, object) pairs
    edges: tuple  # sorted (source, target, color) triples, repeats allowed
    atoms: tuple  # the cluster, sorted
    signature: tuple = ()  # sorted (predicate, argument domains) pairs

    def arg_domains(self) -> dict:
        return dict(self.signature)

    def to_dot(self, name: str = "csg") -> str:
        lines = [f"digraph {name} {{"]
        for d, o in self.nodes:
            label = f"{d}:{o}" if d else str(o)
            lines.append(f'  "{d}:{o}" [label="{label}"];')
        for (sd, so), (td, to), color in self.edges:
            lines.append(f'  "{sd}:{so}" -> "{td}:{to}" [label="{color}", color="{color}"];')
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class CanonicalCluster:
    atoms: tuple  # canonical ground atoms, sorted
    canon_form: str


def _domains_for(atom: GroundAtom, arg_domains: Mapping | None) -> tuple:
    if arg_domains is None:
        return ("",) * len(atom.objects)
    return tuple(arg_domains[atom.predicate])


def build_csg(cluster: Iterable[GroundAtom], arg_domains: Mapping | None = None,
              color_of: Callable[[GroundAtom], str] | None = None) -> Csg:
    """Signature graph of ``cluster``.

    ``arg_domains`` maps predicate -> argument domains (all one domain if
    omitted). ``color_of`` overrides the edge color of individual atoms; the
    default is the predicate name.
    """
    atoms = tuple(sorted(set(cluster)))
    if not atoms:
        raise ValueError("cluster must be non-empty")
    nodes = set()
    edges = []
    for atom in atoms:
        doms = _domains_for(atom, arg_domains)
        color = color_of(atom) if color_of is not None else atom.predicate
        if len(atom.objects) == 1:
            n = (doms[0], atom.objects[0])
            nodes.add(n)
            edges.append((n, n, color))
        elif len(atom.objects) == 2:
            s = (doms[0], atom.objects[0])
            t = (doms[1], atom.objects[1])
            nodes.update((s, t))
            edges.append((s, t, color))
        else:
            raise ArityUnsupported(f"{atom} has arity {len(atom.objects)}")
    signature = tuple(sorted({(a.predicate, _domains_for(a, arg_domains)) for a in atoms}))
    return Csg(tuple(sorted(nodes)), tuple(sorted(edges)), atoms, signature)


# -- color refinement ------------------------------------------------------------

def _refine(nodes: Sequence, edges: Sequence) -> dict:
    """Stable coloring of ``nodes`` (1-WL on the directed colored multigraph).

    Initial color is the node domain. Colors are ranks of sorted signatures, so
    they are invariant under isomorphism and comparable across graphs refined
    together.
    """
    out = defaultdict(list)
    inc = defaultdict(list)
    loops = defaultdict(list)
    for s, t, c in edges:
        if s == t:
            loops[s].append(c)
        else:
            out[s].append((c, t))
            inc[t].append((c, s))
    doms = sorted({n[-1][0] for n in nodes})
    color = {n: doms.index(n[-1][0]) for n in nodes}
    n_colors = len(set(color.values()))
    while True:
        sig = {
            n: (color[n],
                tuple(sorted(loops[n])),
                tuple(sorted((c, color[t]) for c, t in out[n])),
                tuple(sorted((c, color[s]) for c, s in inc[n])))
            for n in nodes
        }
        ranks = {s: i for i, s in enumerate(sorted(set(sig.values())))}
        color = {n: ranks[sig[n]] for n in nodes}
        if len(ranks) == n_colors:
            return color
        n_colors = len(ranks)


def _tagged(g: Csg, tag) -> tuple:
    nodes = [(tag, n) for n in g.nodes]
    edges = [((tag, s), (tag, t), c) for s, t, c in g.edges]
    return nodes, edges


# -- canonical labeling ---------------------------------------------------------------

@lru_cache(maxsize=65536)
def _canonical_order(nodes: tuple, edges: tuple):
    tagged_nodes = [(0, n) for n in nodes]
    tagged_edges = [((0, s), (0, t), c) for s, t, c in edges]
    color = _refine(tagged_nodes, tagged_edges)
    cells = defaultdict(list)
    for n in nodes:
        cells[color[(0, n)]].append(n)
    ordered_cells = [cells[k] for k in sorted(cells)]
    best_code, best_order = None, None
    for combo in itertools.product(*(itertools.permutations(c) for c in ordered_cells)):
        order = [n for part in combo for n in part]
        pos = {n: i for i, n in enumerate(order)}
        code = tuple(sorted((c, pos[s], pos[t]) for s, t, c in edges))
        if best_code is None or code < best_code:
            best_code, best_order = code, order
    return best_code, tuple(best_order)


def canonize(g: Csg):
    """Canonical representative of ``g``'s cluster.

    Returns ``(CanonicalCluster, mapping)`` where ``mapping`` sends each node
    ``(domain, object)`` of ``g`` to its canonical node ``(domain, label)``.
    Isomorphic inputs get identical ``canon_form`` strings.
    """
    code, order = _canonical_order(g.nodes, g.edges)
    counters: Counter = Counter()
    mapping = {}
    for n in order:
        counters[n[0]] += 1
        mapping[n] = (n[0], counters[n[0]])
    atoms = tuple(sorted(relabel_atom(a, mapping, g.arg_domains()) for a in g.atoms))
    return CanonicalCluster(atoms, _encode(order, code, mapping)), mapping


def _encode(order, code, mapping) -> str:
    def name(i):
        d, label = mapping[order[i]]
        return f"{d}.{label}" if d else str(label)

    nodes = ",".join(name(i) for i in range(len(order)))
    edges = ";".join(f"{c}:{name(s)}>{name(t)}" for c, s, t in code)
    return f"{nodes}|{edges}"


def relabel_atom(atom: GroundAtom, mapping: Mapping, arg_domains: Mapping | None) -> GroundAtom:
    """Apply a ``(domain, object) -> (domain, object)`` node map to an atom."""
    doms = _domains_for(atom, arg_domains)
    return GroundAtom(atom.predicate, tuple(mapping[(d, o)][1] for d, o in zip(doms, atom.objects)))


def canonical_cluster(cluster: Iterable[GroundAtom], arg_domains: Mapping | None = None):
    """Shortcut: ``canonize(build_csg(cluster))``."""
    return canonize(build_csg(cluster, arg_domains))


# -- isomorphism search ------------------------------------------------------------

def _edge_bag(g: Csg) -> dict:
    bag: dict = defaultdict(Counter)
    for s, t, c in g.edges:
        bag[(s, t)][c] += 1
    return bag


def _search(g1: Csg, g2: Csg, fixed: Mapping | None = None, first_only: bool = False) -> list:
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return []
    if Counter(c for *_, c in g1.edges) != Counter(c for *_, c in g2.edges):
        return []
    n1, e1 = _tagged(g1, 0)
    n2, e2 = _tagged(g2, 1)
    color = _refine(n1 + n2, e1 + e2)
    c1 = {n: color[(0, n)] for n in g1.nodes}
    c2 = {n: color[(1, n)] for n in g2.nodes}
    if sorted(c1.values()) != sorted(c2.values()):
        return []
    bag1, bag2 = _edge_bag(g1), _edge_bag(g2)
    empty: Counter = Counter()
    fixed = dict(fixed or {})
    for u, v in fixed.items():
        if u not in c1 or v not in c2 or c1[u] != c2[v]:
            return []
    # fixed nodes first, then smallest cells first
    cell_size = Counter(c1.values())
    order = sorted(g1.nodes, key=lambda n: (n not in fixed, cell_size[c1[n]], c1[n], n))
    candidates = {n: ([fixed[n]] if n in fixed else [m for m in g2.nodes if c2[m] == c1[n]]) for n in order}
    results = []
    assign: dict = {}
    used: set = set()

    def consistent(u, v) -> bool:
        if bag1.get((u, u), empty) != bag2.get((v, v), empty):
            return False
        for a, b in assign.items():
            if bag1.get((u, a), empty) != bag2.get((v, b), empty):
                return False
            if bag1.get((a, u), empty) != bag2.get((b, v), empty):
                return False
        return True

    def extend(i) -> bool:
        if i == len(order):
            results.append(dict(assign))
            return first_only
        u = order[i]
        for v in candidates[u]:
            if v in used or not consistent(u, v):
                continue
            assign[u] = v
            used.add(v)
            if extend(i + 1):
                return True
            del assign[u]
            used.discard(v)
        return False

    extend(0)
    return results


def enumerate_isomorphisms(g1: Csg, g2: Csg) -> list:
    """Every color-preserving node bijection ``g1 -> g2`` (empty if none)."""
    return sorted(_search(g1, g2), key=lambda m: sorted(m.items()))


def automorphisms(g: Csg) -> list:
    return enumerate_isomorphisms(g, g)


def extends_to_automorphism(g: Csg, partial: Mapping) -> bool:
    """True iff some automorphism of ``g`` agrees with ``partial`` where it is defined."""
    return bool(_search(g, g, fixed=partial, first_only=True))


def is_isomorphic(g1: Csg, g2: Csg) -> bool:
    return bool(_search(g1, g2, first_only=True))


def atom_map_from_nodes(atoms: Iterable[GroundAtom], node_map: Mapping, arg_domains: Mapping | None) -> dict:
    """Translate a node bijection into the induced atom map on ``atoms``."""
    return {a: relabel_atom(a, node_map, arg_domains) for a in atoms}
